//! The Jura heavy-metal table: 2-D sample locations with metal
//! concentrations, adapted so that locations are inputs and selected metals
//! are outputs.
//!
//! Text format: one header row, then one sample per row. Columns may be
//! separated by commas, semicolons or whitespace. Coordinates are read from
//! `Xloc`/`Yloc` (or `x`/`y`); metal columns are recognised by name. An
//! optional `set` column marks each row as `prediction` (pool) or
//! `validation`. Lines starting with `#` are ignored.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{AosError, Result};
use crate::rng;

pub const METALS: [&str; 7] = ["Cd", "Co", "Cr", "Cu", "Ni", "Pb", "Zn"];
pub const DEFAULT_METALS: [&str; 3] = ["Ni", "Cd", "Zn"];
/// Smallest admissible pool.
pub const MIN_POOL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    Pool,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JuraTable {
    /// Locations as read (km).
    pub raw_locations: Vec<[f64; 2]>,
    /// Locations min-max scaled to `[0, 1]²` per axis.
    pub locations: Vec<Vec<f64>>,
    pub metals: Vec<String>,
    /// `concentrations[row][metal]`, in the order of `metals`.
    pub concentrations: Vec<Vec<f64>>,
    pub partition: Option<Vec<Partition>>,
}

fn split_fields(line: &str, delimiter: Option<char>) -> Vec<&str> {
    match delimiter {
        Some(d) => line.split(d).map(str::trim).collect(),
        None => line.split_whitespace().collect(),
    }
}

fn parse_partition(value: &str) -> Option<Partition> {
    match value.trim().to_ascii_lowercase().as_str() {
        "prediction" | "pred" | "pool" | "train" | "training" => Some(Partition::Pool),
        "validation" | "val" | "test" => Some(Partition::Validation),
        _ => None,
    }
}

impl JuraTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| AosError::input("table is empty"))?;
        let delimiter = [',', ';', '\t'].into_iter().find(|d| header.contains(*d));
        let names: Vec<String> = split_fields(header, delimiter)
            .into_iter()
            .map(|s| s.trim_matches('"').to_string())
            .collect();
        let find = |candidates: &[&str]| {
            names
                .iter()
                .position(|n| candidates.iter().any(|c| n.eq_ignore_ascii_case(c)))
        };
        let missing = |col: &str| AosError::Ingest {
            row: 1,
            column: col.to_string(),
            message: "required column is missing from the header".to_string(),
        };
        let x_col = find(&["Xloc", "x"]).ok_or_else(|| missing("Xloc"))?;
        let y_col = find(&["Yloc", "y"]).ok_or_else(|| missing("Yloc"))?;
        let set_col = find(&["set", "split", "partition"]);
        let metal_cols: Vec<(usize, String)> = METALS
            .iter()
            .filter_map(|m| find(&[m]).map(|c| (c, m.to_string())))
            .collect();
        if metal_cols.is_empty() {
            return Err(missing("metal concentration"));
        }

        let mut raw_locations = Vec::new();
        let mut concentrations = Vec::new();
        let mut partition = Vec::new();
        for (line_no, line) in lines {
            let fields = split_fields(line, delimiter);
            let cell = |col: usize| -> Result<&str> {
                fields.get(col).copied().ok_or_else(|| AosError::Ingest {
                    row: line_no,
                    column: names[col].clone(),
                    message: "row has too few fields".to_string(),
                })
            };
            let number = |col: usize| -> Result<f64> {
                let text = cell(col)?.trim_matches('"');
                text.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| AosError::Ingest {
                        row: line_no,
                        column: names[col].clone(),
                        message: alloc::format!("'{text}' is not a finite number"),
                    })
            };
            raw_locations.push([number(x_col)?, number(y_col)?]);
            concentrations.push(metal_cols.iter().map(|(c, _)| number(*c)).collect::<Result<Vec<_>>>()?);
            if let Some(c) = set_col {
                let v = cell(c)?;
                partition.push(parse_partition(v).ok_or_else(|| AosError::Ingest {
                    row: line_no,
                    column: names[c].clone(),
                    message: alloc::format!("'{v}' is neither a prediction nor a validation marker"),
                })?);
            }
        }
        if raw_locations.len() < 2 {
            return Err(AosError::input("table needs at least two samples"));
        }
        let locations = normalize_locations(&raw_locations)?;
        Ok(JuraTable {
            raw_locations,
            locations,
            metals: metal_cols.into_iter().map(|(_, m)| m).collect(),
            concentrations,
            partition: set_col.map(|_| partition),
        })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn metal_index(&self, name: &str) -> Option<usize> {
        self.metals.iter().position(|m| m.eq_ignore_ascii_case(name))
    }
}

fn normalize_locations(raw: &[[f64; 2]]) -> Result<Vec<Vec<f64>>> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in raw {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    if (0..2).any(|a| !(hi[a] > lo[a])) {
        return Err(AosError::input("sample locations do not span both axes"));
    }
    Ok(raw
        .iter()
        .map(|p| (0..2).map(|a| (p[a] - lo[a]) / (hi[a] - lo[a])).collect())
        .collect())
}

/// Pool and validation samples for the selected metals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JuraSplit {
    pub metals: Vec<String>,
    pub pool_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub pool_locations: Vec<Vec<f64>>,
    /// `pool_values[i][k]` is metal `k` at pool sample `i`.
    pub pool_values: Vec<Vec<f64>>,
    pub validation_locations: Vec<Vec<f64>>,
    pub validation_values: Vec<Vec<f64>>,
}

/// Splits the table into pool and validation samples. A partition column in
/// the source wins; otherwise a seeded random split with the given
/// validation fraction is drawn.
pub fn make_split(table: &JuraTable, metals: &[&str], seed: u64, validation_fraction: f64) -> Result<JuraSplit> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(AosError::config("validation fraction must lie strictly between 0 and 1"));
    }
    let metal_idx: Vec<usize> = metals
        .iter()
        .map(|m| {
            table
                .metal_index(m)
                .ok_or_else(|| AosError::config(alloc::format!("metal '{m}' is not in the table")))
        })
        .collect::<Result<_>>()?;

    let (pool_rows, validation_rows): (Vec<usize>, Vec<usize>) = match &table.partition {
        Some(part) => (0..table.len()).partition(|&i| part[i] == Partition::Pool),
        None => {
            let mut order: Vec<usize> = (0..table.len()).collect();
            order.shuffle(&mut rng::rng_from_seed(rng::derive_seed(&[seed, rng::tag::SPLIT])));
            let n_val = libm::round(validation_fraction * table.len() as f64) as usize;
            let mut validation: Vec<usize> = order[..n_val].to_vec();
            let mut pool: Vec<usize> = order[n_val..].to_vec();
            pool.sort_unstable();
            validation.sort_unstable();
            (pool, validation)
        }
    };
    if pool_rows.len() < MIN_POOL {
        return Err(AosError::config(alloc::format!(
            "split leaves {} pool samples, at least {MIN_POOL} are needed",
            pool_rows.len()
        )));
    }
    if validation_rows.is_empty() {
        return Err(AosError::config("split leaves no validation samples"));
    }
    let values = |rows: &[usize]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|&r| metal_idx.iter().map(|&k| table.concentrations[r][k]).collect())
            .collect()
    };
    Ok(JuraSplit {
        metals: metal_idx.iter().map(|&k| table.metals[k].clone()).collect(),
        pool_locations: pool_rows.iter().map(|&r| table.locations[r].clone()).collect(),
        pool_values: values(&pool_rows),
        validation_locations: validation_rows.iter().map(|&r| table.locations[r].clone()).collect(),
        validation_values: values(&validation_rows),
        pool_rows,
        validation_rows,
    })
}

impl JuraSplit {
    /// Recorded concentrations of all selected metals at a pool location.
    pub fn pool_measure(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.pool_locations
            .iter()
            .position(|p| p.as_slice() == x)
            .map(|i| self.pool_values[i].clone())
            .ok_or_else(|| AosError::input("location is not a pool sample"))
    }

    pub fn outputs(&self) -> usize {
        self.metals.len()
    }

    /// Values of metal `k` over the pool.
    pub fn pool_column(&self, k: usize) -> Vec<f64> {
        self.pool_values.iter().map(|v| v[k]).collect()
    }

    pub fn validation_column(&self, k: usize) -> Vec<f64> {
        self.validation_values.iter().map(|v| v[k]).collect()
    }
}
