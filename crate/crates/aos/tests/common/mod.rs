#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn aos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aos")).args(args).output().expect("binary runs")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// A small synthetic table in the Jura layout, large enough for short runs.
pub fn write_jura_like(path: &Path, rows: usize) {
    let mut text = String::from("Xloc Yloc Landuse Rock Cd Co Cr Cu Ni Pb Zn\n");
    for i in 0..rows {
        let x = 0.3 + 4.5 * ((i * 37) % rows) as f64 / rows as f64;
        let y = 0.6 + 5.0 * ((i * 61) % rows) as f64 / rows as f64 + 0.01 * (i % 7) as f64;
        let cd = 1.0 + (1.3 * x).sin() * (0.8 * y).cos();
        let ni = 20.0 + 4.0 * x - 2.0 * y + 3.0 * (2.0 * y).sin();
        let zn = 70.0 + 15.0 * ((x - 2.5).powi(2) + (y - 3.0).powi(2)).sqrt().cos();
        text.push_str(&format!("{x:.3} {y:.3} 1 2 {cd:.3} 9.0 35.0 20.0 {ni:.3} 40.0 {zn:.3}\n"));
    }
    std::fs::write(path, text).unwrap();
}

pub const SMALL_CONFIG: &str = r#"
runs = 2
master_seed = 5
strategies = ["SQ", "RR", "G", "CVH", "SF"]

[problem]
kind = "builtin"
name = "setup2"

[settings]
p_init = 5
p_max = 12
folds = 4
candidates = 100
restarts = 1
validation_points_per_axis = 6
"#;
