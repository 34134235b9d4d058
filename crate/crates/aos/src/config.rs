//! Experiment configuration files.
//!
//! A config is TOML (or the JSON `config` object of a run manifest):
//!
//! ```toml
//! runs = 50
//! master_seed = 7
//! strategies = ["SQ", "RR", "G", "CVH", "SF"]
//! output_dir = "results/setup2"
//!
//! [problem]
//! kind = "builtin"
//! name = "setup2"
//!
//! [settings]
//! p_init = 10
//! p_max = 100
//! folds = 10
//! ```
//!
//! `problem.kind` is `builtin` (with `name`), `custom` (with `setup`, a
//! full setup description) or `jura` (with `data` and optional `metals`).

use std::path::{Path, PathBuf};

use aos_core::experiment::ExperimentSettings;
use aos_core::jura::DEFAULT_METALS;
use aos_core::processes::{builtin_setup, SetupSpec};
use aos_core::StrategyKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Builtin { name: String },
    Custom { setup: SetupSpec },
    Jura {
        data: PathBuf,
        #[serde(default = "default_metals")]
        metals: Vec<String>,
    },
}

fn default_metals() -> Vec<String> {
    DEFAULT_METALS.iter().map(|m| m.to_string()).collect()
}

fn default_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

fn default_runs() -> usize {
    50
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default = "default_strategies", with = "strategy_tags")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub settings: ExperimentSettings,
}

/// Strategy lists accept tags in any case.
mod strategy_tags {
    use aos_core::StrategyKind;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(kinds: &[StrategyKind], s: S) -> Result<S::Ok, S::Error> {
        kinds.iter().map(|k| k.tag()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<StrategyKind>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|t| t.parse().map_err(D::Error::custom))
            .collect()
    }
}

/// Default settings of the Jura experiment: longer runs than the toys.
pub fn jura_settings() -> ExperimentSettings {
    ExperimentSettings {
        p_max: 150,
        ..ExperimentSettings::default()
    }
}

impl ExperimentConfig {
    pub fn builtin(name: &str) -> Self {
        ExperimentConfig {
            problem: ProblemConfig::Builtin { name: name.to_string() },
            strategies: default_strategies(),
            runs: default_runs(),
            master_seed: 0,
            output_dir: default_output_dir(),
            settings: ExperimentSettings::default(),
        }
    }

    pub fn jura(data: PathBuf) -> Self {
        ExperimentConfig {
            problem: ProblemConfig::Jura {
                data,
                metals: default_metals(),
            },
            settings: jura_settings(),
            ..ExperimentConfig::builtin("jura")
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a TOML config, or the `config` object of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct Manifest {
                config: ExperimentConfig,
            }
            let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            m.config.validate()?;
            Ok(m.config)
        } else {
            Self::from_toml(&text).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(CliError::Config("runs must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(CliError::Config("no strategies selected".into()));
        }
        let mut seen = self.strategies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.strategies.len() {
            return Err(CliError::Config("strategy list has duplicates".into()));
        }
        self.settings.validate().map_err(|e| CliError::Config(e.to_string()))?;
        match &self.problem {
            ProblemConfig::Builtin { name } => {
                builtin_setup(name).ok_or_else(|| CliError::Config(format!("unknown setup '{name}'")))?;
            }
            ProblemConfig::Custom { setup } => setup.validate().map_err(|e| CliError::Config(e.to_string()))?,
            ProblemConfig::Jura { metals, .. } => {
                if metals.is_empty() {
                    return Err(CliError::Config("jura needs at least one metal".into()));
                }
            }
        }
        Ok(())
    }

    /// Short name used in plot titles and file names.
    pub fn problem_name(&self) -> String {
        match &self.problem {
            ProblemConfig::Builtin { name } => name.clone(),
            ProblemConfig::Custom { setup } => setup.name.clone(),
            ProblemConfig::Jura { .. } => "jura".to_string(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_toml("[problem]\nkind = \"builtin\"\nname = \"setup1\"\n").unwrap();
        assert_eq!(c.runs, 50);
        assert_eq!(c.strategies, StrategyKind::ALL.to_vec());
        assert_eq!(c.settings, ExperimentSettings::default());
    }

    #[test]
    fn nested_sections_and_lowercase_tags() {
        let text = r#"
runs = 3
master_seed = 11
strategies = ["sf", "cvh"]

[problem]
kind = "builtin"
name = "setup3"

[settings]
p_max = 40
candidates = 200

[settings.bounds]
lengthscale = [0.05, 5.0]
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.strategies, vec![StrategyKind::Sf, StrategyKind::Cvh]);
        assert_eq!(c.settings.p_max, 40);
        assert_eq!(c.settings.bounds.lengthscale, (0.05, 5.0));
        assert_eq!(c.settings.bounds.noise_variance, (1e-8, 1.0));
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        for text in [
            "runs = 0\n[problem]\nkind = \"builtin\"\nname = \"setup1\"\n",
            "[problem]\nkind = \"builtin\"\nname = \"setup9\"\n",
            "[problem]\nkind = \"builtin\"\nname = \"setup1\"\n[settings]\np_init = 100\n",
            "[problem]\nkind = \"builtin\"\nname = \"setup1\"\n[settings]\nfolds = 1\n",
            "[problem]\nkind = \"builtin\"\nname = \"setup1\"\n[settings]\nfold = 3\n",
            "strategies = [\"XY\"]\n[problem]\nkind = \"builtin\"\nname = \"setup1\"\n",
            "strategies = [\"SF\", \"sf\"]\n[problem]\nkind = \"builtin\"\nname = \"setup1\"\n",
        ] {
            let e = ExperimentConfig::from_toml(text).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{text}: {e}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::jura(PathBuf::from("data/jura.csv"));
        c.strategies = vec![StrategyKind::Cvh, StrategyKind::Rr];
        c.settings.quality_target = Some(0.05);
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(c.settings.p_max, 150);
    }
}
