//! Experiment configuration files (TOML) and their stable hashes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::BenchConfig;
use crate::cmaes::CmaesConfig;
use crate::dnsga::SearchConfig;
use crate::error::{Error, Result};
use crate::evalcore::SecondObjective;
use crate::graph::ArithmeticMode;
use crate::targets::{TargetFunction, TEST_SIZE, TRAIN_SIZE, VALIDATION_SIZE};

fn default_mode() -> ArithmeticMode {
    ArithmeticMode::Real64
}

fn default_objective() -> SecondObjective {
    SecondObjective::Complexity
}

fn default_train() -> usize {
    TRAIN_SIZE
}

fn default_validation() -> usize {
    VALIDATION_SIZE
}

fn default_test() -> usize {
    TEST_SIZE
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

/// A full experiment: what to approximate, how to score it and how to search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetFunction,
    #[serde(default = "default_mode")]
    pub mode: ArithmeticMode,
    /// Objective paired with precision.
    #[serde(default = "default_objective")]
    pub objective: SecondObjective,
    #[serde(default = "default_train")]
    pub train_size: usize,
    #[serde(default = "default_validation")]
    pub validation_size: usize,
    #[serde(default = "default_test")]
    pub test_size: usize,
    /// One run per seed; empty means `search.seed` alone.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub cmaes: CmaesConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

impl ExperimentConfig {
    pub fn new(target: TargetFunction) -> ExperimentConfig {
        toml::from_str(&format!("target = \"{}\"", target_key(target))).expect("minimal config parses")
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks cross-field consistency; returns search warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.mode == ArithmeticMode::Extended {
            return Err(Error::Config("extended mode is for oracles, not experiments".into()));
        }
        if self.objective == SecondObjective::Speed && self.mode != ArithmeticMode::Float32 {
            return Err(Error::Config("the speed objective requires float32 mode".into()));
        }
        if self.train_size < 2 || self.validation_size < 2 || self.test_size < 2 {
            return Err(Error::Config("dataset sizes must be at least 2".into()));
        }
        self.search_config(self.search.seed).validate()
    }

    /// Search settings for one seed, with the objective filled in.
    pub fn search_config(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            second: self.objective,
            seed,
            ..self.search.clone()
        }
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.search.seed]
        } else {
            self.seeds.clone()
        }
    }

    /// Canonical JSON: object keys sorted, no whitespace.
    pub fn canonical_json(&self) -> String {
        canonical_json(self)
    }

    /// SHA-256 of the canonical JSON, in hex.
    pub fn hash(&self) -> String {
        hash_json(self)
    }
}

fn target_key(t: TargetFunction) -> String {
    serde_json::to_value(t).unwrap().as_str().unwrap().to_string()
}

/// Serializes through `serde_json::Value`, whose maps keep keys sorted.
pub fn canonical_json<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("serializable");
    serde_json::to_string(&value).expect("value serializes")
}

pub fn hash_json<T: Serialize>(v: &T) -> String {
    hex::encode(Sha256::digest(canonical_json(v).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
target = "exp2"
mode = "Real64"
seeds = [1, 2, 3]

[search]
workers = 1
sample_size = 4
population = 16
budget = 200

[cmaes]
population = 16
max_generations = 50
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.target, TargetFunction::Exp2);
        assert_eq!(c.search.sample_size, 4);
        assert_eq!(c.cmaes.sigma0, CmaesConfig::default().sigma0);
        assert_eq!(c.validation_size, VALIDATION_SIZE);
        assert_eq!(c.run_seeds(), vec![1, 2, 3]);
    }

    #[test]
    fn round_trip_keeps_the_hash() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut other = c.clone();
        other.search.budget += 1;
        assert_ne!(other.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(ExperimentConfig::from_toml("mode = \"Real64\""), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_toml("target = \"sine\"").is_err());
        assert!(ExperimentConfig::from_toml("target = \"exp2\"\nbogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("target = \"exp2\"\nobjective = \"speed\"").is_err());
        let bad_pop = "target = \"exp2\"\n[search]\nsample_size = 20\npopulation = 10";
        assert!(ExperimentConfig::from_toml(bad_pop).is_err());
    }

    #[test]
    fn canonical_json_sorts_keys() {
        #[derive(Serialize)]
        struct S {
            b: u8,
            a: u8,
        }
        assert_eq!(canonical_json(&S { b: 1, a: 2 }), r#"{"a":2,"b":1}"#);
        assert_eq!(ExperimentConfig::new(TargetFunction::Log2).target, TargetFunction::Log2);
    }
}
