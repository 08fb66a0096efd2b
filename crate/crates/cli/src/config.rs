//! `--config` files: a flat JSON object whose keys are long flag names.
//! Command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use weatlab::LookupPolicy;

use crate::error::CliError;

pub const SEED_ENV: &str = "WEAT_AUDIT_SEED";

#[derive(Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    // audits and coverage
    pub table: Option<Vec<PathBuf>>,
    pub lexicon: Option<String>,
    pub permutations: Option<u64>,
    pub seed: Option<u64>,
    pub lowercase: Option<bool>,
    pub policy: Option<LookupPolicy>,
    pub allow_partial: Option<bool>,
    pub workers: Option<usize>,
    pub format: Option<String>,
    pub output: Option<PathBuf>,
    pub input: Option<PathBuf>,

    // simulation
    pub n_features: Option<usize>,
    pub p_male: Option<f64>,
    pub p_female: Option<f64>,
    pub male_fraction: Option<f64>,
    pub samples: Option<usize>,
    pub informative_features: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub train_seed: Option<u64>,
    pub seeds: Option<u64>,

    // employer comparison
    pub threshold: Option<f64>,
    pub alpha: Option<f64>,
    pub candidates: Option<usize>,
    pub candidate_seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            if e.is_syntax() || e.is_eof() {
                CliError::Input(format!("{}: {e}", path.display()))
            } else {
                CliError::Validation(format!("{}: {e}", path.display()))
            }
        })
    }
}

/// Flag, then config file, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Boolean switches can only be turned on from the command line.
pub fn switch(flag: bool, file: Option<bool>) -> bool {
    flag || file.unwrap_or(false)
}

/// Flag, then config file, then the environment, then 0.
pub fn seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Validation(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
        }),
        Err(_) => Ok(0),
    }
}
