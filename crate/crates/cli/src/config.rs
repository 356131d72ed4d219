//! Optional TOML config. Every key is optional; command-line flags win.
//!
//! ```toml
//! policy = "memix"
//! capacity = 0.3
//! capacities = [0.3, 0.5, 0.7, 0.9]
//! policies = ["none", "readahead", "memix"]
//! weights = "model.mxw"
//! seed = 7
//! threads = 4
//!
//! [timing]
//! t_local_ns = 100
//! t_far_ns = 6000
//! t_inf_ns = 1000
//! max_inflight = 8
//!
//! [predictor]
//! top_n = 2
//! min_prob = 0.1
//! depth = 1
//! history = 8
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub policy: Option<String>,
    pub capacity: Option<f64>,
    pub capacities: Option<Vec<f64>>,
    pub policies: Option<Vec<String>>,
    pub weights: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub readahead_window: Option<u64>,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub predictor: Predictor,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub t_local_ns: Option<u64>,
    pub t_far_ns: Option<u64>,
    pub t_inf_ns: Option<u64>,
    pub max_inflight: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predictor {
    pub top_n: Option<usize>,
    pub min_prob: Option<f32>,
    pub depth: Option<usize>,
    pub history: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(e).context(path.display()))?;
        Self::parse(&text).map_err(|e| e.context(path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::invalid(format!("config: {}", e.message())))
    }
}
