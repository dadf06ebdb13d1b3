//! Optional JSON run file. Every key is optional; flags given on the
//! command line win over values read here.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use ssm_core::{SolveMode, SolverConfig, SsmError};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub segment: Option<String>,
    pub times: Option<Vec<f64>>,
    pub degree: Option<usize>,
    pub mode: Option<SolveMode>,
    pub noise: Option<Vec<f64>>,
    pub out_dir: Option<PathBuf>,
    /// Decimal places for generated data; `null` keeps full precision.
    #[serde(default, deserialize_with = "some_or_null")]
    pub rounding: Option<Option<u32>>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub jobs: Option<usize>,
    pub solver: Option<SolverConfig>,
}

// distinguishes an absent key from an explicit null
fn some_or_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Option<u32>>, D::Error> {
    Option::<u32>::deserialize(d).map(Some)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, SsmError> {
        let text = std::fs::read_to_string(path).map_err(|e| SsmError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SsmError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| SsmError::InvalidInput(format!("config: {e}")))?;
        if let Some(solver) = &cfg.solver {
            solver.validate()?;
        }
        Ok(cfg)
    }
}
