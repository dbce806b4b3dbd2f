//! Run configurations for the table drivers and TOML helpers shared by all drivers.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::pde::manufactured_params;
use crate::spectral::{Model, ModelParams};
use crate::timemesh::MeshSpec;

/// Scalar accuracy table: one column per fractional order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeConvConfig {
    pub alphas: Vec<f64>,
    pub sigma: f64,
    pub mesh: MeshSpec,
    pub ns: Vec<usize>,
}

impl Default for OdeConvConfig {
    /// `sigma = 2.5` on uniform meshes of `[0, 1]`, `N = 64..512`.
    fn default() -> Self {
        Self {
            alphas: vec![0.1, 0.5, 0.9],
            sigma: 2.5,
            mesh: MeshSpec::uniform(1.0, 64),
            ns: vec![64, 128, 256, 512],
        }
    }
}

/// Manufactured-solution accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeConvConfig {
    pub model: ModelParams,
    pub alpha: f64,
    pub sigma: f64,
    pub mesh: MeshSpec,
    pub ns: Vec<usize>,
    pub grid: usize,
}

impl PdeConvConfig {
    /// `alpha = 0.8`, `sigma = 0.4`, graded start with a random tail, 64^2 grid.
    pub fn new(model: Model, gamma: f64, seed: u64) -> Self {
        Self {
            model: manufactured_params(model),
            alpha: 0.8,
            sigma: 0.4,
            mesh: MeshSpec::graded_random_tail(1.0, 64, gamma, seed),
            ns: vec![64, 128, 256, 512],
            grid: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoeVerifyConfig {
    pub alpha: f64,
    pub eps: f64,
    pub dt_min: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub samples: usize,
}

impl Default for SoeVerifyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            eps: 1e-10,
            dt_min: 1e-4,
            t_end: 30.0,
            samples: 10_000,
        }
    }
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}
