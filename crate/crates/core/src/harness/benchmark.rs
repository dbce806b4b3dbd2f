//! Adaptive-stepping benchmark from a smooth two-mode initial height.

use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptiveParams;
use crate::error::Result;
use crate::harness::run::{run_trajectory, AdaptiveConfig, GridConfig, RunConfig, RunReport, SoeConfig};
use crate::spectral::{Field2D, Grid2D, Model, ModelParams};
use crate::timemesh::{MeshKind, MeshSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Constant step `1e-3`.
    Uniform,
    /// 30 graded steps on `[0, 0.01]` with `gamma = 3`, then constant steps of `1e-3`.
    Graded,
    /// The same graded start, then the controller with `tau_min = 1e-3`, `tau_max = 0.1`.
    Adaptive,
}

/// `M = 1, beta = 4, eps2 = 0.1, C0 = 1`.
pub fn benchmark_params(model: Model) -> ModelParams {
    ModelParams {
        model,
        m: 1.0,
        eps2: 0.1,
        beta: 4.0,
        c0: 1.0,
    }
}

/// `0.1 (sin 3x sin 2y + sin 5x sin 5y)`.
pub fn benchmark_initial(grid: Grid2D) -> Field2D {
    Field2D::from_fn(grid, |x, y| 0.1 * ((3.0 * x).sin() * (2.0 * y).sin() + (5.0 * x).sin() * (5.0 * y).sin()))
}

/// Default configuration for one strategy on an `n x n` grid up to `t_end`.
pub fn benchmark_config(model: Model, alpha: f64, strategy: Strategy, n: usize, t_end: f64) -> RunConfig {
    let tau = 1e-3;
    let steps = (t_end / tau).round() as usize;
    let mesh = match strategy {
        Strategy::Uniform => MeshSpec::uniform(t_end, steps),
        Strategy::Graded | Strategy::Adaptive => MeshSpec {
            kind: MeshKind::GradedUniformTail,
            t_end,
            n: steps,
            t0: Some(0.01),
            n0: Some(30),
            gamma: 3.0,
            seed: 0,
        },
    };
    RunConfig {
        model: benchmark_params(model),
        alpha,
        grid: GridConfig { n, dealias: false },
        mesh,
        adaptive: AdaptiveConfig {
            enabled: strategy == Strategy::Adaptive,
            params: AdaptiveParams {
                rho: 0.9,
                tol: 1e-3,
                tau_min: tau,
                tau_max: 0.1,
                tau_init: tau,
                max_retries: 10,
            },
        },
        soe: SoeConfig::default(),
    }
}

/// Runs `cfg` from the two-mode initial height.
pub fn adaptive_benchmark(cfg: &RunConfig) -> Result<RunReport> {
    let grid = Grid2D::square(cfg.grid.n)?;
    run_trajectory(cfg, benchmark_initial(grid), true)
}
