//! Coarsening from a small random height with power-law fits of energy and roughness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptiveParams;
use crate::diagnostics::{powerlaw_fit, semilog_fit, LinearFit};
use crate::error::{invalid, Result};
use crate::harness::run::{run_trajectory, AdaptiveConfig, GridConfig, RunConfig, RunReport, SoeConfig};
use crate::spectral::{Field2D, Grid2D, Model, ModelParams};
use crate::timemesh::{MeshKind, MeshSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarsenConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    /// Initial values are uniform in `[-amplitude, amplitude]`.
    pub amplitude: f64,
    pub seed: u64,
    /// Fit window `[t_lo, t_hi]`.
    pub window: (f64, f64),
}

/// Fitted exponents; `energy_rate` is positive for decay, `roughness_rate` for growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoarsenFits {
    pub energy: LinearFit,
    pub roughness: LinearFit,
    pub energy_rate: f64,
    pub roughness_rate: f64,
}

#[derive(Debug, Clone)]
pub struct CoarsenReport {
    pub run: RunReport,
    pub fits: CoarsenFits,
}

/// Independent uniform values in `[-amplitude, amplitude]`, one per grid point.
pub fn random_initial(grid: Grid2D, amplitude: f64, seed: u64) -> Field2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..grid.len()).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
    Field2D::from_vec(grid, data).expect("length matches the grid")
}

/// Defaults for `eps = 0.03` with the graded start sized so that its last step is
/// `tau_min` (`1.25e-4` slope, `3.32e-5` no slope).
pub fn coarsen_config(model: Model, alpha: f64, n: usize, t_end: f64, seed: u64) -> CoarsenConfig {
    let (tau_min, n0) = match model {
        Model::Slope => (1.25e-4, 240),
        Model::NoSlope => (3.32e-5, 904),
    };
    CoarsenConfig {
        run: RunConfig {
            model: ModelParams {
                model,
                m: 1.0,
                eps2: 9e-4,
                beta: 4.0,
                c0: 1.0,
            },
            alpha,
            grid: GridConfig { n, dealias: false },
            mesh: MeshSpec {
                kind: MeshKind::GradedUniformTail,
                t_end,
                n: n0 + 1,
                t0: Some(0.01),
                n0: Some(n0),
                gamma: 3.0,
                seed: 0,
            },
            adaptive: AdaptiveConfig {
                enabled: true,
                params: AdaptiveParams {
                    rho: 0.9,
                    tol: 1e-3,
                    tau_min,
                    tau_max: 0.1,
                    tau_init: tau_min,
                    max_retries: 10,
                },
            },
            soe: SoeConfig::default(),
        },
        amplitude: 1e-3,
        seed,
        window: (1.0, t_end.min(500.0)),
    }
}

/// Power law of the energy for the slope model, `log10 t` law for the no-slope model;
/// power law of the roughness for both.
pub fn fit_scalings(model: Model, report: &RunReport, window: (f64, f64)) -> Result<CoarsenFits> {
    let rows: Vec<_> = report.accepted().filter(|r| r.t > 0.0).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.original_energy).collect();
    let w: Vec<f64> = rows.iter().map(|r| r.roughness).collect();
    let energy = match model {
        Model::Slope => powerlaw_fit(&t, &e, window)?,
        Model::NoSlope => semilog_fit(&t, &e, window)?,
    };
    let roughness = powerlaw_fit(&t, &w, window)?;
    Ok(CoarsenFits {
        energy,
        roughness,
        energy_rate: energy.decay_rate(),
        roughness_rate: roughness.growth_rate(),
    })
}

pub fn coarsening(cfg: &CoarsenConfig) -> Result<CoarsenReport> {
    if !(cfg.amplitude > 0.0) {
        return invalid(format!("amplitude must be positive, got {}", cfg.amplitude));
    }
    let grid = Grid2D::square(cfg.run.grid.n)?;
    let run = run_trajectory(&cfg.run, random_initial(grid, cfg.amplitude, cfg.seed), true)?;
    let fits = fit_scalings(cfg.run.model.model, &run, cfg.window)?;
    Ok(CoarsenReport { run, fits })
}
