//! Shared trajectory driver for the benchmark and coarsening experiments.
//!
//! A run starts on a fixed mesh (the whole interval, or only a graded prefix when
//! the adaptive controller is on) and records one row per trial step.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_run, AdaptiveParams, AdaptiveSummary};
use crate::caputo::rl_weight;
use crate::diagnostics::roughness;
use crate::error::{invalid, Error, Result};
use crate::sav::{Evaluator, SavState, Stepper};
use crate::soe::SoeApprox;
use crate::spectral::{Field2D, Grid2D, ModelParams, Spectral};
use crate::timemesh::{MeshKind, MeshSpec, TimeMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default)]
    pub dealias: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoeConfig {
    pub enabled: bool,
    /// Absolute kernel tolerance requested from the exponential sum.
    pub eps: f64,
}

impl Default for SoeConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            eps: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub enabled: bool,
    #[serde(flatten)]
    pub params: AdaptiveParams,
}

impl Default for AdaptiveConfig {
    /// Off, with `rho = 0.9`, `tol = 1e-3`, `tau_min = 1e-3`, `tau_max = 0.1`.
    fn default() -> Self {
        Self {
            enabled: false,
            params: AdaptiveParams {
                rho: 0.9,
                tol: 1e-3,
                tau_min: 1e-3,
                tau_max: 0.1,
                tau_init: 1e-3,
                max_retries: 10,
            },
        }
    }
}

/// Everything a trajectory depends on apart from the initial field.
///
/// With `adaptive.enabled` only the graded part of `mesh` (`T0`, `N0`, `gamma`) is
/// laid down in advance and the controller takes over from `T0` to `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub alpha: f64,
    pub grid: GridConfig,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub adaptive: AdaptiveConfig,
    #[serde(default)]
    pub soe: SoeConfig,
}

impl RunConfig {
    pub fn final_time(&self) -> f64 {
        self.mesh.t_end
    }

    /// Fixed part of the time mesh.
    pub fn fixed_mesh(&self) -> Result<TimeMesh> {
        if !self.adaptive.enabled {
            return self.mesh.build();
        }
        let m = &self.mesh;
        match m.kind {
            MeshKind::Uniform => Err(Error::Config(
                "adaptive runs need a graded prefix; use a graded mesh kind".into(),
            )),
            _ => {
                let t0 = m.t0.ok_or_else(|| Error::Config("adaptive runs need mesh.T0".into()))?;
                let n0 = m.n0.ok_or_else(|| Error::Config("adaptive runs need mesh.N0".into()))?;
                if !(t0 < m.t_end) {
                    return invalid(format!("graded prefix end {t0} must precede T = {}", m.t_end));
                }
                TimeMesh::graded(t0, n0, m.gamma)
            }
        }
    }

    /// Exponential sum for this run, or `None` for direct summation.
    ///
    /// The cut-off is the smallest step the run can take. The requested tolerance is
    /// raised to `32 u omega_{1-alpha}(dt_min)` when it lies below what double
    /// precision can certify at that cut-off.
    pub fn build_soe(&self, fixed: &TimeMesh) -> Result<Option<SoeApprox>> {
        if !self.soe.enabled || self.alpha >= 1.0 {
            return Ok(None);
        }
        let mut dt_min = fixed.min_step();
        if self.adaptive.enabled {
            dt_min = dt_min.min(self.adaptive.params.tau_min);
        }
        let floor = 32.0 * f64::EPSILON * rl_weight(1.0 - self.alpha, dt_min);
        let eps = self.soe.eps.max(floor);
        SoeApprox::build(self.alpha, eps, dt_min, self.final_time()).map(Some)
    }
}

/// One trial step. Rows of rejected trials carry NaN observables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub tau: f64,
    pub modified_energy: f64,
    pub original_energy: f64,
    pub roughness: f64,
    pub aux: f64,
    pub accepted: bool,
    /// Relative gap between the first- and second-order candidates; NaN on fixed meshes.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub accepted: usize,
    pub rejected: usize,
    pub forced: usize,
    pub min_tau: f64,
    pub max_tau: f64,
    pub soe_terms: usize,
    pub soe_eps: f64,
    pub initial_energy: f64,
    /// `max_n (E^n - E^0)`; the energy bound asks for this to be `<= 1e-9 |E^0|`.
    pub max_energy_excess: f64,
    /// `max_n |E^n - E^0 + D^n / M|` scaled by `max(|E^0|, max_n |E^n - E^0|)`,
    /// with `D^n` the accumulated discrete Caputo dissipation.
    pub telescoping_residual: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
    pub final_phi: Field2D,
}

impl RunReport {
    pub fn accepted(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    /// Whether `E^n <= E^0 + tol |E^0|` held at every committed step.
    pub fn energy_bounded(&self, tol: f64) -> bool {
        self.summary.max_energy_excess <= tol * self.summary.initial_energy.abs()
    }
}

struct Recorder<'a> {
    stepper: &'a Stepper,
    e0: f64,
    records: Vec<StepRecord>,
    excess: f64,
    telescoping: f64,
    scale: f64,
}

impl<'a> Recorder<'a> {
    fn new(stepper: &'a Stepper, st: &SavState) -> Result<Self> {
        let mut r = Self {
            stepper,
            e0: stepper.modified_energy(st)?,
            records: Vec::new(),
            excess: f64::NEG_INFINITY,
            telescoping: 0.0,
            scale: 0.0,
        };
        r.push(st, f64::NAN, true, f64::NAN)?;
        r.excess = 0.0;
        Ok(r)
    }

    fn push(&mut self, st: &SavState, tau: f64, accepted: bool, error: f64) -> Result<()> {
        let e = self.stepper.modified_energy(st)?;
        let drift = e - self.e0;
        self.excess = self.excess.max(drift);
        self.scale = self.scale.max(drift.abs());
        let residual = drift + st.dissipation() / self.stepper.params().m;
        self.telescoping = self.telescoping.max(residual.abs());
        self.records.push(StepRecord {
            n: st.step(),
            t: st.time(),
            tau,
            modified_energy: e,
            original_energy: self.stepper.original_energy(st.phi())?,
            roughness: roughness(st.phi()),
            aux: st.aux(),
            accepted,
            error,
        });
        Ok(())
    }

    fn push_rejected(&mut self, n: usize, t: f64, tau: f64, error: f64) {
        self.records.push(StepRecord {
            n,
            t,
            tau,
            modified_energy: f64::NAN,
            original_energy: f64::NAN,
            roughness: f64::NAN,
            aux: f64::NAN,
            accepted: false,
            error,
        });
    }
}

/// Runs `cfg` from `phi0` and checks the energy bound on the way out.
///
/// `check_energy` is off only for forced problems, where the source feeds energy in.
pub fn run_trajectory(cfg: &RunConfig, phi0: Field2D, check_energy: bool) -> Result<RunReport> {
    let grid = Grid2D::square(cfg.grid.n)?;
    if *phi0.grid() != grid {
        return invalid("initial field does not match the configured grid");
    }
    let stepper = Stepper::new(Spectral::with_dealias(grid, cfg.grid.dealias), cfg.model, cfg.alpha)?;
    let fixed = cfg.fixed_mesh()?;
    let soe = cfg.build_soe(&fixed)?;
    let (soe_terms, soe_eps) = soe.as_ref().map_or((0, 0.0), |s| (s.len(), s.eps));
    let evaluator = match soe {
        Some(s) => Evaluator::Fast(Arc::new(s)),
        None => Evaluator::Direct,
    };
    let mut st = stepper.init_state(phi0, &evaluator)?;
    let mut rec = Recorder::new(&stepper, &st)?;

    let mut stats = AdaptiveSummary {
        accepted: 0,
        rejected: 0,
        forced: 0,
        min_tau: f64::INFINITY,
        max_tau: 0.0,
    };
    for k in 1..=fixed.num_steps() {
        let tau = fixed.tau(k);
        let cand = stepper.cn_sav_step(&st, tau, None)?;
        stepper.commit(&mut st, cand)?;
        rec.push(&st, tau, true, f64::NAN)?;
        stats.accepted += 1;
        stats.min_tau = stats.min_tau.min(tau);
        stats.max_tau = stats.max_tau.max(tau);
    }
    if cfg.adaptive.enabled {
        let p = &cfg.adaptive.params;
        let s = adaptive_run(&stepper, &mut st, p, cfg.final_time(), |ev, st| {
            if ev.accepted {
                rec.push(st, ev.tau, true, ev.error)
            } else {
                rec.push_rejected(ev.n, ev.t, ev.tau, ev.error);
                Ok(())
            }
        })?;
        stats.accepted += s.accepted;
        stats.rejected += s.rejected;
        stats.forced += s.forced;
        stats.min_tau = stats.min_tau.min(s.min_tau);
        stats.max_tau = stats.max_tau.max(s.max_tau);
    }

    let scale = rec.e0.abs().max(rec.scale);
    let summary = RunSummary {
        accepted: stats.accepted,
        rejected: stats.rejected,
        forced: stats.forced,
        min_tau: stats.min_tau,
        max_tau: stats.max_tau,
        soe_terms,
        soe_eps,
        initial_energy: rec.e0,
        max_energy_excess: rec.excess,
        telescoping_residual: if scale > 0.0 { rec.telescoping / scale } else { 0.0 },
    };
    let report = RunReport {
        records: rec.records,
        summary,
        final_phi: st.phi().clone(),
    };
    if check_energy && !report.energy_bounded(1e-9) {
        return Err(Error::ModelViolation(format!(
            "modified energy rose {:e} above its initial value {:e}",
            report.summary.max_energy_excess, report.summary.initial_energy
        )));
    }
    Ok(report)
}
