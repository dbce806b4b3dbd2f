//! Step-size control from the gap between a first-order and a second-order step.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sav::{SavState, Stepper};
use crate::spectral::Field2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    /// Safety factor in `(0, 1]`.
    pub rho: f64,
    pub tol: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_init: f64,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

fn default_retries() -> usize {
    10
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return invalid(format!("safety factor must lie in (0, 1], got {}", self.rho));
        }
        if !(self.tol > 0.0) {
            return invalid(format!("tolerance must be positive, got {}", self.tol));
        }
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau_max) {
            return invalid(format!(
                "need 0 < tau_min <= tau_max, got {} and {}",
                self.tau_min, self.tau_max
            ));
        }
        if !(self.tau_init >= self.tau_min && self.tau_init <= self.tau_max) {
            return invalid(format!(
                "initial step {} outside [{}, {}]",
                self.tau_init, self.tau_min, self.tau_max
            ));
        }
        Ok(())
    }

    pub fn clamp(&self, tau: f64) -> f64 {
        tau.clamp(self.tau_min, self.tau_max)
    }
}

/// `rho sqrt(tol / e) tau`, or `10 rho tau` when the two schemes agree exactly.
pub fn tau_ada(e: f64, tau: f64, p: &AdaptiveParams) -> f64 {
    if e == 0.0 {
        10.0 * p.rho * tau
    } else {
        p.rho * (p.tol / e).sqrt() * tau
    }
}

/// Relative discrete L2 distance `||hi - lo|| / ||hi||`.
pub fn relative_error(hi: &Field2D, lo: &Field2D) -> f64 {
    let diff = hi.add_scaled(-1.0, lo).l2_norm();
    if diff == 0.0 {
        return 0.0;
    }
    diff / hi.l2_norm()
}

/// One trial of the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepEvent {
    /// Level the trial would produce.
    pub n: usize,
    pub t: f64,
    pub tau: f64,
    pub error: f64,
    pub accepted: bool,
    /// Accepted only because the retry budget ran out.
    pub forced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveSummary {
    pub accepted: usize,
    pub rejected: usize,
    pub forced: usize,
    pub min_tau: f64,
    pub max_tau: f64,
}

/// Advances `st` to `t_end`, accepting the Crank–Nicolson candidate whenever the
/// first/second-order gap is below `tol` or the step is already at `tau_min`.
///
/// `observe` sees every trial; for accepted ones the state is already committed.
pub fn adaptive_run(
    stepper: &Stepper,
    st: &mut SavState,
    p: &AdaptiveParams,
    t_end: f64,
    mut observe: impl FnMut(&StepEvent, &SavState) -> Result<()>,
) -> Result<AdaptiveSummary> {
    p.validate()?;
    if !(t_end > st.time()) {
        return invalid(format!(
            "final time {t_end} must exceed the current time {}",
            st.time()
        ));
    }
    let mut summary = AdaptiveSummary {
        accepted: 0,
        rejected: 0,
        forced: 0,
        min_tau: f64::INFINITY,
        max_tau: 0.0,
    };
    let slack = 1e-12 * t_end;
    let mut tau = p.tau_init;
    while t_end - st.time() > slack {
        let mut retries = 0;
        loop {
            let remaining = t_end - st.time();
            let forced = retries >= p.max_retries;
            if forced {
                tau = p.tau_min;
            }
            let trial = if remaining <= tau + slack { remaining } else { tau };
            let lo = stepper.be_l1_sav_step(st, trial, None)?;
            let hi = stepper.cn_sav_step(st, trial, None)?;
            let e = relative_error(&hi.phi, &lo.phi);
            let ok = e < p.tol;
            // a landing step a hair above tau_min would otherwise be retried unchanged
            let at_min = trial <= p.tau_min + slack;
            let event = StepEvent {
                n: st.step() + 1,
                t: st.time() + trial,
                tau: trial,
                error: e,
                accepted: ok || at_min || forced,
                forced: forced && !ok && !at_min,
            };
            if event.accepted {
                stepper.commit(st, hi)?;
                summary.accepted += 1;
                summary.forced += event.forced as usize;
                summary.min_tau = summary.min_tau.min(trial);
                summary.max_tau = summary.max_tau.max(trial);
                observe(&event, st)?;
                tau = if ok { p.clamp(tau_ada(e, trial, p)) } else { p.tau_min };
                break;
            }
            summary.rejected += 1;
            observe(&event, st)?;
            tau = p.clamp(tau_ada(e, trial, p));
            retries += 1;
        }
    }
    Ok(summary)
}
