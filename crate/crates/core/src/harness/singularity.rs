//! Early-time difference quotients on a graded mesh.

use crate::diagnostics::{difference_quotient, singularity_slope, LinearFit};
use crate::error::Result;
use crate::sav::{Evaluator, Stepper};
use crate::spectral::Field2D;
use crate::timemesh::TimeMesh;

/// `max |phi^k - phi^{k-1}| / tau_k` for every step of `mesh`, with direct history.
pub fn difference_quotients(stepper: &Stepper, phi0: Field2D, mesh: &TimeMesh) -> Result<Vec<f64>> {
    let mut st = stepper.init_state(phi0, &Evaluator::Direct)?;
    let mut rates = Vec::with_capacity(mesh.num_steps());
    for k in 1..=mesh.num_steps() {
        let tau = mesh.tau(k);
        let cand = stepper.cn_sav_step(&st, tau, None)?;
        rates.push(difference_quotient(&cand.phi, st.phi(), tau));
        stepper.commit(&mut st, cand)?;
    }
    Ok(rates)
}

/// Slope of the log quotient against log time over the first `count` steps after the first.
pub fn initial_singularity(stepper: &Stepper, phi0: Field2D, mesh: &TimeMesh, count: usize) -> Result<LinearFit> {
    let rates = difference_quotients(stepper, phi0, mesh)?;
    singularity_slope(mesh.levels(), &rates, count)
}
