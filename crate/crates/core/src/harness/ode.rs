//! Scalar fractional ODE `D^alpha u = f` with exact solution `u = omega_{1+sigma}(t)`.

use serde::Serialize;

use crate::caputo::{check_alpha, l1plus_row, rl_weight};
use crate::diagnostics::convergence_orders;
use crate::error::{invalid, Result};
use crate::timemesh::{MeshSpec, TimeMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Largest step of the mesh.
    pub tau: f64,
    pub error: f64,
    /// Order against the previous row.
    pub order: Option<f64>,
}

pub(crate) fn with_orders(mut rows: Vec<ConvergenceRow>) -> Result<Vec<ConvergenceRow>> {
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let orders = convergence_orders(&errors, &taus)?;
    for (row, o) in rows.iter_mut().skip(1).zip(orders) {
        row.order = Some(o);
    }
    Ok(rows)
}

/// Solves `(D^alpha u)^{n-1/2} = f(t_{n-1/2})` with L1+ and returns `max_n |u(t_n) - u^n|`.
pub fn ode_error(mesh: &TimeMesh, alpha: f64, sigma: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(sigma > 0.0) {
        return invalid(format!("regularity parameter must be positive, got {sigma}"));
    }
    let n_steps = mesh.num_steps();
    let mut inc = Vec::with_capacity(n_steps);
    let mut u = 0.0;
    let mut err: f64 = 0.0;
    for n in 1..=n_steps {
        let row = l1plus_row(mesh, alpha, n)?;
        let f = rl_weight(1.0 + sigma - alpha, mesh.midpoint(n));
        let hist: f64 = (1..n).map(|j| row.weight(j) * inc[n - 1 - j]).sum();
        let du = (f - hist) / row.weight(0);
        inc.push(du);
        u += du;
        err = err.max((u - rl_weight(1.0 + sigma, mesh.t(n))).abs());
    }
    Ok(err)
}

/// Error table over successive mesh sizes `ns` built from `spec`.
pub fn ode_convergence(alpha: f64, sigma: f64, spec: &MeshSpec, ns: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let mesh = spec.with_n(n).build()?;
        rows.push(ConvergenceRow {
            n,
            tau: mesh.max_step(),
            error: ode_error(&mesh, alpha, sigma)?,
            order: None,
        });
    }
    with_orders(rows)
}
