//! Manufactured-solution accuracy test for the CN-SAV schemes.
//!
//! The exact field is `phi = omega_{1+sigma}(t) sin x sin y` on `(0, 2 pi)^2`, driven by
//! `g = omega_{1+sigma-alpha}(t) sin x sin y + M (eps2 Lap^2 phi + f(grad phi))`.

use std::thread;

use crate::caputo::{check_alpha, rl_weight};
use crate::error::{invalid, Result};
use crate::harness::ode::{with_orders, ConvergenceRow};
use crate::sav::{Evaluator, Stepper};
use crate::spectral::{nonlinearity, Field2D, Grid2D, Model, ModelParams, Spectral};
use crate::timemesh::{MeshSpec, TimeMesh};

/// `M = 0.1, eps2 = 0.5, beta = 1, C0 = 1`.
pub fn manufactured_params(model: Model) -> ModelParams {
    ModelParams {
        model,
        m: 0.1,
        eps2: 0.5,
        beta: 1.0,
        c0: 1.0,
    }
}

fn sin_sin(grid: Grid2D) -> Field2D {
    Field2D::from_fn(grid, |x, y| x.sin() * y.sin())
}

/// Forcing at time `t`.
pub fn manufactured_source(stepper: &Stepper, sigma: f64, t: f64) -> Result<Field2D> {
    let sp = stepper.spectral();
    let p = stepper.params();
    let base = sin_sin(*sp.grid());
    let phi = base.scaled(rl_weight(1.0 + sigma, t));
    let mut g = sp.biharmonic(&phi)?.scaled(p.eps2);
    g = g.add_scaled(1.0, &nonlinearity(sp, &phi, p.model)?).scaled(p.m);
    Ok(g.add_scaled(rl_weight(1.0 + sigma - stepper.alpha(), t), &base))
}

/// `max_n max_x |phi(x, t_n) - phi^n|` with the source sampled at `t_{n-1/2}`.
pub fn pde_error(stepper: &Stepper, mesh: &TimeMesh, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return invalid(format!("regularity parameter must be positive, got {sigma}"));
    }
    let grid = *stepper.spectral().grid();
    let base = sin_sin(grid);
    let mut st = stepper.init_state(Field2D::zeros(grid), &Evaluator::Direct)?;
    let mut err: f64 = 0.0;
    for n in 1..=mesh.num_steps() {
        let g = manufactured_source(stepper, sigma, mesh.midpoint(n))?;
        let cand = stepper.cn_sav_step(&st, mesh.tau(n), Some(&g))?;
        stepper.commit(&mut st, cand)?;
        let exact = base.scaled(rl_weight(1.0 + sigma, mesh.t(n)));
        err = err.max(st.phi().max_abs_diff(&exact));
    }
    Ok(err)
}

/// Error table over `ns`; rows run on separate threads.
pub fn pde_convergence(
    params: &ModelParams,
    alpha: f64,
    sigma: f64,
    spec: &MeshSpec,
    ns: &[usize],
    grid_n: usize,
) -> Result<Vec<ConvergenceRow>> {
    check_alpha(alpha)?;
    let grid = Grid2D::square(grid_n)?;
    let stepper = Stepper::new(Spectral::new(grid), *params, alpha)?;
    let rows: Vec<Result<ConvergenceRow>> = thread::scope(|s| {
        let handles: Vec<_> = ns
            .iter()
            .map(|&n| {
                let stepper = &stepper;
                s.spawn(move || {
                    let mesh = spec.with_n(n).build()?;
                    Ok(ConvergenceRow {
                        n,
                        tau: mesh.max_step(),
                        error: pde_error(stepper, &mesh, sigma)?,
                        order: None,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("row thread panicked")).collect()
    });
    with_orders(rows.into_iter().collect::<Result<Vec<_>>>()?)
}
