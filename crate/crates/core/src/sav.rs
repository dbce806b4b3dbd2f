//! Scalar-auxiliary-variable time stepping.
//!
//! Both models are written as `D^alpha phi = -M (A phi - s W aux)` with
//! `A = eps2 Lap^2 - beta Lap`, `aux' = -1/2 (W, phi_t)` and `s = +1` (slope, `W = U`)
//! or `s = -1` (no slope, `W = V`). The modified energy is
//! `1/2 (A phi, phi) + s (aux^2 - C0)`.
//!
//! A step produces a [`Candidate`]; nothing in the state changes until it is
//! committed, so rejected adaptive trials leave no trace.

use std::sync::Arc;

use crate::caputo::{l1_diagonal, l1plus_diagonal, l1_row_levels, l1plus_row_levels};
use crate::error::{invalid, Error, Result};
use crate::soe::{HistoryBank, SoeApprox};
use crate::spectral::{bulk_energy, radicand, sav_functional, Field2D, ModelParams, Spectral};

/// How the convolution history is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Evaluator {
    /// Direct summation over all stored increments, `O(n)` work per step.
    Direct,
    /// Exponential-sum recursion, `O(N_q)` work per step.
    Fast(Arc<SoeApprox>),
}

#[derive(Debug, Clone, PartialEq)]
enum History {
    Direct(Vec<Vec<f64>>),
    Fast { soe: Arc<SoeApprox>, bank: HistoryBank },
    // alpha = 1: the classical derivative has no memory
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavState {
    n: usize,
    levels: Vec<f64>,
    phi: Field2D,
    prev_phi: Option<Field2D>,
    aux: f64,
    history: History,
    dissipation: f64,
}

impl SavState {
    pub fn step(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> f64 {
        *self.levels.last().unwrap()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn phi(&self) -> &Field2D {
        &self.phi
    }

    pub fn prev_phi(&self) -> Option<&Field2D> {
        self.prev_phi.as_ref()
    }

    pub fn aux(&self) -> f64 {
        self.aux
    }

    /// `sum_k ((D^alpha phi)^{k-1/2}, phi^k - phi^{k-1})` over committed steps.
    pub fn dissipation(&self) -> f64 {
        self.dissipation
    }

    fn last_tau(&self) -> Option<f64> {
        let l = self.levels.len();
        (l >= 2).then(|| self.levels[l - 1] - self.levels[l - 2])
    }
}

/// Result of one trial step, not yet part of the trajectory.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub n: usize,
    pub tau: f64,
    pub phi: Field2D,
    pub aux: f64,
    /// Rank-one denominator `1 + s c (W, L^{-1} W)`.
    pub denominator: f64,
    /// `((D^alpha phi)^n, phi^n - phi^{n-1})` for the telescoping identity.
    pub caputo_dot: f64,
}

/// Spatial operators, model parameters and fractional order of one run.
#[derive(Debug, Clone)]
pub struct Stepper {
    sp: Spectral,
    params: ModelParams,
    alpha: f64,
}

enum Scheme {
    CrankNicolson,
    BackwardEuler,
}

impl Stepper {
    /// `alpha` in `(0, 1]`; `alpha = 1` is the classical time derivative.
    pub fn new(sp: Spectral, params: ModelParams, alpha: f64) -> Result<Self> {
        params.validate()?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return invalid(format!("fractional order must lie in (0, 1], got {alpha}"));
        }
        Ok(Self { sp, params, alpha })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn classical(&self) -> bool {
        self.alpha == 1.0
    }

    /// State at `t = 0` with `aux = sqrt(radicand(phi0))` and empty history.
    pub fn init_state(&self, phi0: Field2D, evaluator: &Evaluator) -> Result<SavState> {
        if phi0.grid() != self.sp.grid() {
            return invalid("initial field does not match the grid");
        }
        let r = radicand(&self.sp, &phi0, &self.params)?;
        let history = if self.classical() {
            History::Local
        } else {
            match evaluator {
                Evaluator::Direct => History::Direct(Vec::new()),
                Evaluator::Fast(soe) => {
                    if (soe.alpha - self.alpha).abs() > 0.0 {
                        return invalid("SOE was built for a different fractional order");
                    }
                    History::Fast {
                        soe: soe.clone(),
                        bank: HistoryBank::new(soe, phi0.grid().len()),
                    }
                }
            }
        };
        Ok(SavState {
            n: 0,
            levels: vec![0.0],
            phi: phi0,
            prev_phi: None,
            aux: r.sqrt(),
            history,
            dissipation: 0.0,
        })
    }

    /// History part of the discrete Caputo operator at the next level.
    fn history(&self, st: &SavState, tau: f64, scheme: &Scheme) -> Result<Vec<f64>> {
        let len = st.phi.grid().len();
        let mut out = vec![0.0; len];
        match &st.history {
            History::Local => {}
            History::Fast { soe, bank } => match scheme {
                Scheme::CrankNicolson => bank.l1plus_history(soe, self.alpha, tau, &mut out),
                Scheme::BackwardEuler => bank.l1_history(soe, tau, &mut out),
            },
            History::Direct(incs) => {
                let n = st.n + 1;
                let mut levels = st.levels.clone();
                levels.push(st.time() + tau);
                let row = match scheme {
                    Scheme::CrankNicolson => l1plus_row_levels(&levels, self.alpha, n)?,
                    Scheme::BackwardEuler => l1_row_levels(&levels, self.alpha, n)?,
                };
                for j in 1..n {
                    let w = row.weight(j);
                    for (o, d) in out.iter_mut().zip(&incs[n - 1 - j]) {
                        *o += w * d;
                    }
                }
            }
        }
        Ok(out)
    }

    fn local_weight(&self, tau: f64, scheme: &Scheme) -> f64 {
        if self.classical() {
            return 1.0 / tau;
        }
        match scheme {
            Scheme::CrankNicolson => l1plus_diagonal(self.alpha, tau),
            Scheme::BackwardEuler => l1_diagonal(self.alpha, tau),
        }
    }

    /// Second-order Crank–Nicolson step with the L1+ operator.
    ///
    /// `source` is an optional forcing added to the right side at `t_{n-1/2}`.
    pub fn cn_sav_step(&self, st: &SavState, tau: f64, source: Option<&Field2D>) -> Result<Candidate> {
        let w_at = match (&st.prev_phi, st.last_tau()) {
            (Some(prev), Some(tau_prev)) => st.phi.add_scaled(tau / (2.0 * tau_prev), &st.phi.add_scaled(-1.0, prev)),
            _ => st.phi.clone(),
        };
        self.step(st, tau, source, &w_at, Scheme::CrankNicolson)
    }

    /// First-order backward Euler step with the L1 operator and `W` frozen at `phi^{n-1}`.
    pub fn be_l1_sav_step(&self, st: &SavState, tau: f64, source: Option<&Field2D>) -> Result<Candidate> {
        let w_at = st.phi.clone();
        self.step(st, tau, source, &w_at, Scheme::BackwardEuler)
    }

    fn step(
        &self,
        st: &SavState,
        tau: f64,
        source: Option<&Field2D>,
        w_at: &Field2D,
        scheme: Scheme,
    ) -> Result<Candidate> {
        if !(tau > 0.0) || !tau.is_finite() {
            return invalid(format!("step must be positive, got {tau}"));
        }
        let p = &self.params;
        let s = p.model.sign();
        let a0 = self.local_weight(tau, &scheme);
        // implicit weight on A and on the rank-one coupling
        let (theta, kappa) = match scheme {
            Scheme::CrankNicolson => (0.5, 0.25),
            Scheme::BackwardEuler => (1.0, 0.5),
        };
        let (w, _) = sav_functional(&self.sp, w_at, p)?;
        let hist = self.history(st, tau, &scheme)?;
        let phi_old = &st.phi;
        let w_phi_old = w.inner(phi_old);

        let explicit = 1.0 - theta;
        let mut rhs = self.sp.apply_radial(phi_old, |k2| {
            a0 - explicit * p.m * (p.eps2 * k2 * k2 + p.beta * k2)
        })?;
        let cw = s * p.m * (st.aux + kappa * w_phi_old);
        {
            let r = rhs.data_mut();
            for ((ri, hi), wi) in r.iter_mut().zip(&hist).zip(w.data()) {
                *ri += cw * wi - hi;
            }
            if let Some(g) = source {
                for (ri, gi) in r.iter_mut().zip(g.data()) {
                    *ri += gi;
                }
            }
        }
        let c = theta * p.m;
        let gamma = self.sp.solve_shifted(&rhs, a0, c, p.eps2, p.beta)?;
        let chi = self.sp.solve_shifted(&w, a0, c, p.eps2, p.beta)?;
        let coupling = s * kappa * p.m;
        let denominator = 1.0 + coupling * w.inner(&chi);
        if !(denominator > 1e-12) || !denominator.is_finite() {
            return Err(Error::SolverFailure(format!(
                "rank-one denominator {denominator:e} is not positive at step {}",
                st.n + 1
            )));
        }
        let w_phi = w.inner(&gamma) / denominator;
        let phi = gamma.add_scaled(-coupling * w_phi, &chi);
        if !phi.is_finite() {
            return Err(Error::SolverFailure(format!("non-finite field at step {}", st.n + 1)));
        }
        let aux = st.aux - 0.5 * (w_phi - w_phi_old);

        let inc = phi.add_scaled(-1.0, phi_old);
        let cell = inc.grid().cell();
        let caputo_dot = inc
            .data()
            .iter()
            .zip(&hist)
            .map(|(d, h)| (a0 * d + h) * d)
            .sum::<f64>()
            * cell;
        Ok(Candidate {
            n: st.n + 1,
            tau,
            phi,
            aux,
            denominator,
            caputo_dot,
        })
    }

    /// Appends a candidate to the trajectory and advances the history.
    pub fn commit(&self, st: &mut SavState, cand: Candidate) -> Result<()> {
        if cand.n != st.n + 1 {
            return Err(Error::StateViolation(format!(
                "candidate for step {} cannot follow step {}",
                cand.n, st.n
            )));
        }
        let inc = cand.phi.add_scaled(-1.0, &st.phi).into_vec();
        match &mut st.history {
            History::Local => {}
            History::Direct(incs) => incs.push(inc),
            History::Fast { soe, bank } => bank.advance(soe, cand.n, cand.tau, &inc)?,
        }
        let t = st.time() + cand.tau;
        st.levels.push(t);
        st.prev_phi = Some(std::mem::replace(&mut st.phi, cand.phi));
        st.aux = cand.aux;
        st.dissipation += cand.caputo_dot;
        st.n = cand.n;
        Ok(())
    }

    /// `int eps2/2 |Lap phi|^2 + beta/2 |grad phi|^2`.
    pub fn quadratic_energy(&self, phi: &Field2D) -> Result<f64> {
        let p = &self.params;
        Ok(0.5 * p.eps2 * self.sp.laplacian_energy(phi)? + 0.5 * p.beta * self.sp.gradient_energy(phi)?)
    }

    /// `quad + u^2 - C0` (slope) or `quad - v^2 + C0` (no slope).
    pub fn modified_energy(&self, st: &SavState) -> Result<f64> {
        let s = self.params.model.sign();
        Ok(self.quadratic_energy(&st.phi)? + s * (st.aux * st.aux - self.params.c0))
    }

    /// Modified energy with the constant that makes it equal the original energy at `t = 0`.
    pub fn reformulated_energy(&self, st: &SavState) -> Result<f64> {
        let p = &self.params;
        let shift = match p.model {
            crate::spectral::Model::Slope => (0.5 * p.beta + 0.25 * p.beta * p.beta) * self.sp.grid().area(),
            crate::spectral::Model::NoSlope => 0.0,
        };
        Ok(self.modified_energy(st)? - shift)
    }

    /// `int eps2/2 |Lap phi|^2 + F(grad phi)`.
    pub fn original_energy(&self, phi: &Field2D) -> Result<f64> {
        Ok(0.5 * self.params.eps2 * self.sp.laplacian_energy(phi)?
            + bulk_energy(&self.sp, phi, self.params.model)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Grid2D, Model};
    use std::f64::consts::PI;

    fn stepper(model: Model, alpha: f64) -> Stepper {
        let g = Grid2D::square(16).unwrap();
        let p = ModelParams {
            model,
            m: 1.0,
            eps2: 0.1,
            beta: 1.0,
            c0: 1.0,
        };
        Stepper::new(Spectral::new(g), p, alpha).unwrap()
    }

    #[test]
    fn initial_auxiliary_values() {
        let s = stepper(Model::Slope, 0.5);
        let z = Field2D::zeros(*s.spectral().grid());
        let st = s.init_state(z.clone(), &Evaluator::Direct).unwrap();
        assert!((st.aux() - (4.0 * PI * PI + 1.0).sqrt()).abs() < 1e-12);
        assert!((s.modified_energy(&st).unwrap() - PI * PI * 4.0).abs() < 1e-10);
        assert!((s.reformulated_energy(&st).unwrap() - PI * PI).abs() < 1e-10);
        assert!((s.original_energy(&z).unwrap() - PI * PI).abs() < 1e-12);
        let s = stepper(Model::NoSlope, 0.5);
        let st = s.init_state(z.clone(), &Evaluator::Direct).unwrap();
        assert_eq!(st.aux(), 1.0);
        assert_eq!(s.modified_energy(&st).unwrap(), 0.0);
        assert_eq!(s.original_energy(&z).unwrap(), 0.0);
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        for model in [Model::Slope, Model::NoSlope] {
            let s = stepper(model, 0.6);
            let st = s.init_state(Field2D::zeros(*s.spectral().grid()), &Evaluator::Direct).unwrap();
            let c = s.cn_sav_step(&st, 0.1, None).unwrap();
            assert_eq!(c.phi.max_abs(), 0.0);
            assert_eq!(c.aux, st.aux());
        }
    }

    #[test]
    fn discarded_candidate_leaves_state_untouched() {
        let s = stepper(Model::Slope, 0.4);
        let g = *s.spectral().grid();
        let phi0 = Field2D::from_fn(g, |x, y| 0.1 * (x.sin() + (2.0 * y).cos()));
        let mut st = s.init_state(phi0, &Evaluator::Direct).unwrap();
        let c = s.cn_sav_step(&st, 0.01, None).unwrap();
        s.commit(&mut st, c).unwrap();
        let before = st.clone();
        let _ = s.cn_sav_step(&st, 0.02, None).unwrap();
        let _ = s.be_l1_sav_step(&st, 0.02, None).unwrap();
        assert_eq!(st, before);
        let stale = s.cn_sav_step(&before, 0.02, None).unwrap();
        let fresh = s.cn_sav_step(&st, 0.02, None).unwrap();
        s.commit(&mut st, fresh).unwrap();
        assert!(s.commit(&mut st, stale).is_err());
    }
}
