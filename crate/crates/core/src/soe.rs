//! Sum-of-exponentials compression of the Caputo kernel and the fast history
//! evaluators built on it.
//!
//! `omega_{1-alpha}(t) = sin(pi alpha)/pi * int_0^inf exp(-s t) s^(alpha-1) ds` is
//! discretized by a Gauss–Jacobi panel at the origin followed by dyadic
//! Gauss–Legendre panels, each with the smallest order that resolves it.

use std::f64::consts::PI;

use crate::caputo::{check_alpha, l1_diagonal, l1plus_diagonal, l1plus_entry, rl_weight};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{gauss_jacobi, gauss_legendre, Rule};
use crate::timemesh::TimeMesh;

const PANEL_SAMPLES: usize = 128;
const VERIFY_SAMPLES: usize = 10_000;
const MAX_ORDER: usize = 64;
const REF_ORDER: usize = 96;

#[derive(Debug, Clone, PartialEq)]
pub struct SoeApprox {
    pub alpha: f64,
    pub eps: f64,
    pub dt_min: f64,
    pub t_end: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn log_samples(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let ratio = hi / lo;
    (0..m)
        .map(|i| {
            if i + 1 == m {
                hi
            } else {
                lo * ratio.powf(i as f64 / (m - 1) as f64)
            }
        })
        .collect()
}

/// A panel rule already mapped to `s`, including the integrand weight.
struct Panel {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Panel {
    fn eval(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * (-s * t).exp())
            .sum()
    }

    fn max_deviation(&self, other: &Panel, ts: &[f64]) -> f64 {
        ts.iter()
            .map(|&t| (self.eval(t) - other.eval(t)).abs())
            .fold(0.0, f64::max)
    }
}

fn jacobi_panel(rule: &Rule, alpha: f64, s0: f64, c: f64) -> Panel {
    // s = s0 (1 + x) / 2 turns s^(alpha-1) ds into (s0/2)^alpha (1+x)^(alpha-1) dx
    let scale = c * (0.5 * s0).powf(alpha);
    Panel {
        nodes: rule.nodes.iter().map(|x| 0.5 * s0 * (1.0 + x)).collect(),
        weights: rule.weights.iter().map(|w| scale * w).collect(),
    }
}

fn legendre_panel(rule: &Rule, alpha: f64, lo: f64, hi: f64, c: f64) -> Panel {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let nodes: Vec<f64> = rule.nodes.iter().map(|x| mid + half * x).collect();
    let weights = nodes
        .iter()
        .zip(&rule.weights)
        .map(|(s, w)| c * half * w * s.powf(alpha - 1.0))
        .collect();
    Panel { nodes, weights }
}

/// Smallest order in `4, 8, ..., MAX_ORDER` within `tol` of the reference, else the largest.
fn resolve(make: impl Fn(usize) -> Panel, ts: &[f64], tol: f64) -> Panel {
    let reference = make(REF_ORDER);
    let mut order = 4;
    loop {
        let p = make(order);
        if order >= MAX_ORDER || p.max_deviation(&reference, ts) <= tol {
            return p;
        }
        order += 4;
    }
}

impl SoeApprox {
    pub fn build(alpha: f64, eps: f64, dt_min: f64, t_end: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(eps > 0.0 && eps < 1.0) {
            return invalid(format!("tolerance must lie in (0, 1), got {eps}"));
        }
        if !(dt_min > 0.0 && dt_min < t_end) || !t_end.is_finite() {
            return invalid(format!(
                "need 0 < dt_min < T, got dt_min = {dt_min}, T = {t_end}"
            ));
        }
        let c = (PI * alpha).sin() / PI;
        let s0 = 2f64.powi(-(t_end.log2().ceil() as i32));
        let tail = |s: f64| c * s.powf(alpha - 1.0) * (-s * dt_min).exp() / dt_min;
        let mut panels_hi = s0;
        let mut n_panels = 1;
        while tail(panels_hi) > 0.1 * eps {
            panels_hi *= 2.0;
            n_panels += 1;
        }
        let ts = log_samples(dt_min, t_end, PANEL_SAMPLES);

        let mut last_achieved = f64::INFINITY;
        let mut tol = 0.25 * eps / n_panels as f64;
        for _ in 0..4 {
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            let mut push = |p: Panel| {
                nodes.extend(p.nodes);
                weights.extend(p.weights);
            };
            push(resolve(
                |n| jacobi_panel(&gauss_jacobi(n, 0.0, alpha - 1.0), alpha, s0, c),
                &ts,
                tol,
            ));
            let mut lo = s0;
            while lo < panels_hi {
                let hi = 2.0 * lo;
                push(resolve(
                    |n| legendre_panel(&gauss_legendre(n), alpha, lo, hi, c),
                    &ts,
                    tol,
                ));
                lo = hi;
            }
            let soe = Self {
                alpha,
                eps,
                dt_min,
                t_end,
                nodes,
                weights,
            };
            last_achieved = soe.verify(VERIFY_SAMPLES);
            if last_achieved <= eps {
                return Ok(soe);
            }
            tol *= 0.1;
        }
        Err(Error::ConstructionFailed {
            achieved: last_achieved,
            requested: eps,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(th, w)| w * (-th * t).exp())
            .sum()
    }

    /// Max abs error against `omega_{1-alpha}` over `samples` log-spaced points of `[dt_min, T]`.
    pub fn verify(&self, samples: usize) -> f64 {
        let samples = samples.max(2);
        log_samples(self.dt_min, self.t_end, samples)
            .into_iter()
            .map(|t| (rl_weight(1.0 - self.alpha, t) - self.eval(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// `(1 - exp(-x)) / x`, equal to 1 at `x = 0`.
pub fn phi1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Per-node history `H^l(t_k)` for a field of `len` points, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBank {
    len: usize,
    h: Vec<f64>,
    committed: usize,
    last_increment: Vec<f64>,
    last_tau: f64,
}

impl HistoryBank {
    pub fn new(soe: &SoeApprox, len: usize) -> Self {
        Self {
            len,
            h: vec![0.0; soe.len() * len],
            committed: 0,
            last_increment: vec![0.0; len],
            last_tau: 0.0,
        }
    }

    /// Index `k` of the last committed step (0 when empty).
    pub fn committed(&self) -> usize {
        self.committed
    }

    pub fn node(&self, l: usize) -> &[f64] {
        &self.h[l * self.len..(l + 1) * self.len]
    }

    /// Commits step `k`: `H(t_k) = exp(-theta tau_k) H(t_{k-1}) + phi1(theta tau_k) increment`.
    pub fn advance(&mut self, soe: &SoeApprox, k: usize, tau_k: f64, increment: &[f64]) -> Result<()> {
        if k != self.committed + 1 {
            return Err(Error::StateViolation(format!(
                "history committed through {}, cannot commit step {k}",
                self.committed
            )));
        }
        if increment.len() != self.len {
            return invalid(format!(
                "increment has {} points, bank holds {}",
                increment.len(),
                self.len
            ));
        }
        if !(tau_k > 0.0) {
            return invalid(format!("step must be positive, got {tau_k}"));
        }
        for (l, &theta) in soe.nodes.iter().enumerate() {
            let x = theta * tau_k;
            let decay = (-x).exp();
            let c = phi1(x);
            let block = &mut self.h[l * self.len..(l + 1) * self.len];
            for (hv, &dv) in block.iter_mut().zip(increment) {
                *hv = decay * *hv + c * dv;
            }
        }
        self.last_increment.copy_from_slice(increment);
        self.last_tau = tau_k;
        self.committed = k;
        Ok(())
    }

    fn combine(&self, coef: &[f64], extra: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (l, &cl) in coef.iter().enumerate() {
            for (o, &hv) in out.iter_mut().zip(self.node(l)) {
                *o += cl * hv;
            }
        }
        if extra != 0.0 {
            for (o, &dv) in out.iter_mut().zip(&self.last_increment) {
                *o += extra * dv;
            }
        }
    }

    /// History part of the L1+ operator for a step of size `tau_n`.
    ///
    /// Cells up to `k - 1` come from the compressed kernel. The most recent cell
    /// touches the diagonal `t = s`, where the exponential sum is not accurate, so
    /// its compressed contribution is swapped for the exact weight.
    pub fn l1plus_history(&self, soe: &SoeApprox, alpha: f64, tau_n: f64, out: &mut [f64]) {
        let coef: Vec<f64> = soe
            .nodes
            .iter()
            .zip(&soe.weights)
            .map(|(th, w)| w * phi1(th * tau_n))
            .collect();
        let mut extra = 0.0;
        if self.committed > 0 {
            let compressed: f64 = coef
                .iter()
                .zip(&soe.nodes)
                .map(|(cl, th)| cl * phi1(th * self.last_tau))
                .sum();
            extra = l1plus_entry(alpha, 0.0, tau_n, self.last_tau) - compressed;
        }
        self.combine(&coef, extra, out);
    }

    /// History part of the L1 operator at `t_n = t_{k} + tau_n`.
    pub fn l1_history(&self, soe: &SoeApprox, tau_n: f64, out: &mut [f64]) {
        let coef: Vec<f64> = soe
            .nodes
            .iter()
            .zip(&soe.weights)
            .map(|(th, w)| w * (-th * tau_n).exp())
            .collect();
        self.combine(&coef, 0.0, out);
    }
}

fn check_bank(bank: &HistoryBank, mesh: &TimeMesh, n: usize) -> Result<()> {
    if n == 0 || n > mesh.num_steps() {
        return invalid(format!("level {n} outside 1..={}", mesh.num_steps()));
    }
    if bank.committed() != n - 1 {
        return Err(Error::StateViolation(format!(
            "history committed through {}, level {n} needs {}",
            bank.committed(),
            n - 1
        )));
    }
    if bank.len != 1 {
        return invalid("scalar evaluation needs a one-point bank");
    }
    Ok(())
}

/// Fast L1+ value at level `n` for scalar data.
pub fn fast_l1plus_apply(
    bank: &HistoryBank,
    soe: &SoeApprox,
    mesh: &TimeMesh,
    alpha: f64,
    n: usize,
    local_increment: f64,
) -> Result<f64> {
    check_bank(bank, mesh, n)?;
    let tau_n = mesh.tau(n);
    let mut hist = [0.0];
    bank.l1plus_history(soe, alpha, tau_n, &mut hist);
    Ok(l1plus_diagonal(alpha, tau_n) * local_increment + hist[0])
}

/// Fast L1 value at level `n` for scalar data.
pub fn fast_l1_apply(
    bank: &HistoryBank,
    soe: &SoeApprox,
    mesh: &TimeMesh,
    alpha: f64,
    n: usize,
    local_increment: f64,
) -> Result<f64> {
    check_bank(bank, mesh, n)?;
    let tau_n = mesh.tau(n);
    let mut hist = [0.0];
    bank.l1_history(soe, tau_n, &mut hist);
    Ok(l1_diagonal(alpha, tau_n) * local_increment + hist[0])
}
