//! L1 and L1+ discrete convolution kernels for the Caputo derivative.
//!
//! Rows are indexed by history distance: `weights[j]` multiplies the increment
//! `v^{n-j} - v^{n-j-1}` at level `n`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::gauss_legendre_16;
use crate::timemesh::TimeMesh;

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Riemann–Liouville weight `omega_beta(t) = t^(beta-1) / Gamma(beta)`.
pub fn rl_weight(beta: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return if beta > 1.0 {
            0.0
        } else if beta == 1.0 {
            1.0
        } else {
            f64::INFINITY
        };
    }
    t.powf(beta - 1.0) / gamma(beta)
}

/// `(x + h)^q - x^q` without cancellation for `x >> h`.
pub fn pow_diff(x: f64, h: f64, q: f64) -> f64 {
    if x <= 0.0 {
        return h.powf(q);
    }
    x.powf(q) * (q * (h / x).ln_1p()).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    L1,
    #[serde(rename = "l1plus")]
    L1Plus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub n: usize,
    pub alpha: f64,
    pub kind: KernelKind,
    pub weights: Vec<f64>,
}

impl KernelRow {
    /// Weight for history distance `j = n - k`.
    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("fractional order must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

fn check_level(levels: &[f64], n: usize) -> Result<()> {
    if n == 0 || n >= levels.len() {
        return invalid(format!(
            "level {n} outside 1..={}",
            levels.len().saturating_sub(1)
        ));
    }
    Ok(())
}

/// L1 entry `a_{n-k}` for a cell of width `tau_k` ending `gap = t_n - t_k` before `t_n`.
pub fn l1_entry(alpha: f64, gap: f64, tau_k: f64) -> f64 {
    pow_diff(gap, tau_k, 1.0 - alpha) / (gamma(2.0 - alpha) * tau_k)
}

/// L1+ entry for cell `k` seen from level `n`: `gap = t_{n-1} - t_k`.
/// The diagonal cell (`k = n`) is [`l1plus_diagonal`].
pub fn l1plus_entry(alpha: f64, gap: f64, tau_n: f64, tau_k: f64) -> f64 {
    if gap < tau_n.max(tau_k) {
        // Near field: exact double integral of omega_{1-alpha}.
        let q = 2.0 - alpha;
        let num = pow_diff(gap + tau_n, tau_k, q) - pow_diff(gap, tau_k, q);
        num / (gamma(3.0 - alpha) * tau_n * tau_k)
    } else {
        // Far field: the closed form cancels badly, average the L1 integrand instead.
        let q = 1.0 - alpha;
        let scale = 1.0 / (gamma(2.0 - alpha) * tau_k);
        let mean = gauss_legendre_16().integrate(0.0, 1.0, |s| pow_diff(gap + s * tau_n, tau_k, q));
        mean * scale
    }
}

pub fn l1plus_diagonal(alpha: f64, tau_n: f64) -> f64 {
    tau_n.powf(-alpha) / gamma(3.0 - alpha)
}

pub fn l1_diagonal(alpha: f64, tau_n: f64) -> f64 {
    tau_n.powf(-alpha) / gamma(2.0 - alpha)
}

/// L1 row on raw levels.
pub fn l1_row_levels(levels: &[f64], alpha: f64, n: usize) -> Result<KernelRow> {
    check_alpha(alpha)?;
    check_level(levels, n)?;
    let tn = levels[n];
    let weights = (0..n)
        .map(|j| {
            let k = n - j;
            l1_entry(alpha, tn - levels[k], levels[k] - levels[k - 1])
        })
        .collect();
    Ok(KernelRow {
        n,
        alpha,
        kind: KernelKind::L1,
        weights,
    })
}

/// L1+ row on raw levels.
pub fn l1plus_row_levels(levels: &[f64], alpha: f64, n: usize) -> Result<KernelRow> {
    check_alpha(alpha)?;
    check_level(levels, n)?;
    let tau_n = levels[n] - levels[n - 1];
    let mut weights = Vec::with_capacity(n);
    weights.push(l1plus_diagonal(alpha, tau_n));
    for j in 1..n {
        let k = n - j;
        let gap = levels[n - 1] - levels[k];
        weights.push(l1plus_entry(alpha, gap, tau_n, levels[k] - levels[k - 1]));
    }
    Ok(KernelRow {
        n,
        alpha,
        kind: KernelKind::L1Plus,
        weights,
    })
}

pub fn l1_row(mesh: &TimeMesh, alpha: f64, n: usize) -> Result<KernelRow> {
    l1_row_levels(mesh.levels(), alpha, n)
}

pub fn l1plus_row(mesh: &TimeMesh, alpha: f64, n: usize) -> Result<KernelRow> {
    l1plus_row_levels(mesh.levels(), alpha, n)
}

pub fn row_levels(levels: &[f64], alpha: f64, n: usize, kind: KernelKind) -> Result<KernelRow> {
    match kind {
        KernelKind::L1 => l1_row_levels(levels, alpha, n),
        KernelKind::L1Plus => l1plus_row_levels(levels, alpha, n),
    }
}

/// `sum_{k=1..n} w_{n-k} * increments[k-1]`.
pub fn apply_direct(row: &KernelRow, increments: &[f64]) -> Result<f64> {
    let n = row.n;
    if increments.len() < n {
        return invalid(format!(
            "need {n} increments for level {n}, got {}",
            increments.len()
        ));
    }
    Ok(row
        .weights
        .iter()
        .enumerate()
        .map(|(j, w)| w * increments[n - 1 - j])
        .sum())
}

/// `sum_k w_k sum_{j<=k} a^{(k)}_{k-j} w_j`.
pub fn quadratic_form(mesh: &TimeMesh, alpha: f64, w: &[f64], kind: KernelKind) -> Result<f64> {
    if w.is_empty() || w.len() > mesh.num_steps() {
        return invalid(format!(
            "sequence length {} must lie in 1..={}",
            w.len(),
            mesh.num_steps()
        ));
    }
    let mut total = 0.0;
    for k in 1..=w.len() {
        let row = row_levels(mesh.levels(), alpha, k, kind)?;
        total += w[k - 1] * apply_direct(&row, w)?;
    }
    Ok(total)
}

/// `abar_0 - abar_1` in closed form for step ratio `rho = tau_{n-1} / tau_n`.
pub fn kernel_sign_gap(alpha: f64, rho: f64, tau_n: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(rho > 0.0) || !(tau_n > 0.0) {
        return invalid(format!("ratio and step must be positive, got {rho}, {tau_n}"));
    }
    let q = 2.0 - alpha;
    let bracket = 1.0 + rho + rho.powf(q) - (1.0 + rho).powf(q);
    Ok(bracket / (gamma(3.0 - alpha) * tau_n.powf(alpha) * rho))
}

/// One term `w * partial^alpha` of a multi-term operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub weight: f64,
    pub alpha: f64,
}

/// Weighted sum of L1+ applications, one per term.
pub fn multiterm_apply(terms: &[Term], mesh: &TimeMesh, increments: &[f64], n: usize) -> Result<f64> {
    if terms.is_empty() {
        return invalid("multi-term operator needs at least one term");
    }
    let mut total = 0.0;
    for t in terms {
        if !(t.weight > 0.0) {
            return invalid(format!("term weights must be positive, got {}", t.weight));
        }
        let row = l1plus_row(mesh, t.alpha, n)?;
        total += t.weight * apply_direct(&row, increments)?;
    }
    Ok(total)
}
