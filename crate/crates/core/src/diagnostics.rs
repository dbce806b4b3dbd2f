//! Scalar observables and least-squares fits.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::spectral::Field2D;

/// Spatial standard deviation `sqrt(1/|Omega| int (phi - mean)^2)`.
pub fn roughness(phi: &Field2D) -> f64 {
    let m = phi.mean();
    let s: f64 = phi.data().iter().map(|v| (v - m) * (v - m)).sum();
    (s / phi.data().len() as f64).sqrt()
}

/// `log(e_i / e_{i+1}) / log(tau_i / tau_{i+1})` for successive refinements.
pub fn convergence_orders(errors: &[f64], taus: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != taus.len() {
        return invalid(format!(
            "{} errors but {} step sizes",
            errors.len(),
            taus.len()
        ));
    }
    Ok(errors
        .windows(2)
        .zip(taus.windows(2))
        .map(|(e, t)| (e[0] / e[1]).ln() / (t[0] / t[1]).ln())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub points: usize,
}

impl LinearFit {
    /// Exponent of a decaying power law, `y ~ t^(-rate)`.
    pub fn decay_rate(&self) -> f64 {
        -self.slope
    }

    pub fn growth_rate(&self) -> f64 {
        self.slope
    }
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return invalid("abscissae and ordinates differ in length");
    }
    let n = xs.len();
    if n < 2 {
        return invalid(format!("need at least two points to fit, got {n}"));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return invalid("abscissae are all equal");
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        residual: (ss / nf).sqrt(),
        points: n,
    })
}

fn windowed(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    if times.len() != values.len() {
        return invalid("times and values differ in length");
    }
    Ok(times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect())
}

/// OLS of `log10 y` on `log10 t` over `t in [lo, hi]`; requires positive values.
pub fn powerlaw_fit(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<LinearFit> {
    let pts = windowed(times, values, window)?;
    if pts.iter().any(|(t, v)| !(*t > 0.0 && *v > 0.0)) {
        return invalid("power-law fit needs positive times and values");
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
    least_squares(&xs, &ys)
}

/// OLS of `y` on `log10 t` over `t in [lo, hi]`.
pub fn semilog_fit(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<LinearFit> {
    let pts = windowed(times, values, window)?;
    if pts.iter().any(|(t, _)| !(*t > 0.0)) {
        return invalid("semilog fit needs positive times");
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    least_squares(&xs, &ys)
}

/// Slope of `log max|phi^k - phi^{k-1}| / tau_k` against `log t_{k-1/2}` over steps
/// `2..=count + 1`. `rates[k-1]` holds the max-norm difference quotient of step `k`.
///
/// The first cell is left out: its midpoint sits at half its right end, which badly
/// misplaces a quotient dominated by the `t -> 0` singularity.
pub fn singularity_slope(levels: &[f64], rates: &[f64], count: usize) -> Result<LinearFit> {
    let last = (count + 1).min(rates.len()).min(levels.len().saturating_sub(1));
    if last < 3 {
        return invalid("need at least two steps after the first for the singularity fit");
    }
    if rates[1..last].iter().any(|r| !(*r > 0.0)) {
        return invalid("difference quotients must be positive");
    }
    let xs: Vec<f64> = (2..=last).map(|k| (0.5 * (levels[k] + levels[k - 1])).ln()).collect();
    let ys: Vec<f64> = rates[1..last].iter().map(|r| r.ln()).collect();
    least_squares(&xs, &ys)
}

/// `max |phi_new - phi_old| / tau`.
pub fn difference_quotient(phi_new: &Field2D, phi_old: &Field2D, tau: f64) -> f64 {
    phi_new.max_abs_diff(phi_old) / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid2D;

    #[test]
    fn roughness_examples() {
        let g = Grid2D::square(16).unwrap();
        assert_eq!(roughness(&Field2D::from_fn(g, |_, _| 3.0)), 0.0);
        let s = Field2D::from_fn(g, |x, _| x.sin());
        assert!((roughness(&s) - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((roughness(&s.map(|v| v + 7.0)) - roughness(&s)).abs() < 1e-13);
    }

    #[test]
    fn order_examples() {
        let o = convergence_orders(&[4e-3, 1e-3], &[0.1, 0.05]).unwrap();
        assert!((o[0] - 2.0).abs() < 1e-12);
        let o = convergence_orders(&[1e-2, 1e-2], &[0.1, 0.05]).unwrap();
        assert_eq!(o[0], 0.0);
    }

    #[test]
    fn fits_are_exact_on_power_laws() {
        let t: Vec<f64> = (1..50).map(|i| i as f64 * 0.7).collect();
        let sq: Vec<f64> = t.iter().map(|x| x * x).collect();
        let f = powerlaw_fit(&t, &sq, (0.0, 100.0)).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.residual < 1e-12);
        let dec: Vec<f64> = t.iter().map(|x| 5.0 * x.powf(-1.0 / 3.0)).collect();
        let f = powerlaw_fit(&t, &dec, (1.0, 20.0)).unwrap();
        assert!((f.decay_rate() - 1.0 / 3.0).abs() < 1e-12);
        let lg: Vec<f64> = t.iter().map(|x| 2.0 - 0.4 * x.log10()).collect();
        let f = semilog_fit(&t, &lg, (1.0, 30.0)).unwrap();
        assert!((f.slope + 0.4).abs() < 1e-12);
    }

    #[test]
    fn singularity_slope_of_power_profiles() {
        let alpha = 0.4;
        let levels: Vec<f64> = (0..=40).map(|k| (k as f64 / 40.0).powi(3)).collect();
        let rates: Vec<f64> = (1..=40)
            .map(|k| (levels[k].powf(alpha) - levels[k - 1].powf(alpha)) / (levels[k] - levels[k - 1]))
            .collect();
        let f = singularity_slope(&levels, &rates, 10).unwrap();
        assert!((f.slope - (alpha - 1.0)).abs() < 0.05, "{}", f.slope);
        let rates: Vec<f64> = (1..=40)
            .map(|k| (levels[k].powi(2) - levels[k - 1].powi(2)) / (levels[k] - levels[k - 1]))
            .collect();
        let f = singularity_slope(&levels, &rates, 10).unwrap();
        assert!((f.slope - 1.0).abs() < 0.05, "{}", f.slope);
    }
}
