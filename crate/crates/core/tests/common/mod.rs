//! Oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfmbe::caputo::{gamma, KernelKind};
use tfmbe::timemesh::TimeMesh;

/// Tanh-sinh rule on `[a, b]`. The integrand receives the node together with its
/// distances to both ends, so endpoint singularities can be evaluated without
/// cancellation.
pub fn tanh_sinh(a: f64, b: f64, h: f64, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let d = 0.5 * (b - a);
    let half_pi = std::f64::consts::FRAC_PI_2;
    // wide enough that the omitted end pieces stay below roundoff for
    // integrable singularities as strong as (b - x)^(-0.95)
    let m = (6.5 / h).ceil() as i64;
    let mut sum = 0.0;
    for i in -m..=m {
        let u = i as f64 * h;
        let z = half_pi * u.sinh();
        let to_b = d * 2.0 / ((2.0 * z).exp() + 1.0);
        let to_a = d * 2.0 / ((-2.0 * z).exp() + 1.0);
        if to_a <= 0.0 || to_b <= 0.0 {
            continue;
        }
        let w = d * half_pi * u.cosh() / z.cosh().powi(2);
        let x = if z < 0.0 { a + to_a } else { b - to_b };
        sum += w * f(x, to_a, to_b);
    }
    sum * h
}

/// L1+ entry for cell `k` seen from level `n` as the nested double integral
/// `1/(tau_n tau_k) int_{t_{n-1}}^{t_n} int_{t_{k-1}}^{min(t, t_k)} omega_{1-alpha}(t - s) ds dt`.
pub fn l1plus_entry_oracle(levels: &[f64], alpha: f64, n: usize, k: usize) -> f64 {
    let h = 1.0 / 16.0;
    let (ta, tb) = (levels[n - 1], levels[n]);
    let (sa, sb) = (levels[k - 1], levels[k]);
    let c = 1.0 / gamma(1.0 - alpha);
    let outer = tanh_sinh(ta, tb, h, |t, t_from_a, _| {
        if k == n {
            // singular at s = t
            tanh_sinh(sa, t, h, |_, _, dist| c * dist.powf(-alpha))
        } else {
            // t - s = (t - t_{n-1}) + (t_{n-1} - t_k) + (t_k - s)
            let base = t_from_a + (ta - sb);
            tanh_sinh(sa, sb, h, |_, _, dist| c * (base + dist).powf(-alpha))
        }
    });
    outer / ((tb - ta) * (sb - sa))
}

/// L1 entry `1/tau_k int_{t_{k-1}}^{t_k} omega_{1-alpha}(t_n - s) ds`.
pub fn l1_entry_oracle(levels: &[f64], alpha: f64, n: usize, k: usize) -> f64 {
    let (sa, sb) = (levels[k - 1], levels[k]);
    let gap = levels[n] - sb;
    let c = 1.0 / gamma(1.0 - alpha);
    tanh_sinh(sa, sb, 1.0 / 16.0, |_, _, dist| c * (gap + dist).powf(-alpha)) / (sb - sa)
}

/// Mesh of `n` steps whose sizes are log-uniform in `[lo, hi]`, starting at 0.
pub fn random_mesh(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> TimeMesh {
    let mut levels = vec![0.0];
    let mut t = 0.0;
    for _ in 0..n {
        let e: f64 = rng.random_range(lo.ln()..hi.ln());
        t += e.exp();
        levels.push(t);
    }
    TimeMesh::from_levels(levels).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn kinds() -> [KernelKind; 2] {
    [KernelKind::L1, KernelKind::L1Plus]
}
