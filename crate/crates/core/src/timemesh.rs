//! Nonuniform time meshes `0 = t_0 < t_1 < ... < t_N = T`.
//!
//! Steps are indexed from one: `tau(k) = t_k - t_{k-1}` for `1 <= k <= N`, and the
//! local ratio is `rho(k) = tau(k) / tau(k + 1)`.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    levels: Vec<f64>,
}

impl TimeMesh {
    /// Builds a mesh from explicit levels, checking `t_0 = 0` and strict growth.
    pub fn from_levels(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return invalid("a time mesh needs at least two levels");
        }
        if levels[0] != 0.0 {
            return invalid(format!("first level must be 0, got {}", levels[0]));
        }
        if let Some(k) = levels
            .windows(2)
            .position(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return invalid(format!("levels not strictly increasing at index {}", k + 1));
        }
        Ok(Self { levels })
    }

    /// `t_k = T (k / N)`.
    pub fn uniform(t_end: f64, n: usize) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return invalid(format!("final time must be positive, got {t_end}"));
        }
        if n == 0 {
            return invalid("number of steps must be at least one");
        }
        let nf = n as f64;
        // Same expression as the graded mesh so that gamma = 1 agrees bitwise.
        let levels = (0..=n).map(|k| t_end * (k as f64 / nf)).collect();
        Self::from_levels(levels)
    }

    /// `t_k = T0 (k / N0)^gamma`, clustering levels near `t = 0` for `gamma > 1`.
    pub fn graded(t0: f64, n0: usize, gamma: f64) -> Result<Self> {
        if !(t0 > 0.0) || !t0.is_finite() {
            return invalid(format!("graded segment end must be positive, got {t0}"));
        }
        if n0 == 0 {
            return invalid("number of graded steps must be at least one");
        }
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return invalid(format!("grading exponent must be >= 1, got {gamma}"));
        }
        let nf = n0 as f64;
        let levels = (0..=n0).map(|k| t0 * (k as f64 / nf).powf(gamma)).collect();
        Self::from_levels(levels)
    }

    /// Appends `n1` random steps `tau = (T - T0) eps_k / sum(eps)` with `eps_k ~ U(0, 1)`
    /// drawn from a ChaCha8 stream seeded by `seed`.
    pub fn extend_random(&self, t_end: f64, n1: usize, seed: u64) -> Result<Self> {
        let span = self.check_extension(t_end, n1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: Vec<f64> = (0..n1).map(|_| rng.sample::<f64, _>(Open01)).collect();
        let total: f64 = eps.iter().sum();
        let steps: Vec<f64> = eps.iter().map(|e| span * e / total).collect();
        self.append_steps(&steps, t_end)
    }

    /// Appends `n1` equal steps reaching `t_end`.
    pub fn extend_uniform(&self, t_end: f64, n1: usize) -> Result<Self> {
        let span = self.check_extension(t_end, n1)?;
        let steps = vec![span / n1 as f64; n1];
        self.append_steps(&steps, t_end)
    }

    fn check_extension(&self, t_end: f64, n1: usize) -> Result<f64> {
        let last = self.final_time();
        if !(t_end > last) || !t_end.is_finite() {
            return invalid(format!(
                "extension end {t_end} must exceed the current final time {last}"
            ));
        }
        if n1 == 0 {
            return invalid("number of appended steps must be at least one");
        }
        Ok(t_end - last)
    }

    // Levels are accumulated from the steps; the last one is pinned to `t_end`.
    fn append_steps(&self, steps: &[f64], t_end: f64) -> Result<Self> {
        let mut levels = self.levels.clone();
        levels.reserve(steps.len());
        let mut t = self.final_time();
        for tau in &steps[..steps.len() - 1] {
            t += tau;
            levels.push(t);
        }
        levels.push(t_end);
        Self::from_levels(levels)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn num_steps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn t(&self, k: usize) -> f64 {
        self.levels[k]
    }

    pub fn final_time(&self) -> f64 {
        *self.levels.last().expect("mesh has at least two levels")
    }

    /// Step `tau_k = t_k - t_{k-1}`, `1 <= k <= N`.
    pub fn tau(&self, k: usize) -> f64 {
        assert!(k >= 1 && k <= self.num_steps(), "step index {k} out of range");
        self.levels[k] - self.levels[k - 1]
    }

    /// Ratio `rho_k = tau_k / tau_{k+1}`, `1 <= k < N`.
    pub fn ratio(&self, k: usize) -> f64 {
        self.tau(k) / self.tau(k + 1)
    }

    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.windows(2).map(|w| w[1] - w[0])
    }

    pub fn max_step(&self) -> f64 {
        self.steps().fold(0.0, f64::max)
    }

    pub fn min_step(&self) -> f64 {
        self.steps().fold(f64::INFINITY, f64::min)
    }

    pub fn max_ratio(&self) -> f64 {
        (1..self.num_steps())
            .map(|k| self.ratio(k))
            .fold(0.0, f64::max)
    }

    /// Midpoint `t_{k-1/2}`.
    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.levels[k] + self.levels[k - 1])
    }
}

/// End of the graded segment, `T0 = min(1 / gamma, T)`.
pub fn graded_segment_end(gamma: f64, t_end: f64) -> f64 {
    (1.0 / gamma).min(t_end)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeshKind {
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "graded")]
    Graded,
    #[serde(rename = "graded+random-tail")]
    GradedRandomTail,
    #[serde(rename = "graded+uniform-tail")]
    GradedUniformTail,
}

/// Mesh description as it appears in run configuration files.
///
/// For the composite kinds `T0` defaults to `min(1/gamma, T)` and `N0` to `N / 2`;
/// when `T0 >= T` the whole interval is graded with `N` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub kind: MeshKind,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T0", default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(rename = "N0", default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_gamma() -> f64 {
    1.0
}

impl MeshSpec {
    pub fn uniform(t_end: f64, n: usize) -> Self {
        Self {
            kind: MeshKind::Uniform,
            t_end,
            n,
            t0: None,
            n0: None,
            gamma: 1.0,
            seed: 0,
        }
    }

    pub fn graded_random_tail(t_end: f64, n: usize, gamma: f64, seed: u64) -> Self {
        Self {
            kind: MeshKind::GradedRandomTail,
            t_end,
            n,
            t0: None,
            n0: None,
            gamma,
            seed,
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn build(&self) -> Result<TimeMesh> {
        match self.kind {
            MeshKind::Uniform => TimeMesh::uniform(self.t_end, self.n),
            MeshKind::Graded => TimeMesh::graded(self.t_end, self.n, self.gamma),
            MeshKind::GradedRandomTail | MeshKind::GradedUniformTail => {
                let t0 = self
                    .t0
                    .unwrap_or_else(|| graded_segment_end(self.gamma, self.t_end));
                if t0 >= self.t_end {
                    return TimeMesh::graded(self.t_end, self.n, self.gamma);
                }
                let n0 = self.n0.unwrap_or(self.n / 2);
                if n0 == 0 || n0 >= self.n {
                    return invalid(format!(
                        "graded steps N0 = {n0} must lie in [1, N) for N = {}",
                        self.n
                    ));
                }
                let prefix = TimeMesh::graded(t0, n0, self.gamma)?;
                let n1 = self.n - n0;
                if self.kind == MeshKind::GradedRandomTail {
                    prefix.extend_random(self.t_end, n1, self.seed)
                } else {
                    prefix.extend_uniform(self.t_end, n1)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn uniform_levels() {
        let m = TimeMesh::uniform(1.0, 4).unwrap();
        assert_eq!(m.levels(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!((1..4).all(|k| m.ratio(k) == 1.0));
        assert_eq!(TimeMesh::uniform(1.0, 1).unwrap().levels(), &[0.0, 1.0]);
        let m = TimeMesh::uniform(30.0, 30000).unwrap();
        assert!(close(m.max_step(), 1e-3, 1e-14));
    }

    #[test]
    fn uniform_rejects_bad_arguments() {
        assert!(TimeMesh::uniform(0.0, 4).is_err());
        assert!(TimeMesh::uniform(-1.0, 4).is_err());
        assert!(TimeMesh::uniform(1.0, 0).is_err());
    }

    #[test]
    fn graded_levels() {
        let m = TimeMesh::graded(1.0, 4, 2.0).unwrap();
        assert_eq!(m.levels(), &[0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0]);
        let m = TimeMesh::graded(0.01, 30, 3.0).unwrap();
        assert!(close(m.tau(1), 0.01 / 27000.0, 1e-20));
        assert!(TimeMesh::graded(1.0, 4, 0.5).is_err());
    }

    #[test]
    fn graded_with_unit_exponent_is_uniform_bitwise() {
        for n in [1, 3, 7, 64, 513] {
            let u = TimeMesh::uniform(2.5, n).unwrap();
            let g = TimeMesh::graded(2.5, n, 1.0).unwrap();
            assert_eq!(u, g);
        }
    }

    #[test]
    fn random_extension() {
        let base = TimeMesh::uniform(1.0, 1).unwrap();
        let one = base.extend_random(2.0, 1, 7).unwrap();
        assert_eq!(one.tau(2), 1.0);
        let two = base.extend_random(3.0, 2, 7).unwrap();
        assert!(close(two.tau(2) + two.tau(3), 2.0, 1e-12));
        assert_eq!(two.final_time(), 3.0);
        assert_eq!(two, base.extend_random(3.0, 2, 7).unwrap());
        assert_ne!(two, base.extend_random(3.0, 2, 8).unwrap());
        assert!(base.extend_random(1.0, 2, 7).is_err());
    }

    #[test]
    fn uniform_extension() {
        let base = TimeMesh::uniform(1.0, 1).unwrap();
        let m = base.extend_uniform(2.0, 2).unwrap();
        assert_eq!(m.levels(), &[0.0, 1.0, 1.5, 2.0]);
        let m = base.extend_uniform(1.5, 1).unwrap();
        assert_eq!(m.tau(2), 0.5);
        let prefix = TimeMesh::graded(0.01, 30, 3.0).unwrap();
        let m = prefix.extend_uniform(30.0, 29970).unwrap();
        assert!(close(m.tau(31), (30.0 - 0.01) / 29970.0, 1e-15));
        assert_eq!(m.num_steps(), 30000);
    }

    #[test]
    fn builder_makes_composite_meshes() {
        let spec = MeshSpec::graded_random_tail(1.0, 64, 4.0, 11);
        let m = spec.build().unwrap();
        assert_eq!(m.num_steps(), 64);
        assert!(close(m.t(32), 0.25, 1e-15));
        assert_eq!(m.final_time(), 1.0);
        // gamma = 1 on [0, 1] degenerates to a uniform mesh
        let m = MeshSpec::graded_random_tail(1.0, 64, 1.0, 11).build().unwrap();
        assert_eq!(m, TimeMesh::uniform(1.0, 64).unwrap());
    }

    #[test]
    fn builder_round_trips_through_toml() {
        let text = "kind = \"graded+uniform-tail\"\nT = 30.0\nN = 300\nT0 = 0.01\nN0 = 30\ngamma = 3.0\n";
        let spec: MeshSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.kind, MeshKind::GradedUniformTail);
        assert_eq!(spec.n0, Some(30));
        let back: MeshSpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
