//! Periodic Fourier pseudo-spectral discretization on a rectangle.
//!
//! Fields are stored row-major, `data[iy * nx + ix]`, at `x_i = i hx`, `y_j = j hy`.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"FMBEFLD1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 || nx % 2 != 0 || ny % 2 != 0 {
            return invalid(format!("grid sizes must be even and >= 4, got {nx}x{ny}"));
        }
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return invalid(format!("domain lengths must be positive, got {lx}x{ly}"));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// `n x n` points on `(0, 2 pi)^2`.
    pub fn square(n: usize) -> Result<Self> {
        let l = 2.0 * std::f64::consts::PI;
        Self::new(n, n, l, l)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }
}

fn wavenumbers(n: usize, l: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / l;
    (0..n)
        .map(|i| {
            let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            base * m
        })
        .collect()
}

#[derive(Clone, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    data: Vec<f64>,
}

impl fmt::Debug for Field2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field2D")
            .field("grid", &self.grid)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_vec(grid: Grid2D, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return invalid(format!(
                "field has {} values, grid needs {}",
                data.len(),
                grid.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return invalid("field contains non-finite values");
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                data.push(f(grid.x(i), y));
            }
        }
        Self { grid, data }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Field2D) -> Field2D {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| x + a * y)
            .collect();
        Field2D {
            grid: self.grid,
            data,
        }
    }

    pub fn scaled(&self, a: f64) -> Field2D {
        Field2D {
            grid: self.grid,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field2D {
        Field2D {
            grid: self.grid,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Field2D) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Quadrature `sum f g hx hy`.
    pub fn inner(&self, other: &Field2D) -> f64 {
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        s * self.grid.cell()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

pub fn inner_product(f: &Field2D, g: &Field2D) -> f64 {
    f.inner(g)
}

pub fn l2_norm(f: &Field2D) -> f64 {
    f.l2_norm()
}

pub fn mean(f: &Field2D) -> f64 {
    f.mean()
}

/// Coefficients in transposed layout: index `ix * ny + iy`.
#[derive(Clone)]
pub struct Spectrum {
    pub(crate) coef: Vec<Complex64>,
}

/// Transform plans and wavenumber tables for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid2D,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    // |k|^2 in transposed layout
    k2: Vec<f64>,
    // first-derivative multipliers with the Nyquist mode removed
    dx: Vec<f64>,
    dy: Vec<f64>,
    keep: Option<Vec<bool>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .field("dealias", &self.keep.is_some())
            .finish()
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

impl Spectral {
    pub fn new(grid: Grid2D) -> Self {
        Self::with_dealias(grid, false)
    }

    /// `dealias` applies the 2/3 rule to gradients that enter pointwise products.
    pub fn with_dealias(grid: Grid2D, dealias: bool) -> Self {
        let mut planner = FftPlanner::new();
        let (nx, ny) = (grid.nx, grid.ny);
        let kx = wavenumbers(nx, grid.lx);
        let ky = wavenumbers(ny, grid.ly);
        let mut k2 = vec![0.0; nx * ny];
        let mut dx = vec![0.0; nx * ny];
        let mut dy = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                let idx = i * ny + j;
                k2[idx] = kx[i] * kx[i] + ky[j] * ky[j];
                dx[idx] = if i == nx / 2 { 0.0 } else { kx[i] };
                dy[idx] = if j == ny / 2 { 0.0 } else { ky[j] };
            }
        }
        let keep = dealias.then(|| {
            let mut keep = vec![false; nx * ny];
            let mode = |i: usize, n: usize| if i <= n / 2 { i } else { n - i };
            for i in 0..nx {
                for j in 0..ny {
                    keep[i * ny + j] = 3 * mode(i, nx) < nx && 3 * mode(j, ny) < ny;
                }
            }
            keep
        });
        Self {
            grid,
            fx: planner.plan_fft_forward(nx),
            ix: planner.plan_fft_inverse(nx),
            fy: planner.plan_fft_forward(ny),
            iy: planner.plan_fft_inverse(ny),
            k2,
            dx,
            dy,
            keep,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn check(&self, f: &Field2D) -> Result<()> {
        if f.grid != self.grid {
            return invalid("field grid does not match the transform grid");
        }
        Ok(())
    }

    pub fn forward(&self, f: &Field2D) -> Result<Spectrum> {
        self.check(f)?;
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut rows: Vec<Complex64> = f.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fx.process(&mut rows);
        let mut coef = vec![Complex64::new(0.0, 0.0); nx * ny];
        transpose(&rows, &mut coef, ny, nx);
        self.fy.process(&mut coef);
        Ok(Spectrum { coef })
    }

    pub fn inverse(&self, s: Spectrum) -> Field2D {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut coef = s.coef;
        self.iy.process(&mut coef);
        let mut rows = vec![Complex64::new(0.0, 0.0); nx * ny];
        transpose(&coef, &mut rows, nx, ny);
        self.ix.process(&mut rows);
        let scale = 1.0 / (nx * ny) as f64;
        Field2D {
            grid: self.grid,
            data: rows.iter().map(|c| c.re * scale).collect(),
        }
    }

    fn apply(&self, s: &Spectrum, mult: impl Fn(usize) -> Complex64) -> Spectrum {
        Spectrum {
            coef: s.coef.iter().enumerate().map(|(i, c)| c * mult(i)).collect(),
        }
    }

    /// Multiplies by a real radial symbol `m(|k|^2)`.
    pub fn apply_radial(&self, f: &Field2D, m: impl Fn(f64) -> f64) -> Result<Field2D> {
        let s = self.forward(f)?;
        Ok(self.inverse(self.apply(&s, |i| Complex64::new(m(self.k2[i]), 0.0))))
    }

    pub fn laplacian(&self, f: &Field2D) -> Result<Field2D> {
        self.apply_radial(f, |k2| -k2)
    }

    pub fn biharmonic(&self, f: &Field2D) -> Result<Field2D> {
        self.apply_radial(f, |k2| k2 * k2)
    }

    fn gradient_of(&self, s: &Spectrum, filtered: bool) -> (Field2D, Field2D) {
        let keep = if filtered { self.keep.as_deref() } else { None };
        let mask = |i: usize| keep.is_none_or(|k| k[i]);
        let gx = self.apply(s, |i| {
            if mask(i) {
                Complex64::new(0.0, self.dx[i])
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let gy = self.apply(s, |i| {
            if mask(i) {
                Complex64::new(0.0, self.dy[i])
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        (self.inverse(gx), self.inverse(gy))
    }

    pub fn gradient(&self, f: &Field2D) -> Result<(Field2D, Field2D)> {
        let s = self.forward(f)?;
        Ok(self.gradient_of(&s, false))
    }

    /// Gradient feeding a pointwise product, filtered when dealiasing is on.
    pub fn product_gradient(&self, f: &Field2D) -> Result<(Field2D, Field2D)> {
        let s = self.forward(f)?;
        Ok(self.gradient_of(&s, true))
    }

    pub fn divergence(&self, fx: &Field2D, fy: &Field2D) -> Result<Field2D> {
        let sx = self.forward(fx)?;
        let sy = self.forward(fy)?;
        let coef = sx
            .coef
            .iter()
            .zip(&sy.coef)
            .enumerate()
            .map(|(i, (a, b))| Complex64::new(0.0, self.dx[i]) * a + Complex64::new(0.0, self.dy[i]) * b)
            .collect();
        Ok(self.inverse(Spectrum { coef }))
    }

    /// `sum |k|^2 |f_k|^2` scaled to equal `int |grad f|^2`.
    pub fn gradient_energy(&self, f: &Field2D) -> Result<f64> {
        self.weighted_energy(f, |k2| k2)
    }

    /// `int |Lap f|^2`.
    pub fn laplacian_energy(&self, f: &Field2D) -> Result<f64> {
        self.weighted_energy(f, |k2| k2 * k2)
    }

    /// `int f^2` computed in transform space.
    pub fn spectral_norm_sq(&self, f: &Field2D) -> Result<f64> {
        self.weighted_energy(f, |_| 1.0)
    }

    fn weighted_energy(&self, f: &Field2D, w: impl Fn(f64) -> f64) -> Result<f64> {
        let s = self.forward(f)?;
        let n = self.grid.len() as f64;
        let sum: f64 = s
            .coef
            .iter()
            .zip(&self.k2)
            .map(|(c, &k2)| w(k2) * c.norm_sqr())
            .sum();
        Ok(sum * self.grid.area() / (n * n))
    }

    /// Solves `(a0 + c (eps2 |k|^4 + beta |k|^2)) u = rhs`.
    pub fn solve_shifted(&self, rhs: &Field2D, a0: f64, c: f64, eps2: f64, beta: f64) -> Result<Field2D> {
        self.apply_radial(rhs, |k2| 1.0 / (a0 + c * (eps2 * k2 * k2 + beta * k2)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Slope,
    NoSlope,
}

impl Model {
    /// Sign carried by the auxiliary variable: `+u^2` or `-v^2` in the modified energy.
    pub fn sign(self) -> f64 {
        match self {
            Model::Slope => 1.0,
            Model::NoSlope => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Slope => "slope",
            Model::NoSlope => "no-slope",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: Model,
    #[serde(rename = "M")]
    pub m: f64,
    pub eps2: f64,
    pub beta: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.eps2 > 0.0 && self.beta >= 0.0 && self.c0 > 0.0) {
            return invalid(format!(
                "need M > 0, eps2 > 0, beta >= 0, C0 > 0; got {self:?}"
            ));
        }
        Ok(())
    }
}

fn grad_sq(gx: &Field2D, gy: &Field2D) -> Vec<f64> {
    gx.data.iter().zip(&gy.data).map(|(a, b)| a * a + b * b).collect()
}

fn flux(gx: &Field2D, gy: &Field2D, g2: &[f64], q: impl Fn(f64) -> f64) -> (Field2D, Field2D) {
    let qs: Vec<f64> = g2.iter().map(|&s| q(s)).collect();
    let fx = Field2D {
        grid: gx.grid,
        data: gx.data.iter().zip(&qs).map(|(g, q)| g * q).collect(),
    };
    let fy = Field2D {
        grid: gy.grid,
        data: gy.data.iter().zip(&qs).map(|(g, q)| g * q).collect(),
    };
    (fx, fy)
}

/// `f = -div((|grad phi|^2 - 1) grad phi)`.
pub fn slope_nonlinearity(sp: &Spectral, phi: &Field2D) -> Result<Field2D> {
    let (gx, gy) = sp.product_gradient(phi)?;
    let g2 = grad_sq(&gx, &gy);
    let (fx, fy) = flux(&gx, &gy, &g2, |s| s - 1.0);
    Ok(sp.divergence(&fx, &fy)?.scaled(-1.0))
}

/// `f = div(grad phi / (1 + |grad phi|^2))`.
pub fn noslope_nonlinearity(sp: &Spectral, phi: &Field2D) -> Result<Field2D> {
    let (gx, gy) = sp.product_gradient(phi)?;
    let g2 = grad_sq(&gx, &gy);
    let (fx, fy) = flux(&gx, &gy, &g2, |s| 1.0 / (1.0 + s));
    sp.divergence(&fx, &fy)
}

pub fn nonlinearity(sp: &Spectral, phi: &Field2D, model: Model) -> Result<Field2D> {
    match model {
        Model::Slope => slope_nonlinearity(sp, phi),
        Model::NoSlope => noslope_nonlinearity(sp, phi),
    }
}

fn check_radicand(r: f64, what: &str) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::ModelViolation(format!(
            "{what} radicand {r} is not positive; increase C0"
        )));
    }
    Ok(())
}

/// Auxiliary radicand: `int 1/4 (|grad phi|^2 - 1 - beta)^2 + C0` (slope) or
/// `int 1/2 ln(1 + |grad phi|^2) + beta/2 |grad phi|^2 + C0` (no slope).
pub fn radicand(sp: &Spectral, phi: &Field2D, params: &ModelParams) -> Result<f64> {
    let (gx, gy) = sp.product_gradient(phi)?;
    let g2 = grad_sq(&gx, &gy);
    let r = radicand_from(&g2, phi.grid.cell(), params);
    check_radicand(r, params.model.name())?;
    Ok(r)
}

fn radicand_from(g2: &[f64], cell: f64, params: &ModelParams) -> f64 {
    let b = params.beta;
    let s: f64 = match params.model {
        Model::Slope => g2.iter().map(|&s| 0.25 * (s - 1.0 - b).powi(2)).sum(),
        Model::NoSlope => g2.iter().map(|&s| 0.5 * s.ln_1p() + 0.5 * b * s).sum(),
    };
    s * cell + params.c0
}

/// `U(phi) = div((|grad phi|^2 - 1 - beta) grad phi) / sqrt(r)` with its radicand `r`.
pub fn sav_u_functional(sp: &Spectral, phi: &Field2D, params: &ModelParams) -> Result<(Field2D, f64)> {
    let p = ModelParams {
        model: Model::Slope,
        ..*params
    };
    sav_functional(sp, phi, &p)
}

/// `V(phi) = div((1/(1 + |grad phi|^2) + beta) grad phi) / sqrt(r)` with its radicand `r`.
pub fn sav_v_functional(sp: &Spectral, phi: &Field2D, params: &ModelParams) -> Result<(Field2D, f64)> {
    let p = ModelParams {
        model: Model::NoSlope,
        ..*params
    };
    sav_functional(sp, phi, &p)
}

/// `U` or `V` according to `params.model`.
pub fn sav_functional(sp: &Spectral, phi: &Field2D, params: &ModelParams) -> Result<(Field2D, f64)> {
    let (gx, gy) = sp.product_gradient(phi)?;
    let g2 = grad_sq(&gx, &gy);
    let r = radicand_from(&g2, phi.grid.cell(), params);
    check_radicand(r, params.model.name())?;
    let b = params.beta;
    let (fx, fy) = match params.model {
        Model::Slope => flux(&gx, &gy, &g2, |s| s - 1.0 - b),
        Model::NoSlope => flux(&gx, &gy, &g2, |s| 1.0 / (1.0 + s) + b),
    };
    let w = sp.divergence(&fx, &fy)?.scaled(1.0 / r.sqrt());
    Ok((w, r))
}

/// `int F(grad phi)` for the model's bulk potential.
pub fn bulk_energy(sp: &Spectral, phi: &Field2D, model: Model) -> Result<f64> {
    let (gx, gy) = sp.product_gradient(phi)?;
    let g2 = grad_sq(&gx, &gy);
    let s: f64 = match model {
        Model::Slope => g2.iter().map(|&s| 0.25 * (s - 1.0).powi(2)).sum(),
        Model::NoSlope => g2.iter().map(|&s| -0.5 * s.ln_1p()).sum(),
    };
    Ok(s * phi.grid.cell())
}

/// Writes the 32-byte header (magic, nx, ny, lx, ly) followed by little-endian values.
pub fn write_snapshot(path: &Path, f: &Field2D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(f.grid.nx as u32).to_le_bytes())?;
    w.write_all(&(f.grid.ny as u32).to_le_bytes())?;
    w.write_all(&f.grid.lx.to_le_bytes())?;
    w.write_all(&f.grid.ly.to_le_bytes())?;
    for v in &f.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Field2D> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[..8] != SNAPSHOT_MAGIC {
        return invalid(format!("{} is not a field snapshot", path.display()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let grid = Grid2D::new(u32_at(8), u32_at(12), f64_at(16), f64_at(24))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return invalid(format!(
            "snapshot body has {} bytes, expected {}",
            bytes.len(),
            8 * grid.len()
        ));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field2D::from_vec(grid, data)
}
