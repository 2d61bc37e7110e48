//! Flat model tori `C^n / Z^{2n}` (n = 1, 2) sampled on uniform grids.
//!
//! Real axes are ordered `(x1, y1, x2, y2)` with `x1` slowest. The flat
//! Kähler form is normalized to volume 1, so the uniform probability
//! measure on the grid is `dV_X` and the Monge-Ampère density is
//! `det(I + H)` with `H_jk = d^2 phi / dz_j dzbar_k`.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fft::{fft_nd, to_complex, wavenumber};

const FIELD_MAGIC: &[u8; 5] = b"MAFLD";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
    size: usize,
}

impl TorusGrid {
    /// `n` complex dimensions, `size` points per real axis.
    pub fn new(n: usize, size: usize) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(LabError::InvalidInput(format!(
                "complex dimension must be 1 or 2, got {n}"
            )));
        }
        if size < 8 || !size.is_power_of_two() {
            return Err(LabError::InvalidInput(format!(
                "grid size must be a power of two >= 8, got {size}"
            )));
        }
        Ok(Self { n, size })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dims(&self) -> usize {
        2 * self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.size as f64
    }

    pub fn len(&self) -> usize {
        self.size.pow(self.dims() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stride of real axis `axis` in the flat index.
    pub fn stride(&self, axis: usize) -> usize {
        self.size.pow((self.dims() - 1 - axis) as u32)
    }

    /// Integer coordinates of a flat index.
    pub fn coords(&self, idx: usize) -> [usize; 4] {
        let mut c = [0; 4];
        for (axis, slot) in c.iter_mut().enumerate().take(self.dims()) {
            *slot = (idx / self.stride(axis)) % self.size;
        }
        c
    }

    /// Point in `[0, 1)^{2n}` for a flat index.
    pub fn point(&self, idx: usize) -> [f64; 4] {
        let c = self.coords(idx);
        let h = self.spacing();
        [
            c[0] as f64 * h,
            c[1] as f64 * h,
            c[2] as f64 * h,
            c[3] as f64 * h,
        ]
    }

    /// Index after moving `delta` steps along `axis`, periodically.
    pub fn shift(&self, idx: usize, axis: usize, delta: i64) -> usize {
        let stride = self.stride(axis);
        let c = ((idx / stride) % self.size) as i64;
        let moved = (c + delta).rem_euclid(self.size as i64) as usize;
        idx - c as usize * stride + moved * stride
    }
}

/// Real values on a torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl TorusField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidInput("field values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at the grid points `(x1, y1, x2, y2)`.
    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync>(grid: TorusGrid, f: F) -> Self {
        let dims = grid.dims();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.point(i)[..dims]))
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn osc(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(LabError::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Shifted so that `sup = target`.
    pub fn with_sup(&self, target: f64) -> Self {
        let m = self.max();
        self.map(|v| v - m + target)
    }

    pub fn with_zero_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// `(mean |phi|^r)^{1/r}` against the uniform probability measure; `r = inf` gives the sup norm.
    pub fn lp_norm(&self, r: f64) -> Result<f64> {
        if !(r >= 1.0) {
            return Err(LabError::InvalidInput(format!(
                "norm exponent r = {r} must be >= 1"
            )));
        }
        let m = self.sup_abs();
        if m == 0.0 || r.is_infinite() {
            return Ok(m);
        }
        // factor out the sup so large r neither overflows nor underflows
        let mean = self
            .values
            .iter()
            .map(|v| (v.abs() / m).powf(r))
            .sum::<f64>()
            / self.values.len() as f64;
        Ok(m * mean.powf(1.0 / r))
    }

    /// Spectral partial derivatives along every real axis.
    pub fn spectral_gradient(&self) -> Vec<Vec<f64>> {
        let g = self.grid;
        let mut hat = to_complex(&self.values);
        fft_nd(&mut hat, g.dims(), g.size(), false);
        (0..g.dims())
            .map(|axis| {
                let mut d: Vec<Complex<f64>> = hat
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| {
                        let k = g.coords(i)[axis];
                        let kk = wavenumber(k, g.size());
                        // odd derivative: drop the unpaired Nyquist mode
                        if 2 * k == g.size() {
                            return Complex::new(0.0, 0.0);
                        }
                        c * Complex::new(0.0, 2.0 * std::f64::consts::PI * kk as f64)
                    })
                    .collect();
                fft_nd(&mut d, g.dims(), g.size(), true);
                d.into_iter().map(|c| c.re).collect()
            })
            .collect()
    }

    /// `||grad phi||_2^2` against the uniform probability measure (spectral derivatives).
    pub fn grad_energy(&self) -> f64 {
        let grads = self.spectral_gradient();
        let len = self.values.len() as f64;
        grads
            .iter()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / len
    }

    /// Binary layout: `MAFLD`, u32 n, u32 N, then `N^{2n}` little-endian f64.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(13 + 8 * self.values.len());
        out.extend_from_slice(FIELD_MAGIC);
        out.extend_from_slice(&(self.grid.n as u32).to_le_bytes());
        out.extend_from_slice(&(self.grid.size as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&out)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 13 || &bytes[..5] != FIELD_MAGIC {
            return Err(LabError::InvalidInput(format!(
                "{} is not a field file",
                path.display()
            )));
        }
        let word =
            |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        let grid = TorusGrid::new(word(5), word(9))?;
        let body = &bytes[13..];
        if body.len() != 8 * grid.len() {
            return Err(LabError::GridMismatch(format!(
                "field file holds {} bytes of data, expected {}",
                body.len(),
                8 * grid.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::new(grid, values)
    }

    /// CSV with one column per real axis followed by `value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let names = ["x1", "y1", "x2", "y2"];
        let dims = self.grid.dims();
        let mut header: Vec<&str> = names[..dims].to_vec();
        header.push("value");
        w.write_record(&header)?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            let mut rec: Vec<String> = p[..dims].iter().map(|x| x.to_string()).collect();
            rec.push(v.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Hermitian `n x n` matrix, n <= 2: `[[a, b], [conj b, d]]` with `b = re + i im`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Herm2 {
    pub a: f64,
    pub d: f64,
    pub re: f64,
    pub im: f64,
}

impl Herm2 {
    pub fn identity() -> Self {
        Self {
            a: 1.0,
            d: 1.0,
            re: 0.0,
            im: 0.0,
        }
    }

    /// Ascending eigenvalues, closed form.
    pub fn eigenvalues(&self, n: usize) -> [f64; 2] {
        if n == 1 {
            return [self.a, self.a];
        }
        let mean = 0.5 * (self.a + self.d);
        let half = 0.5 * (self.a - self.d);
        let r = (half * half + self.re * self.re + self.im * self.im).sqrt();
        [mean - r, mean + r]
    }

    pub fn det(&self, n: usize) -> f64 {
        if n == 1 {
            self.a
        } else {
            self.a * self.d - self.re * self.re - self.im * self.im
        }
    }

    pub fn trace(&self, n: usize) -> f64 {
        if n == 1 {
            self.a
        } else {
            self.a + self.d
        }
    }
}

/// `I + H` at every grid point together with its sorted eigenvalues.
#[derive(Debug, Clone)]
pub struct HessianField {
    grid: TorusGrid,
    matrices: Vec<Herm2>,
}

impl HessianField {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn matrix(&self, idx: usize) -> Herm2 {
        self.matrices[idx]
    }

    pub fn matrices(&self) -> &[Herm2] {
        &self.matrices
    }

    /// Ascending eigenvalues at `idx` (length n).
    pub fn eigenvalues(&self, idx: usize) -> Vec<f64> {
        let n = self.grid.n();
        self.matrices[idx].eigenvalues(n)[..n].to_vec()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.grid.n();
        self.matrices
            .iter()
            .map(|m| m.eigenvalues(n)[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_psh(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }
}

/// Second difference along one axis.
fn d2(values: &[f64], g: &TorusGrid, i: usize, axis: usize) -> f64 {
    let h2 = g.spacing() * g.spacing();
    (values[g.shift(i, axis, 1)] - 2.0 * values[i] + values[g.shift(i, axis, -1)]) / h2
}

/// Centered mixed difference along two distinct axes.
fn dmix(values: &[f64], g: &TorusGrid, i: usize, a: usize, b: usize) -> f64 {
    let h2 = g.spacing() * g.spacing();
    let pp = values[g.shift(g.shift(i, a, 1), b, 1)];
    let pm = values[g.shift(g.shift(i, a, 1), b, -1)];
    let mp = values[g.shift(g.shift(i, a, -1), b, 1)];
    let mm = values[g.shift(g.shift(i, a, -1), b, -1)];
    (pp - pm - mp + mm) / (4.0 * h2)
}

/// `H_jk = d^2 phi / dz_j dzbar_k` at one point, without the identity.
pub fn complex_hessian_at(values: &[f64], g: &TorusGrid, i: usize) -> Herm2 {
    let a = 0.25 * (d2(values, g, i, 0) + d2(values, g, i, 1));
    if g.n() == 1 {
        return Herm2 {
            a,
            d: 0.0,
            re: 0.0,
            im: 0.0,
        };
    }
    let d = 0.25 * (d2(values, g, i, 2) + d2(values, g, i, 3));
    // axes: 0 = x1, 1 = y1, 2 = x2, 3 = y2
    let re = 0.25 * (dmix(values, g, i, 0, 2) + dmix(values, g, i, 1, 3));
    let im = 0.25 * (dmix(values, g, i, 0, 3) - dmix(values, g, i, 1, 2));
    Herm2 { a, d, re, im }
}

/// `I + dd^c phi` relative to the flat form, at every point.
pub fn complex_hessian(phi: &TorusField) -> HessianField {
    let g = phi.grid;
    let matrices = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let h = complex_hessian_at(&phi.values, &g, i);
            Herm2 {
                a: 1.0 + h.a,
                d: 1.0 + h.d,
                re: h.re,
                im: h.im,
            }
        })
        .collect();
    HessianField { grid: g, matrices }
}

/// Pointwise Monge-Ampère density and its psh flag.
#[derive(Debug, Clone)]
pub struct MaDensity {
    pub density: TorusField,
    /// Number of points where some eigenvalue is `<= 0`.
    pub non_psh_points: usize,
}

/// `det(I + H)`, the density of `(omega + dd^c phi)^n / V` against the uniform measure.
pub fn ma_density(phi: &TorusField) -> MaDensity {
    let hess = complex_hessian(phi);
    let n = phi.grid.n();
    let values: Vec<f64> = hess.matrices.iter().map(|m| m.det(n)).collect();
    let non_psh_points = hess
        .matrices
        .iter()
        .filter(|m| m.eigenvalues(n)[0] <= 0.0)
        .count();
    MaDensity {
        density: TorusField {
            grid: phi.grid,
            values,
        },
        non_psh_points,
    }
}

/// Discrete operator `L phi = tr H = (1/4) sum of axis second differences`.
pub fn half_laplacian(phi: &TorusField) -> TorusField {
    let g = phi.grid;
    let values = (0..g.len())
        .into_par_iter()
        .map(|i| {
            0.25 * (0..g.dims())
                .map(|axis| d2(&phi.values, &g, i, axis))
                .sum::<f64>()
        })
        .collect();
    TorusField { grid: g, values }
}

/// Symbol of `L` at frequency multi-index of flat FFT bin `idx`.
pub fn half_laplacian_symbol(g: &TorusGrid, idx: usize) -> f64 {
    let c = g.coords(idx);
    let h2 = g.spacing() * g.spacing();
    -(0..g.dims())
        .map(|axis| {
            let s = (std::f64::consts::PI * c[axis] as f64 / g.size() as f64).sin();
            s * s
        })
        .sum::<f64>()
        / h2
}

/// Mean-zero solution `u` of `L u = rhs - mean(rhs)` by FFT.
pub fn solve_half_laplacian(rhs: &TorusField) -> TorusField {
    let g = rhs.grid;
    let mut hat = to_complex(&rhs.values);
    fft_nd(&mut hat, g.dims(), g.size(), false);
    for (i, c) in hat.iter_mut().enumerate() {
        *c = if i == 0 {
            Complex::new(0.0, 0.0)
        } else {
            *c / half_laplacian_symbol(&g, i)
        };
    }
    fft_nd(&mut hat, g.dims(), g.size(), true);
    TorusField {
        grid: g,
        values: hat.into_iter().map(|c| c.re).collect(),
    }
}
