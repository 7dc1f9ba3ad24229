//! Periodic-grid Fourier analysis.
//!
//! The torus `[-L/2, L/2)^d` with `n` points per axis stands in for `ℝ^d`.
//! Spectra are stored unnormalized (`ĉ_k = Σ_j u_j e^{-2πi jk/n}`), so a
//! multiplier `m(ξ)` acts as `ℱ⁻¹[m · ℱu]` with `ξ_k = 2πk/L`.

use std::cell::RefCell;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    period: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, period: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Validation(format!("grid dimension must be 1, 2 or 3, got {dim}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Validation(format!("points per axis must be a power of two, got {n}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Validation(format!("period must be positive, got {period}")));
        }
        Ok(Self { dim, n, period })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `π n / L`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.period
    }

    /// Coordinate of grid index `i` along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.period + i as f64 * self.spacing()
    }

    /// Signed integer wavenumber of FFT index `i`: `0..n/2-1, -n/2..-1`.
    pub fn signed_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Angular frequency of FFT index `i`.
    pub fn frequency(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.signed_index(i) as f64 / self.period
    }

    pub(crate) fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.frequency(i)).collect()
    }

    /// Multi-index of a flat row-major index; unused axes are 0.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    /// Calls `f(flat_index, point)` for every grid point.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let mut x = [0.0; 3];
        for flat in 0..self.len() {
            let idx = self.unflatten(flat);
            for a in 0..self.dim {
                x[a] = self.coordinate(idx[a]);
            }
            f(flat, &x[..self.dim]);
        }
    }

    /// Calls `f(flat_index, ξ)` for every frequency.
    pub fn for_each_frequency(&self, mut f: impl FnMut(usize, &[f64])) {
        let freqs = self.frequencies();
        let mut xi = [0.0; 3];
        for flat in 0..self.len() {
            let idx = self.unflatten(flat);
            for a in 0..self.dim {
                xi[a] = freqs[idx[a]];
            }
            f(flat, &xi[..self.dim]);
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

/// In-place multi-dimensional FFT along every axis, unnormalized.
fn fft_all_axes(grid: &GridSpec, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.n;
    let fft = plan(n, direction);
    let total = data.len();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.dim {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * n;
        for base in (0..total).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[start + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * stride] = *v;
                }
            }
        }
    }
}

/// Forward transform of real samples.
pub fn forward(grid: &GridSpec, samples: &[f64]) -> Result<Vec<Complex64>> {
    if samples.len() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            got: samples.len(),
        });
    }
    let mut data: Vec<Complex64> = samples.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft_all_axes(grid, &mut data, FftDirection::Forward);
    Ok(data)
}

/// Inverse transform, normalized so that `inverse(forward(u)) = u`.
pub fn inverse(grid: &GridSpec, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    if spectrum.len() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            got: spectrum.len(),
        });
    }
    let mut data = spectrum.to_vec();
    fft_all_axes(grid, &mut data, FftDirection::Inverse);
    let scale = 1.0 / grid.len() as f64;
    for v in &mut data {
        *v *= scale;
    }
    Ok(data)
}

/// Flat index of the frequency `-k` for flat index `k`.
fn conjugate_index(grid: &GridSpec, flat: usize) -> usize {
    let idx = grid.unflatten(flat);
    let mut out = 0;
    for &i in idx.iter().take(grid.dim) {
        out = out * grid.n + (grid.n - i) % grid.n;
    }
    out
}

/// A real field sampled on a periodic grid, with its spectrum cached.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: GridSpec,
    samples: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.samples == other.samples
    }
}

impl SpectralField {
    pub fn from_samples(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: samples.len(),
            });
        }
        Ok(Self {
            grid,
            samples,
            spectrum: OnceLock::new(),
        })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut samples = vec![0.0; grid.len()];
        grid.for_each_point(|i, x| samples[i] = f(x));
        Self {
            grid,
            samples,
            spectrum: OnceLock::new(),
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::from_fn(grid, |_| 0.0)
    }

    /// Field from a spectrum; the imaginary part of the inverse is dropped and
    /// the cached spectrum is the Hermitian projection that matches the real samples.
    pub fn from_spectrum(grid: GridSpec, spectrum: Vec<Complex64>) -> Result<Self> {
        let values = inverse(&grid, &spectrum)?;
        let samples = values.iter().map(|v| v.re).collect();
        let mut projected = spectrum.clone();
        for (k, v) in projected.iter_mut().enumerate() {
            let partner = spectrum[conjugate_index(&grid, k)];
            *v = 0.5 * (spectrum[k] + partner.conj());
        }
        let cache = OnceLock::new();
        let _ = cache.set(projected);
        Ok(Self {
            grid,
            samples,
            spectrum: cache,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum
            .get_or_init(|| forward(&self.grid, &self.samples).expect("sizes checked at construction"))
    }

    /// `ℱ⁻¹[m(ξ) · ℱu]` for a real multiplier.
    pub fn apply_multiplier(&self, m: impl Fn(&[f64]) -> f64) -> SpectralField {
        let spec = self.spectrum();
        let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
        self.grid.for_each_frequency(|k, xi| out[k] = spec[k] * m(xi));
        SpectralField::from_spectrum(self.grid, out).expect("same grid")
    }

    fn check_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn zip_with(&self, other: &SpectralField, f: impl Fn(f64, f64) -> f64) -> Result<SpectralField> {
        self.check_grid(other)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| f(*a, *b)).collect();
        SpectralField::from_samples(self.grid, samples)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            samples: self.samples.iter().map(|v| f(*v)).collect(),
            spectrum: OnceLock::new(),
        }
    }

    pub fn scaled(&self, c: f64) -> SpectralField {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.iter().map(|v| v * c).collect());
        }
        SpectralField {
            grid: self.grid,
            samples: self.samples.iter().map(|v| v * c).collect(),
            spectrum,
        }
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Grid L_p norm (midpoint rule); `p = ∞` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm_of(&self.samples, self.grid.cell_volume(), p)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ u dx` on the grid.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `(u, v) = ∫ u v dx` on the grid.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.samples.iter().zip(&other.samples).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume())
    }

    /// L_2 norm from the spectrum (Parseval).
    pub fn spectral_l2_norm(&self) -> f64 {
        let sum: f64 = self.spectrum().iter().map(|c| c.norm_sqr()).sum();
        (sum * self.grid.cell_volume() / self.grid.len() as f64).sqrt()
    }

    /// Binary layout: `dim: u64`, `n: u64`, `L: f64`, then row-major `f64`
    /// samples, all little-endian.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(self.grid.dim as u64).to_le_bytes())?;
        w.write_all(&(self.grid.n as u64).to_le_bytes())?;
        w.write_all(&self.grid.period.to_le_bytes())?;
        for v in &self.samples {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let period = f64::from_le_bytes(word);
        let grid = GridSpec::new(dim, n, period)?;
        let mut samples = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut word)?;
            samples.push(f64::from_le_bytes(word));
        }
        Self::from_samples(grid, samples)
    }

    /// Two-column `x,u` CSV; only for one-dimensional grids.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if self.grid.dim != 1 {
            return Err(Error::Validation("CSV export is only defined for d = 1".into()));
        }
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "x,u")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{:?},{:?}", self.grid.coordinate(i), v)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn lp_norm_of(values: &[f64], cell: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    if p == 2.0 {
        return (values.iter().map(|v| v * v).sum::<f64>() * cell).sqrt();
    }
    (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

/// Smooth step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, `C^∞` in between.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// Radial low-pass symbol: 1 on `|ξ| ≤ 1`, 0 on `|ξ| ≥ 2`.
pub fn chi(r: f64) -> f64 {
    smooth_step(2.0 - r)
}

fn radius(xi: &[f64]) -> f64 {
    xi.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Littlewood–Paley family `Ψ̂_j(ξ) = χ(2^{-j}ξ) − χ(2^{-j+1}ξ)` for
/// `j_min ≤ j ≤ j_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LPFamily {
    pub j_min: i32,
    pub j_max: i32,
}

impl LPFamily {
    /// Blocks between the fundamental mode and the Nyquist frequency.
    pub fn for_grid(grid: &GridSpec) -> Self {
        let j_max = grid.nyquist().log2().floor() as i32 - 1;
        let j_min = -(grid.period().log2().floor() as i32);
        Self { j_min, j_max }
    }

    pub fn contains(&self, j: i32) -> bool {
        (self.j_min..=self.j_max).contains(&j)
    }

    pub fn psi(&self, j: i32, r: f64) -> f64 {
        chi(r * 2f64.powi(-j)) - chi(r * 2f64.powi(1 - j))
    }

    /// `max_ξ |χ(2^{-j_max}ξ) − Σ_j Ψ̂_j(ξ) − χ(2^{-j_min+1}ξ)|` over nonzero
    /// grid frequencies with `|ξ| ≤ 2^{j_max}`.
    pub fn partition_defect(&self, grid: &GridSpec) -> f64 {
        let mut worst: f64 = 0.0;
        let cap = 2f64.powi(self.j_max);
        grid.for_each_frequency(|_, xi| {
            let r = radius(xi);
            if r == 0.0 || r > cap {
                return;
            }
            let sum: f64 = (self.j_min..=self.j_max).map(|j| self.psi(j, r)).sum();
            let telescoped = chi(r * 2f64.powi(-self.j_max)) - chi(r * 2f64.powi(1 - self.j_min));
            worst = worst.max((telescoped - sum).abs());
        });
        worst
    }

    /// `Δ_j u = ℱ⁻¹[Ψ̂_j · ℱu]`.
    pub fn block(&self, u: &SpectralField, j: i32) -> Result<SpectralField> {
        if !self.contains(j) {
            return Err(Error::OutOfRange {
                index: j,
                min: self.j_min,
                max: self.j_max,
            });
        }
        Ok(u.apply_multiplier(|xi| self.psi(j, radius(xi))))
    }

    /// `S_0 u = ℱ⁻¹[χ · ℱu]`, the low-pass including the zero mode.
    pub fn s0(&self, u: &SpectralField) -> SpectralField {
        u.apply_multiplier(|xi| chi(radius(xi)))
    }

    /// Truncated `‖S_0 u‖_p + (Σ_{j=1}^{j_max} 2^{spj} ‖Δ_j u‖_p^p)^{1/p}`.
    pub fn besov_norm(&self, u: &SpectralField, s: f64, p: f64) -> Result<f64> {
        if !(p > 1.0) {
            return Err(Error::Domain(format!("Besov exponent p must exceed 1, got {p}")));
        }
        let low = self.s0(u).lp_norm(p);
        let mut sum = 0.0;
        for j in 1..=self.j_max {
            let block = self.block(u, j)?.lp_norm(p);
            sum += 2f64.powf(s * p * j as f64) * block.powf(p);
        }
        Ok(low + sum.powf(1.0 / p))
    }
}

/// `‖(1−Δ)^{n/2} u‖_{L_p}`.
pub fn bessel_norm(u: &SpectralField, n: f64, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("Bessel exponent p must exceed 1, got {p}")));
    }
    if n == 0.0 {
        return Ok(u.lp_norm(p));
    }
    Ok(bessel_potential(u, n).lp_norm(p))
}

/// `(1−Δ)^{n/2} u`.
pub fn bessel_potential(u: &SpectralField, n: f64) -> SpectralField {
    if n == 0.0 {
        return u.clone();
    }
    u.apply_multiplier(|xi| (1.0 + xi.iter().map(|v| v * v).sum::<f64>()).powf(0.5 * n))
}

/// `(−Δ)^{γ/2} u`, multiplier `|ξ|^γ` with value 0 at `ξ = 0`.
pub fn frac_laplacian(u: &SpectralField, gamma: f64) -> Result<SpectralField> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("fractional order must be nonnegative, got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok(u.clone());
    }
    Ok(u.apply_multiplier(|xi| {
        let r = radius(xi);
        if r == 0.0 {
            0.0
        } else {
            r.powf(gamma)
        }
    }))
}

/// All `d²` entries `u_{x^i x^j}`, row-major.
pub fn second_derivatives(u: &SpectralField) -> Vec<SpectralField> {
    let d = u.grid().dim();
    let mut out: Vec<SpectralField> = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            if j < i {
                let mirrored = out[j * d + i].clone();
                out.push(mirrored);
            } else {
                out.push(u.apply_multiplier(|xi| -xi[i] * xi[j]));
            }
        }
    }
    out
}

/// Pointwise Frobenius norm of the Hessian of `(1−Δ)^{n/2} u`.
pub fn hessian_frobenius(u: &SpectralField, n: f64) -> SpectralField {
    let smoothed = bessel_potential(u, n);
    let entries = second_derivatives(&smoothed);
    let mut acc = vec![0.0; u.grid().len()];
    for e in &entries {
        for (a, v) in acc.iter_mut().zip(e.samples()) {
            *a += v * v;
        }
    }
    SpectralField::from_samples(*u.grid(), acc.into_iter().map(f64::sqrt).collect()).expect("same grid")
}

/// `‖u_xx‖_{H^n_p} := ‖ |(1−Δ)^{n/2} Hess u|_F ‖_{L_p}`.
pub fn hessian_norm(u: &SpectralField, n: f64, p: f64) -> f64 {
    hessian_frobenius(u, n).lp_norm(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> GridSpec {
        GridSpec::new(1, n, 2.0 * PI * 4.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1, 100, 1.0).is_err());
        assert!(GridSpec::new(4, 8, 1.0).is_err());
        assert!(GridSpec::new(2, 8, -1.0).is_err());
        let g = GridSpec::new(2, 8, 2.0).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.signed_index(4), -4);
        assert_eq!(g.unflatten(13), [1, 5, 0]);
    }

    #[test]
    fn constant_field_has_only_zero_mode() {
        let g = grid1(64);
        let u = SpectralField::from_fn(g, |_| 1.0);
        let s = u.spectrum();
        assert!((s[0].re - 64.0).abs() < 1e-12);
        assert!(s[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn cosine_has_symmetric_lines() {
        let g = grid1(64);
        let l = g.period();
        let u = SpectralField::from_fn(g, |x| (2.0 * PI * x[0] / l).cos());
        let s = u.spectrum();
        assert!((s[1].norm() - s[63].norm()).abs() < 1e-12);
        assert!((s[1].norm() - 32.0).abs() < 1e-10);
        let others: f64 = s.iter().enumerate().filter(|(k, _)| *k != 1 && *k != 63).map(|(_, c)| c.norm()).sum();
        assert!(others < 1e-10);
    }

    #[test]
    fn size_mismatch_rejected() {
        let g = grid1(16);
        assert!(SpectralField::from_samples(g, vec![0.0; 15]).is_err());
        assert!(inverse(&g, &[Complex64::new(0.0, 0.0); 8]).is_err());
    }

    #[test]
    fn fft_matches_naive_dft_in_2d() {
        let g = GridSpec::new(2, 8, 3.0).unwrap();
        let u = SpectralField::from_fn(g, |x| (x[0] * 1.3 + x[1] * x[1]).sin() + 0.3 * x[1]);
        let s = u.spectrum();
        for k in [0usize, 5, 17, 42, 63] {
            let [k0, k1, _] = g.unflatten(k);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..64 {
                let [j0, j1, _] = g.unflatten(j);
                let phase = -2.0 * PI * ((k0 * j0 + k1 * j1) as f64) / 8.0;
                acc += u.samples()[j] * Complex64::new(phase.cos(), phase.sin());
            }
            assert!((acc - s[k]).norm() < 1e-11);
        }
    }

    #[test]
    fn hermitian_projection_matches_samples() {
        let g = GridSpec::new(2, 16, 5.0).unwrap();
        let u = SpectralField::from_fn(g, |x| (-x[0] * x[0] - 2.0 * x[1] * x[1]).exp());
        // Odd multiplier in each axis separately produces imaginary Nyquist contamination.
        let v = u.apply_multiplier(|xi| (-0.1 * xi[0] * xi[1]).exp());
        let fresh = forward(&g, v.samples()).unwrap();
        for (a, b) in v.spectrum().iter().zip(&fresh) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn lp_block_single_mode_normalization() {
        let g = GridSpec::new(1, 256, 2.0 * PI).unwrap();
        let fam = LPFamily::for_grid(&g);
        for j in 1..=4 {
            let f = 2f64.powi(j);
            let u = SpectralField::from_fn(g, |x| (f * x[0]).cos());
            let b = fam.block(&u, j).unwrap();
            assert!(b.sub(&u).unwrap().max_abs() < 1e-12);
            if fam.contains(j - 2) {
                assert!(fam.block(&u, j - 2).unwrap().max_abs() < 1e-12);
            }
        }
        assert!(fam.block(&SpectralField::zeros(g), fam.j_max + 1).is_err());
    }

    #[test]
    fn family_range_from_grid() {
        let g = GridSpec::new(1, 1024, 2.0 * PI).unwrap();
        let fam = LPFamily::for_grid(&g);
        // Nyquist 512 → j_max = 9 - 1.
        assert_eq!(fam.j_max, 8);
        assert_eq!(fam.j_min, -2);
    }

    #[test]
    fn s0_examples() {
        let g = GridSpec::new(1, 128, 2.0 * PI).unwrap();
        let fam = LPFamily::for_grid(&g);
        let c = SpectralField::from_fn(g, |_| 3.0);
        assert!(fam.s0(&c).sub(&c).unwrap().max_abs() < 1e-13);
        let m = SpectralField::from_fn(g, |x| (2.0 * x[0]).sin());
        assert!(fam.s0(&m).max_abs() < 1e-13);
    }

    #[test]
    fn besov_of_single_mode() {
        let g = GridSpec::new(1, 256, 2.0 * PI).unwrap();
        let fam = LPFamily::for_grid(&g);
        let j = 3;
        let u = SpectralField::from_fn(g, |x| (8.0 * x[0]).cos());
        for p in [1.5, 2.0, 4.0] {
            let lp = u.lp_norm(p);
            assert!((fam.besov_norm(&u, 0.0, p).unwrap() - lp).abs() < 1e-10 * lp);
            let b = fam.besov_norm(&u, 1.5, p).unwrap();
            assert!((b - 2f64.powf(1.5 * j as f64) * lp).abs() < 1e-10 * b);
        }
        assert!(fam.besov_norm(&u, 0.0, 1.0).is_err());
    }

    #[test]
    fn bessel_examples() {
        let g = GridSpec::new(1, 128, 2.0 * PI).unwrap();
        let u = SpectralField::from_fn(g, |x| x[0].sin() + 0.2);
        assert_eq!(bessel_norm(&u, 0.0, 3.0).unwrap(), u.lp_norm(3.0));
        let c = SpectralField::from_fn(g, |_| 2.0);
        let expect = 2.0 * (2.0 * PI).sqrt();
        assert!((bessel_norm(&c, 3.0, 2.0).unwrap() - expect).abs() < 1e-12);
        let m = SpectralField::from_fn(g, |x| x[0].cos());
        assert!((bessel_norm(&m, 2.0, 2.0).unwrap() - 2.0 * m.lp_norm(2.0)).abs() < 1e-12);
    }

    #[test]
    fn frac_laplacian_examples() {
        let g = GridSpec::new(1, 128, 2.0 * PI).unwrap();
        let m = SpectralField::from_fn(g, |x| (2.0 * x[0]).cos());
        assert_eq!(frac_laplacian(&m, 0.0).unwrap(), m);
        let sq = frac_laplacian(&m, 2.0).unwrap();
        let gap = sq.sub(&m.scaled(4.0)).unwrap().max_abs();
        assert!(gap < 1e-11, "{gap}");
        let one = frac_laplacian(&m, 1.0).unwrap();
        assert!(one.sub(&m.scaled(2.0)).unwrap().max_abs() < 1e-11);
        assert!(frac_laplacian(&m, -1.0).is_err());
    }

    #[test]
    fn second_derivative_examples() {
        let g = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let u = SpectralField::from_fn(g, |x| (2.0 * x[0] + 3.0 * x[1]).cos());
        let h = second_derivatives(&u);
        let xi = [2.0, 3.0];
        for i in 0..2 {
            for j in 0..2 {
                let expect = u.scaled(-xi[i] * xi[j]);
                assert!(h[i * 2 + j].sub(&expect).unwrap().max_abs() < 1e-10);
            }
        }
        let c = SpectralField::from_fn(g, |_| 1.0);
        assert!(second_derivatives(&c).iter().all(|e| e.max_abs() < 1e-12));
    }

    #[test]
    fn second_derivative_matches_central_difference() {
        let g = GridSpec::new(1, 512, 20.0).unwrap();
        let f = |x: f64| (-x * x).exp();
        let u = SpectralField::from_fn(g, |x| f(x[0]));
        let uxx = &second_derivatives(&u)[0];
        let h = 1e-3;
        for i in (100..400).step_by(37) {
            let x = g.coordinate(i);
            let fd = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            assert!((uxx.samples()[i] - fd).abs() < 5e-6, "x={x}");
        }
    }

    #[test]
    fn binary_and_csv_io() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(2, 8, 1.5).unwrap();
        let u = SpectralField::from_fn(g, |x| x[0] - 2.0 * x[1]);
        let path = dir.path().join("u.bin");
        u.write_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 24 + 64 * 8);
        assert_eq!(&bytes[0..8], &2u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &8u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
        assert_eq!(SpectralField::read_binary(&path).unwrap(), u);
        assert!(u.write_csv(&dir.path().join("u.csv")).is_err());
        let v = SpectralField::from_fn(grid1(4), |x| x[0]);
        let csv = dir.path().join("v.csv");
        v.write_csv(&csv).unwrap();
        let text = std::fs::read_to_string(csv).unwrap();
        assert!(text.starts_with("x,u\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
