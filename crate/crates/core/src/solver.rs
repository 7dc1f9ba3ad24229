//! Exact Fourier-multiplier evolution.
//!
//! For time-only coefficients the solution operator from `s` to `t` is the
//! multiplier `exp(−ξᵀ B ξ)` with `B = ∫_s^t A(r) dr`, so homogeneous solves
//! carry no time-stepping error. The Duhamel term is integrated with the
//! trapezoidal rule over the partition nodes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::data::Forcing;
use crate::degeneracy::{CoefficientPath, DegeneracyProfile};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::spectral::{self, GridSpec, SpectralField};

/// Strictly increasing nodes `0 = t_0 < t_1 < … < t_K = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition {
    nodes: Vec<f64>,
}

impl TimePartition {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Validation("a partition needs at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Validation(format!("partition must start at 0, got {}", nodes[0])));
        }
        if !nodes.windows(2).all(|w| w[0] < w[1]) || !nodes.iter().all(|t| t.is_finite()) {
            return Err(Error::Validation("partition nodes must be finite and strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    /// `K` equal steps on `[0, T]`.
    pub fn uniform(steps: usize, horizon: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Validation("need at least one step".into()));
        }
        let mut nodes: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
        nodes[steps] = horizon;
        Self::new(nodes)
    }

    /// `t_k = T·ratio^{K−k}` for `k = 1..K`, plus `t_0 = 0`.
    ///
    /// With `ratio = None` the smallest positive node is `10⁻⁶·T`.
    pub fn geometric(steps: usize, horizon: f64, ratio: Option<f64>) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Validation("a geometric partition needs at least two steps".into()));
        }
        let ratio = ratio.unwrap_or_else(|| 1e-6f64.powf(1.0 / (steps - 1) as f64));
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Validation(format!("geometric ratio must lie in (0, 1), got {ratio}")));
        }
        let mut nodes = vec![0.0];
        nodes.extend((1..=steps).map(|k| horizon * ratio.powi((steps - k) as i32)));
        nodes[steps] = horizon;
        Self::new(nodes)
    }

    /// Inserts the midpoint of every interval.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.horizon());
        Self { nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Number of intervals `K`.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Trapezoidal weights for `∫_0^{t_k}` over the first `k` intervals.
    pub fn trapezoid_weights(&self, k: usize) -> Vec<f64> {
        let mut w = vec![0.0; k + 1];
        for i in 0..k {
            let h = 0.5 * (self.nodes[i + 1] - self.nodes[i]);
            w[i] += h;
            w[i + 1] += h;
        }
        w
    }
}

/// `B = ∫_s^t A(r) dr`.
pub fn accumulate_coefficients(path: &CoefficientPath, s: f64, t: f64) -> Result<DMatrix<f64>> {
    path.accumulate(s, t)
}

/// `ξ_a ξ_b`, except that mixed products involving the unpaired Nyquist
/// index vanish. Otherwise the grid symbol is not Hermitian there and
/// propagators stop composing once samples are projected back to reals.
fn cross_product(xi: &[f64], a: usize, b: usize, nyq: f64) -> f64 {
    if a != b && (xi[a].abs() == nyq || xi[b].abs() == nyq) {
        0.0
    } else {
        xi[a] * xi[b]
    }
}

/// Products `ξ_a ξ_b` per frequency, so quadratic forms cost `d²` flops.
struct FrequencyProducts {
    dim: usize,
    products: Vec<[f64; 9]>,
}

impl FrequencyProducts {
    fn new(grid: &GridSpec) -> Self {
        let dim = grid.dim();
        let nyq = grid.nyquist();
        let mut products = vec![[0.0; 9]; grid.len()];
        grid.for_each_frequency(|k, xi| {
            for a in 0..dim {
                for b in 0..dim {
                    products[k][a * 3 + b] = cross_product(xi, a, b, nyq);
                }
            }
        });
        Self { dim, products }
    }

    fn quadratic(&self, k: usize, b: &DMatrix<f64>) -> f64 {
        let p = &self.products[k];
        let mut q = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                q += b[(i, j)] * p[i * 3 + j];
            }
        }
        q
    }

    /// `acc += weight · exp(−ξᵀBξ) · spectrum`.
    fn accumulate(&self, acc: &mut [Complex64], spectrum: &[Complex64], b: &DMatrix<f64>, weight: f64) {
        for (k, (a, s)) in acc.iter_mut().zip(spectrum).enumerate() {
            *a += s * (weight * (-self.quadratic(k, b)).exp());
        }
    }
}

/// The multiplier `exp(−ξᵀBξ)` of the solution operator from `s` to `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorSymbol {
    pub s: f64,
    pub t: f64,
    pub b: DMatrix<f64>,
}

impl PropagatorSymbol {
    pub fn new(path: &CoefficientPath, s: f64, t: f64) -> Result<Self> {
        if s > t {
            return Err(Error::Domain(format!("cannot propagate backwards from {s} to {t}")));
        }
        Ok(Self {
            s,
            t,
            b: path.accumulate(s, t)?,
        })
    }

    pub fn value(&self, xi: &[f64]) -> f64 {
        let mut q = 0.0;
        for i in 0..xi.len() {
            for j in 0..xi.len() {
                q += self.b[(i, j)] * xi[i] * xi[j];
            }
        }
        (-q).exp()
    }

    /// Grid version of `value`, with the Nyquist convention of `cross_product`.
    pub fn grid_value(&self, xi: &[f64], nyq: f64) -> f64 {
        let mut q = 0.0;
        for i in 0..xi.len() {
            for j in 0..xi.len() {
                q += self.b[(i, j)] * cross_product(xi, i, j, nyq);
            }
        }
        (-q).exp()
    }

    pub fn apply(&self, u: &SpectralField) -> SpectralField {
        let nyq = u.grid().nyquist();
        u.apply_multiplier(|xi| self.grid_value(xi, nyq))
    }
}

/// `𝒯_{s,t} u`.
pub fn propagate(u: &SpectralField, path: &CoefficientPath, s: f64, t: f64) -> Result<SpectralField> {
    check_dims(u.grid(), path)?;
    Ok(PropagatorSymbol::new(path, s, t)?.apply(u))
}

fn check_dims(grid: &GridSpec, path: &CoefficientPath) -> Result<()> {
    if grid.dim() != path.dim() {
        return Err(Error::Validation(format!(
            "grid dimension {} does not match coefficient dimension {}",
            grid.dim(),
            path.dim()
        )));
    }
    Ok(())
}

/// Heat kernel `p(t, ·) = ℱ⁻¹[exp(−ξᵀ B(0,t) ξ)]` sampled on the grid,
/// centred at the origin.
pub fn kernel(path: &CoefficientPath, t: f64, grid: &GridSpec) -> Result<SpectralField> {
    check_dims(grid, path)?;
    let b = path.accumulate(0.0, t)?;
    let lam = SymmetricEigen::new(b.clone()).eigenvalues.min();
    if !(lam > 0.0) {
        return Err(Error::DegenerateKernel(t));
    }
    let symbol = PropagatorSymbol { s: 0.0, t, b };
    let nyq = grid.nyquist();
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    grid.for_each_frequency(|k, xi| {
        let idx = grid.unflatten(k);
        // Grid starts at −L/2: shift by (−1)^{Σ k}.
        let parity: i64 = (0..grid.dim()).map(|a| grid.signed_index(idx[a])).sum();
        let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        spec[k] = Complex64::new(sign * symbol.grid_value(xi, nyq), 0.0);
    });
    let field = SpectralField::from_spectrum(*grid, spec)?;
    Ok(field.scaled(1.0 / grid.cell_volume()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotNorms {
    pub lp: f64,
    pub h2p: f64,
}

/// Snapshots `u(t_k)` with per-snapshot norms and diagnostics.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub partition: TimePartition,
    pub snapshots: Vec<SpectralField>,
    /// Exponent used for [`SolveReport::norms`].
    pub p: f64,
    pub norms: Vec<SnapshotNorms>,
    pub weak_residuals: Vec<Option<f64>>,
    pub kernel_mass: Option<f64>,
}

impl SolveReport {
    pub fn new(partition: TimePartition, snapshots: Vec<SpectralField>) -> Result<Self> {
        if snapshots.len() != partition.nodes().len() {
            return Err(Error::SizeMismatch {
                expected: partition.nodes().len(),
                got: snapshots.len(),
            });
        }
        let mut report = Self {
            weak_residuals: vec![None; snapshots.len()],
            partition,
            snapshots,
            p: 2.0,
            norms: Vec::new(),
            kernel_mass: None,
        };
        report.recompute_norms(2.0)?;
        Ok(report)
    }

    pub fn recompute_norms(&mut self, p: f64) -> Result<()> {
        self.p = p;
        self.norms = self
            .snapshots
            .iter()
            .map(|u| {
                Ok(SnapshotNorms {
                    lp: u.lp_norm(p),
                    h2p: spectral::bessel_norm(u, 2.0, p)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        self.partition.nodes()
    }

    pub fn last(&self) -> &SpectralField {
        self.snapshots.last().unwrap()
    }

    pub fn max_weak_residual(&self) -> Option<f64> {
        self.weak_residuals.iter().flatten().copied().reduce(f64::max)
    }

    /// Fills the weak residual of every snapshot against `test`.
    pub fn attach_weak_residuals(
        &mut self,
        forcing: &Forcing,
        u0: &SpectralField,
        path: &CoefficientPath,
        test: &SpectralField,
    ) -> Result<()> {
        let residuals = weak_residuals_all(self, forcing, u0, path, test)?;
        self.weak_residuals = residuals.into_iter().map(Some).collect();
        Ok(())
    }

    /// Writes `meta`, `snap_<k>.bin` and `norms.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path, meta: &[(String, String)]) -> Result<()> {
        fs::create_dir_all(dir)?;
        let grid = self.snapshots[0].grid();
        let mut text = String::new();
        let _ = writeln!(text, "dim = {}", grid.dim());
        let _ = writeln!(text, "n = {}", grid.points_per_axis());
        let _ = writeln!(text, "period = {:?}", grid.period());
        let _ = writeln!(text, "steps = {}", self.partition.steps());
        let _ = writeln!(text, "horizon = {:?}", self.partition.horizon());
        let _ = writeln!(text, "p = {:?}", self.p);
        if let Some(m) = self.kernel_mass {
            let _ = writeln!(text, "kernel_mass = {m:?}");
        }
        if let Some(r) = self.max_weak_residual() {
            let _ = writeln!(text, "max_weak_residual = {r:?}");
        }
        for (k, v) in meta {
            let _ = writeln!(text, "{k} = {v}");
        }
        fs::write(dir.join("meta"), text)?;
        let mut csv = String::from("k,t,Lp,H2p,weak_residual\n");
        for (k, (t, n)) in self.times().iter().zip(&self.norms).enumerate() {
            let wr = self.weak_residuals[k].map(|r| format!("{r:?}")).unwrap_or_default();
            let _ = writeln!(csv, "{k},{t:?},{:?},{:?},{wr}", n.lp, n.h2p);
        }
        fs::write(dir.join("norms.csv"), csv)?;
        for (k, u) in self.snapshots.iter().enumerate() {
            u.write_binary(&dir.join(format!("snap_{k}.bin")))?;
        }
        Ok(())
    }
}

/// `u(t_k) = 𝒯_{0,t_k} u0 + Σ_i w_i 𝒯_{s_i,t_k} f(s_i)` where `cumulative[k]`
/// is `∫_0^{t_k} A` in the clock of `nodes`.
fn evolve_on_nodes(
    u0: &SpectralField,
    nodes: &[f64],
    cumulative: &[DMatrix<f64>],
    forcing: impl Fn(usize) -> Option<SpectralField>,
) -> Result<Vec<SpectralField>> {
    let grid = *u0.grid();
    let products = FrequencyProducts::new(&grid);
    let u0_hat = u0.spectrum();
    let forcing_at: Vec<Option<SpectralField>> = (0..nodes.len()).map(&forcing).collect();
    let forcing_hat: Vec<Option<&[Complex64]>> = forcing_at.iter().map(|f| f.as_ref().map(|f| f.spectrum())).collect();
    let weight = |i: usize, k: usize| {
        let left = if i > 0 { nodes[i] - nodes[i - 1] } else { 0.0 };
        let right = if i < k { nodes[i + 1] - nodes[i] } else { 0.0 };
        0.5 * (left + right)
    };
    let mut out = Vec::with_capacity(nodes.len());
    out.push(u0.clone());
    for k in 1..nodes.len() {
        // No diffusion yet: stay in physical space so u0 is reproduced bit for bit.
        if cumulative[k].iter().all(|v| *v == 0.0) {
            let mut u = u0.samples().to_vec();
            for (i, f) in forcing_at.iter().enumerate().take(k + 1) {
                let Some(f) = f else { continue };
                let w = weight(i, k);
                u.iter_mut().zip(f.samples()).for_each(|(u, f)| *u += w * f);
            }
            out.push(SpectralField::from_samples(grid, u)?);
            continue;
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
        products.accumulate(&mut acc, u0_hat, &cumulative[k], 1.0);
        for i in 0..=k {
            let Some(f_hat) = forcing_hat[i] else { continue };
            let b = &cumulative[k] - &cumulative[i];
            products.accumulate(&mut acc, f_hat, &b, weight(i, k));
        }
        out.push(SpectralField::from_spectrum(grid, acc)?);
    }
    Ok(out)
}

fn cumulative_at_nodes(path: &CoefficientPath, nodes: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    nodes.iter().map(|t| path.accumulate(0.0, *t)).collect()
}

/// `u(t_k) = 𝒯_{0,t_k} u0`.
pub fn solve_homogeneous(u0: &SpectralField, path: &CoefficientPath, partition: &TimePartition) -> Result<SolveReport> {
    solve_duhamel(u0, &Forcing::Zero, path, partition)
}

/// `u(t_k) = 𝒯_{0,t_k} u0 + ∫_0^{t_k} 𝒯_{s,t_k} f(s) ds`, trapezoidal in `s`.
pub fn solve_duhamel(
    u0: &SpectralField,
    forcing: &Forcing,
    path: &CoefficientPath,
    partition: &TimePartition,
) -> Result<SolveReport> {
    check_dims(u0.grid(), path)?;
    let nodes = partition.nodes();
    let cumulative = cumulative_at_nodes(path, nodes)?;
    let snaps = evolve_on_nodes(u0, nodes, &cumulative, |i| forcing.at(nodes[i]))?;
    SolveReport::new(partition.clone(), snaps)
}

/// Solves in the intrinsic clock `τ = β(t)`, where the coefficients become
/// `Ã(τ) = A(φ(τ))·φ'(τ)` with `φ = β⁻¹`, and maps back via `u(t) = v(β(t))`.
///
/// Requires `δ ≥ ε > 0` on the horizon. With forcing, `f̃(τ) = f(φ(τ))φ'(τ)`
/// is integrated by the trapezoidal rule in `τ`, so agreement with
/// [`solve_duhamel`] is then only up to the time-quadrature error.
pub fn time_change_solve(
    u0: &SpectralField,
    forcing: &Forcing,
    path: &CoefficientPath,
    profile: &DegeneracyProfile,
    partition: &TimePartition,
) -> Result<SolveReport> {
    check_dims(u0.grid(), path)?;
    let horizon = partition.horizon();
    let floor = min_on_interval(profile, horizon)?;
    if !(floor > 0.0) {
        return Err(Error::Precondition(format!(
            "time change needs δ ≥ ε > 0 on [0, {horizon}], but min δ = {floor}"
        )));
    }
    let profile = if profile.horizon() < horizon {
        profile.with_horizon(horizon)?
    } else {
        profile.clone()
    };
    let clock: Vec<f64> = partition
        .nodes()
        .iter()
        .map(|t| profile.cumulative_delta(*t))
        .collect::<Result<_>>()?;
    if !clock.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Precondition("intrinsic clock is not strictly increasing".into()));
    }
    let dim = path.dim();
    // φ'(τ) = 1/δ(φ(τ)).
    let transformed = |tau: f64, i: usize, j: usize| -> f64 {
        let t = profile.inverse_cumulative(tau).unwrap_or(f64::NAN);
        path.entry(i, j).eval(t) / profile.function().eval(t)
    };
    let opts = *profile.function().options();
    let mut cumulative = vec![DMatrix::zeros(dim, dim)];
    for w in clock.windows(2) {
        let mut b = cumulative.last().unwrap().clone();
        for i in 0..dim {
            for j in i..dim {
                let r = quadrature::adaptive(&|tau| transformed(tau, i, j), w[0], w[1], opts.abs_tol, opts.max_depth);
                if !r.value.is_finite() || (!r.converged && r.error > 1e3 * opts.abs_tol) {
                    return Err(Error::Quadrature {
                        achieved: r.error,
                        requested: opts.abs_tol,
                    });
                }
                b[(i, j)] += r.value;
                if i != j {
                    b[(j, i)] += r.value;
                }
            }
        }
        cumulative.push(b);
    }
    let nodes = partition.nodes();
    let snaps = evolve_on_nodes(u0, &clock, &cumulative, |i| {
        forcing.at(nodes[i]).map(|f| {
            let t = nodes[i];
            f.scaled(1.0 / profile.function().eval(t))
        })
    })?;
    SolveReport::new(partition.clone(), snaps)
}

fn min_on_interval(profile: &DegeneracyProfile, horizon: f64) -> Result<f64> {
    let mut m = f64::INFINITY;
    for i in 0..=8192 {
        m = m.min(profile.eval_delta(horizon * i as f64 / 8192.0)?);
    }
    for k in 13..60 {
        m = m.min(profile.eval_delta(horizon * 0.5f64.powi(k))?);
    }
    Ok(m)
}

/// `(A + εI, δ + ε)`.
pub fn epsilon_regularize(
    path: &CoefficientPath,
    profile: &DegeneracyProfile,
    eps: f64,
) -> Result<(CoefficientPath, DegeneracyProfile)> {
    Ok((path.regularize(eps)?, profile.shifted(eps)?))
}

/// `|(u(t_k),φ) − (u0,φ) − ∫_0^{t_k} a^{ij}(s)(u(s), φ_{x^i x^j}) ds − ∫_0^{t_k} (f(s),φ) ds|`
/// with trapezoidal time quadrature on the report's partition.
pub fn weak_residual(
    report: &SolveReport,
    forcing: &Forcing,
    u0: &SpectralField,
    path: &CoefficientPath,
    test: &SpectralField,
    k: usize,
) -> Result<f64> {
    if k >= report.snapshots.len() {
        return Err(Error::OutOfRange {
            index: k as i32,
            min: 0,
            max: report.snapshots.len() as i32 - 1,
        });
    }
    Ok(weak_residuals_all(report, forcing, u0, path, test)?[k])
}

fn weak_residuals_all(
    report: &SolveReport,
    forcing: &Forcing,
    u0: &SpectralField,
    path: &CoefficientPath,
    test: &SpectralField,
) -> Result<Vec<f64>> {
    let d = path.dim();
    let hess = spectral::second_derivatives(test);
    let nodes = report.times();
    let base = u0.inner(test)?;
    // Integrand g(s) = Σ a^{ij}(s)(u(s), φ_ij) + (f(s), φ) at each node.
    let mut integrand = Vec::with_capacity(nodes.len());
    for (u, &s) in report.snapshots.iter().zip(nodes) {
        let a = path.matrix_at(s);
        let mut g = 0.0;
        for i in 0..d {
            for j in 0..d {
                let aij = a[(i, j)];
                if aij != 0.0 {
                    g += aij * u.inner(&hess[i * d + j])?;
                }
            }
        }
        if let Some(f) = forcing.at(s) {
            g += f.inner(test)?;
        }
        integrand.push(g);
    }
    let mut out = Vec::with_capacity(nodes.len());
    let mut running = 0.0;
    for (k, u) in report.snapshots.iter().enumerate() {
        if k > 0 {
            running += 0.5 * (nodes[k] - nodes[k - 1]) * (integrand[k] + integrand[k - 1]);
        }
        out.push((u.inner(test)? - base - running).abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timefn::FnSpec;
    use std::f64::consts::PI;

    fn gauss(grid: GridSpec, var: f64) -> SpectralField {
        SpectralField::from_fn(grid, move |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (-r2 / (2.0 * var)).exp() / (2.0 * PI * var).powf(0.5 * x.len() as f64)
        })
    }

    #[test]
    fn partition_constructors() {
        let g = TimePartition::geometric(10, 2.0, None).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert!((g.nodes()[1] - 2e-6).abs() < 1e-18);
        assert_eq!(g.horizon(), 2.0);
        assert_eq!(g.steps(), 10);
        assert_eq!(g.refined().steps(), 20);
        assert!(TimePartition::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimePartition::new(vec![0.1, 0.5]).is_err());
        let w = TimePartition::uniform(4, 1.0).unwrap().trapezoid_weights(4);
        assert_eq!(w, vec![0.125, 0.25, 0.25, 0.25, 0.125]);
    }

    #[test]
    fn heat_gaussian_variance_grows_by_2t() {
        let grid = GridSpec::new(1, 1024, 40.0).unwrap();
        let path = CoefficientPath::constant(1, &[1.0], 1.0).unwrap();
        let u0 = gauss(grid, 0.5);
        let u = propagate(&u0, &path, 0.0, 0.75).unwrap();
        let exact = gauss(grid, 0.5 + 1.5);
        assert!(u.sub(&exact).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_leave_data_unchanged() {
        let grid = GridSpec::new(1, 64, 10.0).unwrap();
        let path = CoefficientPath::constant(1, &[0.0], 1.0).unwrap();
        let u0 = gauss(grid, 0.3);
        let u = propagate(&u0, &path, 0.1, 0.9).unwrap();
        assert!(u.sub(&u0).unwrap().max_abs() < 1e-15);
        assert!(propagate(&u0, &path, 0.9, 0.1).is_err());
    }

    #[test]
    fn mode_is_an_eigenfunction() {
        let grid = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let path = CoefficientPath::constant(2, &[2.0, 1.0, 1.0, 2.0], 1.0).unwrap();
        let u0 = SpectralField::from_fn(grid, |x| (x[0] + 2.0 * x[1]).cos());
        let t = 0.05;
        // ξᵀBξ with ξ = (1, 2): t·(2 + 4 + 8) = 14t.
        let u = propagate(&u0, &path, 0.0, t).unwrap();
        assert!(u.sub(&u0.scaled((-14.0 * t).exp())).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn kernel_is_a_gaussian_with_unit_mass() {
        let grid = GridSpec::new(1, 512, 30.0).unwrap();
        let path = CoefficientPath::constant(1, &[1.0], 1.0).unwrap();
        let p = kernel(&path, 0.4, &grid).unwrap();
        assert!(p.sub(&gauss(grid, 0.8)).unwrap().max_abs() < 1e-12);
        assert!((p.integral() - 1.0).abs() < 1e-12);
        let zero = CoefficientPath::constant(1, &[0.0], 1.0).unwrap();
        assert!(matches!(kernel(&zero, 0.4, &grid), Err(Error::DegenerateKernel(_))));
    }

    #[test]
    fn kernel_for_oscillatory_profile() {
        let grid = GridSpec::new(1, 1024, 16.0).unwrap();
        let profile = DegeneracyProfile::oscillatory(1.0).unwrap();
        let path = CoefficientPath::from_profile(1, &profile);
        let p = kernel(&path, 0.1, &grid).unwrap();
        let beta = profile.cumulative_delta(0.1).unwrap();
        assert!(p.samples().iter().all(|v| *v > -1e-8));
        assert!((p.integral() - 1.0).abs() < 1e-10);
        assert!(p.sub(&gauss(grid, 2.0 * beta)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn homogeneous_solve_snapshots() {
        let grid = GridSpec::new(1, 256, 20.0).unwrap();
        let path = CoefficientPath::constant(1, &[0.0], 1.0).unwrap();
        let u0 = gauss(grid, 0.5);
        let part = TimePartition::uniform(5, 1.0).unwrap();
        let rep = solve_homogeneous(&u0, &path, &part).unwrap();
        assert_eq!(rep.snapshots.len(), 6);
        assert_eq!(rep.snapshots[0], u0);
        assert!(rep.snapshots.iter().all(|s| s.sub(&u0).unwrap().max_abs() < 1e-15));
    }

    #[test]
    fn duhamel_zero_coefficients_integrate_forcing() {
        let grid = GridSpec::new(1, 64, 10.0).unwrap();
        let path = CoefficientPath::constant(1, &[0.0], 1.0).unwrap();
        let u0 = gauss(grid, 0.5);
        let g = SpectralField::from_fn(grid, |x| (x[0]).sin());
        // f = (1 + 2t) g has trapezoid-exact integral (t + t²) g.
        let f = Forcing::Separable {
            time: FnSpec::expr("1 + 2*t").unwrap(),
            space: g.clone(),
        };
        let part = TimePartition::uniform(7, 1.0).unwrap();
        let rep = solve_duhamel(&u0, &f, &path, &part).unwrap();
        for (u, t) in rep.snapshots.iter().zip(part.nodes()) {
            let exact = u0.add(&g.scaled(t + t * t)).unwrap();
            assert!(u.sub(&exact).unwrap().max_abs() < 1e-13);
        }
    }

    #[test]
    fn duhamel_matches_scalar_ode_per_mode() {
        // û' = −|ξ|²û + e^s, û(0) = 0: û(t) = (e^t − e^{−|ξ|²t}) / (1 + |ξ|²).
        let grid = GridSpec::new(1, 32, 2.0 * PI).unwrap();
        let path = CoefficientPath::constant(1, &[1.0], 1.0).unwrap();
        let mode = SpectralField::from_fn(grid, |x| (2.0 * x[0]).cos());
        let f = Forcing::Separable {
            time: FnSpec::expr("exp(t)").unwrap(),
            space: mode.clone(),
        };
        let u0 = SpectralField::zeros(grid);
        let mut errors = Vec::new();
        for steps in [64, 128] {
            let part = TimePartition::uniform(steps, 1.0).unwrap();
            let rep = solve_duhamel(&u0, &f, &path, &part).unwrap();
            let amp = ((1f64).exp() - (-4f64).exp()) / 5.0;
            errors.push(rep.last().sub(&mode.scaled(amp)).unwrap().max_abs());
        }
        assert!(errors[0] < 1e-3);
        let order = (errors[0] / errors[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn time_change_doubles_horizon_for_constant_two() {
        let grid = GridSpec::new(1, 128, 20.0).unwrap();
        let profile = DegeneracyProfile::constant(2.0, 1.0).unwrap();
        let path = CoefficientPath::from_profile(1, &profile);
        let u0 = gauss(grid, 0.5);
        let part = TimePartition::uniform(4, 1.0).unwrap();
        let direct = solve_homogeneous(&u0, &path, &part).unwrap();
        let changed = time_change_solve(&u0, &Forcing::Zero, &path, &profile, &part).unwrap();
        for (a, b) in direct.snapshots.iter().zip(&changed.snapshots) {
            assert!(a.sub(b).unwrap().max_abs() < 1e-12);
        }
        let degenerate = DegeneracyProfile::power(1.0, 1.0).unwrap();
        let dpath = CoefficientPath::from_profile(1, &degenerate);
        assert!(matches!(
            time_change_solve(&u0, &Forcing::Zero, &dpath, &degenerate, &part),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn time_change_with_non_proportional_coefficients() {
        let grid = GridSpec::new(2, 32, 12.0).unwrap();
        let profile = DegeneracyProfile::parse("expr(\"t + 0.1\")", 1.0).unwrap();
        let path = CoefficientPath::new(
            2,
            vec![
                "expr(\"t + 0.1\")".parse().unwrap(),
                "expr(\"0.05*cos(t)\")".parse().unwrap(),
                "expr(\"0.05*cos(t)\")".parse().unwrap(),
                "expr(\"0.5 + t^2\")".parse().unwrap(),
            ],
            1.0,
        )
        .unwrap();
        path.validate(&profile, &[0.0, 0.5, 1.0]).unwrap_err();
        let u0 = gauss(grid, 0.7);
        let part = TimePartition::uniform(4, 1.0).unwrap();
        let direct = solve_homogeneous(&u0, &path, &part).unwrap();
        let changed = time_change_solve(&u0, &Forcing::Zero, &path, &profile, &part).unwrap();
        for (a, b) in direct.snapshots.iter().zip(&changed.snapshots) {
            assert!(a.sub(b).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn regularization_shifts_path_and_profile() {
        let profile = DegeneracyProfile::power(1.0, 1.0).unwrap();
        let path = CoefficientPath::constant(1, &[0.0], 1.0).unwrap();
        let (p, d) = epsilon_regularize(&path, &profile, 1.0).unwrap();
        assert_eq!(p.matrix_at(0.3)[(0, 0)], 1.0);
        assert_eq!(d.eval_delta(0.0).unwrap(), 1.0);
        assert!(epsilon_regularize(&path, &profile, 0.0).is_err());
    }

    #[test]
    fn weak_residual_trivial_and_corrupted() {
        let grid = GridSpec::new(1, 256, 20.0).unwrap();
        let zero = CoefficientPath::constant(1, &[0.0], 1.0).unwrap();
        let u0 = gauss(grid, 0.5);
        let test = gauss(grid, 1.0);
        let part = TimePartition::uniform(8, 1.0).unwrap();
        let rep = solve_homogeneous(&u0, &zero, &part).unwrap();
        assert!(weak_residual(&rep, &Forcing::Zero, &u0, &zero, &test, 8).unwrap() < 1e-15);

        let heat = CoefficientPath::constant(1, &[1.0], 1.0).unwrap();
        let mut rep = solve_homogeneous(&u0, &heat, &TimePartition::uniform(128, 0.5).unwrap()).unwrap();
        let clean = weak_residual(&rep, &Forcing::Zero, &u0, &heat, &test, 128).unwrap();
        let pairing = rep.snapshots[128].inner(&test).unwrap();
        rep.snapshots[128] = rep.snapshots[128].scaled(1.01);
        let dirty = weak_residual(&rep, &Forcing::Zero, &u0, &heat, &test, 128).unwrap();
        assert!(((dirty - clean) - 0.01 * pairing).abs() < 1e-3 * 0.01 * pairing + 2.0 * clean);
    }
}
