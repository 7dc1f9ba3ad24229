//! The ellipticity floor `δ(t)`, its cumulative integral `β(t) = ∫_0^t δ`,
//! the generalized inverse `φ = β^{-1}`, and the coefficient path `A(t)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureOptions;
use crate::timefn::{FnSpec, TimeFunction};

const BISECTION_STEPS: usize = 60;
const BOUND_SAMPLES: usize = 4096;

fn sample_times(horizon: f64) -> impl Iterator<Item = f64> {
    let uniform = (0..=BOUND_SAMPLES).map(move |i| horizon * i as f64 / BOUND_SAMPLES as f64);
    let near_zero = (1..48).map(move |m| horizon * 0.5f64.powi(m + 12));
    uniform.chain(near_zero)
}

/// A time-dependent ellipticity floor on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyProfile {
    func: TimeFunction,
    bound: f64,
}

impl DegeneracyProfile {
    /// Builds a profile and checks `0 ≤ δ(t) ≤ M` on a sample grid.
    pub fn new(spec: FnSpec, horizon: f64) -> Result<Self> {
        Self::from_function(TimeFunction::new(spec, horizon))
    }

    pub fn with_options(spec: FnSpec, horizon: f64, opts: QuadratureOptions) -> Result<Self> {
        Self::from_function(TimeFunction::with_options(spec, horizon, opts))
    }

    pub fn from_function(func: TimeFunction) -> Result<Self> {
        let horizon = func.horizon();
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Validation(format!("profile horizon must be positive, got {horizon}")));
        }
        let mut sampled_max: f64 = 0.0;
        for t in sample_times(horizon) {
            let d = func.eval(t);
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::Validation(format!(
                    "profile {} is not a finite nonnegative value at t = {t}: {d}",
                    func.spec()
                )));
            }
            sampled_max = sampled_max.max(d);
        }
        let bound = func.spec().known_bound(horizon).unwrap_or(sampled_max).max(sampled_max);
        let bound = if bound > 0.0 { bound } else { f64::MIN_POSITIVE };
        Ok(Self { func, bound })
    }

    pub fn parse(spec: &str, horizon: f64) -> Result<Self> {
        Self::new(spec.parse()?, horizon)
    }

    pub fn constant(c: f64, horizon: f64) -> Result<Self> {
        Self::new(FnSpec::Constant(c), horizon)
    }

    pub fn power(alpha: f64, horizon: f64) -> Result<Self> {
        Self::new(FnSpec::Power(alpha), horizon)
    }

    pub fn oscillatory(horizon: f64) -> Result<Self> {
        Self::new(FnSpec::Oscillatory, horizon)
    }

    pub fn spec(&self) -> &FnSpec {
        self.func.spec()
    }

    pub fn function(&self) -> &TimeFunction {
        &self.func
    }

    pub fn horizon(&self) -> f64 {
        self.func.horizon()
    }

    /// Upper bound `M` for `δ` on the horizon.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::from_function(self.func.with_horizon(horizon))
    }

    /// `δ_ε = δ + ε`.
    pub fn shifted(&self, eps: f64) -> Result<Self> {
        Self::from_function(TimeFunction::with_options(
            FnSpec::Shift(Box::new(self.spec().clone()), eps),
            self.horizon(),
            *self.func.options(),
        ))
    }

    pub fn eval_delta(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain(format!("negative time {t}")));
        }
        Ok(self.func.eval(t))
    }

    /// `β(t) = ∫_0^t δ(s) ds`.
    pub fn cumulative_delta(&self, t: f64) -> Result<f64> {
        self.func.integral_to(t)
    }

    /// Generalized inverse `φ(h) = inf { t ≥ 0 : β(t) ≥ h }` on `[0, horizon]`.
    pub fn inverse_cumulative(&self, h: f64) -> Result<f64> {
        self.inverse_within(h, self.horizon())
    }

    fn inverse_within(&self, h: f64, upper: f64) -> Result<f64> {
        if h < 0.0 || h.is_nan() {
            return Err(Error::Domain(format!("negative level {h}")));
        }
        if h == 0.0 {
            return Ok(0.0);
        }
        let max = self.cumulative_delta(upper)?;
        if h > max {
            return Err(Error::Range { requested: h, max });
        }
        let (mut lo, mut hi) = (0.0, upper);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.cumulative_delta(mid)? >= h {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Lebesgue measure of `{ t ∈ [0, t0] : h ≤ β(t) < 4h }`.
    pub fn levelset_measure(&self, h: f64, t0: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::Domain(format!("level must be positive, got {h}")));
        }
        if !(t0 > 0.0) {
            return Err(Error::Domain(format!("t0 must be positive, got {t0}")));
        }
        let upper = t0.max(self.horizon());
        let at_t0 = self.cumulative_delta(t0)?;
        if at_t0 < h {
            return Ok(0.0);
        }
        let lower = self.inverse_within(h, upper)?.min(t0);
        let top = if at_t0 < 4.0 * h {
            t0
        } else {
            self.inverse_within(4.0 * h, upper)?.min(t0)
        };
        Ok((top - lower).max(0.0))
    }

    /// Least-squares fit of `log |level set| = log N0 + (1/β) log h`.
    pub fn fit_beta_exponent(&self, t0: f64, h_grid: &[f64]) -> Result<BetaFit> {
        if h_grid.len() < 4 {
            return Err(Error::Precondition(format!(
                "beta fit needs at least 4 levels, got {}",
                h_grid.len()
            )));
        }
        let (hmin, hmax) = h_grid
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), h| (lo.min(*h), hi.max(*h)));
        if !(hmin > 0.0) || hmax / hmin < 100.0 {
            return Err(Error::Precondition(
                "beta fit levels must be positive and span at least two decades".into(),
            ));
        }
        let measures = h_grid
            .iter()
            .map(|h| self.levelset_measure(*h, t0))
            .collect::<Result<Vec<_>>>()?;
        if measures.iter().all(|m| *m == 0.0) {
            return Err(Error::DegenerateFit("every level set is empty".into()));
        }
        if let Some(i) = measures.iter().position(|m| *m <= 0.0) {
            return Err(Error::DegenerateFit(format!(
                "level set at h = {} is empty; restrict the grid to smaller h",
                h_grid[i]
            )));
        }
        let xs: Vec<f64> = h_grid.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = measures.iter().map(|m| m.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        if !(slope > 0.0) {
            return Err(Error::DegenerateFit(format!("nonpositive slope {slope}")));
        }
        let residual = (xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        Ok(BetaFit {
            beta_hat: 1.0 / slope,
            n0_hat: intercept.exp(),
            residual,
            measures,
        })
    }

    /// Checks the stored invariants on a sample grid: bounds, monotone
    /// cumulative, and (for registered closed forms) `β' = δ`.
    pub fn check_invariants(&self) -> Result<()> {
        let horizon = self.horizon();
        let mut prev = 0.0;
        for i in 1..=256 {
            let t = horizon * i as f64 / 256.0;
            let d = self.func.eval(t);
            if d < 0.0 || d > self.bound * (1.0 + 1e-12) {
                return Err(Error::Validation(format!("δ({t}) = {d} outside [0, {}]", self.bound)));
            }
            let b = self.cumulative_delta(t)?;
            if b < prev {
                return Err(Error::Validation(format!("β decreases at t = {t}")));
            }
            prev = b;
        }
        if self.spec().has_closed_cumulative() {
            // Derivative check away from 0, where oscillating profiles are resolved by the step.
            for i in 0..=64 {
                let t = horizon * (0.1 + 0.9 * i as f64 / 64.0);
                let step = 1e-6 * t;
                if t + step > horizon || self.spec().breakpoints().iter().any(|b| (b - t).abs() < 2.0 * step) {
                    continue;
                }
                let deriv = (self.cumulative_delta(t + step)? - self.cumulative_delta(t - step)?) / (2.0 * step);
                let d = self.func.eval(t);
                if (deriv - d).abs() > 1e-5 * self.bound.max(1.0) {
                    return Err(Error::Validation(format!(
                        "closed-form cumulative derivative {deriv} does not match δ({t}) = {d}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaFit {
    pub beta_hat: f64,
    pub n0_hat: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub measures: Vec<f64>,
}

/// Smallest `N̄0` with `|a^{ij}(t)| ≤ N̄0 δ(t)` on the sampled times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DominationBound {
    Finite(f64),
    /// Some entry is nonzero at a time where `δ` vanishes.
    Infinite { t: f64 },
}

impl DominationBound {
    pub fn value(&self) -> f64 {
        match self {
            DominationBound::Finite(v) => *v,
            DominationBound::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, DominationBound::Finite(_))
    }
}

/// The symmetric coefficient path `A(t) = (a^{ij}(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPath {
    dim: usize,
    entries: Vec<TimeFunction>,
}

impl CoefficientPath {
    /// `entries` is row-major `dim × dim`.
    pub fn new(dim: usize, entries: Vec<FnSpec>, horizon: f64) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::SizeMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Ok(Self {
            dim,
            entries: entries.into_iter().map(|s| TimeFunction::new(s, horizon)).collect(),
        })
    }

    /// `A(t) = s(t)·I`.
    pub fn scalar_identity(dim: usize, spec: FnSpec, horizon: f64) -> Self {
        let entries = (0..dim * dim)
            .map(|k| {
                if k / dim == k % dim {
                    spec.clone()
                } else {
                    FnSpec::Constant(0.0)
                }
            })
            .collect();
        Self::new(dim, entries, horizon).expect("square by construction")
    }

    /// `A(t) = δ(t)·I`.
    pub fn from_profile(dim: usize, profile: &DegeneracyProfile) -> Self {
        Self {
            dim,
            entries: (0..dim * dim)
                .map(|k| {
                    if k / dim == k % dim {
                        profile.function().clone()
                    } else {
                        TimeFunction::new(FnSpec::Constant(0.0), profile.horizon())
                    }
                })
                .collect(),
        }
    }

    pub fn constant(dim: usize, values: &[f64], horizon: f64) -> Result<Self> {
        Self::new(dim, values.iter().map(|v| FnSpec::Constant(*v)).collect(), horizon)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.entries[0].horizon()
    }

    pub fn entry(&self, i: usize, j: usize) -> &TimeFunction {
        &self.entries[i * self.dim + j]
    }

    pub fn entry_specs(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.spec().to_string()).collect()
    }

    pub fn matrix_at(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j).eval(t))
    }

    fn symmetric_at(&self, t: f64) -> bool {
        (0..self.dim).all(|i| {
            (0..i).all(|j| {
                let (a, b) = (self.entry(i, j).eval(t), self.entry(j, i).eval(t));
                (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
            })
        })
    }

    fn check_symmetric(&self) -> Result<()> {
        for t in sample_times(self.horizon()).step_by(16) {
            if !self.symmetric_at(t) {
                return Err(Error::Validation(format!("coefficient matrix is not symmetric at t = {t}")));
            }
        }
        Ok(())
    }

    /// Largest `|a^{ij}(t)|` on a sample grid.
    pub fn bound(&self) -> f64 {
        sample_times(self.horizon())
            .map(|t| self.matrix_at(t).amax())
            .fold(0.0, f64::max)
    }

    /// Checks symmetry, `ξᵀA(t)ξ ≥ δ(t)|ξ|²` and boundedness at `times`.
    pub fn validate(&self, profile: &DegeneracyProfile, times: &[f64]) -> Result<()> {
        self.check_symmetric()?;
        for &t in times {
            let a = self.matrix_at(t);
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("non-finite coefficient at t = {t}")));
            }
            let lam = SymmetricEigen::new(a).eigenvalues.min();
            let d = profile.eval_delta(t)?;
            if lam < d - 1e-12 * d.abs().max(1.0) {
                return Err(Error::Validation(format!(
                    "ellipticity fails at t = {t}: smallest eigenvalue {lam} < δ = {d}"
                )));
            }
        }
        Ok(())
    }

    /// `B = ∫_s^t A(r) dr`, symmetrized.
    pub fn accumulate(&self, s: f64, t: f64) -> Result<DMatrix<f64>> {
        if s < 0.0 || t < s {
            return Err(Error::Domain(format!("need 0 ≤ s ≤ t, got s = {s}, t = {t}")));
        }
        let mut b = DMatrix::zeros(self.dim, self.dim);
        if s == t {
            return Ok(b);
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                b[(i, j)] = self.entry(i, j).integral(s, t)?;
            }
        }
        Ok((&b + b.transpose()) * 0.5)
    }

    /// `A + εI`.
    pub fn regularize(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("regularization must be positive, got {eps}")));
        }
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(k, e)| {
                if k / self.dim == k % self.dim {
                    TimeFunction::with_options(FnSpec::Shift(Box::new(e.spec().clone()), eps), e.horizon(), *e.options())
                } else {
                    e.clone()
                }
            })
            .collect();
        Ok(Self { dim: self.dim, entries })
    }

    /// `t ↦ λ_min(A(t))`.
    pub fn min_eigenvalue_profile(&self) -> Result<DegeneracyProfile> {
        self.check_symmetric()?;
        let path = self.clone();
        let spec = FnSpec::custom("min_eigenvalue", move |t| {
            if path.dim == 1 {
                return path.entries[0].eval(t);
            }
            SymmetricEigen::new(path.matrix_at(t)).eigenvalues.min()
        });
        DegeneracyProfile::new(spec, self.horizon())
    }

    /// Smallest `N̄0` with `max_{ij} |a^{ij}(t)| ≤ N̄0 δ(t)` at `times`, with `0/0 := 0`.
    pub fn check_domination(&self, profile: &DegeneracyProfile, times: &[f64]) -> Result<DominationBound> {
        if times.is_empty() {
            return Err(Error::Precondition("no sample times".into()));
        }
        let mut worst: f64 = 0.0;
        for &t in times {
            if !(t > 0.0) {
                return Err(Error::Precondition(format!("sample times must be positive, got {t}")));
            }
            let amax = self.matrix_at(t).amax();
            let d = profile.eval_delta(t)?;
            if amax == 0.0 {
                continue;
            }
            if d == 0.0 {
                return Ok(DominationBound::Infinite { t });
            }
            worst = worst.max(amax / d);
        }
        Ok(DominationBound::Finite(worst))
    }
}
