//! Weighted space-time norms and empirical checks of the maximal-regularity
//! estimates, the `C([0,T]; L_p)` bound and the kernel block decay.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::Forcing;
use crate::degeneracy::{CoefficientPath, DegeneracyProfile, DominationBound};
use crate::error::{Error, Result};
use crate::solver::{self, TimePartition};
use crate::spectral::{self, GridSpec, LPFamily, SpectralField};

/// `bH^n_p(T, δ^m)`.
#[derive(Debug, Clone)]
pub struct WeightedNormSpec {
    pub n: f64,
    pub p: f64,
    pub m: f64,
    pub profile: DegeneracyProfile,
    pub horizon: f64,
}

impl WeightedNormSpec {
    pub fn new(n: f64, p: f64, m: f64, profile: DegeneracyProfile, horizon: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::Domain(format!("exponent p must exceed 1, got {p}")));
        }
        Ok(Self {
            n,
            p,
            m,
            profile,
            horizon,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightedNorm {
    Finite(f64),
    /// Nonzero spatial norm at a node where `δ = 0` and `m < 0`.
    Infinite { t: f64 },
}

impl WeightedNorm {
    pub fn value(&self) -> f64 {
        match self {
            WeightedNorm::Finite(v) => *v,
            WeightedNorm::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, WeightedNorm::Finite(_))
    }
}

/// `(∫_0^T g(t)^p δ(t)^m dt)^{1/p}` by the trapezoidal rule on `times`, where
/// `spatial[k] = g(t_k)`. Uses `0·∞ := 0` on `{δ = 0}`.
pub fn weighted_time_norm(spatial: &[f64], times: &[f64], spec: &WeightedNormSpec) -> Result<WeightedNorm> {
    if spatial.len() != times.len() {
        return Err(Error::SizeMismatch {
            expected: times.len(),
            got: spatial.len(),
        });
    }
    if times.len() < 2 || times[0] != 0.0 || (times[times.len() - 1] - spec.horizon).abs() > 1e-12 * spec.horizon.max(1.0) {
        return Err(Error::Validation(format!(
            "snapshot times must cover [0, {}] exactly",
            spec.horizon
        )));
    }
    let mut integrand = Vec::with_capacity(times.len());
    for (&g, &t) in spatial.iter().zip(times) {
        let delta = spec.profile.eval_delta(t)?;
        let gp = g.powf(spec.p);
        let value = if spec.m == 0.0 {
            gp
        } else if delta == 0.0 {
            if spec.m > 0.0 || gp == 0.0 {
                0.0
            } else {
                return Ok(WeightedNorm::Infinite { t });
            }
        } else {
            gp * delta.powf(spec.m)
        };
        integrand.push(value);
    }
    let total: f64 = times
        .windows(2)
        .zip(integrand.windows(2))
        .map(|(t, g)| 0.5 * (t[1] - t[0]) * (g[0] + g[1]))
        .sum();
    Ok(WeightedNorm::Finite(total.powf(1.0 / spec.p)))
}

/// `‖u‖_{bH^n_p(T, δ^m)}` over snapshots taken at `times`.
pub fn weighted_norm(snapshots: &[SpectralField], times: &[f64], spec: &WeightedNormSpec) -> Result<WeightedNorm> {
    let spatial = snapshots
        .iter()
        .map(|u| spectral::bessel_norm(u, spec.n, spec.p))
        .collect::<Result<Vec<_>>>()?;
    weighted_time_norm(&spatial, times, spec)
}

/// `‖u_xx‖_{bH^n_p(T, δ^m)}` with the Frobenius norm of the Hessian.
pub fn weighted_hessian_norm(snapshots: &[SpectralField], times: &[f64], spec: &WeightedNormSpec) -> Result<WeightedNorm> {
    let spatial: Vec<f64> = snapshots.iter().map(|u| spectral::hessian_norm(u, spec.n, spec.p)).collect();
    weighted_time_norm(&spatial, times, spec)
}

/// Both sides of one inequality together with the inputs its constant depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub theorem: String,
    pub n: f64,
    pub p: f64,
    pub m: f64,
    pub profile_spec: String,
    pub grid_n: usize,
    pub steps: usize,
    pub lhs: f64,
    pub rhs: Vec<(String, f64)>,
    pub ratio: f64,
    pub flags: Vec<String>,
    pub echo: Vec<(String, String)>,
}

pub const INADMISSIBLE: &str = "inadmissible";

impl EstimateReport {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        theorem: &str,
        (n, p, m): (f64, f64, f64),
        profile: &DegeneracyProfile,
        grid: &GridSpec,
        partition: &TimePartition,
        lhs: f64,
        rhs: Vec<(String, f64)>,
        flags: Vec<String>,
    ) -> Self {
        let total: f64 = rhs.iter().map(|(_, v)| v).sum();
        let ratio = if lhs == 0.0 {
            0.0
        } else if total > 0.0 {
            lhs / total
        } else {
            f64::INFINITY
        };
        Self {
            theorem: theorem.to_string(),
            n,
            p,
            m,
            profile_spec: profile.spec().to_string(),
            grid_n: grid.points_per_axis(),
            steps: partition.steps(),
            lhs,
            rhs,
            ratio,
            flags,
            echo: vec![
                ("d".into(), grid.dim().to_string()),
                ("period".into(), format!("{:?}", grid.period())),
                ("T".into(), format!("{:?}", partition.horizon())),
            ],
        }
    }

    pub fn rhs_total(&self) -> f64 {
        self.rhs.iter().map(|(_, v)| v).sum()
    }

    pub fn is_admissible(&self) -> bool {
        !self.flags.iter().any(|f| f == INADMISSIBLE)
    }

    pub fn csv_header() -> &'static str {
        "theorem,n,p,m,profile_spec,grid_n,K,lhs,rhs_1,rhs_2,ratio,flags"
    }

    pub fn csv_row(&self) -> String {
        let rhs = |i: usize| self.rhs.get(i).map(|(_, v)| format!("{v:?}")).unwrap_or_default();
        format!(
            "{},{:?},{:?},{:?},{},{},{},{:?},{},{},{:?},{}",
            self.theorem,
            self.n,
            self.p,
            self.m,
            csv_quote(&self.profile_spec),
            self.grid_n,
            self.steps,
            self.lhs,
            rhs(0),
            rhs(1),
            self.ratio,
            csv_quote(&self.flags.join(";"))
        )
    }

    /// Human-readable block listing every quantity of the report.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}: lhs = {:e}", self.theorem, self.lhs);
        for (name, v) in &self.rhs {
            let _ = writeln!(s, "  {name} = {v:e}");
        }
        let _ = writeln!(s, "  ratio = {:e}", self.ratio);
        let _ = writeln!(s, "  n = {}, p = {}, m = {}, profile = {}", self.n, self.p, self.m, self.profile_spec);
        let _ = writeln!(s, "  grid n = {}, K = {}", self.grid_n, self.steps);
        for (k, v) in &self.echo {
            let _ = writeln!(s, "  {k} = {v}");
        }
        if !self.flags.is_empty() {
            let _ = writeln!(s, "  flags: {}", self.flags.join(", "));
        }
        s
    }
}

pub(crate) fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn forcing_snapshots(forcing: &Forcing, grid: &GridSpec, times: &[f64]) -> Vec<SpectralField> {
    times
        .iter()
        .map(|t| forcing.at(*t).unwrap_or_else(|| SpectralField::zeros(*grid)))
        .collect()
}

/// `‖u_xx‖_{bH^n_p(T,δ)}` against `‖f‖_{bH^n_p(T,δ^{1−p})} + ‖u0‖_{B^{n+2−2/p}_p}`.
#[allow(clippy::too_many_arguments)]
pub fn check_thm1(
    u0: &SpectralField,
    forcing: &Forcing,
    path: &CoefficientPath,
    profile: &DegeneracyProfile,
    n: f64,
    p: f64,
    partition: &TimePartition,
) -> Result<EstimateReport> {
    let grid = *u0.grid();
    let report = solver::solve_duhamel(u0, forcing, path, partition)?;
    let times = partition.nodes();
    let horizon = partition.horizon();
    let lhs_spec = WeightedNormSpec::new(n, p, 1.0, profile.clone(), horizon)?;
    let lhs = weighted_hessian_norm(&report.snapshots, times, &lhs_spec)?.value();
    let mut flags = Vec::new();
    let f_norm = if forcing.is_zero() {
        0.0
    } else {
        let f_spec = WeightedNormSpec::new(n, p, 1.0 - p, profile.clone(), horizon)?;
        match weighted_norm(&forcing_snapshots(forcing, &grid, times), times, &f_spec)? {
            WeightedNorm::Finite(v) => v,
            WeightedNorm::Infinite { t } => {
                flags.push(INADMISSIBLE.to_string());
                flags.push(format!("forcing weight infinite at t={t:e}"));
                f64::INFINITY
            }
        }
    };
    let s = n + 2.0 - 2.0 / p;
    let besov = LPFamily::for_grid(&grid).besov_norm(u0, s, p)?;
    let mut out = EstimateReport::assemble(
        "thm1",
        (n, p, 1.0),
        profile,
        &grid,
        partition,
        lhs,
        vec![("f_weighted".into(), f_norm), (format!("u0_besov_s={s}"), besov)],
        flags,
    );
    out.echo.push(("M".into(), format!("{:?}", path.bound())));
    Ok(out)
}

/// Hypotheses of the homogeneous estimate, as measured on a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Thm2Inputs {
    pub beta_hat: f64,
    pub n0_hat: f64,
    pub domination: DominationBound,
    pub t0: f64,
    pub beta_t0: f64,
}

impl Thm2Inputs {
    /// Fits the level-set exponent on `h_grid` and the domination constant on
    /// `sample_times`.
    pub fn measure(
        path: &CoefficientPath,
        profile: &DegeneracyProfile,
        t0: f64,
        h_grid: &[f64],
        sample_times: &[f64],
    ) -> Result<Self> {
        let fit = profile.fit_beta_exponent(t0, h_grid)?;
        Ok(Self {
            beta_hat: fit.beta_hat,
            n0_hat: fit.n0_hat,
            domination: path.check_domination(profile, sample_times)?,
            t0,
            beta_t0: profile.cumulative_delta(t0)?,
        })
    }
}

/// `(∫_0^T ‖u_xx‖_p^p dt)^{1/p}` against `‖u0‖_{B^{2(1−1/(βp))}_p}` for `f = 0`.
pub fn check_thm2(
    u0: &SpectralField,
    path: &CoefficientPath,
    profile: &DegeneracyProfile,
    p: f64,
    inputs: &Thm2Inputs,
    partition: &TimePartition,
) -> Result<EstimateReport> {
    let grid = *u0.grid();
    let mut flags = Vec::new();
    if !(inputs.beta_hat.is_finite() && inputs.beta_hat > 0.0) {
        flags.push(INADMISSIBLE.to_string());
        flags.push(format!("level-set exponent {} not positive and finite", inputs.beta_hat));
    }
    if !inputs.domination.is_finite() {
        flags.push(INADMISSIBLE.to_string());
        flags.push("coefficients not dominated by delta".into());
    }
    if !(inputs.beta_t0 > 0.0) {
        flags.push(INADMISSIBLE.to_string());
        flags.push("cumulative delta vanishes at t0".into());
    }
    let report = solver::solve_homogeneous(u0, path, partition)?;
    let spec = WeightedNormSpec::new(0.0, p, 0.0, profile.clone(), partition.horizon())?;
    let lhs = weighted_hessian_norm(&report.snapshots, partition.nodes(), &spec)?.value();
    let s = 2.0 * (1.0 - 1.0 / (inputs.beta_hat * p));
    let besov = if s.is_finite() {
        LPFamily::for_grid(&grid).besov_norm(u0, s, p)?
    } else {
        f64::NAN
    };
    let mut out = EstimateReport::assemble(
        "thm2",
        (0.0, p, 0.0),
        profile,
        &grid,
        partition,
        lhs,
        vec![(format!("u0_besov_s={s}"), besov)],
        flags,
    );
    out.echo.extend([
        ("beta".into(), format!("{:?}", inputs.beta_hat)),
        ("N0".into(), format!("{:?}", inputs.n0_hat)),
        ("N0_bar".into(), format!("{:?}", inputs.domination.value())),
        ("t0".into(), format!("{:?}", inputs.t0)),
        ("int_0^t0 delta".into(), format!("{:?}", inputs.beta_t0)),
    ]);
    Ok(out)
}

/// `sup_k ‖u(t_k)‖_p` against `‖f‖_{bL_p(T)} + ‖u0‖_p`.
pub fn check_classic(
    report: &solver::SolveReport,
    forcing: &Forcing,
    u0: &SpectralField,
    profile: &DegeneracyProfile,
    p: f64,
) -> Result<EstimateReport> {
    let grid = *u0.grid();
    let lhs = report.snapshots.iter().map(|u| u.lp_norm(p)).fold(0.0, f64::max);
    let times = report.times();
    let f_norm = if forcing.is_zero() {
        0.0
    } else {
        let spec = WeightedNormSpec::new(0.0, p, 0.0, profile.clone(), report.partition.horizon())?;
        weighted_norm(&forcing_snapshots(forcing, &grid, times), times, &spec)?.value()
    };
    let mut flags = Vec::new();
    if p == 2.0 && forcing.is_zero() && lhs > u0.lp_norm(2.0) * (1.0 + 1e-12) {
        flags.push("l2 contraction violated".into());
    }
    Ok(EstimateReport::assemble(
        "classic",
        (0.0, p, 0.0),
        profile,
        &grid,
        &report.partition,
        lhs,
        vec![("f_lp".into(), f_norm), ("u0_lp".into(), u0.lp_norm(p))],
        flags,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDecayOptions {
    pub c_min: f64,
    pub c_max: f64,
    pub c_points: usize,
    /// Admissible `N` is capped at this multiple of the `t → 0` reference.
    pub cap_factor: f64,
    /// Samples below this fraction of the reference are roundoff and excluded.
    pub noise_floor: f64,
}

impl Default for KernelDecayOptions {
    fn default() -> Self {
        Self {
            c_min: 1e-3,
            c_max: 10.0,
            c_points: 60,
            cap_factor: 4.0,
            noise_floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub k: i32,
    pub t: f64,
    pub beta: f64,
    /// `‖Δ^{γ/2} Δ_k p(t,·)‖_{L_1}`.
    pub mass: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelDecayFit {
    pub gamma: f64,
    pub n: f64,
    pub c: f64,
    pub reference: f64,
    pub samples: Vec<KernelSample>,
    pub violations: Vec<(i32, f64)>,
}

impl KernelDecayFit {
    /// `log m + c·β·4^k − kγ log 2` per retained sample.
    pub fn certificate(&self) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| !s.excluded)
            .map(|s| s.mass.ln() + self.c * s.beta * 4f64.powi(s.k) - s.k as f64 * self.gamma * 2f64.ln())
            .collect()
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("k,t,beta,mass,bound,excluded\n");
        for s in &self.samples {
            let bound = self.n * 2f64.powf(s.k as f64 * self.gamma) * (-self.c * s.beta * 4f64.powi(s.k)).exp();
            let _ = writeln!(out, "{},{:?},{:?},{:?},{:?},{}", s.k, s.t, s.beta, s.mass, bound, s.excluded);
        }
        out
    }
}

/// Block-kernel multiplier `(−1)^{Σk} Ψ̂_k(ξ)|ξ|^γ symbol(ξ)`, inverted and
/// normalized so the result is a grid density.
fn block_kernel_l1(grid: &GridSpec, fam: &LPFamily, k: i32, gamma: f64, b: Option<&nalgebra::DMatrix<f64>>) -> Result<f64> {
    let mut spec = vec![num_complex::Complex64::new(0.0, 0.0); grid.len()];
    let d = grid.dim();
    grid.for_each_frequency(|idx, xi| {
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let psi = fam.psi(k, r);
        if psi == 0.0 {
            return;
        }
        let mut q = 0.0;
        if let Some(b) = b {
            for i in 0..d {
                for j in 0..d {
                    q += b[(i, j)] * xi[i] * xi[j];
                }
            }
        }
        let multi = grid.unflatten(idx);
        let parity: i64 = (0..d).map(|a| grid.signed_index(multi[a])).sum();
        let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let radial = if gamma == 0.0 { 1.0 } else { r.powf(gamma) };
        spec[idx].re = sign * psi * radial * (-q).exp();
    });
    let field = SpectralField::from_spectrum(*grid, spec)?;
    Ok(field.lp_norm(1.0) / grid.cell_volume())
}

/// Fits `‖Δ^{γ/2} Δ_k p(t,·)‖_{L_1} ≤ N 2^{kγ} exp(−c β(t) 4^k)`.
///
/// `c` is scanned on a log grid; the chosen `c` is the largest one whose
/// required `N` stays within `cap_factor` times the `t → 0` reference
/// `max_k ‖Δ^{γ/2}Ψ_k‖_{L_1} 2^{−kγ}`.
#[allow(clippy::too_many_arguments)]
pub fn check_kernel_decay(
    path: &CoefficientPath,
    profile: &DegeneracyProfile,
    gamma: f64,
    ks: &[i32],
    t_samples: &[f64],
    grid: &GridSpec,
    fam: &LPFamily,
    opts: &KernelDecayOptions,
) -> Result<KernelDecayFit> {
    if ks.is_empty() || t_samples.is_empty() {
        return Err(Error::Validation("kernel decay needs at least one k and one t".into()));
    }
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("gamma must be nonnegative, got {gamma}")));
    }
    for &k in ks {
        if !fam.contains(k) {
            return Err(Error::OutOfRange {
                index: k,
                min: fam.j_min,
                max: fam.j_max,
            });
        }
    }
    let reference = ks
        .par_iter()
        .map(|&k| Ok(block_kernel_l1(grid, fam, k, gamma, None)? / 2f64.powf(k as f64 * gamma)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let pairs: Vec<(i32, f64)> = ks.iter().flat_map(|&k| t_samples.iter().map(move |&t| (k, t))).collect();
    let samples = pairs
        .par_iter()
        .map(|&(k, t)| {
            let beta = profile.cumulative_delta(t)?;
            if !(beta > 0.0) {
                return Err(Error::DegenerateKernel(t));
            }
            let b = path.accumulate(0.0, t)?;
            let mass = block_kernel_l1(grid, fam, k, gamma, Some(&b))?;
            let scale = 2f64.powf(k as f64 * gamma);
            Ok(KernelSample {
                k,
                t,
                beta,
                mass,
                excluded: mass < opts.noise_floor * reference * scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let required = |c: f64| -> f64 {
        samples
            .iter()
            .filter(|s| !s.excluded)
            .map(|s| s.mass / 2f64.powf(s.k as f64 * gamma) * (c * s.beta * 4f64.powi(s.k)).exp())
            .fold(0.0, f64::max)
    };
    let cap = opts.cap_factor * reference;
    let steps = opts.c_points.max(2) - 1;
    let grid_c: Vec<f64> = (0..=steps)
        .map(|i| opts.c_min * (opts.c_max / opts.c_min).powf(i as f64 / steps as f64))
        .collect();
    let best = grid_c.iter().rev().find(|&&c| required(c) <= cap).copied();
    let (c, n, violations) = match best {
        Some(c) => (c, required(c), Vec::new()),
        None => {
            let c = opts.c_min;
            let violations = samples
                .iter()
                .filter(|s| !s.excluded)
                .filter(|s| s.mass / 2f64.powf(s.k as f64 * gamma) * (c * s.beta * 4f64.powi(s.k)).exp() > cap)
                .map(|s| (s.k, s.t))
                .collect();
            (c, required(c), violations)
        }
    };
    Ok(KernelDecayFit {
        gamma,
        n,
        c,
        reference,
        samples,
        violations,
    })
}

/// Runs [`check_thm1`] on `(A + εI, δ + ε)` for every `ε`, in parallel.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_sweep(
    u0: &SpectralField,
    forcing: &Forcing,
    path: &CoefficientPath,
    profile: &DegeneracyProfile,
    eps_list: &[f64],
    n: f64,
    p: f64,
    partition: &TimePartition,
) -> Result<Vec<EstimateReport>> {
    if eps_list.is_empty() || !eps_list.iter().all(|e| *e > 0.0) {
        return Err(Error::Validation("epsilon list must be nonempty and positive".into()));
    }
    if !eps_list.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::Validation("epsilon list must be strictly decreasing".into()));
    }
    eps_list
        .par_iter()
        .map(|&eps| {
            let (path_eps, profile_eps) = solver::epsilon_regularize(path, profile, eps)?;
            let mut report = check_thm1(u0, forcing, &path_eps, &profile_eps, n, p, partition)?;
            report.theorem = "thm1_eps".into();
            report.echo.push(("eps".into(), format!("{eps:?}")));
            Ok(report)
        })
        .collect()
}

/// Largest ratio over a sweep.
pub fn max_ratio(reports: &[EstimateReport]) -> f64 {
    reports.iter().map(|r| r.ratio).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gauss(grid: GridSpec, sigma: f64) -> SpectralField {
        SpectralField::from_fn(grid, move |x| (-x[0] * x[0] / (2.0 * sigma * sigma)).exp())
    }

    #[test]
    fn weighted_norm_examples() {
        let grid = GridSpec::new(1, 64, 20.0).unwrap();
        let u0 = gauss(grid, 1.0);
        let part = TimePartition::uniform(10, 2.0).unwrap();
        let snaps = vec![u0.clone(); 11];
        let base = spectral::bessel_norm(&u0, 1.0, 2.0).unwrap();

        let one = DegeneracyProfile::constant(1.0, 2.0).unwrap();
        let spec = WeightedNormSpec::new(1.0, 2.0, 0.0, one.clone(), 2.0).unwrap();
        let v = weighted_norm(&snaps, part.nodes(), &spec).unwrap().value();
        assert!((v - 2f64.sqrt() * base).abs() < 1e-12 * base);

        // δ = t, m = 1: trapezoid is exact for a linear integrand.
        let lin = DegeneracyProfile::power(1.0, 2.0).unwrap();
        let spec = WeightedNormSpec::new(1.0, 3.0, 1.0, lin.clone(), 2.0).unwrap();
        let v = weighted_norm(&snaps, part.nodes(), &spec).unwrap().value();
        let b3 = spectral::bessel_norm(&u0, 1.0, 3.0).unwrap();
        assert!((v - 2f64.powf(1.0 / 3.0) * b3).abs() < 1e-12 * b3);

        let spec = WeightedNormSpec::new(0.0, 2.0, -1.0, lin, 2.0).unwrap();
        assert_eq!(
            weighted_norm(&snaps, part.nodes(), &spec).unwrap(),
            WeightedNorm::Infinite { t: 0.0 }
        );
        assert!(WeightedNormSpec::new(0.0, 1.0, 0.0, one, 1.0).is_err());
    }

    #[test]
    fn thm1_vanishes_without_diffusion() {
        let grid = GridSpec::new(1, 128, 20.0).unwrap();
        let zero = DegeneracyProfile::constant(0.0, 1.0).unwrap();
        let path = CoefficientPath::from_profile(1, &zero);
        let part = TimePartition::uniform(8, 1.0).unwrap();
        let r = check_thm1(&gauss(grid, 1.0), &Forcing::Zero, &path, &zero, 0.0, 2.0, &part).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.ratio, 0.0);
        assert!(r.is_admissible());
    }

    #[test]
    fn thm1_flags_infinite_forcing_weight() {
        let grid = GridSpec::new(1, 64, 20.0).unwrap();
        let lin = DegeneracyProfile::power(1.0, 1.0).unwrap();
        let path = CoefficientPath::from_profile(1, &lin);
        let f = Forcing::Separable {
            time: crate::FnSpec::Constant(1.0),
            space: gauss(grid, 1.0),
        };
        let part = TimePartition::uniform(8, 1.0).unwrap();
        let r = check_thm1(&gauss(grid, 1.0), &f, &path, &lin, 0.0, 2.0, &part).unwrap();
        assert!(!r.is_admissible());
        assert!(r.ratio < 1.0 || r.rhs_total().is_infinite());
    }

    #[test]
    fn classic_examples() {
        let grid = GridSpec::new(1, 256, 30.0).unwrap();
        let u0 = gauss(grid, 1.0);
        let part = TimePartition::uniform(16, 1.0).unwrap();
        let zero = DegeneracyProfile::constant(0.0, 1.0).unwrap();
        let zpath = CoefficientPath::from_profile(1, &zero);
        let rep = solver::solve_homogeneous(&u0, &zpath, &part).unwrap();
        let r = check_classic(&rep, &Forcing::Zero, &u0, &zero, 3.0).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-14);
        let one = DegeneracyProfile::constant(1.0, 1.0).unwrap();
        let heat = CoefficientPath::from_profile(1, &one);
        let rep = solver::solve_homogeneous(&u0, &heat, &part).unwrap();
        let r = check_classic(&rep, &Forcing::Zero, &u0, &one, 2.0).unwrap();
        assert!(r.ratio <= 1.0 + 1e-12);
        assert!(r.flags.is_empty());
    }

    #[test]
    fn kernel_decay_heat() {
        let grid = GridSpec::new(1, 1024, 8.0 * PI).unwrap();
        let fam = LPFamily::for_grid(&grid);
        let one = DegeneracyProfile::constant(1.0, 1.0).unwrap();
        let path = CoefficientPath::from_profile(1, &one);
        let ts: Vec<f64> = (0..8).map(|i| 1e-4 * 10f64.powf(i as f64 * 4.0 / 7.0)).collect();
        let fit = check_kernel_decay(&path, &one, 0.0, &[1, 2, 3, 4, 5, 6], &ts, &grid, &fam, &Default::default()).unwrap();
        assert!(fit.violations.is_empty());
        assert!(fit.c > 0.05 && fit.c < 1.0, "c = {}", fit.c);
        let cert = fit.certificate();
        assert!(cert.iter().all(|v| *v <= fit.n.ln() + 1e-9));
    }

    #[test]
    fn csv_row_quotes_specs() {
        let grid = GridSpec::new(1, 64, 20.0).unwrap();
        let prof = DegeneracyProfile::parse("power_blend(1, 2)", 1.0).unwrap();
        let part = TimePartition::uniform(2, 1.0).unwrap();
        let r = EstimateReport::assemble("x", (0.0, 2.0, 1.0), &prof, &grid, &part, 1.0, vec![("a".into(), 2.0)], vec![]);
        let row = r.csv_row();
        assert!(row.starts_with("x,0.0,2.0,1.0,\"power_blend("));
        assert!(row.ends_with(",64,2,1.0,2.0,,0.5,"));
    }
}
