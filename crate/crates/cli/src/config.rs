//! Experiment configuration: one TOML file per experiment.
//!
//! ```toml
//! [experiment]
//! name = "osc"
//! seed = 1
//!
//! [profile]
//! spec = "oscillatory()"
//!
//! [grid]
//! d = 1
//! n = 1024
//! L = 32.0
//!
//! [partition]
//! T = 1.0
//! K = 128
//! ```
//!
//! Every other section is optional and falls back to the defaults below.

use std::fmt;
use std::path::Path;

use degpar::data::{DataContext, DataSpec, Forcing, ForcingSpec};
use degpar::solver::TimePartition;
use degpar::{CoefficientPath, DegeneracyProfile, FnSpec, GridSpec, LPFamily, SpectralField};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Experiment,
    pub profile: Profile,
    #[serde(default)]
    pub coefficients: Coefficients,
    pub grid: Grid,
    pub partition: Partition,
    #[serde(default)]
    pub initial: Initial,
    #[serde(default)]
    pub forcing: ForcingSection,
    #[serde(default)]
    pub theorem: Theorem,
    #[serde(default)]
    pub oracle: Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_name() -> String {
    "experiment".into()
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            name: default_name(),
            seed: 0,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub spec: String,
}

/// `A(t)`: `scalar · I`, an explicit `d × d` matrix of time functions, or
/// (neither given) `δ(t) · I`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Uniform,
    #[default]
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "K")]
    pub steps: usize,
    #[serde(default)]
    pub kind: PartitionKind,
    /// Geometric ratio between consecutive head nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    pub spec: String,
}

impl Default for Initial {
    fn default() -> Self {
        Self { spec: "gaussian(1)".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    pub spec: String,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self { spec: "zero()".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem {
    #[serde(default)]
    pub n: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_gamma")]
    pub gamma: Vec<f64>,
    /// Littlewood–Paley indices for kernel decay; default `1..=min(6, j_max)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<i32>>,
    /// Kernel-decay sample times; default 8 log-spaced values in `[1e-4 T, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_times: Option<Vec<f64>>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Level-set fit grid; default 12 log-spaced values in `[1e-6, 1e-3]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    /// Overrides the fitted level-set exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Weak-residual test bumps; width defaults to `L/16`, centres to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_centers: Option<Vec<Vec<f64>>>,
}

fn default_p() -> f64 {
    2.0
}

fn default_gamma() -> Vec<f64> {
    vec![0.0, 1.0]
}

fn default_eps() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}

impl Default for Theorem {
    fn default() -> Self {
        Self {
            n: 0.0,
            p: default_p(),
            gamma: default_gamma(),
            ks: None,
            kernel_times: None,
            eps: default_eps(),
            h_grid: None,
            t0: None,
            beta: None,
            test_width: None,
            test_centers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oracle {
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Monte Carlo probe points; default five points on the first axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Number of FD grids, halving `n` from the configured one.
    #[serde(default = "default_levels")]
    pub fd_levels: usize,
    /// Start time of the characteristic-function check; default `T/5`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charfn_s: Option<f64>,
    #[serde(default = "default_frequencies")]
    pub frequencies: usize,
}

fn default_samples() -> usize {
    100_000
}

fn default_theta() -> f64 {
    0.5
}

fn default_levels() -> usize {
    4
}

fn default_frequencies() -> usize {
    10
}

impl Default for Oracle {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            probes: None,
            theta: default_theta(),
            fd_levels: default_levels(),
            charfn_s: None,
            frequencies: default_frequencies(),
        }
    }
}

/// One problem with a config, tied to the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

impl ExperimentConfig {
    /// Parses TOML; syntax and type errors become a single diagnostic with
    /// the line and column.
    pub fn parse(text: &str) -> Result<Self, Vec<Diagnostic>> {
        toml::from_str(text).map_err(|e| vec![Diagnostic::new("<toml>", e.to_string().trim_end().to_string())])
    }

    pub fn load(path: &Path) -> Result<Self, Vec<Diagnostic>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| vec![Diagnostic::new("--config", format!("cannot read {}: {e}", path.display()))])?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types always serialize")
    }

    /// Every problem found; empty iff all specs parse and cross-references
    /// resolve against the grid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let g = &self.grid;
        if !(1..=3).contains(&g.d) {
            out.push(Diagnostic::new("grid.d", format!("dimension must be 1, 2 or 3, got {}", g.d)));
        }
        if !g.n.is_power_of_two() || g.n < 4 {
            out.push(Diagnostic::new("grid.n", format!("n = {} is not a power of two ≥ 4", g.n)));
        }
        if !(g.period.is_finite() && g.period > 0.0) {
            out.push(Diagnostic::new("grid.L", format!("period must be positive, got {}", g.period)));
        }
        let grid = self.grid().ok();

        let part = &self.partition;
        if !(part.horizon.is_finite() && part.horizon > 0.0) {
            out.push(Diagnostic::new("partition.T", format!("horizon must be positive, got {}", part.horizon)));
        }
        if part.steps == 0 {
            out.push(Diagnostic::new("partition.K", "need at least one step"));
        }
        if let Some(r) = part.ratio {
            if part.kind == PartitionKind::Uniform {
                out.push(Diagnostic::new("partition.ratio", "only meaningful for a geometric partition"));
            } else if !(r > 0.0 && r < 1.0) {
                out.push(Diagnostic::new("partition.ratio", format!("ratio must lie in (0, 1), got {r}")));
            }
        }
        let horizon_ok = part.horizon.is_finite() && part.horizon > 0.0;

        let profile_spec = match self.profile.spec.parse::<FnSpec>() {
            Ok(s) => Some(s),
            Err(e) => {
                out.push(Diagnostic::new("profile.spec", e.to_string()));
                None
            }
        };
        if let (Some(spec), true) = (profile_spec, horizon_ok) {
            match DegeneracyProfile::new(spec, part.horizon).and_then(|p| p.check_invariants()) {
                Ok(()) => {}
                Err(e) => out.push(Diagnostic::new("profile.spec", e.to_string())),
            }
        }

        let c = &self.coefficients;
        if c.scalar.is_some() && c.matrix.is_some() {
            out.push(Diagnostic::new("coefficients", "give either scalar or matrix, not both"));
        }
        if let Some(s) = &c.scalar {
            if let Err(e) = s.parse::<FnSpec>() {
                out.push(Diagnostic::new("coefficients.scalar", e.to_string()));
            }
        }
        if let Some(m) = &c.matrix {
            if m.len() != g.d || m.iter().any(|row| row.len() != g.d) {
                out.push(Diagnostic::new("coefficients.matrix", format!("must be {0} × {0}", g.d)));
            } else {
                for (i, row) in m.iter().enumerate() {
                    for (j, e) in row.iter().enumerate() {
                        if let Err(err) = e.parse::<FnSpec>() {
                            out.push(Diagnostic::new(&format!("coefficients.matrix[{i}][{j}]"), err.to_string()));
                        }
                    }
                }
                if out.iter().all(|d| !d.field.starts_with("coefficients")) && horizon_ok {
                    if let Err(e) = self.path() {
                        out.push(Diagnostic::new("coefficients.matrix", e.to_string()));
                    }
                }
            }
        }

        match self.initial.spec.parse::<DataSpec>() {
            Ok(spec) => {
                if let Some(grid) = &grid {
                    out.extend(spec.diagnostics(grid).into_iter().map(|m| Diagnostic::new("initial.spec", m)));
                }
            }
            Err(e) => out.push(Diagnostic::new("initial.spec", e.to_string())),
        }
        match self.forcing.spec.parse::<ForcingSpec>() {
            Ok(spec) => {
                if let Some(grid) = &grid {
                    out.extend(spec.diagnostics(grid).into_iter().map(|m| Diagnostic::new("forcing.spec", m)));
                }
            }
            Err(e) => out.push(Diagnostic::new("forcing.spec", e.to_string())),
        }

        self.validate_theorem(grid.as_ref(), &mut out);
        self.validate_oracle(&mut out);
        out
    }

    fn validate_theorem(&self, grid: Option<&GridSpec>, out: &mut Vec<Diagnostic>) {
        let th = &self.theorem;
        if !(th.p > 1.0 && th.p.is_finite()) {
            out.push(Diagnostic::new("theorem.p", format!("p must exceed 1, got {}", th.p)));
        }
        if !(th.n >= 0.0 && th.n.is_finite()) {
            out.push(Diagnostic::new("theorem.n", format!("n must be nonnegative, got {}", th.n)));
        }
        if th.gamma.is_empty() || th.gamma.iter().any(|g| !(*g >= 0.0)) {
            out.push(Diagnostic::new("theorem.gamma", "need at least one nonnegative gamma"));
        }
        if th.eps.is_empty() || th.eps.iter().any(|e| !(*e > 0.0)) || !th.eps.windows(2).all(|w| w[0] > w[1]) {
            out.push(Diagnostic::new("theorem.eps", "must be nonempty, positive and strictly decreasing"));
        }
        if let Some(h) = &th.h_grid {
            if h.len() < 4 || h.iter().any(|v| !(*v > 0.0)) {
                out.push(Diagnostic::new("theorem.h_grid", "need at least 4 positive levels"));
            }
        }
        if let Some(t0) = th.t0 {
            if !(t0 > 0.0 && t0 <= self.partition.horizon) {
                out.push(Diagnostic::new("theorem.t0", format!("t0 must lie in (0, T], got {t0}")));
            }
        }
        if let Some(b) = th.beta {
            if !(b > 0.0 && b.is_finite()) {
                out.push(Diagnostic::new("theorem.beta", format!("beta must be positive, got {b}")));
            }
        }
        if let Some(ts) = &th.kernel_times {
            if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0 && *t <= self.partition.horizon)) {
                out.push(Diagnostic::new("theorem.kernel_times", "times must lie in (0, T]"));
            }
        }
        if let Some(w) = th.test_width {
            if !(w > 0.0) {
                out.push(Diagnostic::new("theorem.test_width", format!("width must be positive, got {w}")));
            }
        }
        if let Some(cs) = &th.test_centers {
            if cs.is_empty() || cs.iter().any(|c| c.len() != self.grid.d) {
                out.push(Diagnostic::new("theorem.test_centers", format!("each centre needs {} coordinates", self.grid.d)));
            }
        }
        if let (Some(grid), Some(ks)) = (grid, &th.ks) {
            let fam = LPFamily::for_grid(grid);
            if ks.is_empty() {
                out.push(Diagnostic::new("theorem.ks", "need at least one block index"));
            }
            if let Some(k) = ks.iter().find(|k| !fam.contains(**k)) {
                out.push(Diagnostic::new(
                    "theorem.ks",
                    format!("block {k} outside the grid's range {}..={}", fam.j_min, fam.j_max),
                ));
            }
        }
    }

    fn validate_oracle(&self, out: &mut Vec<Diagnostic>) {
        let o = &self.oracle;
        if o.samples < 2 {
            out.push(Diagnostic::new("oracle.samples", "need at least 2 samples"));
        }
        if !(0.5..=1.0).contains(&o.theta) {
            out.push(Diagnostic::new("oracle.theta", format!("theta must lie in [0.5, 1], got {}", o.theta)));
        }
        if o.fd_levels < 2 {
            out.push(Diagnostic::new("oracle.fd_levels", "need at least 2 grids to observe an order"));
        } else if self.grid.n.is_power_of_two() && self.grid.n >> (o.fd_levels - 1) < 8 {
            out.push(Diagnostic::new(
                "oracle.fd_levels",
                format!("coarsest grid would have fewer than 8 points per axis (n = {})", self.grid.n),
            ));
        }
        if o.frequencies == 0 {
            out.push(Diagnostic::new("oracle.frequencies", "need at least one frequency"));
        }
        if let Some(ps) = &o.probes {
            if ps.is_empty() || ps.iter().any(|p| p.len() != self.grid.d) {
                out.push(Diagnostic::new("oracle.probes", format!("each probe needs {} coordinates", self.grid.d)));
            }
        }
        if let Some(s) = o.charfn_s {
            if !(s >= 0.0 && s < self.partition.horizon) {
                out.push(Diagnostic::new("oracle.charfn_s", format!("must lie in [0, T), got {s}")));
            }
        }
    }

    pub fn grid(&self) -> degpar::Result<GridSpec> {
        GridSpec::new(self.grid.d, self.grid.n, self.grid.period)
    }

    pub fn grid_with(&self, n: usize) -> degpar::Result<GridSpec> {
        GridSpec::new(self.grid.d, n, self.grid.period)
    }

    pub fn profile(&self) -> degpar::Result<DegeneracyProfile> {
        DegeneracyProfile::parse(&self.profile.spec, self.partition.horizon)
    }

    pub fn path(&self) -> degpar::Result<CoefficientPath> {
        let d = self.grid.d;
        let horizon = self.partition.horizon;
        if let Some(m) = &self.coefficients.matrix {
            let entries = m.iter().flatten().map(|e| e.parse()).collect::<degpar::Result<Vec<FnSpec>>>()?;
            CoefficientPath::new(d, entries, horizon)
        } else if let Some(s) = &self.coefficients.scalar {
            Ok(CoefficientPath::scalar_identity(d, s.parse()?, horizon))
        } else {
            Ok(CoefficientPath::from_profile(d, &self.profile()?))
        }
    }

    pub fn partition(&self) -> degpar::Result<TimePartition> {
        let p = &self.partition;
        match p.kind {
            PartitionKind::Uniform => TimePartition::uniform(p.steps, p.horizon),
            PartitionKind::Geometric => TimePartition::geometric(p.steps, p.horizon, p.ratio),
        }
    }

    pub fn data_context(&self) -> DataContext {
        DataContext {
            seed: self.experiment.seed,
            p: self.theorem.p,
        }
    }

    pub fn initial(&self, grid: &GridSpec) -> degpar::Result<SpectralField> {
        self.initial.spec.parse::<DataSpec>()?.build(grid, &self.data_context())
    }

    pub fn forcing(&self, grid: &GridSpec) -> degpar::Result<Forcing> {
        self.forcing.spec.parse::<ForcingSpec>()?.build(grid, &self.data_context())
    }

    pub fn h_grid(&self) -> Vec<f64> {
        self.theorem.h_grid.clone().unwrap_or_else(|| logspace(1e-6, 1e-3, 12))
    }

    pub fn t0(&self) -> f64 {
        self.theorem.t0.unwrap_or(self.partition.horizon)
    }

    pub fn kernel_times(&self) -> Vec<f64> {
        let t = self.partition.horizon;
        self.theorem.kernel_times.clone().unwrap_or_else(|| logspace(1e-4 * t, t, 8))
    }

    pub fn kernel_blocks(&self, fam: &LPFamily) -> Vec<i32> {
        self.theorem.ks.clone().unwrap_or_else(|| (1..=fam.j_max.min(6)).collect())
    }

    /// Gaussian bumps used as weak-residual test functions.
    pub fn test_functions(&self, grid: &GridSpec) -> Vec<SpectralField> {
        let width = self.theorem.test_width.unwrap_or(self.grid.period / 16.0);
        let centers = self.theorem.test_centers.clone().unwrap_or_else(|| vec![vec![0.0; self.grid.d]]);
        centers
            .into_iter()
            .map(|c| {
                SpectralField::from_fn(*grid, move |x| {
                    let r2: f64 = x.iter().zip(&c).map(|(x, c)| (x - c).powi(2)).sum();
                    (-r2 / (2.0 * width * width)).exp()
                })
            })
            .collect()
    }

    pub fn probes(&self) -> Vec<Vec<f64>> {
        self.oracle.probes.clone().unwrap_or_else(|| {
            let l = self.grid.period;
            [-0.2, -0.1, 0.0, 0.05, 0.15]
                .iter()
                .map(|f| {
                    let mut x = vec![0.0; self.grid.d];
                    x[0] = f * l;
                    x
                })
                .collect()
        })
    }
}
