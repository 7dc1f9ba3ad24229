//! Subcommands. Each one writes its CSV tables and `summary.txt` into the
//! output directory; only the summary carries a timestamp.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use degpar::data::Forcing;
use degpar::estimates::{self, EstimateReport, KernelDecayOptions, Thm2Inputs};
use degpar::oracle::{self, FdScheme, McOptions};
use degpar::solver::{self, TimePartition};
use degpar::{CoefficientPath, DegeneracyProfile, Error, LPFamily, SpectralField};

use crate::config::{Diagnostic, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    CheckThm1,
    CheckThm2,
    CheckClassic,
    KernelDecay,
    ProfileCheck,
    EpsSweep,
    OracleCompare,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Solve,
        Command::CheckThm1,
        Command::CheckThm2,
        Command::CheckClassic,
        Command::KernelDecay,
        Command::ProfileCheck,
        Command::EpsSweep,
        Command::OracleCompare,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::CheckThm1 => "check-thm1",
            Command::CheckThm2 => "check-thm2",
            Command::CheckClassic => "check-classic",
            Command::KernelDecay => "kernel-decay",
            Command::ProfileCheck => "profile-check",
            Command::EpsSweep => "eps-sweep",
            Command::OracleCompare => "oracle-compare",
        }
    }

    fn inequality(self) -> &'static str {
        match self {
            Command::Solve => "u(t) = T(0,t)u0 + ∫_0^t T(s,t)f(s) ds, checked in weak form against Gaussian test bumps",
            Command::CheckThm1 | Command::EpsSweep => {
                "‖u_xx‖_{H^n_p(T, δ)} ≤ N(d,p) (‖f‖_{H^n_p(T, δ^{1−p})} + ‖u0‖_{B^{n+2−2/p}_p}), N independent of T and M"
            }
            Command::CheckThm2 => {
                "‖u_xx‖_{L_p(T)} ≤ N(d,p,T,N0,N̄0,β,∫_0^{t0}δ) ‖u0‖_{B^{2(1−1/(βp))}_p}  (f = 0)"
            }
            Command::CheckClassic => "sup_t ‖u(t)‖_p ≤ ‖u0‖_p + T^{1−1/p} ‖f‖_{L_p(T)}",
            Command::KernelDecay => "‖Δ^{γ/2} Δ_k p(t,·)‖_{L_1} ≤ N 2^{kγ} exp(−c 4^k ∫_0^t δ)",
            Command::ProfileCheck => {
                "|{t ≤ t0 : h ≤ ∫_0^t δ < 4h}| ≤ N0 h^{1/β},  |a^{ij}(t)| ≤ N̄0 δ(t),  N t^β ≤ ∫_0^t δ"
            }
            Command::OracleCompare => {
                "spectral solution = finite-difference limit (order 2) = E[u0(x + X_t)] + ∫ E[f(s, x + X_t − X_s)] ds, X_t − X_s ~ N(0, 2∫_s^t A)"
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub tolerance_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out: None,
            workers: None,
            seed: None,
            tolerance_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A numerical check missed its declared tolerance.
    Failed,
    /// A hypothesis of the exercised inequality does not hold.
    Inadmissible,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed => 1,
            Status::Inadmissible => 2,
        }
    }

    fn worst(self, other: Status) -> Status {
        use Status::*;
        match (self, other) {
            (Inadmissible, _) | (_, Inadmissible) => Inadmissible,
            (Failed, _) | (_, Failed) => Failed,
            _ => Ok,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub out_dir: PathBuf,
    pub summary: String,
}

#[derive(Debug)]
pub enum RunError {
    Config(Vec<Diagnostic>),
    Internal(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 3,
            RunError::Internal(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(diags) => {
                writeln!(f, "invalid config:")?;
                for d in diags {
                    writeln!(f, "  {d}")?;
                }
                Ok(())
            }
            RunError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Internal(e.to_string())
    }
}

/// Result body of a subcommand before the summary is assembled.
struct Findings {
    status: Status,
    constants: Vec<(String, String)>,
    lines: Vec<String>,
}

impl Findings {
    fn new() -> Self {
        Self {
            status: Status::Ok,
            constants: Vec::new(),
            lines: Vec::new(),
        }
    }

    fn constant(&mut self, key: &str, value: impl ToString) {
        self.constants.push((key.into(), value.to_string()));
    }

    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn check(&mut self, ok: bool, what: String) {
        self.lines.push(format!("[{}] {what}", if ok { "ok" } else { "FAILED" }));
        if !ok {
            self.status = self.status.worst(Status::Failed);
        }
    }

    fn inadmissible(&mut self, why: impl Into<String>) {
        self.lines.push(format!("[inadmissible] {}", why.into()));
        self.status = Status::Inadmissible;
    }

    fn report(&mut self, r: &EstimateReport) {
        for (k, v) in &r.echo {
            self.constant(k, v);
        }
        self.lines.extend(r.summary().lines().map(str::to_string));
        if !r.is_admissible() {
            self.inadmissible(r.flags.join(", "));
        }
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    out: PathBuf,
    tol: f64,
}

impl Context<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<(), RunError> {
        fs::write(self.out.join(name), contents)?;
        Ok(())
    }
}

/// Validates the config, runs one subcommand and writes its artifacts.
pub fn run(command: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, RunError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.experiment.seed = seed;
    }
    let diags = cfg.validate();
    if !diags.is_empty() {
        return Err(RunError::Config(diags));
    }
    if !(opts.tolerance_scale > 0.0 && opts.tolerance_scale.is_finite()) {
        return Err(RunError::Config(vec![Diagnostic {
            field: "--tolerance-scale".into(),
            message: format!("must be positive, got {}", opts.tolerance_scale),
        }]));
    }
    if opts.workers == Some(0) {
        return Err(RunError::Config(vec![Diagnostic {
            field: "--workers".into(),
            message: "need at least one worker".into(),
        }]));
    }
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.experiment.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.experiment.name).join(command.name()));
    fs::create_dir_all(&out)?;
    let ctx = Context {
        cfg: &cfg,
        out: out.clone(),
        tol: opts.tolerance_scale,
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| RunError::Internal(e.to_string()))?;
    let findings = pool.install(|| match command {
        Command::Solve => solve(&ctx),
        Command::CheckThm1 => check_thm1(&ctx),
        Command::CheckThm2 => check_thm2(&ctx),
        Command::CheckClassic => check_classic(&ctx),
        Command::KernelDecay => kernel_decay(&ctx),
        Command::ProfileCheck => profile_check(&ctx),
        Command::EpsSweep => eps_sweep(&ctx),
        Command::OracleCompare => oracle_compare(&ctx),
    })?;

    let summary = render_summary(command, &cfg, opts, &findings);
    fs::write(out.join("summary.txt"), &summary)?;
    Ok(Outcome {
        status: findings.status,
        out_dir: out,
        summary,
    })
}

fn render_summary(command: Command, cfg: &ExperimentConfig, opts: &RunOptions, f: &Findings) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "degpar {} — experiment '{}'", command.name(), cfg.experiment.name);
    let _ = writeln!(s, "generated: {}", chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    let _ = writeln!(s, "inequality: {}", command.inequality());
    let _ = writeln!(s);
    let _ = writeln!(s, "setup:");
    let _ = writeln!(s, "  profile = {}", cfg.profile.spec);
    if let Some(m) = &cfg.coefficients.matrix {
        let _ = writeln!(s, "  A = {m:?}");
    } else if let Some(c) = &cfg.coefficients.scalar {
        let _ = writeln!(s, "  A = ({c}) I");
    } else {
        let _ = writeln!(s, "  A = δ I");
    }
    let _ = writeln!(s, "  d = {}, n = {}, L = {}", cfg.grid.d, cfg.grid.n, cfg.grid.period);
    let _ = writeln!(
        s,
        "  T = {}, K = {} ({:?})",
        cfg.partition.horizon, cfg.partition.steps, cfg.partition.kind
    );
    let _ = writeln!(s, "  u0 = {}, f = {}", cfg.initial.spec, cfg.forcing.spec);
    let _ = writeln!(s, "  seed = {}, tolerance scale = {}", cfg.experiment.seed, opts.tolerance_scale);
    if !f.constants.is_empty() {
        let _ = writeln!(s, "constants:");
        for (k, v) in &f.constants {
            let _ = writeln!(s, "  {k} = {v}");
        }
    }
    let _ = writeln!(s, "results:");
    for l in &f.lines {
        let _ = writeln!(s, "  {l}");
    }
    let status = match f.status {
        Status::Ok => "ok",
        Status::Failed => "failed",
        Status::Inadmissible => "inadmissible",
    };
    let _ = writeln!(s, "status: {status} (exit {})", f.status.exit_code());
    s
}

struct Problem {
    grid: degpar::GridSpec,
    profile: DegeneracyProfile,
    path: CoefficientPath,
    partition: TimePartition,
    u0: SpectralField,
    forcing: Forcing,
}

fn problem(cfg: &ExperimentConfig) -> Result<Problem, RunError> {
    let grid = cfg.grid()?;
    Ok(Problem {
        profile: cfg.profile()?,
        path: cfg.path()?,
        partition: cfg.partition()?,
        u0: cfg.initial(&grid)?,
        forcing: cfg.forcing(&grid)?,
        grid,
    })
}

/// Ellipticity `ξᵀAξ ≥ δ|ξ|²` on the partition nodes.
fn ellipticity(pb: &Problem, f: &mut Findings) -> Result<bool, RunError> {
    match pb.path.validate(&pb.profile, pb.partition.nodes()) {
        Ok(()) => Ok(true),
        Err(Error::Validation(m)) => {
            f.inadmissible(m);
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}

fn solve(ctx: &Context) -> Result<Findings, RunError> {
    let pb = problem(ctx.cfg)?;
    let mut f = Findings::new();
    let mut report = solver::solve_duhamel(&pb.u0, &pb.forcing, &pb.path, &pb.partition)?;
    report.recompute_norms(ctx.cfg.theorem.p)?;

    let mut residuals = vec![0.0f64; report.snapshots.len()];
    for test in ctx.cfg.test_functions(&pb.grid) {
        let mut probe = report.clone();
        probe.attach_weak_residuals(&pb.forcing, &pb.u0, &pb.path, &test)?;
        for (r, w) in residuals.iter_mut().zip(&probe.weak_residuals) {
            *r = r.max(w.unwrap_or(0.0));
        }
    }
    report.weak_residuals = residuals.iter().map(|r| Some(*r)).collect();

    let horizon = pb.partition.horizon();
    match solver::kernel(&pb.path, horizon, &pb.grid) {
        Ok(k) => report.kernel_mass = Some(k.integral()),
        Err(Error::DegenerateKernel(_)) => f.line("kernel p(T,·) is degenerate (∫_0^T A singular); mass not checked"),
        Err(e) => return Err(e.into()),
    }

    let cfg = ctx.cfg;
    let meta = vec![
        ("experiment".to_string(), cfg.experiment.name.clone()),
        ("seed".into(), cfg.experiment.seed.to_string()),
        ("profile".into(), cfg.profile.spec.clone()),
        ("coefficients".into(), pb.path.entry_specs().join("; ")),
        ("initial".into(), cfg.initial.spec.clone()),
        ("forcing".into(), cfg.forcing.spec.clone()),
    ];
    report.write_dir(&ctx.out, &meta)?;

    // Residuals are relative to ‖φ‖_1 (‖u0‖_∞ + ∫‖f‖_∞).
    let tests = ctx.cfg.test_functions(&pb.grid);
    let phi_l1 = tests.iter().map(|t| t.lp_norm(1.0)).fold(0.0, f64::max);
    let nodes = pb.partition.nodes();
    let f_sup: Vec<f64> = nodes.iter().map(|t| pb.forcing.at(*t).map_or(0.0, |g| g.max_abs())).collect();
    let f_int: f64 = nodes.windows(2).zip(f_sup.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum();
    let scale = phi_l1 * (pb.u0.max_abs() + f_int);
    let wr = report.max_weak_residual().unwrap_or(0.0);
    let wr_tol = 1e-3 * ctx.tol;
    f.constant("test functions", tests.len());
    f.constant("residual scale ‖φ‖_1 (‖u0‖_∞ + ∫‖f‖_∞)", format!("{scale:e}"));
    f.check(
        wr <= wr_tol * scale,
        format!("max weak residual {wr:e} ≤ {wr_tol:e} × residual scale"),
    );
    if let Some(m) = report.kernel_mass {
        let tol = 1e-6 * ctx.tol;
        f.check((m - 1.0).abs() <= tol, format!("kernel mass at T: |{m:?} − 1| ≤ {tol:e}"));
    }
    let first = &report.snapshots[0];
    let drift = report
        .snapshots
        .iter()
        .map(|u| u.sub(first).map(|d| d.max_abs()))
        .collect::<degpar::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    f.line(format!("max |u(t_k) − u0|_∞ = {drift:e}"));
    f.line(format!(
        "final ‖u‖_p = {:e}, ‖u‖_(H^2_p) = {:e} (p = {})",
        report.norms.last().unwrap().lp,
        report.norms.last().unwrap().h2p,
        report.p
    ));
    f.line(format!("snapshots: {} files snap_<k>.bin, norms in norms.csv", report.snapshots.len()));
    Ok(f)
}

fn finite_ratio(f: &mut Findings, r: &EstimateReport) {
    if r.is_admissible() {
        f.check(
            r.lhs.is_finite() && r.ratio.is_finite() && r.ratio >= 0.0,
            format!("lhs {:e} and ratio {:e} finite", r.lhs, r.ratio),
        );
    }
}

fn check_thm1(ctx: &Context) -> Result<Findings, RunError> {
    let pb = problem(ctx.cfg)?;
    let mut f = Findings::new();
    if !ellipticity(&pb, &mut f)? {
        return Ok(f);
    }
    let th = &ctx.cfg.theorem;
    let r = estimates::check_thm1(&pb.u0, &pb.forcing, &pb.path, &pb.profile, th.n, th.p, &pb.partition)?;
    ctx.write("thm1.csv", &format!("{}\n{}\n", EstimateReport::csv_header(), r.csv_row()))?;
    f.report(&r);
    finite_ratio(&mut f, &r);
    Ok(f)
}

fn thm2_inputs(ctx: &Context, pb: &Problem, f: &mut Findings) -> Result<Option<Thm2Inputs>, RunError> {
    let samples = &pb.partition.nodes()[1..];
    match Thm2Inputs::measure(&pb.path, &pb.profile, ctx.cfg.t0(), &ctx.cfg.h_grid(), samples) {
        Ok(mut inputs) => {
            if let Some(b) = ctx.cfg.theorem.beta {
                f.line(format!("fitted β̂ = {} replaced by configured β = {b}", inputs.beta_hat));
                inputs.beta_hat = b;
            }
            Ok(Some(inputs))
        }
        Err(e @ (Error::DegenerateFit(_) | Error::Precondition(_) | Error::Range { .. })) => {
            f.inadmissible(format!("level-set fit: {e}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn check_thm2(ctx: &Context) -> Result<Findings, RunError> {
    let pb = problem(ctx.cfg)?;
    let mut f = Findings::new();
    if !pb.forcing.is_zero() {
        f.line("forcing ignored: the homogeneous estimate has f = 0");
    }
    if !ellipticity(&pb, &mut f)? {
        return Ok(f);
    }
    let Some(inputs) = thm2_inputs(ctx, &pb, &mut f)? else {
        return Ok(f);
    };
    let r = estimates::check_thm2(&pb.u0, &pb.path, &pb.profile, ctx.cfg.theorem.p, &inputs, &pb.partition)?;
    ctx.write("thm2.csv", &format!("{}\n{}\n", EstimateReport::csv_header(), r.csv_row()))?;
    f.report(&r);
    finite_ratio(&mut f, &r);
    Ok(f)
}

fn check_classic(ctx: &Context) -> Result<Findings, RunError> {
    let pb = problem(ctx.cfg)?;
    let mut f = Findings::new();
    let p = ctx.cfg.theorem.p;
    let report = solver::solve_duhamel(&pb.u0, &pb.forcing, &pb.path, &pb.partition)?;
    let r = estimates::check_classic(&report, &pb.forcing, &pb.u0, &pb.profile, p)?;
    ctx.write("classic.csv", &format!("{}\n{}\n", EstimateReport::csv_header(), r.csv_row()))?;
    f.report(&r);
    let horizon = pb.partition.horizon();
    let constant = if pb.forcing.is_zero() { 1.0 } else { horizon.powf(1.0 - 1.0 / p).max(1.0) };
    let tol = if pb.forcing.is_zero() { 1e-10 } else { 1e-6 } * ctx.tol;
    f.constant("N", constant);
    f.check(
        r.ratio <= constant * (1.0 + tol) && r.flags.is_empty(),
        format!("ratio {:e} ≤ N (1 + {tol:e})", r.ratio),
    );
    Ok(f)
}

fn kernel_decay(ctx: &Context) -> Result<Findings, RunError> {
    let pb = problem(ctx.cfg)?;
    let mut f = Findings::new();
    let fam = LPFamily::for_grid(&pb.grid);
    let ks = ctx.cfg.kernel_blocks(&fam);
    let times = ctx.cfg.kernel_times();
    let opts = KernelDecayOptions::default();
    f.constant("k", format!("{ks:?}"));
    f.constant("t", format!("{times:?}"));
    f.constant("cap factor", opts.cap_factor);
    let mut samples = String::from("gamma,k,t,beta,mass,bound,excluded\n");
    let mut fits = String::from("gamma,N,c,reference,violations\n");
    for &gamma in &ctx.cfg.theorem.gamma {
        let fit = match estimates::check_kernel_decay(&pb.path, &pb.profile, gamma, &ks, &times, &pb.grid, &fam, &opts) {
            Ok(fit) => fit,
            Err(Error::DegenerateKernel(t)) => {
                f.inadmissible(format!("∫_0^t A is singular at t = {t:e}: no decay to certify"));
                return Ok(f);
            }
            Err(e) => return Err(e.into()),
        };
        for row in fit.csv().lines().skip(1) {
            let _ = writeln!(samples, "{gamma:?},{row}");
        }
        let _ = writeln!(fits, "{gamma:?},{:?},{:?},{:?},{}", fit.n, fit.c, fit.reference, fit.violations.len());
        f.check(
            fit.violations.is_empty() && fit.c > 0.0,
            format!(
                "γ = {gamma}: N = {:.4}, c = {:.4}, {} violations",
                fit.n,
                fit.c,
                fit.violations.len()
            ),
        );
    }
    ctx.write("kernel_decay.csv", &samples)?;
    ctx.write("kernel_fit.csv", &fits)?;
    Ok(f)
}

fn profile_check(ctx: &Context) -> Result<Findings, RunError> {
    let pb = problem(ctx.cfg)?;
    let mut f = Findings::new();
    let t0 = ctx.cfg.t0();
    let h_grid = ctx.cfg.h_grid();
    let beta_t0 = pb.profile.cumulative_delta(t0)?;
    f.constant("t0", t0);
    f.constant("∫_0^t0 δ", format!("{beta_t0:?}"));

    let mut csv = String::from("h,levelset_measure\n");
    for h in &h_grid {
        let _ = writeln!(csv, "{h:?},{:?}", pb.profile.levelset_measure(*h, t0)?);
    }
    ctx.write("levelset.csv", &csv)?;

    let beta_hat = match pb.profile.fit_beta_exponent(t0, &h_grid) {
        Ok(fit) => {
            f.constant("β̂", format!("{:.6}", fit.beta_hat));
            f.constant("N0", format!("{:.6}", fit.n0_hat));
            f.line(format!(
                "level-set fit on h ∈ [{:e}, {:e}]: β̂ = {:.4}, N0 = {:.4}, rms residual {:.2e}",
                h_grid.iter().copied().fold(f64::INFINITY, f64::min),
                h_grid.iter().copied().fold(0.0, f64::max),
                fit.beta_hat,
                fit.n0_hat,
                fit.residual
            ));
            if !(fit.beta_hat.is_finite() && fit.beta_hat > 0.0) {
                f.inadmissible(format!("level-set exponent {} not positive", fit.beta_hat));
            }
            Some(fit.beta_hat)
        }
        Err(e @ (Error::DegenerateFit(_) | Error::Precondition(_) | Error::Range { .. })) => {
            f.inadmissible(format!("level-set fit: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };

    let samples = &pb.partition.nodes()[1..];
    let dom = pb.path.check_domination(&pb.profile, samples)?;
    f.constant("N̄0", format!("{:?}", dom.value()));
    if let degpar::DominationBound::Infinite { t } = dom {
        f.inadmissible(format!("coefficients not dominated by δ at t = {t:e}"));
    } else {
        f.line(format!("domination |a^ij| ≤ N̄0 δ with N̄0 = {:.4}", dom.value()));
    }
    if !(beta_t0 > 0.0) {
        f.inadmissible("∫_0^t0 δ vanishes");
    }

    // Brackets on 1000 points of (0, t0].
    let mut csv = String::from("t,delta,beta,quarter,double\n");
    let (mut quarter_ok, mut double_ok) = (true, true);
    let (mut n_cum, mut n_weak) = (f64::INFINITY, f64::INFINITY);
    for i in 1..=1000 {
        let t = t0 * i as f64 / 1000.0;
        let b = pb.profile.cumulative_delta(t)?;
        let d = pb.profile.eval_delta(t)?;
        quarter_ok &= b >= t / 4.0;
        double_ok &= b <= 2.0 * t;
        if let Some(bh) = beta_hat {
            n_cum = n_cum.min(b / t.powf(bh));
            n_weak = n_weak.min(d / t.powf(bh - 1.0));
        }
        let _ = writeln!(csv, "{t:?},{d:?},{b:?},{:?},{:?}", t / 4.0, 2.0 * t);
    }
    ctx.write("brackets.csv", &csv)?;
    f.line(format!(
        "bracket t/4 ≤ ∫_0^t δ: {}; ∫_0^t δ ≤ 2t: {} (1000 points in (0, t0])",
        yes(quarter_ok),
        yes(double_ok)
    ));
    if beta_hat.is_some() {
        f.line(format!("sampled min of ∫_0^t δ / t^β̂ = {n_cum:.4e}"));
        f.line(format!("sampled min of δ(t) / t^(β̂−1) = {n_weak:.4e}"));
    }
    Ok(f)
}

fn yes(b: bool) -> &'static str {
    if b {
        "satisfied"
    } else {
        "violated"
    }
}

fn eps_sweep(ctx: &Context) -> Result<Findings, RunError> {
    let pb = problem(ctx.cfg)?;
    let mut f = Findings::new();
    let th = &ctx.cfg.theorem;
    let reports =
        estimates::epsilon_sweep(&pb.u0, &pb.forcing, &pb.path, &pb.profile, &th.eps, th.n, th.p, &pb.partition)?;
    let mut csv = format!("eps,{}\n", EstimateReport::csv_header());
    for (eps, r) in th.eps.iter().zip(&reports) {
        let _ = writeln!(csv, "{eps:?},{}", r.csv_row());
        f.line(format!("ε = {eps:e}: lhs {:e}, ratio {:e}", r.lhs, r.ratio));
    }
    ctx.write("eps_sweep.csv", &csv)?;
    f.constant("ε", format!("{:?}", th.eps));
    f.constant("n", th.n);
    f.constant("p", th.p);
    if let Some(r) = reports.first() {
        for (k, v) in &r.echo {
            if k != "eps" {
                f.constant(k, v);
            }
        }
    }
    // The constant is uniform in ε: ratios may shrink as ε → 0 but not grow.
    let first = reports[0].ratio;
    let growth = reports.iter().map(|r| r.ratio / first).fold(1.0, f64::max);
    let bound = 2.0 * ctx.tol;
    f.check(
        first > 0.0 && growth.is_finite() && growth <= bound,
        format!("max ratio / largest-ε ratio = {growth:.4} ≤ {bound}"),
    );
    Ok(f)
}

fn oracle_compare(ctx: &Context) -> Result<Findings, RunError> {
    let cfg = ctx.cfg;
    let pb = problem(cfg)?;
    let mut f = Findings::new();
    let scheme = FdScheme::new(cfg.oracle.theta)?;
    let levels = cfg.oracle.fd_levels;

    let mut csv = String::from("n,K,relative_l2_error,order\n");
    let mut errors = Vec::new();
    let mut sizes = Vec::new();
    let coarsest = cfg.grid_with(cfg.grid.n >> (levels - 1))?;
    let mut diags = Vec::new();
    if let Ok(spec) = cfg.initial.spec.parse::<degpar::data::DataSpec>() {
        diags.extend(spec.diagnostics(&coarsest));
    }
    if let Ok(spec) = cfg.forcing.spec.parse::<degpar::data::ForcingSpec>() {
        diags.extend(spec.diagnostics(&coarsest));
    }
    if !diags.is_empty() {
        return Err(RunError::Config(
            diags
                .into_iter()
                .map(|m| Diagnostic {
                    field: "oracle.fd_levels".into(),
                    message: format!("on the coarsest FD grid (n = {}): {m}", coarsest.points_per_axis()),
                })
                .collect(),
        ));
    }
    for i in 0..levels {
        let shift = levels - 1 - i;
        let n = cfg.grid.n >> shift;
        let steps = (cfg.partition.steps >> shift).max(1);
        let grid = cfg.grid_with(n)?;
        let mut sub = cfg.clone();
        sub.partition.steps = steps;
        let part = sub.partition()?;
        let u0 = cfg.initial(&grid)?;
        let forcing = cfg.forcing(&grid)?;
        let sp = solver::solve_duhamel(&u0, &forcing, &pb.path, &part)?;
        let fd = oracle::fd_solve(&u0, &forcing, &pb.path, &scheme, &part)?;
        errors.push(oracle::compare_fields(sp.last(), fd.last(), 2.0)?);
        sizes.push((n, steps));
    }
    let orders = oracle::observed_orders(&errors);
    for (i, ((n, k), e)) in sizes.iter().zip(&errors).enumerate() {
        let order = if i == 0 { String::new() } else { format!("{:?}", orders[i - 1]) };
        let _ = writeln!(csv, "{n},{k},{e:?},{order}");
    }
    ctx.write("fd.csv", &csv)?;
    let fd_order = *orders.last().unwrap();
    let order_min = 2.0 - 0.1 * ctx.tol;
    let roundoff = 1e-10 * ctx.tol;
    f.constant("θ", cfg.oracle.theta);
    if errors.iter().all(|e| *e <= roundoff) {
        f.check(true, format!("FD and spectral agree to roundoff on every grid (≤ {roundoff:e})"));
    } else {
        f.check(
            fd_order >= order_min,
        format!("FD observed order {fd_order:.3} ≥ {order_min} (errors {:?})", errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()),
        );
    }

    let seed = cfg.experiment.seed;
    let samples = cfg.oracle.samples;
    f.constant("samples", samples);
    f.constant("seed", seed);
    let sp = solver::solve_duhamel(&pb.u0, &pb.forcing, &pb.path, &pb.partition)?;
    let probes = cfg.probes();
    let est = oracle::mc_solve(&pb.u0, &pb.forcing, &pb.path, &pb.partition, &probes, &McOptions { samples, seed })?;
    let mut csv = String::from("x,mean,stderr,spectral,z\n");
    let mut mc_z = 0.0f64;
    for (x, (m, s)) in probes.iter().zip(est.mean.iter().zip(&est.stderr)) {
        let exact = oracle::cubic_interpolate(sp.last(), x);
        let z = if *s > 0.0 {
            (m - exact).abs() / s
        } else if (m - exact).abs() <= 1e-12 * exact.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        };
        mc_z = mc_z.max(z);
        let coords: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(csv, "{},{m:?},{s:?},{exact:?},{z:?}", coords.join(" "));
    }
    ctx.write("mc.csv", &csv)?;
    let mc_max = 3.0 * ctx.tol;
    f.check(mc_z <= mc_max, format!("Monte Carlo max z-score {mc_z:.3} ≤ {mc_max} at {} probes", probes.len()));

    let horizon = pb.partition.horizon();
    let s = cfg.oracle.charfn_s.unwrap_or(horizon / 5.0);
    let d = cfg.grid.d;
    let b = pb.path.accumulate(s, horizon)?;
    let q = b.sum() / d as f64;
    let count = cfg.oracle.frequencies;
    let freqs: Vec<Vec<f64>> = (1..=count)
        .map(|k| {
            // Spread ξᵀBξ over (0, 2] along the diagonal direction.
            let mag = if q > 0.0 { (2.0 * k as f64 / (count as f64 * q)).sqrt() } else { k as f64 };
            vec![mag / (d as f64).sqrt(); d]
        })
        .collect();
    let cf = oracle::char_fn_check(
        &pb.path,
        &pb.partition,
        s,
        horizon,
        &freqs,
        &McOptions {
            samples,
            seed: seed.wrapping_add(1),
        },
    )?;
    let mut csv = String::from("xi,re,im,re_stderr,im_stderr,exact,z\n");
    let mut cf_z = 0.0f64;
    for c in &cf {
        let z = c.z_score();
        cf_z = cf_z.max(z);
        let xi: Vec<String> = c.xi.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(
            csv,
            "{},{:?},{:?},{:?},{:?},{:?},{z:?}",
            xi.join(" "),
            c.re,
            c.im,
            c.re_stderr,
            c.im_stderr,
            c.exact
        );
    }
    ctx.write("charfn.csv", &csv)?;
    let cf_max = 4.0 * ctx.tol;
    f.constant("char-fn window", format!("[{s}, {horizon}]"));
    f.check(cf_z <= cf_max, format!("characteristic function max z-score {cf_z:.3} ≤ {cf_max} at {count} frequencies"));
    Ok(f)
}

/// Loads, validates and runs; maps every failure mode to its exit code.
pub fn run_file(command: Command, config: &Path, opts: &RunOptions) -> Result<Outcome, RunError> {
    let cfg = ExperimentConfig::load(config).map_err(RunError::Config)?;
    run(command, &cfg, opts)
}
