//! Acceptance criteria. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use degpar::data::{DataContext, DataSpec, Forcing};
use degpar::estimates::{self, KernelDecayOptions, Thm2Inputs};
use degpar::oracle::{self, FdScheme, McOptions};
use degpar::solver::{self, TimePartition};
use degpar::{CoefficientPath, DegeneracyProfile, FnSpec, GridSpec, LPFamily, SpectralField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn gaussian_density(grid: GridSpec, var: f64) -> SpectralField {
    SpectralField::from_fn(grid, move |x| (-x[0] * x[0] / (2.0 * var)).exp() / (2.0 * PI * var).sqrt())
}

fn builtin_profiles(horizon: f64) -> Vec<DegeneracyProfile> {
    vec![
        DegeneracyProfile::constant(1.0, horizon).unwrap(),
        DegeneracyProfile::power(1.0, horizon).unwrap(),
        DegeneracyProfile::oscillatory(horizon).unwrap(),
    ]
}

/// Heat benchmark against the analytic Gaussian.
fn heat_benchmark() -> Outcome {
    let grid = GridSpec::new(1, 1024, 40.0).unwrap();
    let path = CoefficientPath::constant(1, &[1.0], 1.0).unwrap();
    let u0 = gaussian_density(grid, 1.0);
    let part = TimePartition::uniform(16, 1.0).unwrap();
    let rep = solver::solve_homogeneous(&u0, &path, &part).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (u, t) in rep.snapshots.iter().zip(part.nodes()) {
        let exact = gaussian_density(grid, 1.0 + 2.0 * t);
        worst = worst.max(u.sub(&exact).unwrap().max_abs() / exact.max_abs());
    }
    check(worst < 1e-8, format!("max relative L∞ error {worst:.3e} (< 1e-8)"))
}

/// Unit mass of the kernel.
fn kernel_mass() -> Outcome {
    let grid = GridSpec::new(1, 1024, 16.0).unwrap();
    let times = logspace(1e-3, 1.0, 8);
    let mut worst = 0.0f64;
    for profile in builtin_profiles(1.0) {
        let path = CoefficientPath::from_profile(1, &profile);
        for &t in &times {
            let p = solver::kernel(&path, t, &grid).map_err(|e| e.to_string())?;
            worst = worst.max((p.integral() - 1.0).abs());
        }
    }
    check(worst <= 1e-6, format!("max |mass − 1| = {worst:.3e} over 3 profiles × 8 times (≤ 1e-6)"))
}

/// Littlewood–Paley reconstruction and partition of unity.
fn lp_reconstruction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst_rec = 0.0f64;
    let mut worst_pu = 0.0f64;
    for trial in 0..20 {
        let grid = if trial % 2 == 0 {
            GridSpec::new(1, 1024, 16.0 * PI).unwrap()
        } else {
            GridSpec::new(2, 256, 8.0 * PI).unwrap()
        };
        let fam = LPFamily::for_grid(&grid);
        let cutoff = 2f64.powi(fam.j_max);
        let modes: Vec<(Vec<f64>, f64, f64)> = (0..12)
            .map(|_| {
                let r = rng.random::<f64>() * cutoff;
                let theta = rng.random::<f64>() * 2.0 * PI;
                let xi = if grid.dim() == 1 {
                    vec![r]
                } else {
                    vec![r * theta.cos(), r * theta.sin()]
                };
                // Snap to the lattice so the mode is periodic.
                let unit = 2.0 * PI / grid.period();
                let xi: Vec<f64> = xi.iter().map(|v| (v / unit).round() * unit).collect();
                (xi, rng.random::<f64>() - 0.5, rng.random::<f64>() * 2.0 * PI)
            })
            .filter(|(xi, _, _)| xi.iter().map(|v| v * v).sum::<f64>().sqrt() <= cutoff)
            .collect();
        let u = SpectralField::from_fn(grid, |x| {
            modes
                .iter()
                .map(|(xi, a, ph)| a * (xi.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + ph).cos())
                .sum()
        });
        let mut rebuilt = fam.s0(&u);
        for j in 1..=fam.j_max {
            rebuilt = rebuilt.add(&fam.block(&u, j).unwrap()).unwrap();
        }
        worst_rec = worst_rec.max(u.sub(&rebuilt).unwrap().max_abs());
        worst_pu = worst_pu.max(fam.partition_defect(&grid));
    }
    check(
        worst_rec < 1e-10 && worst_pu < 1e-12,
        format!("reconstruction {worst_rec:.3e} (< 1e-10), partition defect {worst_pu:.3e} (< 1e-12), 20 fields"),
    )
}

/// Direct and time-changed solves agree for δ = t + 0.1.
fn time_change() -> Outcome {
    let grid = GridSpec::new(1, 1024, 40.0).unwrap();
    let profile = DegeneracyProfile::parse("expr(\"t + 0.1\")", 1.0).map_err(|e| e.to_string())?;
    let path = CoefficientPath::from_profile(1, &profile);
    let u0 = gaussian_density(grid, 0.5);
    let part = TimePartition::uniform(8, 1.0).unwrap();
    let direct = solver::solve_homogeneous(&u0, &path, &part).map_err(|e| e.to_string())?;
    let changed = solver::time_change_solve(&u0, &Forcing::Zero, &path, &profile, &part).map_err(|e| e.to_string())?;
    let worst = direct
        .snapshots
        .iter()
        .zip(&changed.snapshots)
        .skip(1)
        .map(|(a, b)| a.sub(b).unwrap().max_abs())
        .fold(0.0, f64::max);
    check(worst < 1e-8, format!("max L∞ gap {worst:.3e} at 8 snapshots (< 1e-8)"))
}

/// Spectral vs finite differences vs Monte Carlo, and the characteristic function.
fn oracle_triangle() -> Outcome {
    let horizon = 0.1;
    let profile = DegeneracyProfile::oscillatory(horizon).unwrap();
    let path = CoefficientPath::from_profile(1, &profile);

    let mut errors = Vec::new();
    for n in [64usize, 128, 256, 512] {
        let grid = GridSpec::new(1, n, 16.0).unwrap();
        let u0 = gaussian_density(grid, 0.25);
        let part = TimePartition::uniform(n / 4, horizon).unwrap();
        let sp = solver::solve_homogeneous(&u0, &path, &part).map_err(|e| e.to_string())?;
        let fd = oracle::fd_solve(&u0, &Forcing::Zero, &path, &FdScheme::crank_nicolson(), &part).map_err(|e| e.to_string())?;
        errors.push(oracle::compare_fields(sp.last(), fd.last(), 2.0).unwrap());
    }
    let orders = oracle::observed_orders(&errors);
    let fd_order = orders.last().copied().unwrap();

    let grid = GridSpec::new(1, 1024, 16.0).unwrap();
    let u0 = gaussian_density(grid, 0.25);
    let part = TimePartition::uniform(32, horizon).unwrap();
    let sp = solver::solve_homogeneous(&u0, &path, &part).map_err(|e| e.to_string())?;
    let probes: Vec<Vec<f64>> = [-0.9, -0.4, 0.0, 0.3, 1.1].iter().map(|x| vec![*x]).collect();
    let est = oracle::mc_solve(&u0, &Forcing::Zero, &path, &part, &probes, &McOptions { samples: 100_000, seed: 5 })
        .map_err(|e| e.to_string())?;
    let mc_z = probes
        .iter()
        .zip(est.mean.iter().zip(&est.stderr))
        .map(|(x, (m, s))| (m - oracle::cubic_interpolate(sp.last(), x)).abs() / s)
        .fold(0.0, f64::max);

    let freqs: Vec<Vec<f64>> = (1..=10).map(|i| vec![0.6 * i as f64]).collect();
    let cf = oracle::char_fn_check(&path, &part, 0.02, horizon, &freqs, &McOptions { samples: 100_000, seed: 6 })
        .map_err(|e| e.to_string())?;
    let cf_z = cf.iter().map(|c| c.z_score()).fold(0.0, f64::max);

    check(
        fd_order >= 1.9 && mc_z <= 3.0 && cf_z <= 4.0,
        format!(
            "FD orders {:?} (last ≥ 1.9), MC max z {mc_z:.2} (≤ 3), char-fn max z {cf_z:.2} (≤ 4)",
            orders.iter().map(|o| (o * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    )
}

/// One `(N, c)` bounds every block mass for each profile and γ.
fn kernel_decay() -> Outcome {
    let grid = GridSpec::new(1, 2048, 8.0 * PI).unwrap();
    let fam = LPFamily::for_grid(&grid);
    let times = logspace(1e-4, 1.0, 8);
    let ks: Vec<i32> = (1..=6).collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for profile in builtin_profiles(1.0) {
        let path = CoefficientPath::from_profile(1, &profile);
        for gamma in [0.0, 1.0] {
            let fit = estimates::check_kernel_decay(&path, &profile, gamma, &ks, &times, &grid, &fam, &KernelDecayOptions::default())
                .map_err(|e| e.to_string())?;
            ok &= fit.violations.is_empty() && fit.c > 0.0;
            lines.push(format!(
                "{} γ={gamma}: c={:.3} N={:.3} viol={}",
                profile.spec(),
                fit.c,
                fit.n,
                fit.violations.len()
            ));
        }
    }
    check(ok, lines.join("; "))
}

fn thm1_ratio(n_grid: usize, steps: usize, p: f64) -> Result<f64, String> {
    let grid = GridSpec::new(1, n_grid, 32.0).unwrap();
    let profile = DegeneracyProfile::power(1.0, 1.0).unwrap();
    let path = CoefficientPath::from_profile(1, &profile);
    let u0 = DataSpec::Gaussian { sigma: 1.0, center: vec![] }
        .build(&grid, &DataContext::default())
        .unwrap();
    let part = TimePartition::geometric(steps, 1.0, None).unwrap();
    let r = estimates::check_thm1(&u0, &Forcing::Zero, &path, &profile, 0.0, p, &part).map_err(|e| e.to_string())?;
    Ok(r.ratio)
}

/// Ratio stability under refinement and ε-regularization for δ = t.
fn thm1_stability() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for p in [2.0, 4.0] {
        let base = thm1_ratio(256, 128, p)?;
        let fine_n = thm1_ratio(512, 128, p)?;
        let fine_k = thm1_ratio(256, 256, p)?;
        let dn = (fine_n / base - 1.0).abs();
        let dk = (fine_k / base - 1.0).abs();
        ok &= dn < 0.1 && dk < 0.1 && base.is_finite() && base > 0.0;

        let grid = GridSpec::new(1, 256, 32.0).unwrap();
        let profile = DegeneracyProfile::power(1.0, 1.0).unwrap();
        let path = CoefficientPath::from_profile(1, &profile);
        let u0 = DataSpec::Gaussian { sigma: 1.0, center: vec![] }
            .build(&grid, &DataContext::default())
            .unwrap();
        let part = TimePartition::geometric(128, 1.0, None).unwrap();
        let sweep = estimates::epsilon_sweep(&u0, &Forcing::Zero, &path, &profile, &[1e-1, 1e-2, 1e-3, 1e-4], 0.0, p, &part)
            .map_err(|e| e.to_string())?;
        let first = sweep[0].ratio;
        let spread = sweep.iter().map(|r| (r.ratio / first).max(first / r.ratio)).fold(0.0, f64::max);
        ok &= spread <= 2.0;
        lines.push(format!(
            "p={p}: ratio {base:.4}, Δ(n→2n) {:.2}%, Δ(K→2K) {:.2}%, ε-spread ×{spread:.3}",
            100.0 * dn,
            100.0 * dk
        ));
    }
    check(ok, lines.join("; "))
}

/// A single constant serves a family of rough data for the oscillatory profile.
fn thm2_family() -> Outcome {
    let grid = GridSpec::new(1, 2048, 32.0).unwrap();
    let profile = DegeneracyProfile::oscillatory(1.0).unwrap();
    let path = CoefficientPath::from_profile(1, &profile);
    let part = TimePartition::geometric(256, 1.0, None).unwrap();
    let samples: Vec<f64> = part.nodes()[1..].to_vec();
    let inputs = Thm2Inputs::measure(&path, &profile, 1.0, &logspace(1e-6, 1e-3, 12), &samples).map_err(|e| e.to_string())?;
    // Hypothesis exponent β = 1, so s = 2(1 − 1/(βp)) = 1 at p = 2.
    let inputs = Thm2Inputs { beta_hat: 1.0, ..inputs };
    let fam = LPFamily::for_grid(&grid);
    let mut ratios = Vec::new();
    let mut all_finite = true;
    // Five members: different seeds and numbers of active scales.
    for seed in 1..=5u64 {
        let scales = fam.j_max as u32 + 1 - seed as u32;
        let u0 = DataSpec::Rough { s: 1.0, scales }
            .build(&grid, &DataContext { seed, p: 2.0 })
            .map_err(|e| e.to_string())?;
        let r = estimates::check_thm2(&u0, &path, &profile, 2.0, &inputs, &part).map_err(|e| e.to_string())?;
        all_finite &= r.lhs.is_finite() && r.is_admissible();
        ratios.push(r.ratio);
    }
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        all_finite && hi / lo < 5.0,
        format!("lhs finite: {all_finite}; ratios {ratios:.4?}; max/min {:.3} (< 5)", hi / lo),
    )
}

/// Level-set exponent fits and the oscillatory bracket.
fn degeneracy_fits() -> Outcome {
    let h_grid = logspace(1e-6, 1e-3, 12);
    let mut ok = true;
    let mut lines = Vec::new();
    for alpha in [0.0, 1.0, 2.0] {
        let fit = DegeneracyProfile::power(alpha, 1.0)
            .unwrap()
            .fit_beta_exponent(1.0, &h_grid)
            .map_err(|e| e.to_string())?;
        let rel = (fit.beta_hat / (alpha + 1.0) - 1.0).abs();
        ok &= rel < 0.02;
        lines.push(format!("α={alpha}: β̂={:.4}", fit.beta_hat));
    }
    let osc = DegeneracyProfile::oscillatory(1.0).unwrap();
    let fit = osc.fit_beta_exponent(1.0, &h_grid).map_err(|e| e.to_string())?;
    ok &= (fit.beta_hat - 1.0).abs() < 0.1;
    lines.push(format!("oscillatory: β̂={:.4}", fit.beta_hat));
    let mut bracket = true;
    for i in 1..=1000 {
        let t = i as f64 / 1000.0;
        let b = osc.cumulative_delta(t).map_err(|e| e.to_string())?;
        bracket &= t / 4.0 <= b && b <= 2.0 * t;
    }
    ok &= bracket;
    lines.push(format!("t/4 ≤ β ≤ 2t at 1000 points: {bracket}"));
    check(ok, lines.join("; "))
}

/// With `A = 0` the solution is `u0 + ∫ f` and the weighted lhs vanishes.
fn degenerate_limit() -> Outcome {
    let grid = GridSpec::new(1, 256, 20.0).unwrap();
    let zero = DegeneracyProfile::constant(0.0, 1.0).unwrap();
    let path = CoefficientPath::from_profile(1, &zero);
    let u0 = gaussian_density(grid, 1.0);
    let g = SpectralField::from_fn(grid, |x| (x[0] * 0.5).sin());
    let part = TimePartition::uniform(64, 1.0).unwrap();

    // Linear in t: the trapezoidal Duhamel sum is exact.
    let f = Forcing::Separable {
        time: FnSpec::expr("1 - 3*t").unwrap(),
        space: g.clone(),
    };
    let rep = solver::solve_duhamel(&u0, &f, &path, &part).map_err(|e| e.to_string())?;
    let linear_gap = rep
        .snapshots
        .iter()
        .zip(part.nodes())
        .map(|(u, t)| u.sub(&u0.add(&g.scaled(t - 1.5 * t * t)).unwrap()).unwrap().max_abs())
        .fold(0.0, f64::max);

    // Cubic in t: compared with the composite trapezoid of f on the nodes.
    let cubic = |t: f64| 1.0 + t - 2.0 * t * t * t;
    let f = Forcing::Separable {
        time: FnSpec::expr("1 + t - 2*t^3").unwrap(),
        space: g.clone(),
    };
    let rep = solver::solve_duhamel(&u0, &f, &path, &part).map_err(|e| e.to_string())?;
    let nodes = part.nodes();
    let mut running = 0.0;
    let mut cubic_gap = 0.0f64;
    for (k, u) in rep.snapshots.iter().enumerate() {
        if k > 0 {
            running += 0.5 * (nodes[k] - nodes[k - 1]) * (cubic(nodes[k]) + cubic(nodes[k - 1]));
        }
        cubic_gap = cubic_gap.max(u.sub(&u0.add(&g.scaled(running)).unwrap()).unwrap().max_abs());
    }

    let r = estimates::check_thm1(&u0, &Forcing::Zero, &path, &zero, 0.0, 2.0, &part).map_err(|e| e.to_string())?;
    check(
        linear_gap < 1e-10 && cubic_gap < 1e-10 && r.lhs == 0.0,
        format!("linear f gap {linear_gap:.3e}, cubic f gap {cubic_gap:.3e} (< 1e-10), thm1 lhs {}", r.lhs),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 heat benchmark", heat_benchmark),
        ("2 kernel mass", kernel_mass),
        ("3 Littlewood-Paley reconstruction", lp_reconstruction),
        ("4 time-change equivalence", time_change),
        ("5 oracle triangle", oracle_triangle),
        ("6 kernel decay", kernel_decay),
        ("7 weighted estimate ratio stability", thm1_stability),
        ("8 homogeneous estimate over rough data", thm2_family),
        ("9 degeneracy fits", degeneracy_fits),
        ("10 degenerate limit", degenerate_limit),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
