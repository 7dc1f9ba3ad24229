//! Initial data and forcing terms.
//!
//! ```text
//! data    := zero() | gaussian(sigma [, c1, c2, c3]) | mode(k1 [, k2, k3]) | rough(s, scales)
//! forcing := zero() | separable(<time spec>, <data>)
//! ```
//!
//! `mode(k)` is `cos(2π k·x / L)`. `rough(s, scales)` is the synthetic datum
//! `Σ_{j=1}^{scales} 2^{-sj} r_j b_j`, where `b_j` is a Gaussian-windowed
//! oscillation at frequency `2^j` scaled to unit `L_p` norm and `r_j = ±1`
//! are signs drawn from the seed; its `B^s_p` norm stays of order
//! `scales^{1/p}` while every `B^{s+ε}_p` norm grows like `2^{ε·scales}`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, LPFamily, SpectralField};
use crate::timefn::{FnSpec, Parser};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Zero,
    Gaussian { sigma: f64, center: Vec<f64> },
    Mode(Vec<i64>),
    Rough { s: f64, scales: u32 },
}

/// Inputs that the data generators need beyond the spec itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataContext {
    pub seed: u64,
    /// Exponent of the unit-norm normalization used by `rough`.
    pub p: f64,
}

impl Default for DataContext {
    fn default() -> Self {
        Self { seed: 0, p: 2.0 }
    }
}

impl DataSpec {
    /// Cross-checks the spec against a grid; returns human-readable problems.
    pub fn diagnostics(&self, grid: &GridSpec) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            DataSpec::Zero => {}
            DataSpec::Gaussian { sigma, center } => {
                if !(*sigma > 0.0) {
                    out.push(format!("gaussian width must be positive, got {sigma}"));
                }
                if center.len() > grid.dim() {
                    out.push(format!(
                        "gaussian center has {} coordinates but the grid has dimension {}",
                        center.len(),
                        grid.dim()
                    ));
                }
            }
            DataSpec::Mode(k) => {
                if k.is_empty() || k.len() > grid.dim() {
                    out.push(format!("mode needs 1..={} wavenumbers, got {}", grid.dim(), k.len()));
                }
                let half = (grid.points_per_axis() / 2) as i64;
                if let Some(bad) = k.iter().find(|k| k.abs() >= half) {
                    out.push(format!("mode wavenumber {bad} is at or beyond the Nyquist index {half}"));
                }
            }
            DataSpec::Rough { scales, .. } => {
                let fam = LPFamily::for_grid(grid);
                if *scales == 0 {
                    out.push("rough needs at least one scale".into());
                } else if *scales as i32 > fam.j_max {
                    out.push(format!(
                        "rough scale {scales} exceeds the grid's Littlewood–Paley range; maximum admissible scale is {}",
                        fam.j_max.max(0)
                    ));
                }
            }
        }
        out
    }

    pub fn build(&self, grid: &GridSpec, ctx: &DataContext) -> Result<SpectralField> {
        let problems = self.diagnostics(grid);
        if !problems.is_empty() {
            return Err(Error::Validation(problems.join("; ")));
        }
        let l = grid.period();
        Ok(match self {
            DataSpec::Zero => SpectralField::zeros(*grid),
            DataSpec::Gaussian { sigma, center } => SpectralField::from_fn(*grid, |x| {
                let r2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(a, v)| (v - center.get(a).copied().unwrap_or(0.0)).powi(2))
                    .sum();
                (-r2 / (2.0 * sigma * sigma)).exp()
            }),
            DataSpec::Mode(k) => SpectralField::from_fn(*grid, |x| {
                let phase: f64 = k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum();
                (2.0 * std::f64::consts::PI * phase / l).cos()
            }),
            DataSpec::Rough { s, scales } => rough_field(grid, *s, *scales, ctx)?,
        })
    }
}

fn rough_field(grid: &GridSpec, s: f64, scales: u32, ctx: &DataContext) -> Result<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let width = grid.period() / 16.0;
    let envelope = SpectralField::from_fn(*grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (-r2 / (2.0 * width * width)).exp()
    });
    let mut acc = vec![0.0; grid.len()];
    for j in 1..=scales {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let freq = 2f64.powi(j as i32);
        let block = SpectralField::from_fn(*grid, |x| (freq * x[0] + phase).cos())
            .zip_with(&envelope, |a, b| a * b)?;
        let norm = block.lp_norm(ctx.p);
        let weight = sign * 2f64.powf(-s * j as f64) / norm;
        for (a, v) in acc.iter_mut().zip(block.samples()) {
            *a += weight * v;
        }
    }
    SpectralField::from_samples(*grid, acc)
}

impl fmt::Display for DataSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSpec::Zero => write!(f, "zero()"),
            DataSpec::Gaussian { sigma, center } => {
                write!(f, "gaussian({sigma:?}")?;
                for c in center {
                    write!(f, ", {c:?}")?;
                }
                write!(f, ")")
            }
            DataSpec::Mode(k) => {
                let parts: Vec<String> = k.iter().map(|v| v.to_string()).collect();
                write!(f, "mode({})", parts.join(", "))
            }
            DataSpec::Rough { s, scales } => write!(f, "rough({s:?}, {scales})"),
        }
    }
}

fn parse_data(p: &mut Parser<'_>) -> Result<DataSpec> {
    let name = p.ident()?;
    p.expect('(')?;
    let args = p.number_args()?;
    let spec = match (name, args.as_slice()) {
        ("zero", []) => DataSpec::Zero,
        ("gaussian", [sigma, center @ ..]) if center.len() <= 3 => DataSpec::Gaussian {
            sigma: *sigma,
            center: center.to_vec(),
        },
        ("mode", k) if (1..=3).contains(&k.len()) && k.iter().all(|v| v.fract() == 0.0) => {
            DataSpec::Mode(k.iter().map(|v| *v as i64).collect())
        }
        ("rough", [s, scales]) if scales.fract() == 0.0 && *scales >= 0.0 => DataSpec::Rough {
            s: *s,
            scales: *scales as u32,
        },
        _ => return Err(p.error(format!("invalid data spec {name} with {} argument(s)", args.len()))),
    };
    Ok(spec)
}

impl FromStr for DataSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser::new(s);
        let spec = parse_data(&mut p)?;
        p.skip_ws();
        if !p.at_end() {
            return Err(p.error("trailing input"));
        }
        Ok(spec)
    }
}

/// A source term `f(t, x)`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// `f(t, x) = g(t)·h(x)`.
    Separable { time: FnSpec, space: SpectralField },
    General(Arc<dyn Fn(f64) -> SpectralField + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Forcing::Zero"),
            Forcing::Separable { time, .. } => write!(f, "Forcing::Separable({time})"),
            Forcing::General(_) => write!(f, "Forcing::General"),
        }
    }
}

impl Forcing {
    pub fn general(f: impl Fn(f64) -> SpectralField + Send + Sync + 'static) -> Self {
        Forcing::General(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    /// `f(t, ·)`, or `None` for the zero forcing.
    pub fn at(&self, t: f64) -> Option<SpectralField> {
        match self {
            Forcing::Zero => None,
            Forcing::Separable { time, space } => Some(space.scaled(time.eval(t))),
            Forcing::General(f) => Some(f(t)),
        }
    }
}

/// Parsed form of a forcing spec, before it is bound to a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Zero,
    Separable { time: FnSpec, space: DataSpec },
}

impl ForcingSpec {
    pub fn build(&self, grid: &GridSpec, ctx: &DataContext) -> Result<Forcing> {
        Ok(match self {
            ForcingSpec::Zero => Forcing::Zero,
            ForcingSpec::Separable { time, space } => Forcing::Separable {
                time: time.clone(),
                space: space.build(grid, ctx)?,
            },
        })
    }

    pub fn diagnostics(&self, grid: &GridSpec) -> Vec<String> {
        match self {
            ForcingSpec::Zero => Vec::new(),
            ForcingSpec::Separable { space, .. } => space.diagnostics(grid),
        }
    }
}

impl fmt::Display for ForcingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForcingSpec::Zero => write!(f, "zero()"),
            ForcingSpec::Separable { time, space } => write!(f, "separable({time}, {space})"),
        }
    }
}

impl FromStr for ForcingSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        if let Some(body) = trimmed.strip_prefix("separable(").and_then(|b| b.strip_suffix(')')) {
            // The time spec may contain commas, so split at the last top-level comma.
            let split = top_level_commas(body)
                .last()
                .copied()
                .ok_or_else(|| Error::Parse {
                    offset: 0,
                    message: "separable needs a time spec and a data spec".into(),
                })?;
            let time: FnSpec = body[..split].parse()?;
            let space: DataSpec = body[split + 1..].parse()?;
            return Ok(ForcingSpec::Separable { time, space });
        }
        let spec: DataSpec = trimmed.parse()?;
        match spec {
            DataSpec::Zero => Ok(ForcingSpec::Zero),
            other => Err(Error::Parse {
                offset: 0,
                message: format!("forcing must be zero() or separable(...), got {other}"),
            }),
        }
    }
}

fn top_level_commas(s: &str) -> Vec<usize> {
    let mut depth = 0i32;
    let mut in_str = false;
    let mut escaped = false;
    let mut out = Vec::new();
    for (i, c) in s.char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => out.push(i),
            _ => {}
        }
    }
    out
}
