//! Scalar functions of time: the grammar used for degeneracy profiles and
//! coefficient entries, plus their cumulative integrals.
//!
//! ```text
//! spec := constant(c) | power(alpha) | oscillatory()
//!       | sum_powers(a1, a2, ...) | power_blend(alpha, beta) | power_log(alpha, beta)
//!       | expr("<arithmetic in t>") | piecewise([(t0, spec), (t1, spec), ...])
//!       | shift(spec, c) | scale(spec, c)
//! ```
//!
//! `power_blend(α, β)` is `(t + t^α)^β` and `power_log(α, β)` is
//! `t^α·ln(1+t)^β` (β may be negative). Piecewise pieces are evaluated at the
//! absolute time and apply from their start time until the next start.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureOptions};
use crate::special;

thread_local! {
    static BUILTINS: meval::Context<'static> = meval::Context::new();
}

/// A parsed arithmetic expression in the variable `t`.
#[derive(Clone)]
pub struct ExprFn {
    source: String,
    expr: meval::Expr,
}

impl ExprFn {
    pub fn parse(source: &str) -> Result<Self> {
        let expr: meval::Expr = source.parse().map_err(|e: meval::Error| Error::Parse {
            offset: 0,
            message: format!("in expression {source:?}: {e}"),
        })?;
        // Surface unknown variables and functions now rather than as NaN later.
        BUILTINS
            .with(|b| expr.eval_with_context((("t", 0.5), b)))
            .map_err(|e| Error::Parse {
                offset: 0,
                message: format!("in expression {source:?}: {e}"),
            })?;
        Ok(Self {
            source: source.to_string(),
            expr,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, t: f64) -> f64 {
        BUILTINS
            .with(|b| self.expr.eval_with_context((("t", t), b)))
            .unwrap_or(f64::NAN)
    }
}

impl fmt::Debug for ExprFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExprFn({:?})", self.source)
    }
}

impl PartialEq for ExprFn {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

/// An opaque closure, e.g. the smallest eigenvalue of a coefficient path.
#[derive(Clone)]
pub struct CustomFn {
    pub label: String,
    pub func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomFn({})", self.label)
    }
}

impl PartialEq for CustomFn {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && Arc::ptr_eq(&self.func, &other.func)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FnSpec {
    Constant(f64),
    Power(f64),
    Oscillatory,
    SumPowers(Vec<f64>),
    PowerBlend { alpha: f64, beta: f64 },
    PowerLog { alpha: f64, beta: f64 },
    Expr(ExprFn),
    Piecewise(Vec<(f64, FnSpec)>),
    Shift(Box<FnSpec>, f64),
    Scale(Box<FnSpec>, f64),
    Custom(CustomFn),
}

impl FnSpec {
    pub fn expr(source: &str) -> Result<Self> {
        ExprFn::parse(source).map(FnSpec::Expr)
    }

    pub fn custom(label: impl Into<String>, func: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        FnSpec::Custom(CustomFn {
            label: label.into(),
            func: Arc::new(func),
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            FnSpec::Constant(c) => *c,
            FnSpec::Power(a) => t.powf(*a),
            FnSpec::Oscillatory => {
                if t > 0.0 {
                    1.0 + (1.0 / t).sin()
                } else {
                    1.0
                }
            }
            FnSpec::SumPowers(alphas) => alphas.iter().map(|a| t.powf(*a)).sum(),
            FnSpec::PowerBlend { alpha, beta } => (t + t.powf(*alpha)).powf(*beta),
            FnSpec::PowerLog { alpha, beta } => {
                if t == 0.0 {
                    // t^α ln(1+t)^β ~ t^{α+β}
                    let e = alpha + beta;
                    return if e > 0.0 {
                        0.0
                    } else if e == 0.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    };
                }
                t.powf(*alpha) * t.ln_1p().powf(*beta)
            }
            FnSpec::Expr(e) => e.eval(t),
            FnSpec::Piecewise(pieces) => match piece_at(pieces, t) {
                Some(spec) => spec.eval(t),
                None => 0.0,
            },
            FnSpec::Shift(inner, c) => inner.eval(t) + c,
            FnSpec::Scale(inner, c) => c * inner.eval(t),
            FnSpec::Custom(c) => (c.func)(t),
        }
    }

    /// `∫_0^t` in closed form, when one is registered for this spec.
    pub fn closed_cumulative(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        match self {
            FnSpec::Constant(c) => Some(c * t),
            FnSpec::Power(a) if *a > -1.0 => Some(t.powf(a + 1.0) / (a + 1.0)),
            FnSpec::Oscillatory => Some(t + special::integral_sin_reciprocal(t)),
            FnSpec::SumPowers(alphas) if alphas.iter().all(|a| *a > -1.0) => {
                Some(alphas.iter().map(|a| t.powf(a + 1.0) / (a + 1.0)).sum())
            }
            FnSpec::Piecewise(pieces) => {
                let mut total = 0.0;
                for (i, (start, spec)) in pieces.iter().enumerate() {
                    if *start >= t {
                        break;
                    }
                    let end = pieces.get(i + 1).map_or(t, |(s, _)| s.min(t));
                    total += spec.closed_cumulative(end)? - spec.closed_cumulative(*start)?;
                }
                Some(total)
            }
            FnSpec::Shift(inner, c) => Some(inner.closed_cumulative(t)? + c * t),
            FnSpec::Scale(inner, c) => Some(c * inner.closed_cumulative(t)?),
            _ => None,
        }
    }

    pub fn has_closed_cumulative(&self) -> bool {
        self.closed_cumulative(1.0).is_some()
    }

    /// Interior points where the function may be discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            FnSpec::Piecewise(pieces) => {
                let mut out: Vec<f64> = pieces.iter().map(|(s, _)| *s).filter(|s| *s > 0.0).collect();
                for (_, spec) in pieces {
                    out.extend(spec.breakpoints());
                }
                out.sort_by(f64::total_cmp);
                out.dedup();
                out
            }
            FnSpec::Shift(inner, _) | FnSpec::Scale(inner, _) => inner.breakpoints(),
            _ => Vec::new(),
        }
    }

    /// Upper bound on `|f|` over `[0, horizon]` where it is known exactly.
    pub fn known_bound(&self, horizon: f64) -> Option<f64> {
        match self {
            FnSpec::Constant(c) => Some(c.abs()),
            FnSpec::Power(a) if *a >= 0.0 => Some(if *a == 0.0 { 1.0 } else { horizon.powf(*a) }),
            FnSpec::Oscillatory => Some(2.0),
            FnSpec::SumPowers(alphas) if alphas.iter().all(|a| *a >= 0.0) => {
                Some(alphas.iter().map(|a| horizon.powf(*a).max(if *a == 0.0 { 1.0 } else { 0.0 })).sum())
            }
            FnSpec::Shift(inner, c) => Some(inner.known_bound(horizon)? + c.abs()),
            FnSpec::Scale(inner, c) => Some(c.abs() * inner.known_bound(horizon)?),
            _ => None,
        }
    }
}

fn piece_at(pieces: &[(f64, FnSpec)], t: f64) -> Option<&FnSpec> {
    let idx = pieces.partition_point(|(s, _)| *s <= t);
    if idx == 0 {
        None
    } else {
        Some(&pieces[idx - 1].1)
    }
}

fn fmt_num(x: f64) -> String {
    // `{:?}` is the shortest representation that parses back to the same f64.
    format!("{x:?}")
}

impl fmt::Display for FnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FnSpec::Constant(c) => write!(f, "constant({})", fmt_num(*c)),
            FnSpec::Power(a) => write!(f, "power({})", fmt_num(*a)),
            FnSpec::Oscillatory => write!(f, "oscillatory()"),
            FnSpec::SumPowers(a) => {
                let parts: Vec<String> = a.iter().map(|x| fmt_num(*x)).collect();
                write!(f, "sum_powers({})", parts.join(", "))
            }
            FnSpec::PowerBlend { alpha, beta } => write!(f, "power_blend({}, {})", fmt_num(*alpha), fmt_num(*beta)),
            FnSpec::PowerLog { alpha, beta } => write!(f, "power_log({}, {})", fmt_num(*alpha), fmt_num(*beta)),
            FnSpec::Expr(e) => write!(f, "expr(\"{}\")", e.source.replace('\\', "\\\\").replace('"', "\\\"")),
            FnSpec::Piecewise(pieces) => {
                write!(f, "piecewise([")?;
                for (i, (s, spec)) in pieces.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "({}, {})", fmt_num(*s), spec)?;
                }
                write!(f, "])")
            }
            FnSpec::Shift(inner, c) => write!(f, "shift({}, {})", inner, fmt_num(*c)),
            FnSpec::Scale(inner, c) => write!(f, "scale({}, {})", inner, fmt_num(*c)),
            FnSpec::Custom(c) => write!(f, "custom({})", c.label),
        }
    }
}

impl FromStr for FnSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser::new(s);
        let spec = p.spec()?;
        p.skip_ws();
        if !p.at_end() {
            return Err(p.error("trailing input"));
        }
        Ok(spec)
    }
}

/// Recursive-descent parser over the spec grammar.
pub(crate) struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos == self.src.len()
    }

    pub(crate) fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    pub(crate) fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    pub(crate) fn ident(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error("expected identifier"));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    pub(crate) fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-')))
            .unwrap_or(rest.len());
        let text = &rest[..len];
        let value = match text {
            "inf" => f64::INFINITY,
            _ => text.parse::<f64>().map_err(|_| self.error(format!("invalid number {text:?}")))?,
        };
        self.pos += len;
        Ok(value)
    }

    pub(crate) fn string(&mut self) -> Result<String> {
        self.skip_ws();
        if !self.rest().starts_with('"') {
            return Err(self.error("expected string literal"));
        }
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, e)) => out.push(e),
                    None => break,
                },
                c => out.push(c),
            }
        }
        Err(self.error("unterminated string literal"))
    }

    /// Comma-separated numbers up to the closing parenthesis.
    pub(crate) fn number_args(&mut self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        if self.eat(')') {
            return Ok(out);
        }
        loop {
            out.push(self.number()?);
            if self.eat(')') {
                return Ok(out);
            }
            self.expect(',')?;
        }
    }

    fn spec(&mut self) -> Result<FnSpec> {
        let start = self.pos;
        let name = self.ident()?;
        self.expect('(')?;
        let arity = |p: &Parser, args: &[f64], n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Parse {
                    offset: p.pos,
                    message: format!("{name} takes {n} argument(s), got {}", args.len()),
                })
            }
        };
        let spec = match name {
            "constant" => {
                let a = self.number_args()?;
                arity(self, &a, 1)?;
                FnSpec::Constant(a[0])
            }
            "power" => {
                let a = self.number_args()?;
                arity(self, &a, 1)?;
                FnSpec::Power(a[0])
            }
            "oscillatory" => {
                let a = self.number_args()?;
                arity(self, &a, 0)?;
                FnSpec::Oscillatory
            }
            "sum_powers" => {
                let a = self.number_args()?;
                if a.is_empty() {
                    return Err(self.error("sum_powers needs at least one exponent"));
                }
                FnSpec::SumPowers(a)
            }
            "power_blend" => {
                let a = self.number_args()?;
                arity(self, &a, 2)?;
                FnSpec::PowerBlend { alpha: a[0], beta: a[1] }
            }
            "power_log" => {
                let a = self.number_args()?;
                arity(self, &a, 2)?;
                FnSpec::PowerLog { alpha: a[0], beta: a[1] }
            }
            "expr" => {
                let src = self.string()?;
                self.expect(')')?;
                FnSpec::expr(&src).map_err(|e| match e {
                    Error::Parse { message, .. } => Error::Parse { offset: start, message },
                    other => other,
                })?
            }
            "piecewise" => {
                self.expect('[')?;
                let mut pieces = Vec::new();
                if !self.eat(']') {
                    loop {
                        self.expect('(')?;
                        let t0 = self.number()?;
                        self.expect(',')?;
                        let inner = self.spec()?;
                        self.expect(')')?;
                        pieces.push((t0, inner));
                        if self.eat(']') {
                            break;
                        }
                        self.expect(',')?;
                    }
                }
                self.expect(')')?;
                if pieces.is_empty() {
                    return Err(self.error("piecewise needs at least one piece"));
                }
                if pieces[0].0 != 0.0 {
                    return Err(self.error("first piece of piecewise must start at 0"));
                }
                if !pieces.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(self.error("piecewise start times must be strictly increasing"));
                }
                FnSpec::Piecewise(pieces)
            }
            "shift" | "scale" => {
                let inner = self.spec()?;
                self.expect(',')?;
                let c = self.number()?;
                self.expect(')')?;
                if name == "shift" {
                    FnSpec::Shift(Box::new(inner), c)
                } else {
                    FnSpec::Scale(Box::new(inner), c)
                }
            }
            other => {
                self.pos = start;
                return Err(self.error(format!("unknown function '{other}'")));
            }
        };
        Ok(spec)
    }
}

/// Tabulated `∫_0^t f` on panel boundaries, for specs without a closed form.
#[derive(Debug)]
struct CumulativeTable {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

/// A time function on `[0, horizon]` with its cumulative integral.
#[derive(Debug, Clone)]
pub struct TimeFunction {
    spec: FnSpec,
    horizon: f64,
    opts: QuadratureOptions,
    table: OnceLock<std::result::Result<Arc<CumulativeTable>, f64>>,
}

impl PartialEq for TimeFunction {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.horizon == other.horizon
    }
}

impl TimeFunction {
    pub fn new(spec: FnSpec, horizon: f64) -> Self {
        Self::with_options(spec, horizon, QuadratureOptions::default())
    }

    pub fn with_options(spec: FnSpec, horizon: f64, opts: QuadratureOptions) -> Self {
        Self {
            spec,
            horizon,
            opts,
            table: OnceLock::new(),
        }
    }

    pub fn spec(&self) -> &FnSpec {
        &self.spec
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn options(&self) -> &QuadratureOptions {
        &self.opts
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.spec.eval(t)
    }

    /// Same function on a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self::with_options(self.spec.clone(), horizon, self.opts)
    }

    fn table(&self) -> Result<&CumulativeTable> {
        let entry = self.table.get_or_init(|| self.build_table());
        match entry {
            Ok(t) => Ok(t),
            Err(achieved) => Err(Error::Quadrature {
                achieved: *achieved,
                requested: self.opts.abs_tol,
            }),
        }
    }

    fn build_table(&self) -> std::result::Result<Arc<CumulativeTable>, f64> {
        let mut nodes = quadrature::geometric_nodes(self.horizon, self.opts.head);
        nodes.extend(self.spec.breakpoints().into_iter().filter(|b| *b < self.horizon));
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let f = |s: f64| self.spec.eval(s);
        let mut values = Vec::with_capacity(nodes.len());
        values.push(0.0);
        let mut total = 0.0;
        let mut error = 0.0;
        let mut converged = true;
        // Panel budgets are proportional to width; the tolerance scale is set by the final panel.
        let span = self.horizon.max(f64::MIN_POSITIVE);
        for w in nodes.windows(2) {
            let budget = self.opts.abs_tol * (w[1] - w[0]) / span;
            let r = quadrature::adaptive(&f, w[0], w[1], budget.max(f64::MIN_POSITIVE), self.opts.max_depth);
            total += r.value;
            error += r.error;
            converged &= r.converged;
            values.push(total);
        }
        let requested = self.opts.abs_tol.max(self.opts.rel_tol * total.abs());
        if !converged && error > requested || !total.is_finite() {
            return Err(if total.is_finite() { error } else { f64::INFINITY });
        }
        Ok(Arc::new(CumulativeTable { nodes, values }))
    }

    /// `∫_0^t f(s) ds`.
    pub fn integral_to(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain(format!("negative time {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        if let Some(v) = self.spec.closed_cumulative(t) {
            return Ok(v);
        }
        let table = self.table()?;
        let f = |s: f64| self.spec.eval(s);
        let last = table.nodes.len() - 1;
        let (idx, start) = if t >= table.nodes[last] {
            (last, table.nodes[last])
        } else {
            let i = table.nodes.partition_point(|n| *n <= t) - 1;
            (i, table.nodes[i])
        };
        let base = table.values[idx];
        if t == start {
            return Ok(base);
        }
        let budget = self.opts.abs_tol.max(self.opts.rel_tol * base.abs());
        let r = quadrature::adaptive(&f, start, t, budget, self.opts.max_depth);
        if !r.converged && r.error > budget {
            return Err(Error::Quadrature {
                achieved: r.error,
                requested: budget,
            });
        }
        Ok(base + r.value)
    }

    /// `∫_s^t f(r) dr`.
    pub fn integral(&self, s: f64, t: f64) -> Result<f64> {
        Ok(self.integral_to(t)? - self.integral_to(s)?)
    }
}
