//! Gauss–Legendre panel quadrature.
//!
//! Integrals of the degeneracy profile start at `t = 0`, where built-in
//! profiles may be singular in their derivatives (`t^α`) or oscillate without
//! bound (`1 + sin(1/t)`). [`integrate_from_zero`] splits `[0, t]` into
//! geometric panels `[t·2^{-(m+1)}, t·2^{-m}]` so every panel sees the
//! integrand at a fixed relative scale, and each panel is refined adaptively.

use std::sync::OnceLock;

/// Number of Gauss–Legendre points per panel.
pub const GL_ORDER: usize = 16;

/// Width below which the head `[0, head]` is no longer subdivided.
pub const DEFAULT_HEAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Absolute error budget for the whole integral.
    pub abs_tol: f64,
    /// Relative error budget, applied to the running magnitude of the result.
    pub rel_tol: f64,
    /// Maximum bisection depth inside a single panel.
    pub max_depth: u32,
    /// Innermost panel width for geometric refinement toward zero.
    pub head: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_depth: 24,
            head: DEFAULT_HEAD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
    /// `false` if some subinterval hit the depth limit before meeting its budget.
    pub converged: bool,
}

impl QuadResult {
    fn zero() -> Self {
        Self {
            value: 0.0,
            error: 0.0,
            converged: true,
        }
    }

    fn add(&mut self, other: QuadResult) {
        self.value += other.value;
        self.error += other.error;
        self.converged &= other.converged;
    }
}

/// Nodes and weights of the 16-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre_16() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(gauss_legendre_rule::<GL_ORDER>)
}

fn gauss_legendre_rule<const N: usize>() -> ([f64; N], [f64; N]) {
    let mut nodes = [0.0; N];
    let mut weights = [0.0; N];
    let n = N as f64;
    for i in 0..N.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_N.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(N, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(N, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[N - 1 - i] = x;
        weights[i] = w;
        weights[N - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fixed 16-point Gauss–Legendre rule on `[a, b]`.
pub fn gl16<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre_16();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Adaptive bisection with the 16-point rule on each piece.
///
/// The error of a piece is estimated by comparing the rule on the whole
/// piece against the sum over its two halves.
pub fn adaptive<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> QuadResult {
    if a == b {
        return QuadResult::zero();
    }
    let whole = gl16(f, a, b);
    adaptive_step(f, a, b, whole, tol, max_depth)
}

fn adaptive_step<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> QuadResult {
    let mid = 0.5 * (a + b);
    let left = gl16(f, a, mid);
    let right = gl16(f, mid, b);
    let refined = left + right;
    let diff = (refined - whole).abs();
    if diff <= tol || mid <= a || mid >= b {
        return QuadResult {
            value: refined,
            error: diff.min(tol),
            converged: true,
        };
    }
    if depth == 0 {
        return QuadResult {
            value: refined,
            error: diff,
            converged: false,
        };
    }
    let mut out = adaptive_step(f, a, mid, left, 0.5 * tol, depth - 1);
    out.add(adaptive_step(f, mid, b, right, 0.5 * tol, depth - 1));
    out
}

/// Boundaries of the geometric panels covering `[0, t]`, ascending.
///
/// The first entry is 0; the second is the right end of the head panel,
/// which is no wider than `head`.
pub fn geometric_nodes(t: f64, head: f64) -> Vec<f64> {
    if t <= 0.0 {
        return vec![0.0];
    }
    let mut levels = 0usize;
    while t * 0.5f64.powi(levels as i32) > head && levels < 1100 {
        levels += 1;
    }
    let mut nodes = Vec::with_capacity(levels + 2);
    nodes.push(0.0);
    for m in (0..=levels).rev() {
        nodes.push(t * 0.5f64.powi(m as i32));
    }
    // Exact right end regardless of rounding in powi.
    *nodes.last_mut().unwrap() = t;
    nodes
}

/// `∫_0^t f(s) ds` over geometric panels, each refined adaptively.
pub fn integrate_from_zero<F: Fn(f64) -> f64 + ?Sized>(f: &F, t: f64, opts: &QuadratureOptions) -> QuadResult {
    if t <= 0.0 {
        return QuadResult::zero();
    }
    let nodes = geometric_nodes(t, opts.head);
    integrate_over_nodes(f, &nodes, opts)
}

/// Sum of adaptive integrals over consecutive `nodes`.
pub fn integrate_over_nodes<F: Fn(f64) -> f64 + ?Sized>(f: &F, nodes: &[f64], opts: &QuadratureOptions) -> QuadResult {
    let mut out = QuadResult::zero();
    let span = nodes.last().copied().unwrap_or(0.0) - nodes.first().copied().unwrap_or(0.0);
    if span <= 0.0 {
        return out;
    }
    // Walk from the widest panel inward so the relative budget sees the bulk first.
    for w in nodes.windows(2).rev() {
        let (a, b) = (w[0], w[1]);
        let budget = (opts.abs_tol.max(opts.rel_tol * out.value.abs())) * (b - a) / span;
        out.add(adaptive(f, a, b, budget, opts.max_depth));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl16_weights_sum_to_two_and_nodes_symmetric() {
        let (x, w) = gauss_legendre_16();
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        for i in 0..GL_ORDER {
            assert!((x[i] + x[GL_ORDER - 1 - i]).abs() < 1e-15);
        }
        // Largest node of the 16-point rule.
        assert!((x[GL_ORDER - 1] - 0.989_400_934_991_649_9).abs() < 1e-15);
    }

    #[test]
    fn gl16_exact_for_degree_31() {
        let f = |x: f64| x.powi(31) + x.powi(30);
        let exact = 2.0f64.powi(32) / 32.0 + 2.0f64.powi(31) / 31.0;
        let got = gl16(&f, 0.0, 2.0);
        assert!((got - exact).abs() / exact < 1e-13);
    }

    #[test]
    fn geometric_nodes_cover_interval() {
        let nodes = geometric_nodes(0.5, 1e-9);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(*nodes.last().unwrap(), 0.5);
        assert!(nodes[1] <= 1e-9);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sqrt_singularity_resolved() {
        // ∫_0^1 s^{1/2} ds = 2/3, derivative singular at 0.
        let r = integrate_from_zero(&|s: f64| s.sqrt(), 1.0, &QuadratureOptions::default());
        assert!(r.converged);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn depth_limit_reports_nonconvergence() {
        let f = |s: f64| (1.0 / s).sin();
        let opts = QuadratureOptions {
            max_depth: 2,
            ..Default::default()
        };
        let r = integrate_from_zero(&f, 0.1, &opts);
        assert!(!r.converged);
        assert!(r.error > opts.abs_tol);
    }
}
