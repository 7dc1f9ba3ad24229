use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::Forcing;
use crate::degeneracy::CoefficientPath;
use crate::error::{Error, Result};
use crate::solver::TimePartition;
use crate::spectral::SpectralField;

/// Samples per independently seeded stream.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
}

/// Pointwise Monte Carlo mean with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub points: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn csv(&self) -> String {
        let mut out = String::from("x,mean,stderr,samples,seed\n");
        for ((x, m), s) in self.points.iter().zip(&self.mean).zip(&self.stderr) {
            let coords: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{},{m:?},{s:?},{},{}", coords.join(" "), self.samples, self.seed);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.csv())?;
        Ok(())
    }
}

/// Running count, mean and sum of squared deviations per probe.
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, values: &[f64]) {
        self.count += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let d = v - *m;
            *m += d / self.count;
            *s += d * (v - *m);
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        let n = self.count + other.count;
        if other.count == 0.0 {
            return self;
        }
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * other.count / n;
            self.m2[i] += other.m2[i] + d * d * self.count * other.count / n;
        }
        self.count = n;
        self
    }
}

fn merge_pairwise(mut parts: Vec<Moments>) -> Moments {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(&b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// `√(2B)` by eigen-decomposition; eigenvalues in `(−10⁻¹², 0)` are clamped.
fn covariance_root(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(b * 2.0);
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < 0.0 {
            if *v > -1e-12 {
                *v = 0.0;
            } else {
                return Err(Error::MatrixSqrt(*v));
            }
        }
        *v = v.sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

fn lagrange_weights(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

/// Periodic tensor-product cubic Lagrange interpolation of grid samples.
pub fn cubic_interpolate(u: &SpectralField, x: &[f64]) -> f64 {
    let grid = u.grid();
    let n = grid.points_per_axis() as i64;
    let h = grid.spacing();
    let half = 0.5 * grid.period();
    let d = grid.dim();
    let mut base = [0i64; 3];
    let mut weights = [[0.0; 4]; 3];
    for a in 0..d {
        let pos = (x[a] + half) / h;
        let i = pos.floor();
        base[a] = i as i64;
        weights[a] = lagrange_weights(pos - i);
    }
    let samples = u.samples();
    let wrap = |i: i64| i.rem_euclid(n) as usize;
    let n = n as usize;
    let mut acc = 0.0;
    match d {
        1 => {
            for (o, w) in weights[0].iter().enumerate() {
                acc += w * samples[wrap(base[0] + o as i64 - 1)];
            }
        }
        2 => {
            for (o0, w0) in weights[0].iter().enumerate() {
                let r = wrap(base[0] + o0 as i64 - 1) * n;
                for (o1, w1) in weights[1].iter().enumerate() {
                    acc += w0 * w1 * samples[r + wrap(base[1] + o1 as i64 - 1)];
                }
            }
        }
        _ => {
            for (o0, w0) in weights[0].iter().enumerate() {
                let r0 = wrap(base[0] + o0 as i64 - 1) * n * n;
                for (o1, w1) in weights[1].iter().enumerate() {
                    let r1 = r0 + wrap(base[1] + o1 as i64 - 1) * n;
                    for (o2, w2) in weights[2].iter().enumerate() {
                        acc += w0 * w1 * w2 * samples[r1 + wrap(base[2] + o2 as i64 - 1)];
                    }
                }
            }
        }
    }
    acc
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn gaussian(root: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let z = DVector::from_fn(root.nrows(), |_, _| StandardNormal.sample(rng));
    root * z
}

/// Estimates `u(t, x) = E[u0(x + X_t)] + ∫_0^t E[f(s, x + X_t − X_s)] ds`
/// with `X` Gaussian of independent increments, `Cov(X_t − X_s) = 2∫_s^t A`.
///
/// Increments are drawn exactly over the intervals of `partition`, which
/// must end at `t`; the forcing integral is trapezoidal on its nodes.
pub fn mc_solve(
    u0: &SpectralField,
    forcing: &Forcing,
    path: &CoefficientPath,
    partition: &TimePartition,
    points: &[Vec<f64>],
    opts: &McOptions,
) -> Result<McEstimate> {
    let d = path.dim();
    if u0.grid().dim() != d || points.iter().any(|x| x.len() != d) {
        return Err(Error::Validation("probe points, grid and coefficients must share a dimension".into()));
    }
    if opts.samples < 2 {
        return Err(Error::Validation("need at least two samples".into()));
    }
    let nodes = partition.nodes();
    let k = partition.steps();
    let roots: Vec<DMatrix<f64>> = if forcing.is_zero() {
        vec![covariance_root(&path.accumulate(0.0, partition.horizon())?)?]
    } else {
        nodes
            .windows(2)
            .map(|w| covariance_root(&path.accumulate(w[0], w[1])?))
            .collect::<Result<_>>()?
    };
    let f_nodes: Vec<Option<SpectralField>> = if forcing.is_zero() {
        Vec::new()
    } else {
        nodes.iter().map(|t| forcing.at(*t)).collect()
    };
    let weights = partition.trapezoid_weights(k);
    let chunks = opts.samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(opts.seed, c);
            let size = CHUNK.min(opts.samples - c * CHUNK);
            let mut moments = Moments::new(points.len());
            let mut values = vec![0.0; points.len()];
            let mut tail = vec![DVector::zeros(d); k + 1];
            for _ in 0..size {
                if f_nodes.is_empty() {
                    let x_t = gaussian(&roots[0], &mut rng);
                    for (v, x) in values.iter_mut().zip(points) {
                        let y: Vec<f64> = (0..d).map(|a| x[a] + x_t[a]).collect();
                        *v = cubic_interpolate(u0, &y);
                    }
                } else {
                    // tail[i] = X_t − X_{s_i}.
                    let increments: Vec<DVector<f64>> = roots.iter().map(|r| gaussian(r, &mut rng)).collect();
                    tail[k] = DVector::zeros(d);
                    for i in (0..k).rev() {
                        tail[i] = &tail[i + 1] + &increments[i];
                    }
                    for (v, x) in values.iter_mut().zip(points) {
                        let shift = |off: &DVector<f64>| -> Vec<f64> { (0..d).map(|a| x[a] + off[a]).collect() };
                        let mut acc = cubic_interpolate(u0, &shift(&tail[0]));
                        for i in 0..=k {
                            if let Some(f) = &f_nodes[i] {
                                acc += weights[i] * cubic_interpolate(f, &shift(&tail[i]));
                            }
                        }
                        *v = acc;
                    }
                }
                moments.push(&values);
            }
            moments
        })
        .collect();
    let total = merge_pairwise(parts);
    let n = total.count;
    let stderr = total.m2.iter().map(|m2| (m2 / (n - 1.0) / n).sqrt()).collect();
    Ok(McEstimate {
        points: points.to_vec(),
        mean: total.mean,
        stderr,
        samples: opts.samples,
        seed: opts.seed,
    })
}

/// Empirical characteristic function of `X_t − X_s` at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFnSample {
    pub xi: Vec<f64>,
    pub re: f64,
    pub im: f64,
    pub re_stderr: f64,
    pub im_stderr: f64,
    /// `exp(−ξᵀBξ)`, real.
    pub exact: f64,
}

impl CharFnSample {
    /// Largest deviation from the exact value in standard errors.
    pub fn z_score(&self) -> f64 {
        let zr = (self.re - self.exact).abs() / self.re_stderr.max(1e-300);
        let zi = self.im.abs() / self.im_stderr.max(1e-300);
        zr.max(zi)
    }
}

/// Samples `X_t − X_s` as a sum of exact increments over `partition`
/// restricted to `[s, t]` and compares `E e^{iξ·(X_t − X_s)}` to `exp(−ξᵀBξ)`.
pub fn char_fn_check(
    path: &CoefficientPath,
    partition: &TimePartition,
    s: f64,
    t: f64,
    freqs: &[Vec<f64>],
    opts: &McOptions,
) -> Result<Vec<CharFnSample>> {
    let d = path.dim();
    let mut cuts: Vec<f64> = vec![s];
    cuts.extend(partition.nodes().iter().copied().filter(|r| *r > s && *r < t));
    cuts.push(t);
    let roots: Vec<DMatrix<f64>> = cuts
        .windows(2)
        .map(|w| covariance_root(&path.accumulate(w[0], w[1])?))
        .collect::<Result<_>>()?;
    let chunks = opts.samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(opts.seed, c);
            let size = CHUNK.min(opts.samples - c * CHUNK);
            let mut moments = Moments::new(2 * freqs.len());
            let mut values = vec![0.0; 2 * freqs.len()];
            for _ in 0..size {
                let mut x = DVector::zeros(d);
                for r in &roots {
                    x += gaussian(r, &mut rng);
                }
                for (i, xi) in freqs.iter().enumerate() {
                    let phase: f64 = (0..d).map(|a| xi[a] * x[a]).sum();
                    values[2 * i] = phase.cos();
                    values[2 * i + 1] = phase.sin();
                }
                moments.push(&values);
            }
            moments
        })
        .collect();
    let total = merge_pairwise(parts);
    let n = total.count;
    let b = path.accumulate(s, t)?;
    Ok(freqs
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let v = DVector::from_column_slice(xi);
            let q = (v.transpose() * &b * &v)[(0, 0)];
            CharFnSample {
                xi: xi.clone(),
                re: total.mean[2 * i],
                im: total.mean[2 * i + 1],
                re_stderr: (total.m2[2 * i] / (n - 1.0) / n).sqrt(),
                im_stderr: (total.m2[2 * i + 1] / (n - 1.0) / n).sqrt(),
                exact: (-q).exp(),
            }
        })
        .collect())
}
