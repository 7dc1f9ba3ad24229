use nalgebra::DMatrix;

use crate::data::Forcing;
use crate::degeneracy::CoefficientPath;
use crate::error::{Error, Result};
use crate::solver::{SolveReport, TimePartition};
use crate::spectral::{GridSpec, SpectralField};

/// How `A(t)` is frozen on each time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientSampling {
    /// `Δt⁻¹ ∫_{t_k}^{t_{k+1}} A`; stays second order for oscillating `A`.
    #[default]
    CellAverage,
    /// `A(t_k + θΔt)`.
    ThetaPoint,
}

/// θ-scheme in time with second-order central differences in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdScheme {
    pub theta: f64,
    pub sampling: CoefficientSampling,
    pub cg_tol: f64,
}

impl FdScheme {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&theta) {
            return Err(Error::Validation(format!("theta must lie in [1/2, 1], got {theta}")));
        }
        Ok(Self {
            theta,
            sampling: CoefficientSampling::CellAverage,
            cg_tol: 1e-14,
        })
    }

    pub fn crank_nicolson() -> Self {
        Self::new(0.5).unwrap()
    }

    pub fn with_sampling(mut self, sampling: CoefficientSampling) -> Self {
        self.sampling = sampling;
        self
    }
}

/// Periodic neighbour tables: `plus[a][k]`, `minus[a][k]`.
struct Stencil {
    dim: usize,
    h2: f64,
    plus: Vec<Vec<usize>>,
    minus: Vec<Vec<usize>>,
}

impl Stencil {
    fn new(grid: &GridSpec) -> Self {
        let n = grid.points_per_axis();
        let dim = grid.dim();
        let len = grid.len();
        let mut plus = vec![vec![0; len]; dim];
        let mut minus = vec![vec![0; len]; dim];
        for k in 0..len {
            let idx = grid.unflatten(k);
            for a in 0..dim {
                let stride = n.pow((dim - 1 - a) as u32);
                let i = idx[a];
                let up = if i + 1 == n { 0 } else { i + 1 };
                let down = if i == 0 { n - 1 } else { i - 1 };
                plus[a][k] = k - i * stride + up * stride;
                minus[a][k] = k - i * stride + down * stride;
            }
        }
        Self {
            dim,
            h2: grid.spacing().powi(2),
            plus,
            minus,
        }
    }

    /// `out = Σ a^{ij} D_ij u`.
    fn apply(&self, a: &DMatrix<f64>, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            let aii = a[(i, i)] / self.h2;
            if aii != 0.0 {
                let (p, m) = (&self.plus[i], &self.minus[i]);
                for k in 0..u.len() {
                    out[k] += aii * (u[p[k]] - 2.0 * u[k] + u[m[k]]);
                }
            }
            for j in (i + 1)..self.dim {
                // a^{ij} + a^{ji} over the four-point stencil 4h².
                let aij = 0.5 * (a[(i, j)] + a[(j, i)]) / (2.0 * self.h2);
                if aij == 0.0 {
                    continue;
                }
                let (pi, mi, pj, mj) = (&self.plus[i], &self.minus[i], &self.plus[j], &self.minus[j]);
                for k in 0..u.len() {
                    out[k] += aij * (u[pj[pi[k]]] - u[mj[pi[k]]] - u[pj[mi[k]]] + u[mj[mi[k]]]);
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(I − c·L_A) x = b` by conjugate gradients, starting from `x`.
fn conjugate_gradient(stencil: &Stencil, a: &DMatrix<f64>, c: f64, b: &[f64], x: &mut [f64], tol: f64) -> Result<()> {
    let n = b.len();
    let mut work = vec![0.0; n];
    let op = |v: &[f64], out: &mut [f64], work: &mut [f64]| {
        stencil.apply(a, v, work);
        for k in 0..n {
            out[k] = v[k] - c * work[k];
        }
    };
    let mut r = vec![0.0; n];
    op(x, &mut r, &mut work);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let b_norm = dot(b, b).sqrt().max(1e-300);
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= tol * b_norm {
        return Ok(());
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for _ in 0..(10 * n).max(100) {
        op(&p, &mut ap, &mut work);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolve(format!("implicit operator not positive definite (pᵀAp = {pap:e})")));
        }
        let alpha = rr / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * b_norm {
            return Ok(());
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    Err(Error::LinearSolve(format!("conjugate gradients stalled at residual {:e}", rr.sqrt() / b_norm)))
}

/// θ-scheme on the partition:
/// `(I − θΔt L) u^{k+1} = (I + (1−θ)Δt L) u^k + Δt(θ f^{k+1} + (1−θ) f^k)`.
pub fn fd_solve(
    u0: &SpectralField,
    forcing: &Forcing,
    path: &CoefficientPath,
    scheme: &FdScheme,
    partition: &TimePartition,
) -> Result<SolveReport> {
    let grid = *u0.grid();
    if grid.dim() != path.dim() {
        return Err(Error::Validation("grid and coefficient dimensions differ".into()));
    }
    let theta = scheme.theta;
    let stencil = Stencil::new(&grid);
    let nodes = partition.nodes();
    let len = grid.len();
    let mut u = u0.samples().to_vec();
    let mut snapshots = vec![u0.clone()];
    let mut lu = vec![0.0; len];
    let mut f_prev = forcing.at(nodes[0]);
    for w in nodes.windows(2) {
        let dt = w[1] - w[0];
        let a = match scheme.sampling {
            CoefficientSampling::CellAverage => path.accumulate(w[0], w[1])? / dt,
            CoefficientSampling::ThetaPoint => path.matrix_at(w[0] + theta * dt),
        };
        stencil.apply(&a, &u, &mut lu);
        let mut rhs: Vec<f64> = u.iter().zip(&lu).map(|(u, l)| u + (1.0 - theta) * dt * l).collect();
        let f_next = forcing.at(w[1]);
        if let Some(f) = &f_prev {
            rhs.iter_mut().zip(f.samples()).for_each(|(r, f)| *r += (1.0 - theta) * dt * f);
        }
        if let Some(f) = &f_next {
            rhs.iter_mut().zip(f.samples()).for_each(|(r, f)| *r += theta * dt * f);
        }
        let mut next = u.clone();
        if a.iter().all(|v| *v == 0.0) {
            next.copy_from_slice(&rhs);
        } else {
            conjugate_gradient(&stencil, &a, theta * dt, &rhs, &mut next, scheme.cg_tol)?;
        }
        u = next;
        snapshots.push(SpectralField::from_samples(grid, u.clone())?);
        f_prev = f_next;
    }
    SolveReport::new(partition.clone(), snapshots)
}
