//! Exact Fourier-multiplier solver for the time-degenerate parabolic equation
//!
//! ```text
//! u_t = a^{ij}(t) u_{x^i x^j} + f,   u(0) = u0,
//! ```
//!
//! on a periodic grid, together with the norms needed to check weighted
//! maximal-regularity estimates (Littlewood–Paley blocks, Besov and Bessel
//! potential norms) and two independent oracles (a θ-scheme finite-difference
//! solver and a Monte Carlo estimator built from the Gaussian representation
//! `u(t, x) = E[u0(x + X_t)]`).

pub mod data;
pub mod degeneracy;
pub mod error;
pub mod estimates;
pub mod oracle;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod spectral;
pub mod timefn;

pub use degeneracy::{CoefficientPath, DegeneracyProfile, DominationBound};
pub use error::{Error, Result};
pub use spectral::{GridSpec, LPFamily, SpectralField};
pub use timefn::{FnSpec, TimeFunction};
