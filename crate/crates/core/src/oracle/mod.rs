//! Independent solution paths used to cross-check the spectral solver.

mod fd;
mod mc;

pub use fd::{fd_solve, CoefficientSampling, FdScheme};
pub use mc::{char_fn_check, cubic_interpolate, mc_solve, CharFnSample, McEstimate, McOptions};

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

/// `‖a − b‖_p / max(‖a‖_p, 10⁻³⁰)`.
pub fn compare_fields(a: &SpectralField, b: &SpectralField, p: f64) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(a.sub(b)?.lp_norm(p) / a.lp_norm(p).max(1e-30))
}

/// `log₂(e_i / e_{i+1})` for errors measured under successive halving.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;

    #[test]
    fn compare_fields_examples() {
        let g = GridSpec::new(1, 32, 1.0).unwrap();
        let a = SpectralField::from_fn(g, |x| 1.0 + x[0]);
        assert_eq!(compare_fields(&a, &a, 2.0).unwrap(), 0.0);
        assert_eq!(compare_fields(&a, &SpectralField::zeros(g), 2.0).unwrap(), 1.0);
        let other = SpectralField::zeros(GridSpec::new(1, 64, 1.0).unwrap());
        assert!(matches!(compare_fields(&a, &other, 2.0), Err(Error::GridMismatch)));
        assert_eq!(observed_orders(&[4.0, 1.0, 0.25]), vec![2.0, 2.0]);
    }
}
