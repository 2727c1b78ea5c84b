//! Standard normal distribution helpers.
//!
//! The quantile needs to stay accurate far into the tails (the median
//! bounds evaluate it at probabilities like 1/(e^t + 1) for large t), so
//! the library quantile is polished with Newton steps against an
//! erfc-based CDF, which is free of cancellation in the tails.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal density.
pub fn phi_density(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal quantile, accurate to roughly machine precision.
pub fn phi_inv(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "phi_inv requires p in (0,1), got {p}");
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut z = n.inverse_cdf(p);
    // Two Newton polish steps; the density stays bounded away from zero
    // relative to the CDF error for any representable p.
    for _ in 0..2 {
        let err = phi(z) - p;
        let d = phi_density(z);
        if d > 0.0 {
            z -= err / d;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cdf_values() {
        assert_abs_diff_eq!(phi(0.0), 0.5, epsilon = 1e-15);
        // statrs's erfc carries ~1e-11 absolute error; plenty for every
        // tolerance in this crate.
        assert_abs_diff_eq!(phi(1.0), 0.841_344_746_068_543, epsilon = 1e-9);
        assert_abs_diff_eq!(phi(-1.0), 1.0 - phi(1.0), epsilon = 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-9] {
            assert_abs_diff_eq!(phi(phi_inv(p)), p, epsilon = 1e-13 * p.max(1e-3));
        }
        assert_abs_diff_eq!(phi_inv(phi(-1.0)), -1.0, epsilon = 1e-10);
    }

    #[test]
    #[should_panic]
    fn quantile_rejects_endpoints() {
        phi_inv(0.0);
    }
}
