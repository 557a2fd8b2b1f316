//! Positive-definite kernels on scalar samples.
//!
//! Every kernel carries its supremum bound `K0 = sup k(x, y)`, which scales
//! the error-exponent formulas in [`crate::theory`]. For the Gaussian kernel
//! the bound is exactly 1, independent of the bandwidth.

use crate::error::{Error, Result};

/// Kernel family. Only the Gaussian family ships; a new family must also
/// provide its supremum in [`KernelSpec::bound`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    /// `k(x, y) = exp(-(x - y)^2 / (2 sigma0^2))`
    Gaussian,
}

/// A kernel family together with its bandwidth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    sigma0: f64,
    // 1 / (2 sigma0^2), cached so the hot loop is a multiply and an exp.
    inv_two_var: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, sigma0: f64) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::Config(format!(
                "kernel bandwidth must be finite and > 0; got {sigma0}"
            )));
        }
        let inv_two_var = 1.0 / (2.0 * sigma0 * sigma0);
        if !inv_two_var.is_finite() {
            return Err(Error::Config(format!(
                "kernel bandwidth {sigma0} is too small to represent"
            )));
        }
        Ok(Self {
            family,
            sigma0,
            inv_two_var,
        })
    }

    /// Gaussian kernel with bandwidth `sigma0`.
    pub fn gaussian(sigma0: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma0)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Evaluates `k(x, y)`. Exactly symmetric: `(x - y)^2 == (y - x)^2` in
    /// IEEE arithmetic.
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let d = x - y;
                (-(d * d) * self.inv_two_var).exp()
            }
        }
    }

    /// Supremum of `|k(x, y)|` over all inputs (`K0`).
    pub fn bound(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_distance_is_one() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(k.eval(0.0, 0.0), 1.0);
    }

    #[test]
    fn unit_distance_matches_exp_half() {
        // e^(-1/2) from a 30-digit reference evaluation.
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!((k.eval(0.0, 1.0) - 0.606_530_659_712_633_4).abs() < 1e-15);
    }

    #[test]
    fn bound_is_bandwidth_independent() {
        assert_eq!(KernelSpec::gaussian(1.0).unwrap().bound(), 1.0);
        assert_eq!(KernelSpec::gaussian(7.3).unwrap().bound(), 1.0);
    }

    #[test]
    fn rejects_bad_bandwidth() {
        for s in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(KernelSpec::gaussian(s), Err(Error::Config(_))));
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in -50.0f64..50.0, b in -50.0f64..50.0, s in 0.01f64..20.0) {
            let k = KernelSpec::gaussian(s).unwrap();
            let v = k.eval(a, b);
            prop_assert_eq!(v.to_bits(), k.eval(b, a).to_bits());
            prop_assert!(v >= 0.0);
            prop_assert!(v <= k.bound());
            prop_assert_eq!(k.eval(a, a), k.bound());
        }
    }
}
