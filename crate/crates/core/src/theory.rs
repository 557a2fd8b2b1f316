//! Closed-form population MMD for Gaussian pairs and the error-exponent lower
//! bounds for the known-count and unknown-count tests.
//!
//! All exponents are in nats per sample. `k0` is the kernel supremum
//! ([`crate::kernel::KernelSpec::bound`]), 1 for the Gaussian kernel.
//!
//! Units note: the threshold `lambda` is always compared against the squared
//! MMD, so the crossover threshold is `(1 - sqrt(2/3)) * MMD^2`. Written in
//! terms of `MMD^4` instead, the equalization below would not balance.

use crate::error::{Error, Result};

/// A univariate normal distribution `N(mu, sigma^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianSpec {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Config(format!("mean must be finite; got {mu}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!(
                "standard deviation must be finite and > 0; got {sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }
}

/// Lower bounds on the three error exponents of the unknown-count test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentBounds {
    pub misclassification_bound: f64,
    pub false_reject_bound: f64,
    pub false_alarm_bound: f64,
}

/// `E[k(X, Y)]` for independent `X ~ N(mu1, v1)`, `Y ~ N(mu2, v2)` under the
/// Gaussian kernel: `X - Y ~ N(mu1 - mu2, v1 + v2)` integrated against
/// `exp(-d^2 / (2 sigma0^2))`.
fn expected_kernel(mu_diff: f64, var_sum: f64, sigma0: f64) -> f64 {
    let s2 = sigma0 * sigma0;
    let total = s2 + var_sum;
    (s2 / total).sqrt() * (-(mu_diff * mu_diff) / (2.0 * total)).exp()
}

/// Population `MMD^2(p, q)` under the Gaussian kernel with bandwidth `sigma0`.
pub fn gaussian_population_mmd2(p: &GaussianSpec, q: &GaussianSpec, sigma0: f64) -> Result<f64> {
    if !(sigma0.is_finite() && sigma0 > 0.0) {
        return Err(Error::Config(format!(
            "kernel bandwidth must be finite and > 0; got {sigma0}"
        )));
    }
    for g in [p, q] {
        GaussianSpec::new(g.mu, g.sigma)?;
    }
    let (vp, vq) = (p.sigma * p.sigma, q.sigma * q.sigma);
    let kpp = expected_kernel(0.0, 2.0 * vp, sigma0);
    let kqq = expected_kernel(0.0, 2.0 * vq, sigma0);
    let kpq = expected_kernel(p.mu - q.mu, vp + vq, sigma0);
    // MMD^2 >= 0 mathematically; clamp rounding noise around zero.
    Ok((kpp + kqq - 2.0 * kpq).max(0.0))
}

fn check_inputs(mmd2_pop: f64, k0: f64) -> Result<()> {
    if !(mmd2_pop.is_finite() && mmd2_pop >= 0.0) {
        return Err(Error::Domain(format!(
            "population MMD^2 must be finite and >= 0; got {mmd2_pop}"
        )));
    }
    if !(k0.is_finite() && k0 > 0.0) {
        return Err(Error::Domain(format!(
            "kernel bound must be finite and > 0; got {k0}"
        )));
    }
    Ok(())
}

/// Misclassification exponent bound of the known-count test:
/// `MMD^4 / (96 K0^2)`.
pub fn exponent_bound_known(mmd2_pop: f64, k0: f64) -> Result<f64> {
    check_inputs(mmd2_pop, k0)?;
    Ok(mmd2_pop * mmd2_pop / (96.0 * k0 * k0))
}

/// Exponent bounds of the unknown-count test at threshold `lambda`.
///
/// The false-reject bound is `max(0, MMD^2 - lambda)^2 / (64 K0^2)`; it is
/// zero (vacuous) once `lambda >= MMD^2`.
pub fn exponent_bounds_unknown(mmd2_pop: f64, k0: f64, lambda: f64) -> Result<ExponentBounds> {
    check_inputs(mmd2_pop, k0)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!(
            "threshold must be finite and > 0; got {lambda}"
        )));
    }
    let k2 = k0 * k0;
    let gap = (mmd2_pop - lambda).max(0.0);
    Ok(ExponentBounds {
        misclassification_bound: mmd2_pop * mmd2_pop / (96.0 * k2),
        false_reject_bound: gap * gap / (64.0 * k2),
        false_alarm_bound: lambda * lambda / (64.0 * k2),
    })
}

/// Largest threshold at which the unknown-count test's worst non-null bound
/// still equals the known-count bound: solves
/// `(MMD^2 - lambda)^2 / 64 = MMD^4 / 96`, i.e. `(1 - sqrt(2/3)) MMD^2`.
pub fn crossover_lambda(mmd2_pop: f64) -> Result<f64> {
    check_inputs(mmd2_pop, 1.0)?;
    Ok((1.0 - (2.0f64 / 3.0).sqrt()) * mmd2_pop)
}
