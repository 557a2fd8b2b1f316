//! Low-complexity outlier hypothesis tests for continuous sequences, built on
//! the unbiased kernel maximum mean discrepancy (MMD).
//!
//! Given `M` sequences of `n` real samples, most drawn from an unknown nominal
//! distribution and a few from an unknown anomalous one, the tests locate the
//! outlying sequences:
//!
//! * [`detect::test_known`] when the outlier count `s` is known,
//! * [`detect::test_unknown`] when it is not, using a threshold `lambda`
//!   that also allows declaring "no outliers".
//!
//! [`harness`] estimates error probabilities by Monte Carlo and fits
//! empirical error exponents; [`theory`] gives the matching lower bounds for
//! Gaussian data under the Gaussian kernel.

pub mod baseline;
pub mod cli;
pub mod detect;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod mmd;
pub mod simgen;
pub mod theory;

pub use detect::{
    test_known, test_unknown, Hypothesis, KnownTestOptions, TestTrace, UnknownTestOptions,
};
pub use error::{Error, Result};
pub use kernel::KernelSpec;
pub use mmd::{mmd2_unbiased, SequenceSet};
