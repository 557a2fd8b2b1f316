//! Seeded synthetic observations under `H_B` (planted outliers) or `H_r`.
//!
//! Randomness is keyed, not sequential: every stream is a ChaCha8 generator
//! whose 256-bit key is `(seed, domain, index, 0)` in little-endian words.
//! Row `i` of a scenario reads the stream `(seed, ROW, i)`, so the output
//! does not depend on the order rows (or trials) are produced in.
//!
//! Normal variates come from `rand_distr::StandardNormal` (ziggurat method)
//! scaled as `mu + sigma * z`, drawn in sample order.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mmd::SequenceSet;
use crate::theory::GaussianSpec;

/// Stream domains. Distinct domains never share a key.
pub mod domain {
    pub const ROW: u64 = 1;
    pub const TRIAL_DATA: u64 = 2;
    pub const TRIAL_TEST: u64 = 3;
    pub const KNOWN_TEST: u64 = 4;
    pub const UNKNOWN_TEST: u64 = 5;
}

/// Generator for the keyed stream `(seed, domain, index)`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// A child seed: the first word of stream `(seed, domain, index)`.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    stream(seed, domain, index).random()
}

/// Largest outlier count that keeps nominal sequences a strict majority:
/// `ceil(M/2) - 1`.
pub fn max_outliers(m: usize) -> usize {
    m.div_ceil(2).saturating_sub(1)
}

/// Everything needed to draw one observation `Y^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub m: usize,
    pub n: usize,
    pub nominal: GaussianSpec,
    pub anomalous: GaussianSpec,
    /// 0-based outlier indices; empty means the null hypothesis `H_r`.
    pub outliers: BTreeSet<usize>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// The planted outliers are the first `s` sequences.
    pub fn with_leading_outliers(
        m: usize,
        n: usize,
        nominal: GaussianSpec,
        anomalous: GaussianSpec,
        s: usize,
        seed: u64,
    ) -> Self {
        Self {
            m,
            n,
            nominal,
            anomalous,
            outliers: (0..s.min(m)).collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < SequenceSet::MIN_SEQUENCES {
            return Err(Error::Config(format!(
                "scenario needs M >= {}; got {}",
                SequenceSet::MIN_SEQUENCES,
                self.m
            )));
        }
        if self.n < SequenceSet::MIN_LENGTH {
            return Err(Error::Config(format!(
                "scenario needs n >= {}; got {}",
                SequenceSet::MIN_LENGTH,
                self.n
            )));
        }
        if let Some(&bad) = self.outliers.iter().find(|&&i| i >= self.m) {
            return Err(Error::Config(format!(
                "outlier index {bad} out of range for M = {}",
                self.m
            )));
        }
        let cap = max_outliers(self.m);
        if self.outliers.len() > cap {
            return Err(Error::Config(format!(
                "{} outliers exceed ceil(M/2) - 1 = {cap}",
                self.outliers.len()
            )));
        }
        GaussianSpec::new(self.nominal.mu, self.nominal.sigma)?;
        GaussianSpec::new(self.anomalous.mu, self.anomalous.sigma)?;
        Ok(())
    }

    /// True under `H_r`.
    pub fn is_null(&self) -> bool {
        self.outliers.is_empty()
    }
}

/// Draws the `M x n` observation described by `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<SequenceSet> {
    spec.validate()?;
    let mut data = Vec::with_capacity(spec.m * spec.n);
    for i in 0..spec.m {
        let dist = if spec.outliers.contains(&i) {
            spec.anomalous
        } else {
            spec.nominal
        };
        let mut rng = stream(spec.seed, domain::ROW, i as u64);
        data.extend((0..spec.n).map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            dist.mu + dist.sigma * z
        }));
    }
    SequenceSet::from_flat(data, spec.m, spec.n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(outliers: &[usize], n: usize, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            m: 10,
            n,
            nominal: GaussianSpec::new(0.0, 1.0).unwrap(),
            anomalous: GaussianSpec::new(1.5, 1.0).unwrap(),
            outliers: outliers.iter().copied().collect(),
            seed,
        }
    }

    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    #[test]
    fn deterministic() {
        let s = spec(&[0, 1], 50, 42);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let other = generate(&spec(&[0, 1], 50, 43)).unwrap();
        assert_ne!(generate(&s).unwrap(), other);
    }

    #[test]
    fn null_scenario_is_all_nominal() {
        // Under H_r every row reads the same streams as the nominal rows of a
        // planted scenario with the same seed.
        let null = generate(&spec(&[], 20, 5)).unwrap();
        let planted = generate(&spec(&[0, 1], 20, 5)).unwrap();
        for i in 2..10 {
            assert_eq!(null.row(i), planted.row(i));
        }
        assert_ne!(null.row(0), planted.row(0));
    }

    #[test]
    fn row_means_match_specs() {
        let n = 10_000;
        let seqs = generate(&spec(&[0, 1], n, 7)).unwrap();
        for i in 0..10 {
            let expected = if i < 2 { 1.5 } else { 0.0 };
            let m = mean(seqs.row(i));
            assert!((m - expected).abs() < 0.05, "row {i}: {m}");
        }
    }

    #[test]
    fn second_moments_within_tolerance() {
        let n = 20_000;
        let tol = 4.0 / (n as f64).sqrt();
        let mut s = spec(&[3], n, 9);
        s.anomalous = GaussianSpec::new(-1.0, 2.0).unwrap();
        let seqs = generate(&s).unwrap();
        for i in 0..10 {
            let row = seqs.row(i);
            let mu = mean(row);
            let var = row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let (emu, esd) = if i == 3 { (-1.0, 2.0) } else { (0.0, 1.0) };
            assert!((mu - emu).abs() < tol * esd, "row {i} mean {mu}");
            assert!(
                (var.sqrt() - esd).abs() < tol * esd,
                "row {i} sd {}",
                var.sqrt()
            );
        }
    }

    #[test]
    fn longer_sequences_extend_shorter_ones() {
        let short = generate(&spec(&[0], 10, 3)).unwrap();
        let long = generate(&spec(&[0], 30, 3)).unwrap();
        for i in 0..10 {
            assert_eq!(short.row(i), &long.row(i)[..10]);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate(&spec(&[0, 1, 2, 3, 4], 10, 0)).is_err());
        assert!(generate(&spec(&[10], 10, 0)).is_err());
        assert!(generate(&spec(&[], 1, 0)).is_err());
        let mut s = spec(&[], 10, 0);
        s.m = 2;
        assert!(generate(&s).is_err());
    }

    #[test]
    fn max_outliers_formula() {
        assert_eq!(max_outliers(3), 1);
        assert_eq!(max_outliers(4), 1);
        assert_eq!(max_outliers(5), 2);
        assert_eq!(max_outliers(10), 4);
        assert_eq!(max_outliers(11), 5);
    }

    #[test]
    fn streams_are_keyed() {
        let a: u64 = stream(1, domain::ROW, 0).random();
        let b: u64 = stream(1, domain::ROW, 1).random();
        let c: u64 = stream(1, domain::TRIAL_DATA, 0).random();
        assert!(a != b && a != c && b != c);
        assert_eq!(derive_seed(9, 2, 3), derive_seed(9, 2, 3));
    }
}
