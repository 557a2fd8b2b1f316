//! Exhaustive-search reference test and estimator-call accounting.
//!
//! [`exhaustive_known`] is not a reimplementation of any published exhaustive
//! test. It scores every candidate set `B` of size `s` by the total
//! within-nominal inhomogeneity `sum_{j in M\B} MMD^2(y_j, pool(M\B \ {j}))`
//! and returns the minimizer. It exists for sanity cross-checks on separated
//! data and to measure what exhaustive enumeration costs.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;

use crate::detect::Hypothesis;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mmd::{DirectMmd, MmdOracle, SequenceSet};
use crate::simgen::max_outliers;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Known outlier count.
    Known,
    /// Unknown outlier count with threshold.
    Unknown,
    /// Exhaustive enumeration of candidate sets.
    Exhaustive,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Known => "alg1",
            Algorithm::Unknown => "alg2",
            Algorithm::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alg1" | "known" => Ok(Algorithm::Known),
            "alg2" | "unknown" => Ok(Algorithm::Unknown),
            "exhaustive" => Ok(Algorithm::Exhaustive),
            other => Err(Error::Config(format!("unknown algorithm tag `{other}`"))),
        }
    }
}

/// Estimator calls and the kernel terms they expand to.
///
/// A pairwise call on two length-`n` rows expands to `2 n(n-1) + n^2` kernel
/// terms; a pooled call of one row against `p` rows expands to
/// `n(n-1) + pn(pn-1) + p n^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalCount {
    pub algorithm: Algorithm,
    pub pairwise_calls: u64,
    pub pooled_calls: u64,
    pub kernel_evals: u64,
}

impl EvalCount {
    pub fn estimator_calls(&self) -> u64 {
        self.pairwise_calls + self.pooled_calls
    }
}

fn pairwise_terms(n: u64) -> u64 {
    2 * n * (n - 1) + n * n
}

fn pooled_terms(n: u64, pool_rows: u64) -> u64 {
    let l = pool_rows * n;
    n * (n - 1) + l * (l - 1) + n * l
}

/// `C(m, k)`, exact.
pub fn binomial(m: u64, k: u64) -> u64 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (m - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

fn check_count(m: usize, s: usize) -> Result<()> {
    if m < SequenceSet::MIN_SEQUENCES {
        return Err(Error::Config(format!("need M >= 3; got {m}")));
    }
    let cap = max_outliers(m);
    if s == 0 || s > cap {
        return Err(Error::Config(format!(
            "outlier count s = {s} must satisfy 1 <= s <= {cap} for M = {m}"
        )));
    }
    Ok(())
}

/// Closed-form estimator-call counts.
///
/// * `Known` with `rounds` re-estimations: `M + (rounds+1) M` pairwise calls
///   and `rounds (M - s)` pooled calls.
/// * `Unknown`: `M(M-1)/2` pairwise calls (`s` and `rounds` ignored).
/// * `Exhaustive`: `C(M, s) (M - s)` pooled calls (`rounds` ignored).
///
/// `n` is the sequence length, used only for the kernel-term count.
pub fn count_mmd_evals(
    m: usize,
    s: usize,
    rounds: usize,
    n: usize,
    algorithm: Algorithm,
) -> Result<EvalCount> {
    if n < SequenceSet::MIN_LENGTH {
        return Err(Error::Config(format!("need n >= 2; got {n}")));
    }
    let (mu, su, ru, nu) = (m as u64, s as u64, rounds as u64, n as u64);
    let (pairwise_calls, pooled_calls) = match algorithm {
        Algorithm::Known => {
            check_count(m, s)?;
            (mu + (ru + 1) * mu, ru * (mu - su))
        }
        Algorithm::Unknown => {
            if m < SequenceSet::MIN_SEQUENCES {
                return Err(Error::Config(format!("need M >= 3; got {m}")));
            }
            (mu * (mu - 1) / 2, 0)
        }
        Algorithm::Exhaustive => {
            check_count(m, s)?;
            (0, binomial(mu, su) * (mu - su))
        }
    };
    let pool_rows = mu.saturating_sub(su + 1);
    let kernel_evals = pairwise_calls * pairwise_terms(nu)
        + if pooled_calls > 0 {
            pooled_calls * pooled_terms(nu, pool_rows)
        } else {
            0
        };
    Ok(EvalCount {
        algorithm,
        pairwise_calls,
        pooled_calls,
        kernel_evals,
    })
}

/// Exhaustive search with fresh estimator calls (no caching).
pub fn exhaustive_known(
    seqs: &SequenceSet,
    s: usize,
    kernel: &KernelSpec,
) -> Result<(Hypothesis, EvalCount)> {
    let (h, mut count) = exhaustive_known_with(&DirectMmd::new(seqs, *kernel), s)?;
    let n = seqs.len() as u64;
    let pool_rows = (seqs.num_sequences() - s - 1) as u64;
    count.kernel_evals = count.pooled_calls * pooled_terms(n, pool_rows);
    Ok((h, count))
}

/// Exhaustive search over any statistic source. The returned count has
/// `kernel_evals = 0` since the sequence length is not visible here.
pub fn exhaustive_known_with<O: MmdOracle + ?Sized>(
    oracle: &O,
    s: usize,
) -> Result<(Hypothesis, EvalCount)> {
    let m = oracle.num_sequences();
    check_count(m, s)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut calls = 0u64;
    let mut nominal = Vec::with_capacity(m - s);
    let mut pool = Vec::with_capacity(m - s - 1);
    // Combinations arrive in lexicographic order; strict `<` keeps the
    // lexicographically smallest set among equal scores.
    for candidate in (0..m).combinations(s) {
        nominal.clear();
        nominal.extend((0..m).filter(|i| !candidate.contains(i)));
        let mut score = 0.0;
        for &j in &nominal {
            pool.clear();
            pool.extend(nominal.iter().copied().filter(|&p| p != j));
            score += oracle.vs_pool(j, &pool);
        }
        calls += nominal.len() as u64;
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, candidate));
        }
    }
    let (_, set) = best.ok_or_else(|| Error::Internal("no candidate sets".into()))?;
    Ok((
        Hypothesis::outliers(set),
        EvalCount {
            algorithm: Algorithm::Exhaustive,
            pairwise_calls: 0,
            pooled_calls: calls,
            kernel_evals: 0,
        },
    ))
}
