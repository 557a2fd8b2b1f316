//! The two low-complexity fixed-length tests.
//!
//! * [`test_known`]: the number of outliers `s` is known. A random draw picks
//!   an initial sequence; the sequence at descending rank `ceil(M/2)` of its
//!   MMD row becomes the nominal reference; the `s` sequences farthest from
//!   the reference are declared outliers, and the reference is re-estimated
//!   as the nominal candidate closest to the pool of the others. Rounds stop
//!   when the candidate set repeats or `max_iterations` re-estimations ran.
//! * [`test_unknown`]: the number of outliers is unknown. If no pairwise
//!   statistic reaches `lambda` the test rejects the presence of outliers;
//!   otherwise a random center and its farthest sequence seed a two-cluster
//!   assignment and the smaller cluster is returned.
//!
//! Both are deterministic given their seed. Indices are 0-based.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mmd::{DirectMmd, MmdOracle, SequenceSet};
use crate::simgen::{domain, max_outliers, stream};

/// Test decision: no outliers (`H_r`) or a specific outlier set (`H_B`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    Reject,
    Outliers(BTreeSet<usize>),
}

impl Hypothesis {
    pub fn outliers<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        Hypothesis::Outliers(indices.into_iter().collect())
    }

    pub fn is_reject(&self) -> bool {
        matches!(self, Hypothesis::Reject)
    }

    /// The outlier set, or `None` for [`Hypothesis::Reject`].
    pub fn outlier_set(&self) -> Option<&BTreeSet<usize>> {
        match self {
            Hypothesis::Reject => None,
            Hypothesis::Outliers(b) => Some(b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KnownTestOptions {
    /// Number of outliers, `1 <= s <= ceil(M/2) - 1`.
    pub s: usize,
    /// Cap on reference re-estimations; 0 runs a single classification round.
    pub max_iterations: usize,
    pub seed: u64,
}

impl KnownTestOptions {
    pub const DEFAULT_MAX_ITERATIONS: usize = 10;

    pub fn new(s: usize, seed: u64) -> Self {
        Self {
            s,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnknownTestOptions {
    pub lambda: f64,
    pub seed: u64,
}

/// What a test did, for tests and complexity accounting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TestTrace {
    /// The uniformly drawn index (known test: initial reference draw;
    /// unknown test: first center), if a draw happened.
    pub initial_draw: Option<usize>,
    /// Known test: the rank-`ceil(M/2)` reference followed by each
    /// re-estimated reference. Unknown test: the two centers `[c1, c2]`.
    pub references: Vec<usize>,
    /// Candidate outlier set produced by each classification round.
    pub rounds: Vec<BTreeSet<usize>>,
    /// Re-estimations executed.
    pub iterations: usize,
    /// True when the known test stopped because the candidate set repeated.
    pub converged: bool,
    /// Pairwise estimator calls (diagonal lookups reused from the matrix
    /// are not counted).
    pub pairwise_calls: u64,
    /// Pooled estimator calls.
    pub pooled_calls: u64,
    /// Unknown test: the two clusters had equal size and the cluster of
    /// `c2` was returned.
    pub cluster_tie: bool,
}

impl TestTrace {
    pub fn mmd_evals(&self) -> u64 {
        self.pairwise_calls + self.pooled_calls
    }
}

/// Indices sorted by value, descending; ties go to the smaller index.
fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

fn check_known(m: usize, opts: &KnownTestOptions) -> Result<()> {
    let cap = max_outliers(m);
    if opts.s == 0 || opts.s > cap {
        return Err(Error::Config(format!(
            "outlier count s = {} must satisfy 1 <= s <= ceil(M/2) - 1 = {cap} for M = {m}",
            opts.s
        )));
    }
    Ok(())
}

/// Known-count test evaluated with fresh estimator calls (no caching).
pub fn test_known(
    seqs: &SequenceSet,
    opts: &KnownTestOptions,
    kernel: &KernelSpec,
) -> Result<(Hypothesis, TestTrace)> {
    test_known_with(&DirectMmd::new(seqs, *kernel), opts)
}

/// Known-count test over any statistic source.
pub fn test_known_with<O: MmdOracle + ?Sized>(
    oracle: &O,
    opts: &KnownTestOptions,
) -> Result<(Hypothesis, TestTrace)> {
    let m = oracle.num_sequences();
    check_known(m, opts)?;
    let s = opts.s;
    let mut trace = TestTrace::default();
    let mut rng = stream(opts.seed, domain::KNOWN_TEST, 0);

    let start = rng.random_range(0..m);
    trace.initial_draw = Some(start);
    let v1: Vec<f64> = (0..m).map(|i| oracle.pair(start, i)).collect();
    trace.pairwise_calls += m as u64;
    let mut reference = rank_descending(&v1)[m.div_ceil(2) - 1];
    trace.references.push(reference);

    let mut previous: Option<BTreeSet<usize>> = None;
    loop {
        let v2: Vec<f64> = (0..m).map(|i| oracle.pair(reference, i)).collect();
        trace.pairwise_calls += m as u64;
        let candidate: BTreeSet<usize> = rank_descending(&v2)[..s].iter().copied().collect();
        trace.rounds.push(candidate.clone());

        if previous.as_ref() == Some(&candidate) {
            trace.converged = true;
            break;
        }
        if trace.iterations == opts.max_iterations {
            break;
        }

        let nominal: Vec<usize> = (0..m).filter(|i| !candidate.contains(i)).collect();
        let mut pool = Vec::with_capacity(nominal.len() - 1);
        let mut best = (f64::INFINITY, usize::MAX);
        for &i in &nominal {
            pool.clear();
            pool.extend(nominal.iter().copied().filter(|&j| j != i));
            let v = oracle.vs_pool(i, &pool);
            if v < best.0 {
                best = (v, i);
            }
        }
        trace.pooled_calls += nominal.len() as u64;
        if best.1 == usize::MAX {
            return Err(Error::Internal(
                "re-estimation produced no finite statistic".into(),
            ));
        }
        reference = best.1;
        trace.references.push(reference);
        trace.iterations += 1;
        previous = Some(candidate);
    }

    let decision = trace
        .rounds
        .last()
        .cloned()
        .map(Hypothesis::Outliers)
        .ok_or_else(|| Error::Internal("no classification round ran".into()))?;
    Ok((decision, trace))
}

fn check_unknown(opts: &UnknownTestOptions) -> Result<()> {
    if !(opts.lambda.is_finite() && opts.lambda > 0.0) {
        return Err(Error::Config(format!(
            "threshold lambda must be finite and > 0; got {}",
            opts.lambda
        )));
    }
    Ok(())
}

/// Unknown-count test evaluated with fresh estimator calls (no caching).
pub fn test_unknown(
    seqs: &SequenceSet,
    opts: &UnknownTestOptions,
    kernel: &KernelSpec,
) -> Result<(Hypothesis, TestTrace)> {
    test_unknown_with(&DirectMmd::new(seqs, *kernel), opts)
}

/// Unknown-count test over any statistic source.
pub fn test_unknown_with<O: MmdOracle + ?Sized>(
    oracle: &O,
    opts: &UnknownTestOptions,
) -> Result<(Hypothesis, TestTrace)> {
    check_unknown(opts)?;
    let m = oracle.num_sequences();
    let mut trace = TestTrace::default();

    let mut table = vec![0.0; m * m];
    let mut max_off = f64::NEG_INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            let v = oracle.pair(i, j);
            table[i * m + j] = v;
            table[j * m + i] = v;
            max_off = max_off.max(v);
        }
    }
    trace.pairwise_calls = (m * (m - 1) / 2) as u64;
    if max_off < opts.lambda {
        return Ok((Hypothesis::Reject, trace));
    }

    let mut rng = stream(opts.seed, domain::UNKNOWN_TEST, 0);
    let c1 = rng.random_range(0..m);
    trace.initial_draw = Some(c1);
    table[c1 * m + c1] = oracle.pair(c1, c1);
    // Farthest sequence from c1; the first index wins ties.
    let row_c1 = &table[c1 * m..(c1 + 1) * m];
    let c2 = (0..m).fold(0, |best, j| if row_c1[j] > row_c1[best] { j } else { best });
    table[c2 * m + c2] = oracle.pair(c2, c2);
    trace.references = vec![c1, c2];

    let mut first = BTreeSet::new();
    let mut second = BTreeSet::new();
    for i in 0..m {
        // Nearer center; c1 wins ties.
        if table[c2 * m + i] < table[c1 * m + i] {
            second.insert(i);
        } else {
            first.insert(i);
        }
    }
    let outliers = match first.len().cmp(&second.len()) {
        std::cmp::Ordering::Less => first,
        std::cmp::Ordering::Greater => second,
        std::cmp::Ordering::Equal => {
            trace.cluster_tie = true;
            if second.contains(&c2) {
                second
            } else {
                first
            }
        }
    };
    if outliers.is_empty() {
        return Err(Error::Internal("smaller cluster is empty".into()));
    }
    trace.rounds.push(outliers.clone());
    Ok((Hypothesis::Outliers(outliers), trace))
}
