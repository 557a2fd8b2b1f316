//! Unbiased empirical squared MMD.
//!
//! For samples `x` (length `n1`) and `y` (length `n2`) the statistic is
//!
//! ```text
//! MMD^2_u = 1/(n1(n1-1)) sum_{i!=j} k(x_i, x_j)
//!         + 1/(n2(n2-1)) sum_{i!=j} k(y_i, y_j)
//!         - 2/(n1 n2)    sum_{i,j}  k(x_i, y_j)
//! ```
//!
//! All kernel sums use compensated (Neumaier) accumulation in a fixed index
//! order. The cross sum is always taken with the lexicographically smaller
//! collection in the outer loop, which makes the statistic bit-for-bit
//! symmetric in its arguments.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// `M` observed sequences of `n` real samples each, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSet {
    data: Vec<f64>,
    m: usize,
    n: usize,
}

impl SequenceSet {
    /// Smallest meaningful instance: a strict nominal majority needs `M >= 3`.
    pub const MIN_SEQUENCES: usize = 3;
    /// The unbiased estimator divides by `n(n-1)`.
    pub const MIN_LENGTH: usize = 2;

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Data(format!(
                "sequence {} has length {} but sequence 1 has length {n}",
                i + 1,
                r.len()
            )));
        }
        Self::from_flat(rows.into_iter().flatten().collect(), m, n)
    }

    pub fn from_flat(data: Vec<f64>, m: usize, n: usize) -> Result<Self> {
        if m < Self::MIN_SEQUENCES {
            return Err(Error::Data(format!(
                "need at least {} sequences; got {m}",
                Self::MIN_SEQUENCES
            )));
        }
        if n < Self::MIN_LENGTH {
            return Err(Error::Data(format!(
                "sequences need at least {} samples; got {n}",
                Self::MIN_LENGTH
            )));
        }
        if data.len() != m * n {
            return Err(Error::Data(format!(
                "expected {m} x {n} = {} samples; got {}",
                m * n,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite sample at sequence {}, position {}",
                pos / n + 1,
                pos % n + 1
            )));
        }
        Ok(Self { data, m, n })
    }

    /// Number of sequences `M`.
    pub fn num_sequences(&self) -> usize {
        self.m
    }

    /// Samples per sequence `n`.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `sum_{i != j} k(x_i, x_j)` over ordered distinct pairs.
pub(crate) fn within_sum(x: &[f64], kernel: &KernelSpec) -> f64 {
    let mut acc = CompensatedSum::default();
    for (i, &a) in x.iter().enumerate() {
        for &b in &x[i + 1..] {
            acc.add(kernel.eval(a, b));
        }
    }
    2.0 * acc.value()
}

fn lexicographic(x: &[f64], y: &[f64]) -> Ordering {
    x.iter()
        .zip(y)
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| x.len().cmp(&y.len()))
}

/// `sum_{i, j} k(x_i, y_j)`, symmetric in `(x, y)` bit-for-bit.
pub(crate) fn cross_sum(x: &[f64], y: &[f64], kernel: &KernelSpec) -> f64 {
    let (outer, inner) = match lexicographic(x, y) {
        Ordering::Greater => (y, x),
        _ => (x, y),
    };
    let mut acc = CompensatedSum::default();
    for &a in outer {
        for &b in inner {
            acc.add(kernel.eval(a, b));
        }
    }
    acc.value()
}

/// Combines raw kernel sums into the unbiased statistic.
#[inline]
pub(crate) fn combine(within_x: f64, n1: usize, within_y: f64, n2: usize, cross: f64) -> f64 {
    let (n1, n2) = (n1 as f64, n2 as f64);
    within_x / (n1 * (n1 - 1.0)) + within_y / (n2 * (n2 - 1.0)) - 2.0 * cross / (n1 * n2)
}

fn check_collection(name: &str, x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::Precondition(format!(
            "{name} needs at least 2 samples; got {}",
            x.len()
        )));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "{name} has a non-finite sample at position {}",
            pos + 1
        )));
    }
    Ok(())
}

fn mmd2_unchecked(x: &[f64], y: &[f64], kernel: &KernelSpec) -> f64 {
    combine(
        within_sum(x, kernel),
        x.len(),
        within_sum(y, kernel),
        y.len(),
        cross_sum(x, y, kernel),
    )
}

/// Unbiased squared MMD between two sample collections.
///
/// The value lies in `[-2 K0, 2 K0]` and is exactly symmetric in `(x, y)`.
pub fn mmd2_unbiased(x: &[f64], y: &[f64], kernel: &KernelSpec) -> Result<f64> {
    check_collection("x", x)?;
    check_collection("y", y)?;
    Ok(mmd2_unchecked(x, y, kernel))
}

/// Symmetric `M x M` matrix of pairwise statistics.
///
/// The diagonal holds the estimator applied to a row against itself, which is
/// slightly negative in general since the cross term includes `k(x_i, x_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MmdMatrix {
    m: usize,
    values: Vec<f64>,
}

impl MmdMatrix {
    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    /// Largest off-diagonal entry and its `(i, j)` with `i < j`; the first
    /// pair in row-major order wins ties.
    pub fn max_off_diagonal(&self) -> (f64, usize, usize) {
        let mut best = (f64::NEG_INFINITY, 0, 1);
        for i in 0..self.m {
            for j in i + 1..self.m {
                let v = self.get(i, j);
                if v > best.0 {
                    best = (v, i, j);
                }
            }
        }
        best
    }
}

/// Raw kernel sums for a whole [`SequenceSet`]: per-row within sums and all
/// pairwise cross sums. Every pairwise statistic and every pooled statistic
/// over unions of rows is an `O(M)` combination of these.
#[derive(Clone, Debug)]
pub struct KernelSums {
    m: usize,
    n: usize,
    within: Vec<f64>,
    cross: Vec<f64>,
}

impl KernelSums {
    pub fn compute(seqs: &SequenceSet, kernel: &KernelSpec) -> Self {
        let (m, n) = (seqs.num_sequences(), seqs.len());
        let within: Vec<f64> = seqs.rows().map(|r| within_sum(r, kernel)).collect();
        let mut cross = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let c = cross_sum(seqs.row(i), seqs.row(j), kernel);
                cross[i * m + j] = c;
                cross[j * m + i] = c;
            }
        }
        Self {
            m,
            n,
            within,
            cross,
        }
    }

    pub fn matrix(&self) -> MmdMatrix {
        let (m, n) = (self.m, self.n);
        let mut values = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = combine(self.within[i], n, self.within[j], n, self.cross[i * m + j]);
                values[i * m + j] = v;
                values[j * m + i] = v;
            }
        }
        MmdMatrix { m, values }
    }

    /// Pooled statistic of row `i` against the union of `pool`, assembled
    /// from block sums. Agrees with [`mmd2_vs_pool`] up to reassociation.
    pub fn vs_pool(&self, i: usize, pool: &[usize]) -> f64 {
        let m = self.m;
        let mut within_pool = CompensatedSum::default();
        let mut cross = CompensatedSum::default();
        for (a_pos, &a) in pool.iter().enumerate() {
            within_pool.add(self.within[a]);
            for &b in &pool[a_pos + 1..] {
                within_pool.add(2.0 * self.cross[a * m + b]);
            }
            cross.add(self.cross[i * m + a]);
        }
        combine(
            self.within[i],
            self.n,
            within_pool.value(),
            pool.len() * self.n,
            cross.value(),
        )
    }
}

/// All-pairs statistic matrix. Entry `(i, j)` is bit-identical to
/// `mmd2_unbiased(row i, row j)`; each off-diagonal pair is computed once.
pub fn mmd2_matrix(seqs: &SequenceSet, kernel: &KernelSpec) -> MmdMatrix {
    KernelSums::compute(seqs, kernel).matrix()
}

fn check_pool(i: usize, pool: &[usize], m: usize) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::Precondition("pool must be non-empty".into()));
    }
    if i >= m {
        return Err(Error::Precondition(format!(
            "sequence index {i} out of range for {m} sequences"
        )));
    }
    for (pos, &p) in pool.iter().enumerate() {
        if p >= m {
            return Err(Error::Precondition(format!(
                "pool index {p} out of range for {m} sequences"
            )));
        }
        if p == i {
            return Err(Error::Precondition(format!(
                "pool must exclude the tested sequence {i}"
            )));
        }
        if pool[..pos].contains(&p) {
            return Err(Error::Precondition(format!("pool index {p} repeated")));
        }
    }
    Ok(())
}

fn concat_pool(pool: &[usize], seqs: &SequenceSet) -> Vec<f64> {
    let mut sorted = pool.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::with_capacity(sorted.len() * seqs.len());
    for p in sorted {
        out.extend_from_slice(seqs.row(p));
    }
    out
}

/// Statistic of row `i` against the concatenation of all rows in `pool`
/// (concatenated in ascending index order).
pub fn mmd2_vs_pool(
    i: usize,
    pool: &[usize],
    seqs: &SequenceSet,
    kernel: &KernelSpec,
) -> Result<f64> {
    check_pool(i, pool, seqs.num_sequences())?;
    let pooled = concat_pool(pool, seqs);
    Ok(mmd2_unchecked(seqs.row(i), &pooled, kernel))
}

/// Source of the two statistics the detectors consume.
///
/// Indices are validated by the callers in [`crate::detect`] and
/// [`crate::baseline`]; implementations may panic on out-of-range input.
pub trait MmdOracle {
    fn num_sequences(&self) -> usize;

    /// Pairwise statistic between rows `i` and `j` (`i == j` allowed).
    fn pair(&self, i: usize, j: usize) -> f64;

    /// Statistic of row `i` against the pooled rows in `pool`.
    fn vs_pool(&self, i: usize, pool: &[usize]) -> f64;
}

/// Evaluates every statistic from scratch, `Θ(n^2)` kernel terms per pair
/// and `Θ((|pool| n)^2)` per pooled call. This is the cost model the
/// evaluation counts in [`crate::baseline`] describe.
#[derive(Clone, Copy, Debug)]
pub struct DirectMmd<'a> {
    seqs: &'a SequenceSet,
    kernel: KernelSpec,
}

impl<'a> DirectMmd<'a> {
    pub fn new(seqs: &'a SequenceSet, kernel: KernelSpec) -> Self {
        Self { seqs, kernel }
    }
}

impl MmdOracle for DirectMmd<'_> {
    fn num_sequences(&self) -> usize {
        self.seqs.num_sequences()
    }

    fn pair(&self, i: usize, j: usize) -> f64 {
        mmd2_unchecked(self.seqs.row(i), self.seqs.row(j), &self.kernel)
    }

    fn vs_pool(&self, i: usize, pool: &[usize]) -> f64 {
        let pooled = concat_pool(pool, self.seqs);
        mmd2_unchecked(self.seqs.row(i), &pooled, &self.kernel)
    }
}

/// Precomputes [`KernelSums`] and the pairwise matrix once; afterwards every
/// statistic costs `O(1)` (pairs) or `O(|pool|^2)` (pooled). Used by the
/// Monte Carlo harness, where several tests run on the same data.
#[derive(Clone, Debug)]
pub struct CachedMmd {
    sums: KernelSums,
    matrix: MmdMatrix,
}

impl CachedMmd {
    pub fn new(seqs: &SequenceSet, kernel: &KernelSpec) -> Self {
        let sums = KernelSums::compute(seqs, kernel);
        let matrix = sums.matrix();
        Self { sums, matrix }
    }

    pub fn matrix(&self) -> &MmdMatrix {
        &self.matrix
    }
}

impl MmdOracle for CachedMmd {
    fn num_sequences(&self) -> usize {
        self.matrix.size()
    }

    fn pair(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    fn vs_pool(&self, i: usize, pool: &[usize]) -> f64 {
        self.sums.vs_pool(i, pool)
    }
}
