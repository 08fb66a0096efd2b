//! Word Embedding Association Test.
//!
//! For target sets `X`, `Y` and attribute sets `A`, `B`:
//!
//! * `s(w, A, B)` is the mean cosine of `w` with `A` minus the mean cosine with `B`;
//! * the test statistic is `Σ_{x∈X} s(x) − Σ_{y∈Y} s(y)` (sums, not means);
//! * the effect size is `(mean_X s − mean_Y s) / sd_{X∪Y} s` with a sample
//!   (n − 1) standard deviation;
//! * the p-value is one-sided (greater): the share of equal-size
//!   re-partitions of `X ∪ Y` whose statistic is at least the observed one,
//!   with add-one smoothing so it is never zero.
//!
//! Per-word associations depend only on `(w, A, B)`, so they are computed
//! once and every partition statistic is a signed sum over them.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingTable, LookupError, LookupPolicy};

/// Largest number of partitions enumerated in exact mode.
pub const EXACT_PARTITION_LIMIT: u64 = 100_000;

/// Default Monte Carlo sample count.
pub const DEFAULT_PERMUTATIONS: u64 = 10_000;

/// Norms at or below this are treated as zero.
pub const NORM_EPS: f64 = 1e-12;

/// Dispersion at or below this makes the effect size undefined.
pub const DISPERSION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CosineError {
    #[error("cosine undefined for a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeatError {
    #[error("{phrase:?}: {source}")]
    Lookup { phrase: String, source: LookupError },
    #[error("{phrase:?}: {source}")]
    Cosine { phrase: String, source: CosineError },
    #[error("association standard deviation {std_dev:e} is too small for an effect size")]
    DegenerateDispersion { std_dev: f64 },
    #[error("invalid word set: {0}")]
    InvalidSet(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, CosineError> {
    if u.len() != v.len() {
        return Err(CosineError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu <= NORM_EPS || nv <= NORM_EPS {
        return Err(CosineError::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// A labelled, duplicate-free list of phrases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSet {
    label: String,
    words: Vec<String>,
}

impl WordSet {
    pub fn new<I, S>(label: impl Into<String>, words: I) -> Result<Self, WeatError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let label = label.into();
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        if words.is_empty() {
            return Err(WeatError::InvalidSet(format!("{label}: no words")));
        }
        let mut seen = HashSet::new();
        for w in &words {
            if w.trim().is_empty() {
                return Err(WeatError::InvalidSet(format!("{label}: empty phrase")));
            }
            if !seen.insert(w.as_str()) {
                return Err(WeatError::InvalidSet(format!(
                    "{label}: duplicate phrase {w:?}"
                )));
            }
        }
        Ok(Self { label, words })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn overlaps(&self, other: &WordSet) -> Option<&str> {
        let other: HashSet<&str> = other.words.iter().map(String::as_str).collect();
        self.words
            .iter()
            .map(String::as_str)
            .find(|w| other.contains(w))
    }
}

/// How the null distribution is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Permutations {
    /// Enumerate every equal-size partition; fails when there are more than
    /// [`EXACT_PARTITION_LIMIT`].
    Exact,
    /// Sample `count` uniform partitions, deterministically from `seed`.
    MonteCarlo { count: u64, seed: u64 },
    /// Exact when feasible, otherwise Monte Carlo with `count` and `seed`.
    Auto { count: u64, seed: u64 },
}

impl Default for Permutations {
    fn default() -> Self {
        Self::Auto {
            count: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMode {
    Exact,
    MonteCarlo,
}

impl std::fmt::Display for PermutationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::MonteCarlo => "monte-carlo",
        })
    }
}

/// One WEAT instance: targets `x` (congruent with `a`) and `y`, attributes
/// `a` and `b`, evaluated against `table`.
#[derive(Debug, Clone, Copy)]
pub struct WeatQuery<'a> {
    pub x: &'a WordSet,
    pub y: &'a WordSet,
    pub a: &'a WordSet,
    pub b: &'a WordSet,
    pub table: &'a EmbeddingTable,
    pub policy: LookupPolicy,
    pub permutations: Permutations,
}

impl<'a> WeatQuery<'a> {
    pub fn new(
        x: &'a WordSet,
        y: &'a WordSet,
        a: &'a WordSet,
        b: &'a WordSet,
        table: &'a EmbeddingTable,
    ) -> Self {
        Self {
            x,
            y,
            a,
            b,
            table,
            policy: LookupPolicy::default(),
            permutations: Permutations::default(),
        }
    }

    pub fn with_policy(mut self, policy: LookupPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_permutations(mut self, permutations: Permutations) -> Self {
        self.permutations = permutations;
        self
    }

    pub fn validate(&self) -> Result<(), WeatError> {
        if self.x.len() != self.y.len() {
            return Err(WeatError::InvalidQuery(format!(
                "target sets differ in size: {} vs {}",
                self.x.len(),
                self.y.len()
            )));
        }
        if let Some(w) = self.x.overlaps(self.y) {
            return Err(WeatError::InvalidQuery(format!(
                "{w:?} is in both target sets"
            )));
        }
        if let Some(w) = self.a.overlaps(self.b) {
            return Err(WeatError::InvalidQuery(format!(
                "{w:?} is in both attribute sets"
            )));
        }
        Ok(())
    }
}

/// Per-word associations for the two target sets, in set order.
#[derive(Debug, Clone, PartialEq)]
pub struct Associations {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Associations {
    /// `Σ x − Σ y`.
    pub fn statistic(&self) -> f64 {
        self.x.iter().sum::<f64>() - self.y.iter().sum::<f64>()
    }

    /// Standardized mean difference with a sample standard deviation over
    /// the pooled values.
    pub fn effect_size(&self) -> Result<f64, WeatError> {
        let mean_x = mean(&self.x);
        let mean_y = mean(&self.y);
        let pooled: Vec<f64> = self.x.iter().chain(&self.y).copied().collect();
        let sd = sample_std_dev(&pooled);
        if sd.is_nan() || sd <= DISPERSION_EPS {
            return Err(WeatError::DegenerateDispersion { std_dev: sd });
        }
        Ok((mean_x - mean_y) / sd)
    }

    fn pooled(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (v.len() - 1) as f64).sqrt()
}

/// Attribute vectors resolved once, with norms checked.
struct AttributeVectors {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl AttributeVectors {
    fn resolve(query: &WeatQuery<'_>) -> Result<Self, WeatError> {
        Ok(Self {
            a: resolve_set(query.a, query.table, query.policy)?,
            b: resolve_set(query.b, query.table, query.policy)?,
        })
    }

    fn association(&self, phrase: &str, w: &[f64]) -> Result<f64, WeatError> {
        let mean_cos = |set: &[Vec<f64>]| -> Result<f64, WeatError> {
            let mut total = 0.0;
            for v in set {
                total += cosine(w, v).map_err(|source| WeatError::Cosine {
                    phrase: phrase.to_string(),
                    source,
                })?;
            }
            Ok(total / set.len() as f64)
        };
        Ok(mean_cos(&self.a)? - mean_cos(&self.b)?)
    }
}

fn resolve_set(
    set: &WordSet,
    table: &EmbeddingTable,
    policy: LookupPolicy,
) -> Result<Vec<Vec<f64>>, WeatError> {
    set.words()
        .iter()
        .map(|w| {
            let v = table
                .lookup_phrase(w, policy)
                .map_err(|source| WeatError::Lookup {
                    phrase: w.clone(),
                    source,
                })?;
            if norm(&v) <= NORM_EPS {
                return Err(WeatError::Cosine {
                    phrase: w.clone(),
                    source: CosineError::ZeroVector,
                });
            }
            Ok(v)
        })
        .collect()
}

/// `s(w, A, B)` for a single phrase.
pub fn association(
    phrase: &str,
    a: &WordSet,
    b: &WordSet,
    table: &EmbeddingTable,
    policy: LookupPolicy,
) -> Result<f64, WeatError> {
    let attrs = AttributeVectors {
        a: resolve_set(a, table, policy)?,
        b: resolve_set(b, table, policy)?,
    };
    let w = table
        .lookup_phrase(phrase, policy)
        .map_err(|source| WeatError::Lookup {
            phrase: phrase.to_string(),
            source,
        })?;
    attrs.association(phrase, &w)
}

/// Associations of every target word in `query`.
pub fn associations(query: &WeatQuery<'_>) -> Result<Associations, WeatError> {
    query.validate()?;
    let attrs = AttributeVectors::resolve(query)?;
    let targets = |set: &WordSet| -> Result<Vec<f64>, WeatError> {
        resolve_set(set, query.table, query.policy)?
            .iter()
            .zip(set.words())
            .map(|(v, w)| attrs.association(w, v))
            .collect()
    };
    Ok(Associations {
        x: targets(query.x)?,
        y: targets(query.y)?,
    })
}

pub fn weat_statistic(query: &WeatQuery<'_>) -> Result<f64, WeatError> {
    Ok(associations(query)?.statistic())
}

pub fn effect_size(query: &WeatQuery<'_>) -> Result<f64, WeatError> {
    associations(query)?.effect_size()
}

/// Outcome of a permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationOutcome {
    pub p_value: f64,
    pub mode: PermutationMode,
    /// Partitions evaluated (enumerated or sampled).
    pub count: u64,
    /// Partitions whose statistic reached the observed one.
    pub at_least_observed: u64,
    pub seed: Option<u64>,
}

pub fn permutation_test(query: &WeatQuery<'_>) -> Result<PermutationOutcome, WeatError> {
    let assoc = associations(query)?;
    permutation_test_associations(&assoc, query.permutations)
}

/// Permutation test on precomputed associations.
pub fn permutation_test_associations(
    assoc: &Associations,
    permutations: Permutations,
) -> Result<PermutationOutcome, WeatError> {
    if assoc.x.len() != assoc.y.len() || assoc.x.is_empty() {
        return Err(WeatError::InvalidQuery(format!(
            "permutation test needs equal non-empty target sets, got {} and {}",
            assoc.x.len(),
            assoc.y.len()
        )));
    }
    let n = assoc.x.len();
    let partitions = partition_count(n);
    let null = PartitionNull::new(assoc.pooled());
    match permutations {
        Permutations::Exact => {
            if partitions > EXACT_PARTITION_LIMIT {
                return Err(WeatError::Config(format!(
                    "exact test needs C({}, {n}) = {partitions} partitions, limit is {EXACT_PARTITION_LIMIT}",
                    2 * n
                )));
            }
            Ok(null.exact())
        }
        Permutations::MonteCarlo { count, seed } => null.monte_carlo(count, seed),
        Permutations::Auto { count, seed } => {
            if partitions <= EXACT_PARTITION_LIMIT {
                Ok(null.exact())
            } else {
                null.monte_carlo(count, seed)
            }
        }
    }
}

/// `C(2n, n)`, saturating at `u64::MAX`.
pub fn partition_count(n: usize) -> u64 {
    let mut c: u128 = 1;
    for i in 0..n as u128 {
        c = c * (2 * n as u128 - i) / (i + 1);
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

/// The null distribution over equal-size partitions of pooled associations.
///
/// Position `i < n` of the pooled vector belongs to the observed `X`. A
/// partition is a membership mask; its statistic sums in pooled index order,
/// so the value does not depend on how the partition was produced.
#[derive(Debug, Clone)]
pub struct PartitionNull {
    pooled: Vec<f64>,
    observed: f64,
    tie_tolerance: f64,
}

impl PartitionNull {
    pub fn new(pooled: Vec<f64>) -> Self {
        assert!(
            pooled.len().is_multiple_of(2),
            "pooled set must have even size"
        );
        let n = pooled.len() / 2;
        let mut mask = vec![false; pooled.len()];
        mask[..n].iter_mut().for_each(|m| *m = true);
        let observed = Self::statistic_of(&pooled, &mask);
        let scale: f64 = pooled.iter().map(|v| v.abs()).sum();
        Self {
            pooled,
            observed,
            tie_tolerance: 1e-12 * scale.max(1.0),
        }
    }

    pub fn half(&self) -> usize {
        self.pooled.len() / 2
    }

    pub fn observed(&self) -> f64 {
        self.observed
    }

    fn statistic_of(pooled: &[f64], in_x: &[bool]) -> f64 {
        let (mut sx, mut sy) = (0.0, 0.0);
        for (v, &m) in pooled.iter().zip(in_x) {
            if m {
                sx += v;
            } else {
                sy += v;
            }
        }
        sx - sy
    }

    /// Statistic of the partition given by `in_x`.
    pub fn statistic(&self, in_x: &[bool]) -> f64 {
        Self::statistic_of(&self.pooled, in_x)
    }

    /// Whether the partition's statistic reaches the observed one. Differences
    /// within rounding noise count as ties.
    pub fn reaches_observed(&self, in_x: &[bool]) -> bool {
        self.statistic(in_x) >= self.observed - self.tie_tolerance
    }

    fn exact(&self) -> PermutationOutcome {
        let n = self.half();
        let mut mask = vec![false; 2 * n];
        let mut total = 0u64;
        let mut hits = 0u64;
        for_each_combination(2 * n, n, |chosen| {
            mask.iter_mut().for_each(|m| *m = false);
            chosen.iter().for_each(|&i| mask[i] = true);
            total += 1;
            if self.reaches_observed(&mask) {
                hits += 1;
            }
        });
        PermutationOutcome {
            p_value: smoothed_p(hits, total),
            mode: PermutationMode::Exact,
            count: total,
            at_least_observed: hits,
            seed: None,
        }
    }

    fn monte_carlo(&self, count: u64, seed: u64) -> Result<PermutationOutcome, WeatError> {
        if count == 0 {
            return Err(WeatError::Config(
                "Monte Carlo permutation count must be at least 1".into(),
            ));
        }
        let hits = (0..count)
            .into_par_iter()
            .filter(|&i| self.reaches_observed(&self.sample_partition(seed, i)))
            .count() as u64;
        Ok(PermutationOutcome {
            p_value: smoothed_p(hits, count),
            mode: PermutationMode::MonteCarlo,
            count,
            at_least_observed: hits,
            seed: Some(seed),
        })
    }

    /// The `index`-th sampled partition for `seed`. Each index owns its own
    /// ChaCha stream, so samples do not depend on evaluation order.
    pub fn sample_partition(&self, seed: u64, index: u64) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let len = self.pooled.len();
        let n = self.half();
        let mut idx: Vec<usize> = (0..len).collect();
        for i in 0..n {
            let j = rng.random_range(i..len);
            idx.swap(i, j);
        }
        let mut mask = vec![false; len];
        idx[..n].iter().for_each(|&i| mask[i] = true);
        mask
    }
}

fn smoothed_p(hits: u64, total: u64) -> f64 {
    (1 + hits) as f64 / (1 + total) as f64
}

/// Calls `f` with every `k`-subset of `0..n`, in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Everything reported for one WEAT run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatResult {
    pub statistic: f64,
    pub effect_size: f64,
    pub p_value: f64,
    pub permutation_mode: PermutationMode,
    pub permutation_count: u64,
    pub seed: Option<u64>,
    pub per_word_associations: BTreeMap<String, f64>,
}

/// Statistic, effect size and permutation p-value for `query`.
pub fn run(query: &WeatQuery<'_>) -> Result<WeatResult, WeatError> {
    let assoc = associations(query)?;
    let effect_size = assoc.effect_size()?;
    let outcome = permutation_test_associations(&assoc, query.permutations)?;
    let per_word_associations = query
        .x
        .words()
        .iter()
        .zip(&assoc.x)
        .chain(query.y.words().iter().zip(&assoc.y))
        .map(|(w, &s)| (w.clone(), s))
        .collect();
    Ok(WeatResult {
        statistic: assoc.statistic(),
        effect_size,
        p_value: outcome.p_value,
        permutation_mode: outcome.mode,
        permutation_count: outcome.count,
        seed: outcome.seed,
        per_word_associations,
    })
}
