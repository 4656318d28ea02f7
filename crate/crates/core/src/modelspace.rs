//! Model space under a sparsity bound: enumeration, posterior model
//! probabilities under a uniform prior on `{J : |J| <= q}`, and a stochastic
//! greedy walk for spaces too large to enumerate.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::glm::Dataset;
use crate::numerics::RandomStream;
use crate::posterior::score_model;
use crate::priors::LogPrior;

/// Default cap on the number of enumerated models.
pub const DEFAULT_MODEL_CAP: u128 = 1_000_000;

/// Sorted set of zero-based predictor columns.
///
/// Ordering is by size first, then lexicographic, which is also the order
/// [`enumerate_models`] emits. Displayed and serialized one-based, so `{1,3}`
/// names the first and third predictor columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ModelIndex(Vec<usize>);

impl ModelIndex {
    pub fn empty() -> Self {
        ModelIndex(Vec::new())
    }

    /// Sorts and checks for duplicates.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "duplicate column in model {indices:?}"
            )));
        }
        Ok(ModelIndex(indices))
    }

    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::InvalidInput(
                "one-based model indices must be at least 1".into(),
            ));
        }
        Self::new(indices.iter().map(|i| i - 1).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, col: usize) -> bool {
        self.0.binary_search(&col).is_ok()
    }

    pub fn is_superset_of(&self, other: &ModelIndex) -> bool {
        other.0.iter().all(|c| self.contains(*c))
    }

    pub fn is_strict_superset_of(&self, other: &ModelIndex) -> bool {
        self.len() > other.len() && self.is_superset_of(other)
    }

    pub fn with(&self, col: usize) -> ModelIndex {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&col) {
            v.insert(pos, col);
        }
        ModelIndex(v)
    }

    pub fn without(&self, col: usize) -> ModelIndex {
        ModelIndex(self.0.iter().copied().filter(|&c| c != col).collect())
    }

    /// Largest column index plus one, or 0 for the empty model.
    pub fn min_columns(&self) -> usize {
        self.0.last().map_or(0, |c| c + 1)
    }
}

impl PartialOrd for ModelIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ModelIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for ModelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", c + 1)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for ModelIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        ModelIndex::from_one_based(&v).map_err(serde::de::Error::custom)
    }
}

/// `Σ_{k<=q} C(p, k)`, saturating once it exceeds `cap`.
pub fn count_models(p: usize, q: usize, cap: u128) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for k in 0..=q.min(p) {
        total += c;
        if total > cap {
            return total;
        }
        c = c * (p - k) as u128 / (k + 1) as u128;
    }
    total
}

/// Every model of size `0..=q` over `p` columns in canonical order: by size,
/// then lexicographic. Includes the empty model.
pub fn enumerate_models(p: usize, q: usize) -> Result<Vec<ModelIndex>> {
    enumerate_models_capped(p, q, DEFAULT_MODEL_CAP)
}

pub fn enumerate_models_capped(p: usize, q: usize, cap: u128) -> Result<Vec<ModelIndex>> {
    if q > p {
        return Err(Error::InvalidInput(format!(
            "sparsity bound q = {q} exceeds p = {p}"
        )));
    }
    let count = count_models(p, q, cap);
    if count > cap {
        return Err(Error::TooManyModels { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    for k in 0..=q {
        let mut comb: Vec<usize> = (0..k).collect();
        loop {
            out.push(ModelIndex(comb.clone()));
            // advance to the next k-combination in lexicographic order
            let mut i = k;
            while i > 0 && comb[i - 1] == p - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            comb[i - 1] += 1;
            for j in i..k {
                comb[j] = comb[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelEntry {
    pub model: ModelIndex,
    pub log_marginal: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelPosterior {
    pub entries: Vec<ModelEntry>,
    /// Largest model size among the entries.
    pub q: usize,
    pub truth: Option<ModelIndex>,
    /// Probability of the truth, when a truth was supplied and evaluated.
    pub truth_probability: Option<f64>,
    /// Mass of strict supersets of the truth.
    pub mass_a: f64,
    /// Mass of models missing at least one true column.
    pub mass_b: f64,
}

impl ModelPosterior {
    /// Highest-probability model; ties go to the smallest model in canonical
    /// order.
    pub fn top(&self) -> &ModelEntry {
        let mut best = &self.entries[0];
        for e in &self.entries[1..] {
            if e.probability > best.probability
                || (e.probability == best.probability && e.model < best.model)
            {
                best = e;
            }
        }
        best
    }

    pub fn probability_of(&self, model: &ModelIndex) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| &e.model == model)
            .map(|e| e.probability)
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }
}

/// Normalizes `exp(log_marginal)` over the given models by log-sum-exp.
/// Entries with a `-∞` marginal get probability zero.
pub fn posterior_probs(
    entries: Vec<(ModelIndex, f64)>,
    truth: Option<&ModelIndex>,
) -> Result<ModelPosterior> {
    if entries.is_empty() {
        return Err(Error::InvalidInput("no models to normalize".into()));
    }
    let mut seen = std::collections::HashSet::with_capacity(entries.len());
    for (m, lm) in &entries {
        if !seen.insert(m) {
            return Err(Error::DuplicateModel(m.to_string()));
        }
        if lm.is_nan() || *lm == f64::INFINITY {
            return Err(Error::InvalidInput(format!("log marginal of {m} is {lm}")));
        }
    }
    let max = entries
        .iter()
        .map(|(_, lm)| *lm)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(
            "every model has a -inf log marginal".into(),
        ));
    }
    // Sum over the canonical order so the result does not depend on input
    // order.
    let mut shifted: Vec<f64> = entries.iter().map(|(_, lm)| (lm - max).exp()).collect();
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| entries[a].0.cmp(&entries[b].0));
    let z: f64 = order.iter().map(|&i| shifted[i]).sum();
    for v in &mut shifted {
        *v /= z;
    }
    let q = entries.iter().map(|(m, _)| m.len()).max().unwrap_or(0);
    let mut mass_a = 0.0;
    let mut mass_b = 0.0;
    let mut truth_probability = None;
    if let Some(t) = truth {
        for &i in &order {
            let m = &entries[i].0;
            if m == t {
                truth_probability = Some(shifted[i]);
            } else if m.is_superset_of(t) {
                mass_a += shifted[i];
            } else {
                mass_b += shifted[i];
            }
        }
    }
    let entries = entries
        .into_iter()
        .zip(shifted)
        .map(|((model, log_marginal), probability)| ModelEntry {
            model,
            log_marginal,
            probability,
        })
        .collect();
    Ok(ModelPosterior {
        entries,
        q,
        truth: truth.cloned(),
        truth_probability,
        mass_a,
        mass_b,
    })
}

/// Splits `models` into strict supersets of `truth` (A) and models that miss
/// some true column (B). The truth itself is in neither.
pub fn partition_ab(models: &[ModelIndex], truth: &ModelIndex) -> (Vec<ModelIndex>, Vec<ModelIndex>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for m in models {
        if m == truth {
            continue;
        }
        if m.is_superset_of(truth) {
            a.push(m.clone());
        } else {
            b.push(m.clone());
        }
    }
    (a, b)
}

/// Laplace log marginals for `models`, evaluated with `exec`.
pub fn score_models<P: LogPrior + ?Sized>(
    d: &Dataset,
    prior: &P,
    models: &[ModelIndex],
    exec: Execution,
) -> Vec<f64> {
    exec.map(models, |m| score_model(d, m, prior))
}

/// Enumerates every model with `|J| <= q`, scores it and normalizes.
pub fn enumerate_posterior<P: LogPrior + ?Sized>(
    d: &Dataset,
    prior: &P,
    q: usize,
    truth: Option<&ModelIndex>,
    exec: Execution,
) -> Result<ModelPosterior> {
    let models = enumerate_models(d.p(), q)?;
    let scores = score_models(d, prior, &models, exec);
    posterior_probs(models.into_iter().zip(scores).collect(), truth)
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Maximum number of model evaluations beyond the empty model.
    pub budget: usize,
    /// Probability of moving to the best neighbour rather than a random one.
    pub greedy_prob: f64,
    /// Stop after this many consecutive steps whose best neighbour does not
    /// beat the best model seen so far.
    pub patience: usize,
}

impl SearchOptions {
    pub fn with_budget(budget: usize) -> Self {
        SearchOptions {
            budget,
            greedy_prob: 0.9,
            patience: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Probabilities renormalized over the visited models.
    pub visited: ModelPosterior,
    pub top: ModelIndex,
    pub evaluations: usize,
    pub steps: usize,
}

/// Stochastic greedy walk over add/delete neighbours starting from the empty
/// model.
///
/// Each step scores the unseen single-addition (when `|J| < q`) and
/// single-deletion neighbours, then moves to the best scored neighbour with
/// probability `greedy_prob` or to a uniformly chosen scored neighbour
/// otherwise. The draw for step `s` comes from `stream.derive(s)`. Every
/// scored model is cached and never rescored.
pub fn greedy_search<P: LogPrior + ?Sized>(
    d: &Dataset,
    prior: &P,
    q: usize,
    opts: SearchOptions,
    stream: &RandomStream,
    truth: Option<&ModelIndex>,
    exec: Execution,
) -> Result<SearchResult> {
    let p = d.p();
    if q > p {
        return Err(Error::InvalidInput(format!(
            "sparsity bound q = {q} exceeds p = {p}"
        )));
    }
    let mut cache: HashMap<ModelIndex, f64> = HashMap::new();
    let mut visited_order: Vec<ModelIndex> = Vec::new();
    let empty = ModelIndex::empty();
    let empty_score = score_model(d, &empty, prior);
    cache.insert(empty.clone(), empty_score);
    visited_order.push(empty.clone());

    let mut current = empty;
    let mut best = empty_score;
    let mut stall = 0;
    let mut evaluations = 0;
    let mut steps = 0;
    while evaluations < opts.budget {
        let mut neighbours = Vec::new();
        if current.len() < q {
            neighbours.extend((0..p).filter(|&c| !current.contains(c)).map(|c| current.with(c)));
        }
        neighbours.extend(current.indices().iter().map(|&c| current.without(c)));
        if neighbours.is_empty() {
            break;
        }
        let fresh: Vec<ModelIndex> = neighbours
            .iter()
            .filter(|m| !cache.contains_key(*m))
            .take(opts.budget - evaluations)
            .cloned()
            .collect();
        let scores = score_models(d, prior, &fresh, exec);
        evaluations += fresh.len();
        for (m, s) in fresh.into_iter().zip(scores) {
            visited_order.push(m.clone());
            cache.insert(m, s);
        }
        let scored: Vec<(&ModelIndex, f64)> = neighbours
            .iter()
            .filter_map(|m| cache.get(m).map(|&s| (m, s)))
            .collect();
        if scored.is_empty() {
            break;
        }
        let (best_nb, best_nb_score) = scored
            .iter()
            .copied()
            .reduce(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
            .expect("scored is nonempty");
        if best_nb_score > best {
            best = best_nb_score;
            stall = 0;
        } else {
            stall += 1;
        }
        let mut draw = stream.derive(steps as u64);
        current = if draw.uniform() < opts.greedy_prob {
            best_nb.clone()
        } else {
            scored[draw.index(scored.len())].0.clone()
        };
        steps += 1;
        if stall >= opts.patience {
            break;
        }
    }

    let entries = visited_order
        .into_iter()
        .map(|m| {
            let s = cache[&m];
            (m, s)
        })
        .collect();
    let visited = posterior_probs(entries, truth)?;
    let top = visited.top().model.clone();
    Ok(SearchResult {
        visited,
        top,
        evaluations,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: &[usize]) -> ModelIndex {
        ModelIndex::from_one_based(v).unwrap()
    }

    #[test]
    fn enumeration_counts_and_order() {
        let models = enumerate_models(3, 2).unwrap();
        assert_eq!(
            models,
            vec![m(&[]), m(&[1]), m(&[2]), m(&[3]), m(&[1, 2]), m(&[1, 3]), m(&[2, 3])]
        );
        assert_eq!(enumerate_models(3, 3).unwrap().len(), 8);
        assert_eq!(enumerate_models(5, 0).unwrap(), vec![ModelIndex::empty()]);
        assert_eq!(enumerate_models(30, 3).unwrap().len(), 1 + 30 + 435 + 4060);
        assert!(enumerate_models(3, 4).is_err());
        assert!(matches!(
            enumerate_models(1000, 3),
            Err(Error::TooManyModels { .. })
        ));
        let sorted = {
            let mut v = enumerate_models(7, 4).unwrap();
            v.sort();
            v
        };
        assert_eq!(sorted, enumerate_models(7, 4).unwrap());
    }

    #[test]
    fn probabilities_from_log_marginals() {
        let post = posterior_probs(vec![(m(&[1]), 0.3), (m(&[2]), 0.3)], None).unwrap();
        assert_eq!(post.entries[0].probability, 0.5);
        let post = posterior_probs(vec![(m(&[1]), 0.0), (m(&[2]), 3f64.ln())], None).unwrap();
        assert!((post.entries[0].probability - 0.25).abs() < 1e-15);
        assert!((post.entries[1].probability - 0.75).abs() < 1e-15);
        assert_eq!(post.top().model, m(&[2]));
    }

    #[test]
    fn shift_invariance() {
        let base = vec![(m(&[]), -3.0), (m(&[1]), 1.5), (m(&[2]), 0.25), (m(&[1, 2]), -700.0)];
        let a = posterior_probs(base.clone(), None).unwrap();
        let b = posterior_probs(base.into_iter().map(|(k, v)| (k, v + 812.5)).collect(), None).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((x.probability - y.probability).abs() < 1e-14);
        }
    }

    #[test]
    fn neg_inf_and_duplicates() {
        let post = posterior_probs(vec![(m(&[1]), f64::NEG_INFINITY), (m(&[2]), -5.0)], None).unwrap();
        assert_eq!(post.entries[0].probability, 0.0);
        assert_eq!(post.entries[1].probability, 1.0);
        assert!(matches!(
            posterior_probs(vec![(m(&[1]), 0.0), (m(&[1]), 1.0)], None),
            Err(Error::DuplicateModel(_))
        ));
        assert!(posterior_probs(vec![], None).is_err());
    }

    #[test]
    fn truth_masses() {
        let models = enumerate_models(3, 2).unwrap();
        let entries: Vec<_> = models.iter().cloned().zip([0.0, 2.0, -1.0, 0.5, 1.0, 1.5, -2.0]).collect();
        let post = posterior_probs(entries, Some(&m(&[1]))).unwrap();
        let pt = post.truth_probability.unwrap();
        assert!((pt + post.mass_a + post.mass_b - 1.0).abs() < 1e-12);
        let expected_a = post.probability_of(&m(&[1, 2])).unwrap() + post.probability_of(&m(&[1, 3])).unwrap();
        assert!((post.mass_a - expected_a).abs() < 1e-15);
    }

    #[test]
    fn partitions() {
        let models = enumerate_models(3, 2).unwrap();
        let (a, b) = partition_ab(&models, &m(&[1]));
        assert_eq!(a, vec![m(&[1, 2]), m(&[1, 3])]);
        assert_eq!(b, vec![m(&[]), m(&[2]), m(&[3]), m(&[2, 3])]);
        let (a, b) = partition_ab(&models, &ModelIndex::empty());
        assert_eq!(a.len(), 6);
        assert!(b.is_empty());
        let (a, _) = partition_ab(&models, &m(&[2, 3]));
        assert!(a.is_empty());
    }

    #[test]
    fn model_index_basics() {
        let j = ModelIndex::new(vec![4, 1]).unwrap();
        assert_eq!(j.indices(), &[1, 4]);
        assert_eq!(j.to_string(), "{2,5}");
        assert!(ModelIndex::new(vec![1, 1]).is_err());
        assert!(ModelIndex::from_one_based(&[0]).is_err());
        assert_eq!(j.with(2).indices(), &[1, 2, 4]);
        assert_eq!(j.without(1).indices(), &[4]);
        assert!(j.with(2).is_strict_superset_of(&j));
        assert!(!j.is_strict_superset_of(&j));
        let mut v = vec![m(&[1, 2]), m(&[3]), ModelIndex::empty(), m(&[1])];
        v.sort();
        assert_eq!(v, vec![ModelIndex::empty(), m(&[1]), m(&[3]), m(&[1, 2])]);
    }
}
