//! Weighted random sampling primitives shared by all selection strategies.
//!
//! Sampling without replacement uses exponential keys (Efraimidis–Spirakis):
//! each candidate with weight `w > 0` draws `key = Exp(1) / w` and the `k`
//! smallest keys win. For `k = 1` this selects candidate `j` with probability
//! exactly `w_j / Σw`. For `k > 1` inclusion probabilities are not exactly
//! proportional to weights, but heavier candidates are never less likely to
//! be included than lighter ones, and the draw is one pass in O(n log k).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// A candidate for weighted selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedCandidate {
    pub id: u64,
    pub weight: f64,
}

impl WeightedCandidate {
    pub fn new(id: u64, weight: f64) -> Self {
        Self { id, weight }
    }
}

// Max-heap entry ordered by key, ties broken toward larger id so the heap
// evicts the worst (largest key, largest id) first.
#[derive(PartialEq)]
struct HeapEntry {
    key: f64,
    id: u64,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.id.cmp(&other.id))
    }
}

/// Draw up to `k` distinct ids, heavier weights more likely first.
///
/// Returns `min(k, #positive-weight candidates)` ids. Zero-weight candidates
/// are legal and never selected. Negative weights are an error.
pub fn weighted_sample_without_replacement(
    candidates: &[WeightedCandidate],
    k: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    if let Some(bad) = candidates.iter().find(|c| c.weight < 0.0 || !c.weight.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "candidate {} has invalid weight {}",
            bad.id, bad.weight
        )));
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k + 1);
    for c in candidates {
        // One uniform draw per candidate keeps the stream aligned with the
        // input order regardless of weights.
        let u: f64 = rng.random();
        if c.weight <= 0.0 {
            continue;
        }
        let key = -(1.0 - u).ln() / c.weight;
        if heap.len() < k {
            heap.push(HeapEntry { key, id: c.id });
        } else if let Some(top) = heap.peek() {
            if (key, c.id) < (top.key, top.id) {
                heap.pop();
                heap.push(HeapEntry { key, id: c.id });
            }
        }
    }

    let mut picked: Vec<(f64, u64)> = heap.into_iter().map(|e| (e.key, e.id)).collect();
    picked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(picked.into_iter().map(|(_, id)| id).collect())
}

/// Ids of the `k` largest weights, ties broken toward the smaller id.
pub fn top_k_by_score(candidates: &[WeightedCandidate], k: usize) -> Vec<u64> {
    let mut sorted: Vec<&WeightedCandidate> = candidates.iter().collect();
    sorted.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.id.cmp(&b.id)));
    sorted.into_iter().take(k).map(|c| c.id).collect()
}
