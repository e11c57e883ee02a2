//! Property-based invariants across the selection primitives.

use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

use kitalloc::model::binary_entropy;
use kitalloc::online::{compute_alphas, compute_slot_caps, uniform_alphas};
use kitalloc::pooling::{make_pools, resolve_pools, PoolingStrategy};
use kitalloc::population::{DailyCohort, Gender, Individual, InfectionOracle};
use kitalloc::sampling::{top_k_by_score, weighted_sample_without_replacement, WeightedCandidate};
use kitalloc::strategy::bucket::{select_bucket, BucketBudget};

fn candidates(weights: &[f64]) -> Vec<WeightedCandidate> {
    weights
        .iter()
        .enumerate()
        .map(|(i, &w)| WeightedCandidate::new(i as u64, w))
        .collect()
}

proptest! {
    #[test]
    fn sampling_returns_distinct_positive_weight_ids(
        weights in prop::collection::vec(0.0f64..10.0, 1..40),
        k in 0usize..50,
        seed in any::<u64>(),
    ) {
        let cands = candidates(&weights);
        let picked = weighted_sample_without_replacement(&cands, k, seed).unwrap();
        let unique: BTreeSet<u64> = picked.iter().copied().collect();
        prop_assert_eq!(unique.len(), picked.len(), "duplicates in draw");
        let positive = weights.iter().filter(|&&w| w > 0.0).count();
        prop_assert_eq!(picked.len(), k.min(positive));
        for id in picked {
            prop_assert!(weights[id as usize] > 0.0, "zero-weight id {} selected", id);
        }
    }

    #[test]
    fn sampling_is_scale_invariant(
        weights in prop::collection::vec(0.01f64..10.0, 1..30),
        scale in 0.001f64..1000.0,
        k in 1usize..10,
        seed in any::<u64>(),
    ) {
        let base = candidates(&weights);
        let scaled: Vec<WeightedCandidate> = base
            .iter()
            .map(|c| WeightedCandidate::new(c.id, c.weight * scale))
            .collect();
        let a = weighted_sample_without_replacement(&base, k, seed).unwrap();
        let b = weighted_sample_without_replacement(&scaled, k, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn top_k_matches_sort_oracle(
        weights in prop::collection::vec(-5.0f64..5.0, 1..30),
        k in 0usize..35,
    ) {
        let cands = candidates(&weights);
        let picked = top_k_by_score(&cands, k);
        let mut oracle: Vec<(f64, u64)> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (w, i as u64))
            .collect();
        oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let expect: Vec<u64> = oracle.into_iter().take(k).map(|(_, id)| id).collect();
        prop_assert_eq!(picked, expect);
    }

    #[test]
    fn entropy_is_symmetric_and_bounded(p in 0.0f64..=1.0) {
        let h = binary_entropy(p);
        prop_assert!((h - binary_entropy(1.0 - p)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn alphas_form_probability_vector(counts in prop::collection::vec(0usize..500, 6)) {
        let cohort = cohort_with_slot_counts(&counts);
        let alphas = match &cohort {
            Some(c) => compute_alphas(Some(c)),
            None => uniform_alphas(),
        };
        prop_assert!((alphas.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(alphas.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }

    #[test]
    fn slot_caps_never_exceed_budget(
        counts in prop::collection::vec(1usize..500, 6),
        budget in 0usize..200,
    ) {
        let cohort = cohort_with_slot_counts(&counts).unwrap();
        let caps = compute_slot_caps(&compute_alphas(Some(&cohort)), budget);
        prop_assert!(caps.iter().sum::<usize>() <= budget);
    }

    #[test]
    fn pool_resolution_recovers_truth(
        infected in prop::collection::vec(any::<bool>(), 1..24),
        pool_size in 1usize..8,
        seed in any::<u64>(),
    ) {
        let labels: Vec<(u64, bool)> = infected
            .iter()
            .enumerate()
            .map(|(i, &y)| (i as u64, y))
            .collect();
        let mut oracle = InfectionOracle::from_labels(labels.iter().copied());
        oracle.authorize_many(labels.iter().map(|&(id, _)| id));
        let ids: Vec<u64> = labels.iter().map(|&(id, _)| id).collect();
        for strategy in [PoolingStrategy::Dorfman, PoolingStrategy::BinarySplit] {
            let plan = make_pools(&ids, pool_size, strategy, seed).unwrap();
            let union: BTreeSet<u64> = plan.pools.iter().flatten().copied().collect();
            prop_assert_eq!(union.len(), ids.len(), "pools must partition the set");
            let (resolved, tests) = resolve_pools(&plan, &oracle).unwrap();
            prop_assert!(tests >= plan.pools.len() as u64);
            for (id, y) in &labels {
                prop_assert_eq!(resolved[id], u8::from(*y));
            }
        }
    }

    #[test]
    fn bucket_selection_respects_budget(
        flags in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60),
        budget in 0usize..30,
        seed in any::<u64>(),
    ) {
        let members: Vec<Individual> = flags
            .iter()
            .enumerate()
            .map(|(i, &(s, r))| {
                Individual::new(i as u64, 30, Gender::Male, "national", s, r, false)
            })
            .collect();
        let ids: BTreeSet<u64> = members.iter().map(|m| m.id).collect();
        let slots: BTreeMap<u64, u8> = members.iter().map(|m| (m.id, 0)).collect();
        let cohort = DailyCohort::new(1, members, slots).unwrap();
        let bucket_budget = BucketBudget::from_split(&[0.4, 0.3, 0.2, 0.1], budget).unwrap();
        let result = select_bucket(&cohort, budget, &bucket_budget, false, seed).unwrap();
        prop_assert!(result.len() <= budget);
        let picked: BTreeSet<u64> = result.ids().into_iter().collect();
        prop_assert_eq!(picked.len(), result.len(), "duplicate selections");
        prop_assert!(picked.is_subset(&ids));
    }
}

fn cohort_with_slot_counts(counts: &[usize]) -> Option<DailyCohort> {
    let mut members = Vec::new();
    let mut slots = BTreeMap::new();
    let mut id = 0u64;
    for (slot, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            members.push(Individual::new(
                id, 30, Gender::Male, "national", false, false, false,
            ));
            slots.insert(id, slot as u8);
            id += 1;
        }
    }
    if members.is_empty() {
        return None;
    }
    Some(DailyCohort::new(1, members, slots).unwrap())
}
