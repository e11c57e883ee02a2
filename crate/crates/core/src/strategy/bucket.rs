//! Randomization across four disjoint buckets defined by the symptomatic and
//! risky-history flags, with per-bucket budgets and optional mandatory
//! testing of the critical group.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{DailyCohort, Individual};
use crate::sampling::{weighted_sample_without_replacement, WeightedCandidate};
use crate::seed::derive_seed;
use crate::strategy::{SelectedRecord, SelectionResult, StrategyKind};

/// The four disjoint groups; every individual falls in exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bucket {
    /// Symptomatic with risky contact or travel history (critical group).
    SymptomaticRisky,
    AsymptomaticRisky,
    SymptomaticNotRisky,
    AsymptomaticNotRisky,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [
        Bucket::SymptomaticRisky,
        Bucket::AsymptomaticRisky,
        Bucket::SymptomaticNotRisky,
        Bucket::AsymptomaticNotRisky,
    ];

    pub fn index(self) -> usize {
        match self {
            Bucket::SymptomaticRisky => 0,
            Bucket::AsymptomaticRisky => 1,
            Bucket::SymptomaticNotRisky => 2,
            Bucket::AsymptomaticNotRisky => 3,
        }
    }
}

pub fn assign_bucket(ind: &Individual) -> Bucket {
    match (ind.symptomatic, ind.risky_history) {
        (true, true) => Bucket::SymptomaticRisky,
        (false, true) => Bucket::AsymptomaticRisky,
        (true, false) => Bucket::SymptomaticNotRisky,
        (false, false) => Bucket::AsymptomaticNotRisky,
    }
}

/// Absolute per-bucket kit counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketBudget {
    pub counts: [usize; 4],
}

impl BucketBudget {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Largest-remainder rounding of fractional splits onto a total budget.
    pub fn from_split(split: &[f64; 4], total: usize) -> Result<Self> {
        let sum: f64 = split.iter().sum();
        if split.iter().any(|&f| f < 0.0) || sum <= 0.0 {
            return Err(Error::InvalidArgument(
                "bucket split fractions must be non-negative with positive sum".into(),
            ));
        }
        Ok(Self {
            counts: largest_remainder(split, total),
        })
    }
}

/// Apportion `total` units proportionally to `weights` by largest remainder,
/// ties broken toward the smaller index.
fn largest_remainder(weights: &[f64; 4], total: usize) -> [usize; 4] {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 || total == 0 {
        return [0; 4];
    }
    let quotas: [f64; 4] = std::array::from_fn(|i| weights[i] / sum * total as f64);
    let mut counts: [usize; 4] = std::array::from_fn(|i| quotas[i].floor() as usize);
    let mut assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut i = 0;
    while assigned < total {
        counts[order[i % 4]] += 1;
        assigned += 1;
        i += 1;
    }
    counts
}

/// Select up to `budget_total` individuals by per-bucket uniform sampling.
///
/// With `mandatory_x1`, the whole critical group is selected first and the
/// remaining budget is re-split across buckets with the original fractions;
/// any bucket that cannot absorb its share has the surplus redistributed
/// proportionally to the remaining buckets' budgets.
pub fn select_bucket(
    cohort: &DailyCohort,
    budget_total: usize,
    budget: &BucketBudget,
    mandatory_x1: bool,
    seed: u64,
) -> Result<SelectionResult> {
    if budget.total() != budget_total {
        return Err(Error::InvalidArgument(format!(
            "bucket budgets sum to {} but the day's budget is {budget_total}",
            budget.total()
        )));
    }

    let mut by_bucket: [Vec<u64>; 4] = Default::default();
    for m in &cohort.members {
        by_bucket[assign_bucket(m).index()].push(m.id);
    }

    let mut result = SelectionResult::new(cohort.day, StrategyKind::Bucket);
    let mut remaining_total = budget_total;
    let mut avail: [usize; 4] = std::array::from_fn(|j| by_bucket[j].len());
    let mut weights: [f64; 4] = std::array::from_fn(|j| budget.counts[j] as f64);

    if mandatory_x1 {
        let critical = &by_bucket[0];
        for &id in critical {
            result.selected.push(SelectedRecord {
                id,
                score: 1.0,
                weight: 1.0,
                propensity: 1.0,
                budgeted_propensity: false,
            });
        }
        result.mandatory_overflow = critical.len() > budget_total;
        remaining_total = budget_total.saturating_sub(critical.len());
        avail[0] = 0;
        // re-split keeps the original fractions; the critical bucket's share
        // flows to the others through surplus redistribution below
        weights = std::array::from_fn(|j| budget.counts[j] as f64);
    }

    // Allocate the remaining budget proportionally, pushing surplus from
    // exhausted buckets to the others until nothing can move.
    let mut alloc = [0usize; 4];
    loop {
        let allocated: usize = alloc.iter().sum();
        let remaining = remaining_total - allocated;
        let active: Vec<usize> = (0..4)
            .filter(|&j| alloc[j] < avail[j] && weights[j] > 0.0)
            .collect();
        if remaining == 0 || active.is_empty() {
            break;
        }
        let mut active_weights = [0.0f64; 4];
        for &j in &active {
            active_weights[j] = weights[j];
        }
        let give = largest_remainder(&active_weights, remaining);
        for &j in &active {
            alloc[j] = (alloc[j] + give[j]).min(avail[j]);
        }
    }

    for j in 0..4 {
        if alloc[j] == 0 {
            continue;
        }
        let pool: Vec<WeightedCandidate> = by_bucket[j]
            .iter()
            .map(|&id| WeightedCandidate::new(id, 1.0))
            .collect();
        let chosen = weighted_sample_without_replacement(
            &pool,
            alloc[j],
            derive_seed(seed, cohort.day, Bucket::ALL[j].label()),
        )?;
        let inclusion = alloc[j] as f64 / avail[j] as f64;
        for id in chosen {
            result.selected.push(SelectedRecord {
                id,
                score: weights[j],
                weight: 1.0,
                propensity: inclusion,
                budgeted_propensity: false,
            });
        }
    }

    Ok(result)
}

impl Bucket {
    fn label(self) -> &'static str {
        match self {
            Bucket::SymptomaticRisky => "bucket-x1",
            Bucket::AsymptomaticRisky => "bucket-x2",
            Bucket::SymptomaticNotRisky => "bucket-x3",
            Bucket::AsymptomaticNotRisky => "bucket-x4",
        }
    }
}
