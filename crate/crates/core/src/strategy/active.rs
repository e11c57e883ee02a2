//! Active-learning selection: uncertainty sampling on the current model's
//! predictive entropy, and disagreement sampling over a bootstrap committee.
//! Both are stochastic (weighted draws, not top-k) so an early biased model
//! cannot lock the selection onto one region of the feature space.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{binary_entropy, utility, Encoder, LabeledObservation, RiskModel, Utility};
use crate::population::DailyCohort;
use crate::sampling::{weighted_sample_without_replacement, WeightedCandidate};
use crate::seed::derive_seed;
use crate::strategy::{clamp_propensity, SelectedRecord, SelectionResult, StrategyKind};

const COMMITTEE_EPOCHS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveConfig {
    pub committee_size: usize,
    /// Smoothing floor added to every disagreement score.
    pub lambda_d: f64,
    /// Optional multiplicative utility factor on the informativeness score.
    pub utility: Option<Utility>,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            committee_size: 10,
            lambda_d: 1e-3,
            utility: None,
        }
    }
}

/// Models trained on bootstrap resamples of the labeled pool; the spread of
/// their predictions stands in for hypothesis-class disagreement.
#[derive(Debug, Clone, PartialEq)]
pub struct Committee {
    pub members: Vec<RiskModel>,
}

impl Committee {
    /// Population variance of member predictions for an encoded context.
    pub fn disagreement(&self, x: &[f64]) -> f64 {
        let n = self.members.len() as f64;
        let preds: Vec<f64> = self.members.iter().map(|m| m.predict_encoded(x)).collect();
        let mean = preds.iter().sum::<f64>() / n;
        preds.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n
    }

    pub fn mean_prediction(&self, x: &[f64]) -> f64 {
        self.members
            .iter()
            .map(|m| m.predict_encoded(x))
            .sum::<f64>()
            / self.members.len() as f64
    }
}

/// Train `m` logistic models on with-replacement resamples of the pool.
pub fn retrain_committee(
    pool: &[LabeledObservation],
    m: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<Committee> {
    let labeled: Vec<(&[f64], u8)> = pool
        .iter()
        .filter_map(|o| o.label.map(|y| (o.features.as_slice(), y)))
        .collect();
    if labeled.is_empty() {
        return Err(Error::InvalidArgument(
            "committee needs a non-empty labeled pool".into(),
        ));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(
            "committee needs at least 2 members".into(),
        ));
    }
    let dim = labeled[0].0.len();
    let mut members = Vec::with_capacity(m);
    for k in 0..m {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u32, "committee-member"));
        let resample: Vec<(&[f64], u8, f64)> = (0..labeled.len())
            .map(|_| {
                let (x, y) = labeled[rng.random_range(0..labeled.len())];
                (x, y, 1.0)
            })
            .collect();
        let mut model = RiskModel::new(dim, learning_rate);
        for epoch in 0..COMMITTEE_EPOCHS {
            model = model.update_weighted(
                &resample,
                derive_seed(seed, k as u32, &format!("epoch-{epoch}")),
            );
        }
        members.push(model);
    }
    Ok(Committee { members })
}

/// Weighted draw with the model's predictive entropy as the score.
pub fn select_uncertainty(
    model: &RiskModel,
    enc: &Encoder,
    cohort: &DailyCohort,
    budget: usize,
    utility_factor: Option<Utility>,
    seed: u64,
) -> Result<SelectionResult> {
    let scored: Vec<(u64, f64)> = cohort
        .members
        .iter()
        .map(|ind| {
            let mut s = binary_entropy(model.predict(enc, ind));
            if let Some(mode) = utility_factor {
                s *= utility(mode, model, enc, ind);
            }
            (ind.id, s)
        })
        .collect();
    sample_selection(cohort, scored, budget, StrategyKind::ActiveUncertainty, seed)
}

/// Weighted draw with the committee's prediction variance (plus the
/// smoothing floor) as the score.
pub fn select_disagreement(
    committee: &Committee,
    enc: &Encoder,
    cohort: &DailyCohort,
    budget: usize,
    cfg: &ActiveConfig,
    seed: u64,
) -> Result<SelectionResult> {
    if committee.members.len() < 2 {
        return Err(Error::InvalidArgument(
            "committee needs at least 2 members".into(),
        ));
    }
    let scored: Vec<(u64, f64)> = cohort
        .members
        .iter()
        .map(|ind| {
            let x = enc.encode(ind);
            let mut s = committee.disagreement(&x) + cfg.lambda_d;
            if let Some(mode) = cfg.utility {
                s *= utility(mode, &committee.members[0], enc, ind);
            }
            (ind.id, s)
        })
        .collect();
    sample_selection(
        cohort,
        scored,
        budget,
        StrategyKind::ActiveDisagreement,
        seed,
    )
}

fn sample_selection(
    cohort: &DailyCohort,
    scored: Vec<(u64, f64)>,
    budget: usize,
    strategy: StrategyKind,
    seed: u64,
) -> Result<SelectionResult> {
    let candidates: Vec<WeightedCandidate> = scored
        .iter()
        .map(|&(id, s)| WeightedCandidate::new(id, s))
        .collect();
    let total: f64 = candidates.iter().map(|c| c.weight).sum();
    let chosen = weighted_sample_without_replacement(&candidates, budget, seed)?;
    let score_of: BTreeMap<u64, f64> = scored.into_iter().collect();

    let mut result = SelectionResult::new(cohort.day, strategy);
    for id in chosen {
        let s = score_of[&id];
        let (propensity, budgeted) = if budget == 1 {
            (s / total, false)
        } else {
            (clamp_propensity(budget as f64 * s / total), true)
        };
        result.selected.push(SelectedRecord {
            id,
            score: s,
            weight: s,
            propensity,
            budgeted_propensity: budgeted,
        });
    }
    Ok(result)
}
