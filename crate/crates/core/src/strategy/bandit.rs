//! Budgeted delayed contextual bandit: a daily update-predict-select loop
//! over two actions (test / don't test) with one-day-delayed labels, plus
//! inverse-propensity and doubly robust off-policy value estimators.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
pub use crate::model::LabeledObservation;
use crate::model::{Encoder, RiskModel};
use crate::population::DailyCohort;
use crate::sampling::{weighted_sample_without_replacement, WeightedCandidate};
use crate::strategy::{clamp_propensity, SelectedRecord, SelectionResult, StrategyKind};

/// Rewards for the test action. Not testing is worth 0 for either label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    pub reward_true_positive: f64,
    pub cost_false_positive: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            reward_true_positive: 1.0,
            cost_false_positive: -0.1,
        }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reward_true_positive <= 0.0 {
            return Err(Error::InvalidArgument(
                "reward for finding a positive must be > 0".into(),
            ));
        }
        if self.cost_false_positive > 0.0 {
            return Err(Error::InvalidArgument(
                "cost of testing a negative must be <= 0".into(),
            ));
        }
        Ok(())
    }

    /// Realized reward of an action given the label (when tested).
    pub fn reward(&self, action: u8, label: Option<u8>) -> f64 {
        match (action, label) {
            (1, Some(1)) => self.reward_true_positive,
            (1, Some(0)) => self.cost_false_positive,
            _ => 0.0,
        }
    }
}

/// The testing policy: a scoring model squashed through a tempered sigmoid
/// with an exploration floor, so every recommendation probability stays in
/// `[eps/2, 1 - eps/2]` and logged propensities are bounded away from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditPolicy {
    pub scorer: RiskModel,
    pub epsilon: f64,
    pub temperature: f64,
}

impl BanditPolicy {
    pub fn new(scorer: RiskModel, epsilon: f64, temperature: f64) -> Result<Self> {
        if epsilon <= 0.0 || epsilon > 1.0 {
            return Err(Error::InvalidArgument("epsilon must be in (0, 1]".into()));
        }
        if temperature <= 0.0 {
            return Err(Error::InvalidArgument("temperature must be > 0".into()));
        }
        Ok(Self {
            scorer,
            epsilon,
            temperature,
        })
    }

    /// Probability of recommending a test for an encoded context.
    pub fn action_probability(&self, x: &[f64]) -> f64 {
        let squash = 1.0 / (1.0 + (-self.scorer.linear_score(x) / self.temperature).exp());
        self.epsilon / 2.0 + (1.0 - self.epsilon) * squash
    }
}

/// Retrain the scorer on importance-weighted log-loss: each labeled example
/// weighs `1 / propensity`. Empty feedback leaves the policy unchanged.
pub fn bandit_update(
    policy: &BanditPolicy,
    feedback: &[LabeledObservation],
    seed: u64,
) -> Result<BanditPolicy> {
    let mut batch: Vec<(&[f64], u8, f64)> = Vec::new();
    for obs in feedback {
        if obs.propensity <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "logged propensity must be positive, got {}",
                obs.propensity
            )));
        }
        if let Some(y) = obs.label {
            batch.push((obs.features.as_slice(), y, 1.0 / obs.propensity));
        }
    }
    Ok(BanditPolicy {
        scorer: policy.scorer.update_weighted(&batch, seed),
        epsilon: policy.epsilon,
        temperature: policy.temperature,
    })
}

/// Recommendation probabilities for every cohort member.
pub fn bandit_predict(
    policy: &BanditPolicy,
    enc: &Encoder,
    cohort: &DailyCohort,
) -> Vec<(u64, f64)> {
    cohort
        .members
        .iter()
        .map(|m| (m.id, policy.action_probability(&enc.encode(m))))
        .collect()
}

/// Weighted sampling with the recommendation probabilities as weights.
///
/// Logged propensity: the exact normalized marginal for a single draw; for a
/// budgeted multi-draw either the raw probability (flagged) or, with
/// `soft_budget`, the probabilities rescaled so they sum to the budget.
pub fn bandit_select(
    policy: &BanditPolicy,
    enc: &Encoder,
    cohort: &DailyCohort,
    budget: usize,
    soft_budget: bool,
    seed: u64,
) -> Result<SelectionResult> {
    let probs = bandit_predict(policy, enc, cohort);
    let candidates: Vec<WeightedCandidate> = probs
        .iter()
        .map(|&(id, p)| WeightedCandidate::new(id, p))
        .collect();
    let total: f64 = candidates.iter().map(|c| c.weight).sum();
    let chosen = weighted_sample_without_replacement(&candidates, budget, seed)?;

    let prob_of: BTreeMap<u64, f64> = probs.into_iter().collect();
    let mut result = SelectionResult::new(cohort.day, StrategyKind::Bandit);
    for id in chosen {
        let p = prob_of[&id];
        let (propensity, budgeted) = if budget == 1 {
            (p / total, false)
        } else if soft_budget {
            (clamp_propensity(budget as f64 * p / total), true)
        } else {
            (clamp_propensity(p), true)
        };
        result.selected.push(SelectedRecord {
            id,
            score: p,
            weight: p,
            propensity,
            budgeted_propensity: budgeted,
        });
    }
    Ok(result)
}

/// Off-policy value estimates of a target policy from logged data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyValueEstimate {
    pub doubly_robust: f64,
    pub inverse_propensity: f64,
    pub records: usize,
}

/// Expected reward of the test action under the reward model.
fn modeled_reward(reward_model: &RiskModel, cost: &CostConfig, x: &[f64], action: u8) -> f64 {
    if action == 0 {
        return 0.0;
    }
    let q = reward_model.predict_encoded(x);
    q * cost.reward_true_positive + (1.0 - q) * cost.cost_false_positive
}

/// Doubly robust and inverse-propensity estimates of the target policy's
/// average reward over a log of (context, action, label, propensity)
/// records.
///
/// Per record: `DR = E_{a~target}[r_hat(x,a)] + w * (r - r_hat(x,a_logged))`
/// with `w = target(a_logged|x) / propensity`; `IPS = w * r`.
pub fn dr_evaluate(
    target: &BanditPolicy,
    log: &[LabeledObservation],
    cost: &CostConfig,
    reward_model: &RiskModel,
) -> Result<PolicyValueEstimate> {
    if log.is_empty() {
        return Err(Error::InvalidArgument("empty decision log".into()));
    }
    let mut dr_sum = 0.0;
    let mut ips_sum = 0.0;
    for obs in log {
        if obs.propensity <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "logged propensity must be positive, got {}",
                obs.propensity
            )));
        }
        if obs.action == 1 && obs.label.is_none() {
            return Err(Error::InvalidArgument(
                "tested record without a resolved label".into(),
            ));
        }
        let p_test = target.action_probability(&obs.features);
        let target_prob = if obs.action == 1 { p_test } else { 1.0 - p_test };
        let w = target_prob / obs.propensity;
        let realized = cost.reward(obs.action, obs.label);

        let direct = p_test * modeled_reward(reward_model, cost, &obs.features, 1);
        let baseline = modeled_reward(reward_model, cost, &obs.features, obs.action);

        dr_sum += direct + w * (realized - baseline);
        ips_sum += w * realized;
    }
    let n = log.len() as f64;
    Ok(PolicyValueEstimate {
        doubly_robust: dr_sum / n,
        inverse_propensity: ips_sum / n,
        records: log.len(),
    })
}
