//! Day-loop harness: arrivals, budgets, strategy dispatch, delayed labels,
//! model updates, metrics, and report emission.
//!
//! Every day runs the same sequence: apply the labels that just became
//! visible (yesterday's selections), retrain what depends on them, then draw
//! the cohort and select under the day's budget. Labels for today's
//! selections are stamped visible tomorrow, so no model ever scores a day
//! using that day's own outcomes.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::{auc, mean_stderr, tv_distance};
use crate::model::{Encoder, LabeledObservation, RiskModel};
use crate::online::{compute_alphas, DailyGate, Decision};
use crate::pooling::{make_pools, resolve_pools, PoolingStrategy};
use crate::population::{
    draw_daily_cohort, generate_population, ingest_demographic_table, ArrivalModel, DailyCohort,
    DemographicSchema, DemographicTable, FeatureRates, GroundTruthModel, Individual,
    InfectionOracle, SLOTS_PER_DAY,
};
use crate::sampling::{weighted_sample_without_replacement, WeightedCandidate};
use crate::seed::{derive_seed, rng_for};
use crate::strategy::active::{
    retrain_committee, select_disagreement, select_uncertainty, ActiveConfig, Committee,
};
use crate::strategy::bandit::{bandit_select, bandit_update, BanditPolicy, CostConfig};
use crate::strategy::bucket::{assign_bucket, select_bucket, BucketBudget};
use crate::strategy::stratified::{
    estimate_cohort_distribution, population_distribution, select_stratified, stratum_of,
    JointDistribution, Smoothing, StratFeature, StratificationConfig,
};
use crate::strategy::{
    clamp_propensity, SelectedRecord, SelectionResult, StrategyKind,
};
use crate::model::{binary_entropy, utility};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Offline,
    Online,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Offline => "offline",
            Mode::Online => "online",
        }
    }
}

/// Where the demographic reference table comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DemographicsSource {
    /// The shipped national table.
    Builtin,
    Path { path: String, schema: DemographicSchema },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub days: u32,
    pub population_size: usize,
    /// Held-out labeled individuals for model-quality metrics; never arrive.
    pub probe_size: usize,
    /// Per-day budgets; the last entry repeats when days run longer.
    pub budgets: Vec<u64>,
    pub strategy: StrategyKind,
    pub mode: Mode,
    pub seed: u64,
    pub truth: GroundTruthModel,
    pub rates: FeatureRates,
    pub arrival: ArrivalModel,
    pub demographics: DemographicsSource,
    pub model_learning_rate: f64,
    pub bucket_split: [f64; 4],
    pub bucket_mandatory_x1: bool,
    pub strat: StratificationConfig,
    pub bandit_epsilon: f64,
    pub bandit_temperature: f64,
    pub bandit_bootstrap_days: u32,
    pub bandit_soft_budget: bool,
    pub cost: CostConfig,
    pub active: ActiveConfig,
    pub pooling_enabled: bool,
    pub pooling_size: usize,
    pub pooling_strategy: PoolingStrategy,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            days: 30,
            population_size: 20_000,
            probe_size: 1000,
            budgets: vec![50],
            strategy: StrategyKind::Stratified,
            mode: Mode::Offline,
            seed: 42,
            truth: GroundTruthModel::default(),
            rates: FeatureRates::default(),
            arrival: ArrivalModel::default(),
            demographics: DemographicsSource::Builtin,
            model_learning_rate: 0.1,
            bucket_split: [0.4, 0.3, 0.2, 0.1],
            bucket_mandatory_x1: true,
            strat: StratificationConfig::default(),
            bandit_epsilon: 0.1,
            bandit_temperature: 1.0,
            bandit_bootstrap_days: 3,
            bandit_soft_budget: false,
            cost: CostConfig::default(),
            active: ActiveConfig::default(),
            pooling_enabled: false,
            pooling_size: 5,
            pooling_strategy: PoolingStrategy::Dorfman,
        }
    }
}

impl SimulationConfig {
    pub fn budget_for(&self, day: u32) -> u64 {
        let idx = (day.saturating_sub(1) as usize).min(self.budgets.len() - 1);
        self.budgets[idx]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(key, msg));
        if self.days == 0 {
            return bad("days", "must be >= 1");
        }
        if self.population_size == 0 {
            return bad("population", "must be >= 1");
        }
        if self.budgets.is_empty() {
            return bad("budget", "needs at least one value");
        }
        if self.arrival.cohort_size == 0 {
            return bad("cohort", "must be >= 1");
        }
        if self.arrival.symptomatic_bias <= 0.0 {
            return bad("bias.symptomatic", "must be > 0");
        }
        if self.arrival.over60_bias <= 0.0 {
            return bad("bias.over60", "must be > 0");
        }
        if self.arrival.slot_weights.iter().any(|&w| w < 0.0)
            || self.arrival.slot_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("arrival.slots", "weights must be non-negative with positive sum");
        }
        if !(0.0..=1.0).contains(&self.truth.base_prevalence) {
            return bad("prevalence", "must be in [0, 1]");
        }
        for (key, rate) in [
            ("rates.symptomatic", self.rates.symptomatic),
            ("rates.risky", self.rates.risky_history),
            ("rates.comorbidity", self.rates.comorbidity),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(key, "must be in [0, 1]");
            }
        }
        if self.model_learning_rate <= 0.0 {
            return bad("model.learning_rate", "must be > 0");
        }
        if self.bucket_split.iter().any(|&f| f < 0.0)
            || self.bucket_split.iter().sum::<f64>() <= 0.0
        {
            return bad("bucket.split", "fractions must be non-negative with positive sum");
        }
        self.strat
            .validate()
            .map_err(|e| Error::config("strat", e.to_string()))?;
        if self.bandit_epsilon <= 0.0 || self.bandit_epsilon > 1.0 {
            return bad("bandit.epsilon", "must be in (0, 1]");
        }
        if self.bandit_temperature <= 0.0 {
            return bad("bandit.temperature", "must be > 0");
        }
        self.cost
            .validate()
            .map_err(|e| Error::config("bandit.reward_tp", e.to_string()))?;
        if self.active.committee_size < 2 {
            return bad("active.committee_size", "must be >= 2");
        }
        if self.active.lambda_d < 0.0 {
            return bad("active.lambda_d", "must be >= 0");
        }
        if self.pooling_size == 0 {
            return bad("pooling.size", "must be >= 1");
        }
        Ok(())
    }

    pub fn load_table(&self) -> Result<DemographicTable> {
        match &self.demographics {
            DemographicsSource::Builtin => Ok(DemographicTable::builtin_national()),
            DemographicsSource::Path { path, schema } => {
                ingest_demographic_table(std::path::Path::new(path), *schema)
            }
        }
    }
}

/// One day of metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub day: u32,
    pub kits_budgeted: u64,
    pub kits_used: u64,
    pub positives_found: u64,
    pub cumulative_positives_found: u64,
    pub cumulative_positives_present: u64,
    pub detection_recall: f64,
    pub cohort_size: u64,
    pub cohort_positivity: Option<f64>,
    pub tv_divergence: Option<f64>,
    pub probe_log_loss: f64,
    pub probe_auc: Option<f64>,
    pub pooling_tests_used: Option<u64>,
    pub mandatory_overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub strategy: String,
    pub mode: String,
    pub seed: u64,
    pub days: u32,
    pub total_kits_budgeted: u64,
    pub total_kits_used: u64,
    pub total_positives_found: u64,
    pub total_positives_present: u64,
    pub final_detection_recall: f64,
    pub positives_per_kit: f64,
    pub mean_tv_divergence: Option<f64>,
    pub final_probe_log_loss: f64,
    pub final_probe_auc: Option<f64>,
    pub total_pooling_tests: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub days: Vec<DayMetrics>,
    pub summary: Summary,
}

/// Instrumentation of the delayed-feedback discipline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    pub days: Vec<DayTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayTrace {
    pub day: u32,
    /// `visible_on_day` of every observation consumed by updates before this
    /// day's scoring.
    pub labels_applied_visible_on: Vec<u32>,
    /// `visible_on_day` stamped on this day's own selections.
    pub selections_visible_on: Option<u32>,
}

/// Features the per-day divergence report stratifies on.
const REPORT_FEATURES: [StratFeature; 2] = [StratFeature::Gender, StratFeature::AgeBin];

struct OnlineStratContext {
    census: JointDistribution,
    cohort_dist: JointDistribution,
}

struct Simulation {
    cfg: SimulationConfig,
    demo: DemographicTable,
    regions: Vec<String>,
    enc: Encoder,
    pop: Vec<Individual>,
    oracle: InfectionOracle,
    probe_pairs: Vec<(Vec<f64>, u8)>,
    arrived: Vec<bool>,
    model: RiskModel,
    policy: BanditPolicy,
    committee: Option<Committee>,
    labeled_pool: Vec<LabeledObservation>,
    pending: Vec<LabeledObservation>,
    prev_cohort: Option<DailyCohort>,
    prev_slot_scores: Option<[Vec<f64>; SLOTS_PER_DAY]>,
    cumulative_found: u64,
    cumulative_present: u64,
}

impl Simulation {
    fn new(cfg: SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let demo = cfg.load_table()?;
        let regions: Vec<String> = demo.region_names().into_iter().map(String::from).collect();
        let enc = Encoder::for_table(&demo);
        let total = cfg.population_size + cfg.probe_size;
        let pop = generate_population(total, &demo, &cfg.truth, &cfg.rates, cfg.seed)?;
        let mut oracle = InfectionOracle::for_population(&pop);

        // the probe is labeled for metrics only and never arrives
        let probe_ids: Vec<u64> = (cfg.population_size as u64..total as u64).collect();
        oracle.authorize_many(probe_ids.iter().copied());
        let probe_pairs: Vec<(Vec<f64>, u8)> = probe_ids
            .iter()
            .map(|&id| {
                let ind = &pop[id as usize];
                Ok((enc.encode(ind), oracle.label(id)?))
            })
            .collect::<Result<_>>()?;

        let model = RiskModel::new(enc.len(), cfg.model_learning_rate);
        let policy = BanditPolicy::new(
            RiskModel::new(enc.len(), cfg.model_learning_rate),
            cfg.bandit_epsilon,
            cfg.bandit_temperature,
        )?;
        Ok(Self {
            arrived: vec![false; pop.len()],
            probe_pairs,
            oracle,
            pop,
            enc,
            regions,
            demo,
            model,
            policy,
            committee: None,
            labeled_pool: Vec::new(),
            pending: Vec::new(),
            prev_cohort: None,
            prev_slot_scores: None,
            cumulative_found: 0,
            cumulative_present: 0,
            cfg,
        })
    }

    fn run(mut self) -> Result<RunOutput> {
        let mut rows = Vec::with_capacity(self.cfg.days as usize);
        let mut trace = SimulationTrace::default();
        let mut total_pooling: Option<u64> = None;

        for day in 1..=self.cfg.days {
            let visible_on_applied = self.apply_visible_labels(day)?;

            let probe_log_loss = self.model.mean_log_loss(&self.probe_pairs);
            let probe_auc = auc(
                &self
                    .probe_pairs
                    .iter()
                    .map(|(x, y)| (self.model.predict_encoded(x), *y))
                    .collect::<Vec<_>>(),
            );

            let budget = self.cfg.budget_for(day) as usize;
            let cohort = self.draw_cohort(day);
            let Some(cohort) = cohort else {
                trace.days.push(DayTrace {
                    day,
                    labels_applied_visible_on: visible_on_applied,
                    selections_visible_on: None,
                });
                rows.push(DayMetrics {
                    day,
                    kits_budgeted: budget as u64,
                    kits_used: 0,
                    positives_found: 0,
                    cumulative_positives_found: self.cumulative_found,
                    cumulative_positives_present: self.cumulative_present,
                    detection_recall: recall(self.cumulative_found, self.cumulative_present),
                    cohort_size: 0,
                    cohort_positivity: None,
                    tv_divergence: None,
                    probe_log_loss,
                    probe_auc,
                    pooling_tests_used: None,
                    mandatory_overflow: false,
                });
                self.prev_cohort = None;
                self.prev_slot_scores = None;
                continue;
            };

            let (result, day_slot_scores) = match self.cfg.mode {
                Mode::Offline => (self.select_offline(day, &cohort, budget)?, None),
                Mode::Online => {
                    let (r, s) = self.select_online(day, &cohort, budget)?;
                    (r, Some(s))
                }
            };

            let cohort_ids = cohort.ids();
            debug_assert!(result
                .selected
                .iter()
                .all(|r| cohort_ids.contains(&r.id)));
            if !result.mandatory_overflow {
                debug_assert!(result.len() <= budget);
            }

            // labels for today's selections become visible tomorrow
            let by_id: BTreeMap<u64, &Individual> =
                cohort.members.iter().map(|m| (m.id, m)).collect();
            let mut positives_today = 0u64;
            for rec in &result.selected {
                self.oracle.authorize(rec.id);
                let y = self.oracle.label(rec.id)?;
                positives_today += u64::from(y);
                self.pending.push(LabeledObservation {
                    features: self.enc.encode(by_id[&rec.id]),
                    action: 1,
                    label: Some(y),
                    propensity: clamp_propensity(rec.propensity),
                    visible_on_day: day + 1,
                });
            }

            let pooling_tests_used = if self.cfg.pooling_enabled && !result.is_empty() {
                let plan = make_pools(
                    &result.ids(),
                    self.cfg.pooling_size,
                    self.cfg.pooling_strategy,
                    derive_seed(self.cfg.seed, day, "pools"),
                )?;
                let (labels, tests) = resolve_pools(&plan, &self.oracle)?;
                for (id, label) in &labels {
                    if *label != self.oracle.label(*id)? {
                        return Err(Error::Validation(format!(
                            "pooled label for {id} disagrees with the individual oracle"
                        )));
                    }
                }
                *total_pooling.get_or_insert(0) += tests;
                Some(tests)
            } else {
                None
            };

            let present_today =
                self.oracle.ground_truth_positives(&cohort_ids) as u64;
            self.cumulative_found += positives_today;
            self.cumulative_present += present_today;

            let tv_divergence = self.selected_divergence(&cohort, &result);

            trace.days.push(DayTrace {
                day,
                labels_applied_visible_on: visible_on_applied,
                selections_visible_on: (!result.is_empty()).then_some(day + 1),
            });
            rows.push(DayMetrics {
                day,
                kits_budgeted: budget as u64,
                kits_used: result.len() as u64,
                positives_found: positives_today,
                cumulative_positives_found: self.cumulative_found,
                cumulative_positives_present: self.cumulative_present,
                detection_recall: recall(self.cumulative_found, self.cumulative_present),
                cohort_size: cohort.len() as u64,
                cohort_positivity: Some(present_today as f64 / cohort.len() as f64),
                tv_divergence,
                probe_log_loss,
                probe_auc,
                pooling_tests_used,
                mandatory_overflow: result.mandatory_overflow,
            });

            self.prev_slot_scores = day_slot_scores;
            self.prev_cohort = Some(cohort);
        }

        let last = rows.last();
        let tvs: Vec<f64> = rows.iter().filter_map(|r| r.tv_divergence).collect();
        let total_used: u64 = rows.iter().map(|r| r.kits_used).sum();
        let summary = Summary {
            strategy: self.cfg.strategy.name().to_string(),
            mode: self.cfg.mode.name().to_string(),
            seed: self.cfg.seed,
            days: self.cfg.days,
            total_kits_budgeted: rows.iter().map(|r| r.kits_budgeted).sum(),
            total_kits_used: total_used,
            total_positives_found: self.cumulative_found,
            total_positives_present: self.cumulative_present,
            final_detection_recall: recall(self.cumulative_found, self.cumulative_present),
            positives_per_kit: if total_used > 0 {
                self.cumulative_found as f64 / total_used as f64
            } else {
                0.0
            },
            mean_tv_divergence: if tvs.is_empty() {
                None
            } else {
                Some(tvs.iter().sum::<f64>() / tvs.len() as f64)
            },
            final_probe_log_loss: last.map_or(0.0, |r| r.probe_log_loss),
            final_probe_auc: last.and_then(|r| r.probe_auc),
            total_pooling_tests: total_pooling,
        };
        Ok(RunOutput {
            report: SimulationReport { days: rows, summary },
            trace,
            final_model: self.model,
        })
    }

    /// Drain the pending queue of everything visible by `day` and retrain
    /// whatever depends on labels. Returns the applied visibility stamps.
    fn apply_visible_labels(&mut self, day: u32) -> Result<Vec<u32>> {
        let (newly, still): (Vec<_>, Vec<_>) = self
            .pending
            .drain(..)
            .partition(|o| o.visible_on_day <= day);
        self.pending = still;
        let stamps: Vec<u32> = newly.iter().map(|o| o.visible_on_day).collect();

        self.model = self
            .model
            .update(&newly, derive_seed(self.cfg.seed, day, "model-update"));
        self.labeled_pool.extend(newly);
        // the bandit retrains on everything whose result is available, not
        // just yesterday's batch
        if self.cfg.strategy == StrategyKind::Bandit && !self.labeled_pool.is_empty() {
            self.policy = bandit_update(
                &self.policy,
                &self.labeled_pool,
                derive_seed(self.cfg.seed, day, "bandit-update"),
            )?;
        }
        if self.cfg.strategy == StrategyKind::ActiveDisagreement && !self.labeled_pool.is_empty()
        {
            self.committee = Some(retrain_committee(
                &self.labeled_pool,
                self.cfg.active.committee_size,
                self.cfg.model_learning_rate,
                derive_seed(self.cfg.seed, day, "committee"),
            )?);
        }
        Ok(stamps)
    }

    fn draw_cohort(&mut self, day: u32) -> Option<DailyCohort> {
        let eligible: Vec<&Individual> = self.pop[..self.cfg.population_size]
            .iter()
            .filter(|ind| !self.arrived[ind.id as usize])
            .collect();
        let cohort = draw_daily_cohort(&eligible, day, &self.cfg.arrival, self.cfg.seed)?;
        for m in &cohort.members {
            self.arrived[m.id as usize] = true;
        }
        Some(cohort)
    }

    fn select_offline(
        &self,
        day: u32,
        cohort: &DailyCohort,
        budget: usize,
    ) -> Result<SelectionResult> {
        let seed = derive_seed(self.cfg.seed, day, "select");
        match self.cfg.strategy {
            StrategyKind::UniformBaseline => self.select_uniform(cohort, budget, seed),
            StrategyKind::Bucket => {
                let bucket_budget = BucketBudget::from_split(&self.cfg.bucket_split, budget)?;
                select_bucket(
                    cohort,
                    budget,
                    &bucket_budget,
                    self.cfg.bucket_mandatory_x1,
                    seed,
                )
            }
            StrategyKind::Stratified => select_stratified(
                cohort,
                budget,
                &self.cfg.strat,
                &self.demo,
                &self.model,
                &self.enc,
                seed,
            ),
            StrategyKind::Bandit => {
                if day <= self.cfg.bandit_bootstrap_days {
                    select_stratified(
                        cohort,
                        budget,
                        &self.cfg.strat,
                        &self.demo,
                        &self.model,
                        &self.enc,
                        seed,
                    )
                } else {
                    bandit_select(
                        &self.policy,
                        &self.enc,
                        cohort,
                        budget,
                        self.cfg.bandit_soft_budget,
                        seed,
                    )
                }
            }
            StrategyKind::ActiveUncertainty => select_uncertainty(
                &self.model,
                &self.enc,
                cohort,
                budget,
                self.cfg.active.utility,
                seed,
            ),
            StrategyKind::ActiveDisagreement => match &self.committee {
                Some(committee) => select_disagreement(
                    committee,
                    &self.enc,
                    cohort,
                    budget,
                    &self.cfg.active,
                    seed,
                ),
                // no labels yet: an untrained model scores everyone alike,
                // which is the same uniform draw a zero-variance committee
                // would produce
                None => select_uncertainty(
                    &self.model,
                    &self.enc,
                    cohort,
                    budget,
                    self.cfg.active.utility,
                    seed,
                ),
            },
        }
    }

    fn select_uniform(
        &self,
        cohort: &DailyCohort,
        budget: usize,
        seed: u64,
    ) -> Result<SelectionResult> {
        let candidates: Vec<WeightedCandidate> = cohort
            .members
            .iter()
            .map(|m| WeightedCandidate::new(m.id, 1.0))
            .collect();
        let chosen = weighted_sample_without_replacement(&candidates, budget, seed)?;
        let inclusion = (budget as f64 / cohort.len() as f64).min(1.0);
        let mut result = SelectionResult::new(cohort.day, StrategyKind::UniformBaseline);
        for id in chosen {
            result.selected.push(SelectedRecord {
                id,
                score: 1.0,
                weight: 1.0,
                propensity: inclusion,
                budgeted_propensity: false,
            });
        }
        Ok(result)
    }

    /// The strategy's raw weight for one arrival in online mode.
    fn online_weight(&self, day: u32, ind: &Individual, strat: Option<&OnlineStratContext>) -> f64 {
        let stratified_weight = |ctx: Option<&OnlineStratContext>| -> f64 {
            let ratio = match ctx {
                None => 1.0,
                Some(ctx) => {
                    let stratum = stratum_of(ind, &self.cfg.strat.features, &self.regions);
                    let n = ctx.cohort_dist.total();
                    let target = ctx.census.probability(&stratum);
                    let observed = ctx.cohort_dist.probability(&stratum);
                    match self.cfg.strat.smoothing {
                        Smoothing::ZeroOut => {
                            if observed <= 0.0 || target <= 0.0 {
                                0.0
                            } else {
                                target / observed
                            }
                        }
                        Smoothing::Additive(lambda) => {
                            (target * n + lambda) / (observed * n + lambda)
                        }
                    }
                }
            };
            ratio * utility(self.cfg.strat.utility, &self.model, &self.enc, ind)
        };

        match self.cfg.strategy {
            StrategyKind::UniformBaseline => 1.0,
            StrategyKind::Bucket => self.cfg.bucket_split[assign_bucket(ind).index()],
            StrategyKind::Stratified => stratified_weight(strat),
            StrategyKind::Bandit => {
                if day <= self.cfg.bandit_bootstrap_days {
                    stratified_weight(strat)
                } else {
                    self.policy.action_probability(&self.enc.encode(ind))
                }
            }
            StrategyKind::ActiveUncertainty => binary_entropy(self.model.predict(&self.enc, ind)),
            StrategyKind::ActiveDisagreement => match &self.committee {
                Some(committee) => {
                    committee.disagreement(&self.enc.encode(ind)) + self.cfg.active.lambda_d
                }
                None => binary_entropy(self.model.predict(&self.enc, ind)),
            },
        }
    }

    /// Online mode: score each arrival as weight / Exp(1) — the streaming
    /// analogue of the offline weighted draw — and push it through the
    /// per-slot rate limiter against yesterday's score distribution.
    fn select_online(
        &mut self,
        day: u32,
        cohort: &DailyCohort,
        budget: usize,
    ) -> Result<(SelectionResult, [Vec<f64>; SLOTS_PER_DAY])> {
        let alphas = compute_alphas(self.prev_cohort.as_ref());
        let prev_scores = self.prev_slot_scores.take().unwrap_or_default();
        let mut gate = DailyGate::new(day, &alphas, budget, prev_scores);

        // the stratified scorer corrects against yesterday's cohort mix;
        // on the first day there is nothing to correct yet
        let needs_strat = matches!(self.cfg.strategy, StrategyKind::Stratified)
            || (self.cfg.strategy == StrategyKind::Bandit
                && day <= self.cfg.bandit_bootstrap_days);
        let strat_ctx = match (&self.prev_cohort, needs_strat) {
            (Some(prev), true) => Some(OnlineStratContext {
                census: population_distribution(
                    &self.demo,
                    prev,
                    &self.cfg.strat.features,
                    &self.regions,
                ),
                cohort_dist: estimate_cohort_distribution(
                    prev,
                    &self.cfg.strat.features,
                    &self.regions,
                ),
            }),
            _ => None,
        };

        let mut rng = rng_for(self.cfg.seed, day, "online-keys");
        let mut day_scores: [Vec<f64>; SLOTS_PER_DAY] = Default::default();
        let mut result = SelectionResult::new(day, self.cfg.strategy);

        for ind in &cohort.members {
            let slot = cohort.slot_of(ind.id).expect("cohort member has a slot");
            let weight = self.online_weight(day, ind, strat_ctx.as_ref());
            let exp_draw = -(1.0 - rand::Rng::random::<f64>(&mut rng)).ln();
            let score = if weight > 0.0 && exp_draw > 0.0 {
                weight / exp_draw
            } else {
                0.0
            };
            day_scores[slot as usize].push(score);
            if weight <= 0.0 {
                continue;
            }
            let threshold = gate.slots[slot as usize].threshold();
            if gate.decide(slot, score) == Decision::Recommend {
                // acceptance probability of weight w against a fixed
                // threshold t under the Exp(1) key: 1 - exp(-w/t)
                let propensity = match threshold {
                    Some(t) if t > 0.0 => 1.0 - (-weight / t).exp(),
                    _ => 1.0,
                };
                result.selected.push(SelectedRecord {
                    id: ind.id,
                    score: weight,
                    weight: score,
                    propensity: clamp_propensity(propensity),
                    budgeted_propensity: true,
                });
            }
        }
        Ok((result, day_scores))
    }

    /// TV distance between the selected sample's (gender, age-bin) mix and
    /// the census table.
    fn selected_divergence(
        &self,
        cohort: &DailyCohort,
        result: &SelectionResult,
    ) -> Option<f64> {
        if result.is_empty() {
            return None;
        }
        let by_id: BTreeMap<u64, &Individual> =
            cohort.members.iter().map(|m| (m.id, m)).collect();
        let mut selected: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        let share = 1.0 / result.len() as f64;
        for rec in &result.selected {
            *selected
                .entry(stratum_of(by_id[&rec.id], &REPORT_FEATURES, &self.regions))
                .or_insert(0.0) += share;
        }
        let mut target: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        for (g, gender) in [
            crate::population::Gender::Male,
            crate::population::Gender::Female,
        ]
        .into_iter()
        .enumerate()
        {
            for bin in crate::population::AgeBin::ALL {
                target.insert(
                    vec![g as u16, bin.index() as u16],
                    self.demo.national_cell(bin, gender),
                );
            }
        }
        Some(tv_distance(&selected, &target))
    }
}

fn recall(found: u64, present: u64) -> f64 {
    if present == 0 {
        0.0
    } else {
        found as f64 / present as f64
    }
}

/// Everything a run produces.
pub struct RunOutput {
    pub report: SimulationReport,
    pub trace: SimulationTrace,
    /// State of the risk model after the last day's update.
    pub final_model: RiskModel,
}

/// Run one simulation to a report.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationReport> {
    Ok(Simulation::new(cfg.clone())?.run()?.report)
}

/// Run one simulation keeping the update-order instrumentation.
pub fn run_simulation_traced(
    cfg: &SimulationConfig,
) -> Result<(SimulationReport, SimulationTrace)> {
    let out = Simulation::new(cfg.clone())?.run()?;
    Ok((out.report, out.trace))
}

/// Run one simulation and keep everything.
pub fn run_simulation_full(cfg: &SimulationConfig) -> Result<RunOutput> {
    Simulation::new(cfg.clone())?.run()
}

/// Paired comparison of strategies over shared population and arrival
/// realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub strategy: StrategyKind,
    pub mean_final_recall: f64,
    pub stderr_final_recall: f64,
    pub mean_tv_divergence: f64,
    pub stderr_tv_divergence: f64,
    pub mean_positives_per_kit: f64,
    pub stderr_positives_per_kit: f64,
    pub recall_values: Vec<f64>,
    pub tv_values: Vec<f64>,
    pub positives_per_kit_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub replicates: usize,
    pub rows: Vec<StrategyComparison>,
}

impl std::fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<22} {:>18} {:>18} {:>20}",
            "strategy", "final recall", "mean tv", "positives/kit"
        )?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<22} {:>10.4} ± {:<6.4} {:>10.4} ± {:<6.4} {:>12.4} ± {:<6.4}",
                row.strategy.name(),
                row.mean_final_recall,
                row.stderr_final_recall,
                row.mean_tv_divergence,
                row.stderr_tv_divergence,
                row.mean_positives_per_kit,
                row.stderr_positives_per_kit,
            )?;
        }
        write!(f, "({} paired replicates)", self.replicates)
    }
}

/// Run each strategy against identical population/arrival realizations
/// (paired master seeds per replicate) and aggregate the headline metrics.
/// Replicates are independent given their derived seeds and run on worker
/// threads; the output does not depend on the thread count.
pub fn compare_strategies(
    cfg: &SimulationConfig,
    strategies: &[StrategyKind],
    replicates: usize,
) -> Result<ComparisonTable> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    let workers = std::thread::available_parallelism()
        .map(usize::from)
        .unwrap_or(1)
        .min(replicates);
    let mut rows = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let outcomes: Vec<Result<(f64, f64, f64)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|worker| {
                    let cfg = &*cfg;
                    scope.spawn(move || {
                        let mut chunk = Vec::new();
                        let mut rep = worker;
                        while rep < replicates {
                            let mut sub = cfg.clone();
                            sub.strategy = strategy;
                            sub.seed = derive_seed(cfg.seed, rep as u32, "replicate");
                            chunk.push((
                                rep,
                                run_simulation(&sub).map(|report| {
                                    (
                                        report.summary.final_detection_recall,
                                        report.summary.mean_tv_divergence.unwrap_or(0.0),
                                        report.summary.positives_per_kit,
                                    )
                                }),
                            ));
                            rep += workers;
                        }
                        chunk
                    })
                })
                .collect();
            let mut merged: Vec<(usize, Result<(f64, f64, f64)>)> = handles
                .into_iter()
                .flat_map(|h| h.join().expect("replicate worker panicked"))
                .collect();
            merged.sort_by_key(|(rep, _)| *rep);
            merged.into_iter().map(|(_, r)| r).collect()
        });
        let mut recalls = Vec::with_capacity(replicates);
        let mut tvs = Vec::with_capacity(replicates);
        let mut ppks = Vec::with_capacity(replicates);
        for outcome in outcomes {
            let (recall, tv, ppk) = outcome?;
            recalls.push(recall);
            tvs.push(tv);
            ppks.push(ppk);
        }
        let (mean_recall, se_recall) = mean_stderr(&recalls);
        let (mean_tv, se_tv) = mean_stderr(&tvs);
        let (mean_ppk, se_ppk) = mean_stderr(&ppks);
        rows.push(StrategyComparison {
            strategy,
            mean_final_recall: mean_recall,
            stderr_final_recall: se_recall,
            mean_tv_divergence: mean_tv,
            stderr_tv_divergence: se_tv,
            mean_positives_per_kit: mean_ppk,
            stderr_positives_per_kit: se_ppk,
            recall_values: recalls,
            tv_values: tvs,
            positives_per_kit_values: ppks,
        });
    }
    Ok(ComparisonTable {
        replicates,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::InvalidArgument(format!(
                "unknown report format `{name}` (expected csv or json)"
            ))),
        }
    }
}

const CSV_COLUMNS: &str = "day,kits_budgeted,kits_used,positives_found,cumulative_positives_found,cumulative_positives_present,detection_recall,cohort_size,cohort_positivity,tv_divergence,probe_log_loss,probe_auc,pooling_tests_used,mandatory_overflow";

fn opt_cell<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

/// CSV rendering: header plus one row per day.
pub fn report_to_csv(report: &SimulationReport) -> String {
    let mut out = String::from(CSV_COLUMNS);
    out.push('\n');
    for r in &report.days {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.day,
            r.kits_budgeted,
            r.kits_used,
            r.positives_found,
            r.cumulative_positives_found,
            r.cumulative_positives_present,
            r.detection_recall,
            r.cohort_size,
            opt_cell(&r.cohort_positivity),
            opt_cell(&r.tv_divergence),
            r.probe_log_loss,
            opt_cell(&r.probe_auc),
            opt_cell(&r.pooling_tests_used),
            r.mandatory_overflow,
        ));
    }
    out
}

/// JSON rendering: the day array plus the summary object.
pub fn report_to_json(report: &SimulationReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn report_from_json(text: &str) -> Result<SimulationReport> {
    serde_json::from_str(text).map_err(|e| Error::Schema(format!("bad report JSON: {e}")))
}

pub fn emit_report(
    report: &SimulationReport,
    format: ReportFormat,
    path: &std::path::Path,
) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report_to_csv(report),
        ReportFormat::Json => report_to_json(report),
    };
    std::fs::write(path, text)?;
    Ok(())
}
