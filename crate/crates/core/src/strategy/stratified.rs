//! Stratified, utility-weighted selection: members are reweighted by the
//! ratio of the census stratum probability to the cohort stratum probability
//! so that the chosen sample leans back toward the overall population.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{utility, Encoder, RiskModel, Utility};
use crate::population::{AgeBin, DailyCohort, DemographicTable, Gender, Individual};
use crate::sampling::{weighted_sample_without_replacement, WeightedCandidate};
use crate::strategy::{clamp_propensity, SelectedRecord, SelectionResult, StrategyKind};

/// Features the population can be grouped by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratFeature {
    AgeBin,
    Gender,
    Region,
    Comorbidity,
}

impl StratFeature {
    pub fn name(self) -> &'static str {
        match self {
            StratFeature::AgeBin => "age_bin",
            StratFeature::Gender => "gender",
            StratFeature::Region => "region",
            StratFeature::Comorbidity => "comorbidity",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "age_bin" => Ok(StratFeature::AgeBin),
            "gender" => Ok(StratFeature::Gender),
            "region" => Ok(StratFeature::Region),
            "comorbidity" => Ok(StratFeature::Comorbidity),
            _ => Err(Error::InvalidArgument(format!(
                "unknown stratification feature `{name}`"
            ))),
        }
    }
}

/// How to handle strata the cohort has never seen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoothing {
    /// Weight 0 whenever a stratum probability is 0.
    ZeroOut,
    /// Add the given pseudo-count to both the census-side and cohort-side
    /// stratum counts before taking the ratio.
    Additive(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratificationConfig {
    pub features: Vec<StratFeature>,
    pub smoothing: Smoothing,
    pub utility: Utility,
}

impl Default for StratificationConfig {
    fn default() -> Self {
        Self {
            features: vec![StratFeature::Gender, StratFeature::AgeBin],
            smoothing: Smoothing::Additive(0.5),
            utility: Utility::Uniform,
        }
    }
}

impl StratificationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::InvalidArgument(
                "stratification needs at least one feature".into(),
            ));
        }
        if let Smoothing::Additive(lambda) = self.smoothing {
            if lambda <= 0.0 {
                return Err(Error::InvalidArgument(
                    "additive smoothing needs lambda > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A stratum is the tuple of feature values, encoded as small indices in
/// feature order.
pub type Stratum = Vec<u16>;

/// A distribution over strata. `mass` holds raw masses (counts for cohorts,
/// probabilities for census targets); probabilities are mass/total.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    mass: BTreeMap<Stratum, f64>,
    total: f64,
    /// Cardinality of each feature's value range, identifying the space.
    space: Vec<u16>,
}

impl JointDistribution {
    pub fn probability(&self, stratum: &Stratum) -> f64 {
        if self.total <= 0.0 {
            return 0.0;
        }
        self.mass.get(stratum).copied().unwrap_or(0.0) / self.total
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Number of cells in the full cross-product space.
    pub fn space_size(&self) -> usize {
        self.space.iter().map(|&c| c as usize).product()
    }

    pub fn probabilities(&self) -> BTreeMap<Stratum, f64> {
        self.mass
            .iter()
            .map(|(k, v)| (k.clone(), v / self.total))
            .collect()
    }
}

/// Value index of one feature for one individual.
fn feature_value(ind: &Individual, feature: StratFeature, regions: &[String]) -> u16 {
    match feature {
        StratFeature::AgeBin => ind.age_bin().index() as u16,
        StratFeature::Gender => ind.gender.index() as u16,
        StratFeature::Region => regions
            .iter()
            .position(|r| *r == ind.region)
            .map_or(regions.len() as u16, |i| i as u16),
        StratFeature::Comorbidity => u16::from(ind.comorbidity),
    }
}

fn feature_cardinality(feature: StratFeature, regions: &[String]) -> u16 {
    match feature {
        StratFeature::AgeBin => 5,
        StratFeature::Gender => 2,
        StratFeature::Region => regions.len() as u16 + 1, // plus unknown
        StratFeature::Comorbidity => 2,
    }
}

/// The stratum an individual falls in for a feature set.
pub fn stratum_of(ind: &Individual, features: &[StratFeature], regions: &[String]) -> Stratum {
    features
        .iter()
        .map(|&f| feature_value(ind, f, regions))
        .collect()
}

/// Empirical stratum frequencies of a cohort.
pub fn estimate_cohort_distribution(
    cohort: &DailyCohort,
    features: &[StratFeature],
    regions: &[String],
) -> JointDistribution {
    let mut mass: BTreeMap<Stratum, f64> = BTreeMap::new();
    for m in &cohort.members {
        *mass.entry(stratum_of(m, features, regions)).or_insert(0.0) += 1.0;
    }
    JointDistribution {
        mass,
        total: cohort.len() as f64,
        space: features
            .iter()
            .map(|&f| feature_cardinality(f, regions))
            .collect(),
    }
}

/// Census target distribution over the same stratum space.
///
/// Age and gender come from the demographic table. When region is among the
/// features, its marginal is the cohort's (the reference tables carry no
/// state population sizes) and the age/gender part conditions on the
/// region's table when one exists. Comorbidity has no census column, so its
/// marginal is also the cohort's, treated as independent.
pub fn population_distribution(
    demo: &DemographicTable,
    cohort: &DailyCohort,
    features: &[StratFeature],
    regions: &[String],
) -> JointDistribution {
    let cohort_n = cohort.len() as f64;

    // cohort marginals for the features without census data
    let mut region_marginal: BTreeMap<u16, f64> = BTreeMap::new();
    let mut comorbidity_marginal: BTreeMap<u16, f64> = BTreeMap::new();
    for m in &cohort.members {
        *region_marginal
            .entry(feature_value(m, StratFeature::Region, regions))
            .or_insert(0.0) += 1.0 / cohort_n;
        *comorbidity_marginal
            .entry(feature_value(m, StratFeature::Comorbidity, regions))
            .or_insert(0.0) += 1.0 / cohort_n;
    }

    let uses = |f: StratFeature| features.contains(&f);
    let mut mass: BTreeMap<Stratum, f64> = BTreeMap::new();

    // Enumerate the cross product of the value ranges that appear, taking
    // the joint age-gender factor from the table (region-conditional when
    // both region and a demographic feature are stratified).
    let age_values: Vec<u16> = if uses(StratFeature::AgeBin) {
        (0..5).collect()
    } else {
        vec![u16::MAX]
    };
    let gender_values: Vec<u16> = if uses(StratFeature::Gender) {
        (0..2).collect()
    } else {
        vec![u16::MAX]
    };
    let region_values: Vec<u16> = if uses(StratFeature::Region) {
        region_marginal.keys().copied().collect()
    } else {
        vec![u16::MAX]
    };
    let comorbidity_values: Vec<u16> = if uses(StratFeature::Comorbidity) {
        comorbidity_marginal.keys().copied().collect()
    } else {
        vec![u16::MAX]
    };

    for &rv in &region_values {
        let region_name = if rv == u16::MAX || rv as usize >= regions.len() {
            None
        } else {
            Some(regions[rv as usize].as_str())
        };
        let region_p = if uses(StratFeature::Region) {
            region_marginal.get(&rv).copied().unwrap_or(0.0)
        } else {
            1.0
        };
        for &av in &age_values {
            for &gv in &gender_values {
                let demo_p = demographic_factor(demo, region_name, av, gv);
                for &cv in &comorbidity_values {
                    let com_p = if uses(StratFeature::Comorbidity) {
                        comorbidity_marginal.get(&cv).copied().unwrap_or(0.0)
                    } else {
                        1.0
                    };
                    let p = region_p * demo_p * com_p;
                    if p <= 0.0 {
                        continue;
                    }
                    let mut stratum = Vec::with_capacity(features.len());
                    for &f in features {
                        stratum.push(match f {
                            StratFeature::AgeBin => av,
                            StratFeature::Gender => gv,
                            StratFeature::Region => rv,
                            StratFeature::Comorbidity => cv,
                        });
                    }
                    *mass.entry(stratum).or_insert(0.0) += p;
                }
            }
        }
    }

    JointDistribution {
        mass,
        total: 1.0,
        space: features
            .iter()
            .map(|&f| feature_cardinality(f, regions))
            .collect(),
    }
}

/// Joint or marginal age-gender probability from the table, conditional on
/// a region when requested and available.
fn demographic_factor(
    demo: &DemographicTable,
    region: Option<&str>,
    age_value: u16,
    gender_value: u16,
) -> f64 {
    let cell = |bin: AgeBin, g: Gender| -> f64 {
        region
            .and_then(|r| demo.region_cell(r, bin, g))
            .unwrap_or_else(|| demo.national_cell(bin, g))
    };
    match (age_value, gender_value) {
        (u16::MAX, u16::MAX) => 1.0,
        (a, u16::MAX) => [Gender::Male, Gender::Female]
            .into_iter()
            .map(|g| cell(AgeBin::ALL[a as usize], g))
            .sum(),
        (u16::MAX, g) => AgeBin::ALL
            .iter()
            .map(|&b| cell(b, if g == 0 { Gender::Male } else { Gender::Female }))
            .sum(),
        (a, g) => cell(
            AgeBin::ALL[a as usize],
            if g == 0 { Gender::Male } else { Gender::Female },
        ),
    }
}

/// Per-member selection weights: `U(x) * P_census(stratum) / P_cohort(stratum)`.
///
/// Additive smoothing expresses both sides as counts on the cohort's scale
/// and adds the pseudo-count to each, so equal distributions keep weight
/// exactly `U(x)`. Zero-out assigns weight 0 whenever either side of the
/// ratio has no mass.
pub fn compute_weights(
    cohort: &DailyCohort,
    census: &JointDistribution,
    cohort_dist: &JointDistribution,
    cfg: &StratificationConfig,
    model: &RiskModel,
    enc: &Encoder,
    regions: &[String],
) -> Result<Vec<WeightedCandidate>> {
    if census.space != cohort_dist.space {
        return Err(Error::InvalidArgument(
            "census and cohort distributions cover different stratum spaces".into(),
        ));
    }
    let n = cohort_dist.total();
    let mut out = Vec::with_capacity(cohort.len());
    for m in &cohort.members {
        let stratum = stratum_of(m, &cfg.features, regions);
        let target_p = census.probability(&stratum);
        let cohort_p = cohort_dist.probability(&stratum);
        let ratio = match cfg.smoothing {
            Smoothing::ZeroOut => {
                if cohort_p <= 0.0 || target_p <= 0.0 {
                    0.0
                } else {
                    target_p / cohort_p
                }
            }
            Smoothing::Additive(lambda) => {
                (target_p * n + lambda) / (cohort_p * n + lambda)
            }
        };
        let u = utility(cfg.utility, model, enc, m);
        out.push(WeightedCandidate::new(m.id, u * ratio));
    }
    Ok(out)
}

/// Full stratified selection: estimate the cohort distribution, build
/// weights against the census target, and run weighted sampling without
/// replacement.
pub fn select_stratified(
    cohort: &DailyCohort,
    budget: usize,
    cfg: &StratificationConfig,
    demo: &DemographicTable,
    model: &RiskModel,
    enc: &Encoder,
    seed: u64,
) -> Result<SelectionResult> {
    cfg.validate()?;
    let regions: Vec<String> = demo.region_names().into_iter().map(String::from).collect();
    let cohort_dist = estimate_cohort_distribution(cohort, &cfg.features, &regions);
    let census = population_distribution(demo, cohort, &cfg.features, &regions);
    let candidates = compute_weights(cohort, &census, &cohort_dist, cfg, model, enc, &regions)?;
    let chosen = weighted_sample_without_replacement(&candidates, budget, seed)?;

    let weight_of: BTreeMap<u64, f64> = candidates.iter().map(|c| (c.id, c.weight)).collect();
    let total_weight: f64 = candidates.iter().map(|c| c.weight).sum();
    let mut result = SelectionResult::new(cohort.day, StrategyKind::Stratified);
    for id in chosen {
        let w = weight_of[&id];
        let (propensity, budgeted) = if budget == 1 {
            (w / total_weight, false)
        } else {
            (clamp_propensity(budget as f64 * w / total_weight), true)
        };
        result.selected.push(SelectedRecord {
            id,
            score: w,
            weight: w,
            propensity,
            budgeted_propensity: budgeted,
        });
    }
    Ok(result)
}
