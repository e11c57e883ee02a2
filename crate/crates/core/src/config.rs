//! Flat key-value configuration files: one `key = value` pair per line,
//! `#` comment lines, unknown keys rejected with the offending key path.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::Utility;
use crate::pooling::PoolingStrategy;
use crate::population::{DemographicSchema, SLOTS_PER_DAY};
use crate::sim::{DemographicsSource, Mode, SimulationConfig};
use crate::strategy::stratified::{Smoothing, StratFeature};
use crate::strategy::StrategyKind;

/// Parse the flat text into a key-value map. Later duplicates win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Strip optional `[...]` around a list value and split on commas.
fn list_items(value: &str) -> Vec<String> {
    let inner = value
        .trim()
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .unwrap_or(value);
    inner
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect()
}

struct Typed<'a> {
    map: &'a BTreeMap<String, String>,
}

impl<'a> Typed<'a> {
    fn get(&self, key: &str) -> Option<&'a str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::config(key, format!("cannot parse `{v}`"))
            }),
        }
    }

    fn parse_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Error::config(key, format!("expected true|false, got `{v}`"))),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "days",
    "population",
    "probe",
    "cohort",
    "budget",
    "strategy",
    "mode",
    "seed",
    "prevalence",
    "truth.symptomatic",
    "truth.risky",
    "truth.comorbidity",
    "truth.age",
    "rates.symptomatic",
    "rates.risky",
    "rates.comorbidity",
    "bias.symptomatic",
    "bias.over60",
    "arrival.slots",
    "demographics",
    "demographics.schema",
    "model.learning_rate",
    "bucket.split",
    "bucket.mandatory_x1",
    "strat.features",
    "strat.smoothing",
    "strat.lambda",
    "strat.utility",
    "bandit.epsilon",
    "bandit.temperature",
    "bandit.bootstrap_days",
    "bandit.reward_tp",
    "bandit.cost_fp",
    "bandit.soft_budget",
    "active.mode",
    "active.committee_size",
    "active.lambda_d",
    "active.use_utility",
    "pooling.enabled",
    "pooling.size",
    "pooling.strategy",
];

/// Build a full simulation configuration from a key-value map, starting from
/// defaults.
pub fn config_from_key_values(map: &BTreeMap<String, String>) -> Result<SimulationConfig> {
    for key in map.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::config(key, "unknown configuration key"));
        }
    }
    let t = Typed { map };
    let mut cfg = SimulationConfig::default();

    cfg.days = t.parse("days", cfg.days)?;
    cfg.population_size = t.parse("population", cfg.population_size)?;
    cfg.probe_size = t.parse("probe", cfg.probe_size)?;
    cfg.arrival.cohort_size = t.parse("cohort", cfg.arrival.cohort_size)?;
    cfg.seed = t.parse("seed", cfg.seed)?;

    if let Some(v) = t.get("budget") {
        let mut budgets = Vec::new();
        for item in list_items(v) {
            budgets.push(item.parse::<u64>().map_err(|_| {
                Error::config("budget", format!("cannot parse `{item}`"))
            })?);
        }
        if budgets.is_empty() {
            return Err(Error::config("budget", "needs at least one value"));
        }
        cfg.budgets = budgets;
    }

    if let Some(v) = t.get("strategy") {
        cfg.strategy = StrategyKind::parse(v).map_err(|e| Error::config("strategy", e.to_string()))?;
    }
    if let Some(v) = t.get("mode") {
        cfg.mode = match v {
            "offline" => Mode::Offline,
            "online" => Mode::Online,
            _ => return Err(Error::config("mode", format!("expected offline|online, got `{v}`"))),
        };
    }

    cfg.truth.base_prevalence = t.parse("prevalence", cfg.truth.base_prevalence)?;
    cfg.truth.log_odds_symptomatic = t.parse("truth.symptomatic", cfg.truth.log_odds_symptomatic)?;
    cfg.truth.log_odds_risky = t.parse("truth.risky", cfg.truth.log_odds_risky)?;
    cfg.truth.log_odds_comorbidity =
        t.parse("truth.comorbidity", cfg.truth.log_odds_comorbidity)?;
    cfg.truth.log_odds_age = t.parse("truth.age", cfg.truth.log_odds_age)?;

    cfg.rates.symptomatic = t.parse("rates.symptomatic", cfg.rates.symptomatic)?;
    cfg.rates.risky_history = t.parse("rates.risky", cfg.rates.risky_history)?;
    cfg.rates.comorbidity = t.parse("rates.comorbidity", cfg.rates.comorbidity)?;
    cfg.arrival.symptomatic_bias = t.parse("bias.symptomatic", cfg.arrival.symptomatic_bias)?;
    cfg.arrival.over60_bias = t.parse("bias.over60", cfg.arrival.over60_bias)?;

    if let Some(v) = t.get("arrival.slots") {
        let items = list_items(v);
        if items.len() != SLOTS_PER_DAY {
            return Err(Error::config(
                "arrival.slots",
                format!("expected {SLOTS_PER_DAY} weights, got {}", items.len()),
            ));
        }
        for (i, item) in items.iter().enumerate() {
            cfg.arrival.slot_weights[i] = item
                .parse()
                .map_err(|_| Error::config("arrival.slots", format!("cannot parse `{item}`")))?;
        }
    }

    match (t.get("demographics"), t.get("demographics.schema")) {
        (None, None) => {}
        (Some(path), schema) => {
            let schema = match schema.unwrap_or("national") {
                "national" => DemographicSchema::National,
                "statewise" => DemographicSchema::Statewise,
                other => {
                    return Err(Error::config(
                        "demographics.schema",
                        format!("expected national|statewise, got `{other}`"),
                    ))
                }
            };
            cfg.demographics = DemographicsSource::Path {
                path: path.to_string(),
                schema,
            };
        }
        (None, Some(_)) => {
            return Err(Error::config(
                "demographics.schema",
                "set `demographics` to a file path first",
            ))
        }
    }

    cfg.model_learning_rate = t.parse("model.learning_rate", cfg.model_learning_rate)?;

    if let Some(v) = t.get("bucket.split") {
        let items = list_items(v);
        if items.len() != 4 {
            return Err(Error::config(
                "bucket.split",
                format!("expected 4 fractions, got {}", items.len()),
            ));
        }
        for (i, item) in items.iter().enumerate() {
            cfg.bucket_split[i] = item
                .parse()
                .map_err(|_| Error::config("bucket.split", format!("cannot parse `{item}`")))?;
        }
    }
    cfg.bucket_mandatory_x1 = t.parse_bool("bucket.mandatory_x1", cfg.bucket_mandatory_x1)?;

    if let Some(v) = t.get("strat.features") {
        let mut features = Vec::new();
        for item in list_items(v) {
            features.push(
                StratFeature::parse(&item)
                    .map_err(|e| Error::config("strat.features", e.to_string()))?,
            );
        }
        cfg.strat.features = features;
    }
    let lambda = t.parse("strat.lambda", 0.5f64)?;
    if let Some(v) = t.get("strat.smoothing") {
        cfg.strat.smoothing = match v {
            "zero" => Smoothing::ZeroOut,
            "additive" => Smoothing::Additive(lambda),
            _ => {
                return Err(Error::config(
                    "strat.smoothing",
                    format!("expected zero|additive, got `{v}`"),
                ))
            }
        };
    } else if t.get("strat.lambda").is_some() {
        cfg.strat.smoothing = Smoothing::Additive(lambda);
    }
    if let Some(v) = t.get("strat.utility") {
        cfg.strat.utility = parse_utility(v).map_err(|e| Error::config("strat.utility", e))?;
    }

    cfg.bandit_epsilon = t.parse("bandit.epsilon", cfg.bandit_epsilon)?;
    cfg.bandit_temperature = t.parse("bandit.temperature", cfg.bandit_temperature)?;
    cfg.bandit_bootstrap_days = t.parse("bandit.bootstrap_days", cfg.bandit_bootstrap_days)?;
    cfg.cost.reward_true_positive = t.parse("bandit.reward_tp", cfg.cost.reward_true_positive)?;
    cfg.cost.cost_false_positive = t.parse("bandit.cost_fp", cfg.cost.cost_false_positive)?;
    cfg.bandit_soft_budget = t.parse_bool("bandit.soft_budget", cfg.bandit_soft_budget)?;

    if let Some(v) = t.get("active.mode") {
        cfg.strategy = match (cfg.strategy, v) {
            (StrategyKind::ActiveUncertainty | StrategyKind::ActiveDisagreement, "uncertainty") => {
                StrategyKind::ActiveUncertainty
            }
            (StrategyKind::ActiveUncertainty | StrategyKind::ActiveDisagreement, "disagreement") => {
                StrategyKind::ActiveDisagreement
            }
            (other, "uncertainty" | "disagreement") => other,
            _ => {
                return Err(Error::config(
                    "active.mode",
                    format!("expected uncertainty|disagreement, got `{v}`"),
                ))
            }
        };
    }
    cfg.active.committee_size = t.parse("active.committee_size", cfg.active.committee_size)?;
    cfg.active.lambda_d = t.parse("active.lambda_d", cfg.active.lambda_d)?;
    if t.parse_bool("active.use_utility", false)? {
        cfg.active.utility = Some(cfg.strat.utility);
    }

    cfg.pooling_enabled = t.parse_bool("pooling.enabled", cfg.pooling_enabled)?;
    cfg.pooling_size = t.parse("pooling.size", cfg.pooling_size)?;
    if let Some(v) = t.get("pooling.strategy") {
        cfg.pooling_strategy =
            PoolingStrategy::parse(v).map_err(|e| Error::config("pooling.strategy", e.to_string()))?;
    }

    cfg.validate()?;
    Ok(cfg)
}

fn parse_utility(name: &str) -> std::result::Result<Utility, String> {
    match name {
        "risk" => Ok(Utility::Risk),
        "entropy" => Ok(Utility::Entropy),
        "uniform" => Ok(Utility::Uniform),
        _ => Err(format!("expected risk|entropy|uniform, got `{name}`")),
    }
}

/// Load a simulation configuration from a file.
pub fn load_config(path: &std::path::Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path)?;
    config_from_key_values(&parse_key_values(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_defaults_from_empty_text() {
        let cfg = config_from_key_values(&parse_key_values("").unwrap()).unwrap();
        assert_eq!(cfg, SimulationConfig::default());
    }

    #[test]
    fn parses_typical_file() {
        let text = "
# a comment
days = 10
strategy = bandit
budget = [20, 30]
bucket.split = 0.4,0.3,0.2,0.1
strat.features = gender, age_bin
pooling.enabled = true
pooling.strategy = binary
";
        let cfg = config_from_key_values(&parse_key_values(text).unwrap()).unwrap();
        assert_eq!(cfg.days, 10);
        assert_eq!(cfg.strategy, StrategyKind::Bandit);
        assert_eq!(cfg.budgets, vec![20, 30]);
        assert!(cfg.pooling_enabled);
        assert_eq!(cfg.pooling_strategy, PoolingStrategy::BinarySplit);
    }

    #[test]
    fn unknown_key_carries_path() {
        let err = config_from_key_values(&parse_key_values("bogus.key = 1").unwrap());
        match err {
            Err(Error::Config { key, .. }) => assert_eq!(key, "bogus.key"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn bad_value_carries_path() {
        let err = config_from_key_values(&parse_key_values("days = soon").unwrap());
        match err {
            Err(Error::Config { key, .. }) => assert_eq!(key, "days"),
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
