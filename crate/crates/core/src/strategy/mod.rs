//! Daily selection strategies: bucket randomization, stratified reweighting,
//! budgeted delayed contextual bandit, and active learning.

pub mod active;
pub mod bandit;
pub mod bucket;
pub mod stratified;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which selection strategy drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    UniformBaseline,
    Bucket,
    Stratified,
    Bandit,
    ActiveUncertainty,
    ActiveDisagreement,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::UniformBaseline,
        StrategyKind::Bucket,
        StrategyKind::Stratified,
        StrategyKind::Bandit,
        StrategyKind::ActiveUncertainty,
        StrategyKind::ActiveDisagreement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::UniformBaseline => "uniform",
            StrategyKind::Bucket => "bucket",
            StrategyKind::Stratified => "stratified",
            StrategyKind::Bandit => "bandit",
            StrategyKind::ActiveUncertainty => "active-uncertainty",
            StrategyKind::ActiveDisagreement => "active-disagreement",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown strategy `{name}` (expected one of uniform, bucket, stratified, bandit, active-uncertainty, active-disagreement)"
                ))
            })
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Provenance for one selected individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedRecord {
    pub id: u64,
    /// The strategy's raw score for this individual (weight, probability,
    /// entropy, variance — whatever the strategy ranks by).
    pub score: f64,
    /// The sampling weight actually fed to the draw.
    pub weight: f64,
    /// Probability the logging process assigned to this selection. Exact for
    /// single draws and uniform-within-group draws; for budgeted multi-draws
    /// it is a convention and `budgeted_propensity` is set.
    pub propensity: f64,
    pub budgeted_propensity: bool,
}

/// The day's chosen set with per-individual provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub day: u32,
    pub strategy: StrategyKind,
    pub selected: Vec<SelectedRecord>,
    /// Set when mandatory critical-group testing pushed the total over the
    /// day's budget.
    pub mandatory_overflow: bool,
}

impl SelectionResult {
    pub fn new(day: u32, strategy: StrategyKind) -> Self {
        Self {
            day,
            strategy,
            selected: Vec::new(),
            mandatory_overflow: false,
        }
    }

    pub fn ids(&self) -> Vec<u64> {
        self.selected.iter().map(|r| r.id).collect()
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// Clamp a logged propensity into (0, 1]; importance-weighted consumers
/// require strictly positive values.
pub(crate) fn clamp_propensity(p: f64) -> f64 {
    p.clamp(1e-6, 1.0)
}
