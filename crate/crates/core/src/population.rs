//! Synthetic populations, daily arrival cohorts, demographic reference
//! tables, and the infection oracle.
//!
//! The oracle owns the hidden ground truth: individuals carry their infection
//! status as a private field that no selection strategy can read. Labels are
//! released only for individuals that were actually sent for testing, plus a
//! metrics-only authorization used by the report side of the simulator.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::sampling::{weighted_sample_without_replacement, WeightedCandidate};
use crate::seed::derive_seed;

pub const SLOTS_PER_DAY: usize = 6;

/// Coarse age bins used for stratification and demographic targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBin {
    Under20,
    From20To40,
    From40To60,
    From60To80,
    Over80,
}

impl AgeBin {
    pub const ALL: [AgeBin; 5] = [
        AgeBin::Under20,
        AgeBin::From20To40,
        AgeBin::From40To60,
        AgeBin::From60To80,
        AgeBin::Over80,
    ];

    pub fn from_age(age: u8) -> Self {
        match age {
            0..=19 => AgeBin::Under20,
            20..=39 => AgeBin::From20To40,
            40..=59 => AgeBin::From40To60,
            60..=79 => AgeBin::From60To80,
            _ => AgeBin::Over80,
        }
    }

    pub fn index(self) -> usize {
        match self {
            AgeBin::Under20 => 0,
            AgeBin::From20To40 => 1,
            AgeBin::From40To60 => 2,
            AgeBin::From60To80 => 3,
            AgeBin::Over80 => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeBin::Under20 => "<20",
            AgeBin::From20To40 => "20-40",
            AgeBin::From40To60 => "40-60",
            AgeBin::From60To80 => "60-80",
            AgeBin::Over80 => ">80",
        }
    }

    /// Uniform age draw within the bin.
    fn sample_age(self, rng: &mut ChaCha8Rng) -> u8 {
        let (lo, hi) = match self {
            AgeBin::Under20 => (0u8, 19u8),
            AgeBin::From20To40 => (20, 39),
            AgeBin::From40To60 => (40, 59),
            AgeBin::From60To80 => (60, 79),
            AgeBin::Over80 => (80, 100),
        };
        rng.random_range(lo..=hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn index(self) -> usize {
        match self {
            Gender::Male => 0,
            Gender::Female => 1,
        }
    }
}

/// One registrant. The infection status is deliberately private: selection
/// strategies receive `Individual` values but can only learn labels through
/// the [`InfectionOracle`] after a selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub age: u8,
    pub gender: Gender,
    pub region: String,
    pub symptomatic: bool,
    pub risky_history: bool,
    pub comorbidity: bool,
    /// Opaque extension features; empty in the default feature set.
    pub extras: Vec<f64>,
    hidden_infected: bool,
}

impl Individual {
    pub fn new(
        id: u64,
        age: u8,
        gender: Gender,
        region: impl Into<String>,
        symptomatic: bool,
        risky_history: bool,
        comorbidity: bool,
    ) -> Self {
        assert!(age <= 100, "age out of range");
        Self {
            id,
            age,
            gender,
            region: region.into(),
            symptomatic,
            risky_history,
            comorbidity,
            extras: Vec::new(),
            hidden_infected: false,
        }
    }

    /// Sets the hidden ground truth. Write-only: there is no getter.
    pub fn with_infection(mut self, infected: bool) -> Self {
        self.hidden_infected = infected;
        self
    }

    pub fn age_bin(&self) -> AgeBin {
        AgeBin::from_age(self.age)
    }
}

/// The set of individuals arriving on one day, in arrival order, with one
/// time slot (six 4-hour windows) per member.
#[derive(Debug, Clone)]
pub struct DailyCohort {
    pub day: u32,
    pub members: Vec<Individual>,
    slots: BTreeMap<u64, u8>,
}

impl DailyCohort {
    pub fn new(day: u32, members: Vec<Individual>, slots: BTreeMap<u64, u8>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Validation("cohort must be non-empty".into()));
        }
        for m in &members {
            match slots.get(&m.id) {
                Some(&s) if (s as usize) < SLOTS_PER_DAY => {}
                Some(&s) => {
                    return Err(Error::Validation(format!("slot {s} out of range")));
                }
                None => {
                    return Err(Error::Validation(format!("member {} has no slot", m.id)));
                }
            }
        }
        Ok(Self { day, members, slots })
    }

    pub fn slot_of(&self, id: u64) -> Option<u8> {
        self.slots.get(&id).copied()
    }

    pub fn slot_counts(&self) -> [usize; SLOTS_PER_DAY] {
        let mut counts = [0usize; SLOTS_PER_DAY];
        for m in &self.members {
            counts[self.slots[&m.id] as usize] += 1;
        }
        counts
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.members.iter().map(|m| m.id).collect()
    }
}

/// Which CSV layout to ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemographicSchema {
    National,
    Statewise,
}

/// Joint (age bin, gender) proportions, national plus optional per-region
/// tables. Cells are probabilities; the national table sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DemographicTable {
    national: [[f64; 2]; 5],
    regions: BTreeMap<String, [[f64; 2]; 5]>,
}

const NATIONAL_CSV: &str = include_str!("../data/national_age_gender.csv");
const STATEWISE_CSV: &str = include_str!("../data/statewise_sex_age60.csv");

// Fine rows of the national table in file order: (label, coarse bin index).
const FINE_BINS: [(&str, usize); 18] = [
    ("0-4", 0),
    ("5-9", 0),
    ("10-14", 0),
    ("15-19", 0),
    ("20-24", 1),
    ("25-29", 1),
    ("30-34", 1),
    ("35-39", 1),
    ("40-44", 2),
    ("45-49", 2),
    ("50-54", 2),
    ("55-59", 2),
    ("60-64", 3),
    ("65-69", 3),
    ("70-74", 3),
    ("75-79", 3),
    ("80-84", 4),
    ("85+", 4),
];

impl DemographicTable {
    /// The shipped national age-by-gender table.
    pub fn builtin_national() -> Self {
        parse_national(NATIONAL_CSV).expect("embedded national table is valid")
    }

    /// The shipped statewise table (sex ratios and 60+ shares), expanded to
    /// per-state joints using the national within-gender age shape.
    pub fn builtin_statewise() -> Self {
        parse_statewise(STATEWISE_CSV).expect("embedded statewise table is valid")
    }

    pub fn national_cell(&self, bin: AgeBin, gender: Gender) -> f64 {
        self.national[bin.index()][gender.index()]
    }

    pub fn region_cell(&self, region: &str, bin: AgeBin, gender: Gender) -> Option<f64> {
        self.regions
            .get(region)
            .map(|t| t[bin.index()][gender.index()])
    }

    pub fn region_names(&self) -> Vec<&str> {
        self.regions.keys().map(String::as_str).collect()
    }

    pub fn has_regions(&self) -> bool {
        !self.regions.is_empty()
    }

    /// National marginal over age bins.
    pub fn age_marginal(&self) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (i, row) in self.national.iter().enumerate() {
            out[i] = row[0] + row[1];
        }
        out
    }

    /// National marginal over gender.
    pub fn gender_marginal(&self) -> [f64; 2] {
        let mut out = [0.0; 2];
        for row in &self.national {
            out[0] += row[0];
            out[1] += row[1];
        }
        out
    }

    fn validate(cells: &[[f64; 2]; 5]) -> Result<()> {
        let mut total = 0.0;
        for row in cells {
            for &v in row {
                if v < 0.0 {
                    return Err(Error::Validation("negative proportion".into()));
                }
                total += v;
            }
        }
        if total <= 0.0 {
            return Err(Error::Validation("all-zero table".into()));
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "table mass {total} not normalized"
            )));
        }
        Ok(())
    }
}

/// Ingest a demographic CSV in one of the two shipped schemas.
pub fn ingest_demographic_table(
    path: &std::path::Path,
    schema: DemographicSchema,
) -> Result<DemographicTable> {
    let text = std::fs::read_to_string(path)?;
    match schema {
        DemographicSchema::National => parse_national(&text),
        DemographicSchema::Statewise => parse_statewise(&text),
    }
}

fn split_csv_line(line: &str) -> Vec<String> {
    line.split(',').map(|f| f.trim().to_string()).collect()
}

fn parse_field(field: &str, context: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Schema(format!("{context}: `{field}` is not numeric")))
}

/// Parse the national schema: `age_bin,total,male,female`, one row per fine
/// five-year bin. Coarse bins are built by summing fine rows, and male and
/// female columns are renormalized into one joint distribution.
pub fn parse_national(text: &str) -> Result<DemographicTable> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty national table".into()))?;
    let cols = split_csv_line(header);
    if cols != ["age_bin", "total", "male", "female"] {
        return Err(Error::Schema(format!(
            "national header must be `age_bin,total,male,female`, got `{header}`"
        )));
    }

    let mut seen: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for line in lines {
        let fields = split_csv_line(line);
        if fields.len() != 4 {
            return Err(Error::Schema(format!(
                "national row needs 4 columns: `{line}`"
            )));
        }
        let label = fields[0].as_str();
        if !FINE_BINS.iter().any(|(l, _)| *l == label) {
            return Err(Error::Schema(format!("unknown age bin `{label}`")));
        }
        let male = parse_field(&fields[2], "male column")?;
        let female = parse_field(&fields[3], "female column")?;
        if male < 0.0 || female < 0.0 {
            return Err(Error::Validation(format!(
                "negative proportion in row `{label}`"
            )));
        }
        let key = FINE_BINS.iter().find(|(l, _)| *l == label).unwrap().0;
        if seen.insert(key, (male, female)).is_some() {
            return Err(Error::Schema(format!("duplicate age bin `{label}`")));
        }
    }
    if seen.len() != FINE_BINS.len() {
        let missing: Vec<&str> = FINE_BINS
            .iter()
            .map(|(l, _)| *l)
            .filter(|l| !seen.contains_key(l))
            .collect();
        return Err(Error::Schema(format!("missing age bins: {missing:?}")));
    }

    let mut cells = [[0.0f64; 2]; 5];
    for (label, coarse) in FINE_BINS {
        let (m, f) = seen[label];
        cells[coarse][0] += m;
        cells[coarse][1] += f;
    }
    let total: f64 = cells.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::Validation("all-zero table".into()));
    }
    for row in &mut cells {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    DemographicTable::validate(&cells)?;
    Ok(DemographicTable {
        national: cells,
        regions: BTreeMap::new(),
    })
}

/// Parse the statewise schema: `state,sex_ratio,pct60_total,pct60_male,
/// pct60_female` with missing values as empty fields.
///
/// Each state's joint is assembled from its sex ratio (gender marginal) and
/// its within-gender 60+ shares; the split of mass across bins inside the
/// under-60 and over-60 ranges follows the national within-gender shape.
/// Missing fields fall back to the `India` row, or to the national table
/// when that row is absent.
pub fn parse_statewise(text: &str) -> Result<DemographicTable> {
    let national = DemographicTable::builtin_national();
    let gender_marginal = national.gender_marginal();

    // Within-gender national shares per coarse bin.
    let mut within = [[0.0f64; 5]; 2];
    for g in 0..2 {
        for (b, row) in national.national.iter().enumerate() {
            within[g][b] = row[g] / gender_marginal[g];
        }
    }
    let under_mass: [f64; 2] = [
        within[0][0] + within[0][1] + within[0][2],
        within[1][0] + within[1][1] + within[1][2],
    ];
    let over_mass: [f64; 2] = [within[0][3] + within[0][4], within[1][3] + within[1][4]];

    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty statewise table".into()))?;
    let cols = split_csv_line(header);
    if cols != ["state", "sex_ratio", "pct60_total", "pct60_male", "pct60_female"] {
        return Err(Error::Schema(format!(
            "statewise header must be `state,sex_ratio,pct60_total,pct60_male,pct60_female`, got `{header}`"
        )));
    }

    struct Row {
        state: String,
        sex_ratio: Option<f64>,
        pct60_male: Option<f64>,
        pct60_female: Option<f64>,
    }

    let mut rows = Vec::new();
    for line in lines {
        let fields = split_csv_line(line);
        if fields.len() != 5 {
            return Err(Error::Schema(format!(
                "statewise row needs 5 columns: `{line}`"
            )));
        }
        let opt = |s: &str, ctx: &str| -> Result<Option<f64>> {
            if s.is_empty() || s == "-" {
                Ok(None)
            } else {
                let v = parse_field(s, ctx)?;
                if v < 0.0 {
                    return Err(Error::Validation(format!("negative value in {ctx}")));
                }
                Ok(Some(v))
            }
        };
        rows.push(Row {
            state: fields[0].clone(),
            sex_ratio: opt(&fields[1], "sex_ratio")?,
            pct60_male: opt(&fields[3], "pct60_male")?,
            pct60_female: opt(&fields[4], "pct60_female")?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Validation("statewise table has no rows".into()));
    }

    // Fallbacks from the India row when present, else from the national table.
    let national_over: [f64; 2] = [over_mass[0] * 100.0, over_mass[1] * 100.0];
    let india = rows.iter().find(|r| r.state == "India");
    let fb_ratio = india.and_then(|r| r.sex_ratio).unwrap_or(943.0);
    let fb_p60_m = india
        .and_then(|r| r.pct60_male)
        .unwrap_or(national_over[0]);
    let fb_p60_f = india
        .and_then(|r| r.pct60_female)
        .unwrap_or(national_over[1]);

    let mut regions = BTreeMap::new();
    for row in &rows {
        let ratio = row.sex_ratio.unwrap_or(fb_ratio);
        let p_female = ratio / (1000.0 + ratio);
        let p_gender = [1.0 - p_female, p_female];
        let share60 = [
            row.pct60_male.unwrap_or(fb_p60_m) / 100.0,
            row.pct60_female.unwrap_or(fb_p60_f) / 100.0,
        ];
        let mut cells = [[0.0f64; 2]; 5];
        for g in 0..2 {
            for b in 0..3 {
                cells[b][g] = p_gender[g] * (1.0 - share60[g]) * within[g][b] / under_mass[g];
            }
            for b in 3..5 {
                cells[b][g] = p_gender[g] * share60[g] * within[g][b] / over_mass[g];
            }
        }
        regions.insert(row.state.clone(), cells);
    }

    Ok(DemographicTable {
        national: national.national,
        regions,
    })
}

/// Hidden infection model: base prevalence with log-odds adjustments on the
/// observable features. With all adjustments zero every individual is
/// infected with probability exactly `base_prevalence`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthModel {
    pub base_prevalence: f64,
    pub log_odds_symptomatic: f64,
    pub log_odds_risky: f64,
    pub log_odds_comorbidity: f64,
    /// Slope against (age/100 - 0.5), so the population mean stays near base.
    pub log_odds_age: f64,
    pub seed: u64,
}

impl Default for GroundTruthModel {
    fn default() -> Self {
        Self {
            base_prevalence: 0.02,
            log_odds_symptomatic: 2.0,
            log_odds_risky: 1.5,
            log_odds_comorbidity: 0.5,
            log_odds_age: 1.0,
            seed: 0,
        }
    }
}

impl GroundTruthModel {
    pub fn infection_probability(
        &self,
        age: u8,
        symptomatic: bool,
        risky: bool,
        comorbidity: bool,
    ) -> f64 {
        if self.base_prevalence <= 0.0 {
            return 0.0;
        }
        if self.base_prevalence >= 1.0 {
            return 1.0;
        }
        let mut logit = (self.base_prevalence / (1.0 - self.base_prevalence)).ln();
        if symptomatic {
            logit += self.log_odds_symptomatic;
        }
        if risky {
            logit += self.log_odds_risky;
        }
        if comorbidity {
            logit += self.log_odds_comorbidity;
        }
        logit += self.log_odds_age * (f64::from(age) / 100.0 - 0.5);
        1.0 / (1.0 + (-logit).exp())
    }
}

/// Base rates for the observable boolean features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRates {
    pub symptomatic: f64,
    pub risky_history: f64,
    pub comorbidity: f64,
}

impl Default for FeatureRates {
    fn default() -> Self {
        Self {
            symptomatic: 0.12,
            risky_history: 0.06,
            comorbidity: 0.15,
        }
    }
}

/// Generate a synthetic population whose (age bin, gender) frequencies follow
/// the national table. Regions, when the table carries them, are assigned
/// uniformly; demographics are always drawn from the national joint so the
/// fidelity contract holds regardless of the region list.
pub fn generate_population(
    size: usize,
    demo: &DemographicTable,
    truth: &GroundTruthModel,
    rates: &FeatureRates,
    seed: u64,
) -> Result<Vec<Individual>> {
    if size == 0 {
        return Err(Error::InvalidArgument("population size must be >= 1".into()));
    }
    let mut demo_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, "population"));
    let mut truth_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(seed ^ truth.seed, 0, "infection"));

    // Cumulative distribution over the 10 (bin, gender) cells.
    let mut cdf = Vec::with_capacity(10);
    let mut acc = 0.0;
    for bin in AgeBin::ALL {
        for gender in [Gender::Male, Gender::Female] {
            acc += demo.national_cell(bin, gender);
            cdf.push((acc, bin, gender));
        }
    }
    let total = acc;

    let regions = demo.region_names();
    let mut pop = Vec::with_capacity(size);
    for id in 0..size as u64 {
        let u: f64 = demo_rng.random::<f64>() * total;
        let &(_, bin, gender) = cdf
            .iter()
            .find(|(c, _, _)| u < *c)
            .unwrap_or(cdf.last().unwrap());
        let age = bin.sample_age(&mut demo_rng);
        let region = if regions.is_empty() {
            "national".to_string()
        } else {
            regions[demo_rng.random_range(0..regions.len())].to_string()
        };
        let symptomatic = demo_rng.random::<f64>() < rates.symptomatic;
        let risky = demo_rng.random::<f64>() < rates.risky_history;
        let comorbidity = demo_rng.random::<f64>() < rates.comorbidity;
        let p = truth.infection_probability(age, symptomatic, risky, comorbidity);
        let infected = truth_rng.random::<f64>() < p;
        pop.push(
            Individual::new(id, age, gender, region, symptomatic, risky, comorbidity)
                .with_infection(infected),
        );
    }
    Ok(pop)
}

/// Arrival process for one day: target cohort size, self-selection biases
/// (multiplicative odds of arriving for symptomatic and for 60+ individuals),
/// and slot frequencies over the six 4-hour windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    pub cohort_size: usize,
    pub symptomatic_bias: f64,
    pub over60_bias: f64,
    pub slot_weights: [f64; SLOTS_PER_DAY],
}

impl Default for ArrivalModel {
    fn default() -> Self {
        Self {
            cohort_size: 1000,
            symptomatic_bias: 3.0,
            over60_bias: 1.0,
            slot_weights: [1.0; SLOTS_PER_DAY],
        }
    }
}

/// Draw the day's cohort from the eligible pool. Returns `None` when the
/// pool is empty (the simulator skips the day). Symptomatic individuals are
/// over-weighted by the bias knob; each arrival gets a slot drawn from the
/// slot weights, and members come back sorted by slot in arrival order.
pub fn draw_daily_cohort(
    eligible: &[&Individual],
    day: u32,
    arrival: &ArrivalModel,
    seed: u64,
) -> Option<DailyCohort> {
    if eligible.is_empty() {
        return None;
    }
    let candidates: Vec<WeightedCandidate> = eligible
        .iter()
        .map(|ind| {
            let mut w = 1.0;
            if ind.symptomatic {
                w *= arrival.symptomatic_bias;
            }
            if ind.age >= 60 {
                w *= arrival.over60_bias;
            }
            WeightedCandidate::new(ind.id, w)
        })
        .collect();
    let n = arrival.cohort_size.min(eligible.len());
    let chosen = weighted_sample_without_replacement(&candidates, n, derive_seed(seed, day, "arrivals"))
        .expect("arrival weights are non-negative");

    let by_id: BTreeMap<u64, &Individual> = eligible.iter().map(|i| (i.id, *i)).collect();
    let mut slot_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, day, "slots"));
    let slot_total: f64 = arrival.slot_weights.iter().sum();
    let mut arrivals: Vec<(u8, Individual)> = chosen
        .iter()
        .map(|id| {
            let u: f64 = slot_rng.random::<f64>() * slot_total;
            let mut acc = 0.0;
            let mut slot = (SLOTS_PER_DAY - 1) as u8;
            for (s, &w) in arrival.slot_weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    slot = s as u8;
                    break;
                }
            }
            (slot, (*by_id[id]).clone())
        })
        .collect();
    arrivals.sort_by_key(|(slot, _)| *slot);

    let slots: BTreeMap<u64, u8> = arrivals.iter().map(|(s, ind)| (ind.id, *s)).collect();
    let members: Vec<Individual> = arrivals.into_iter().map(|(_, ind)| ind).collect();
    Some(DailyCohort::new(day, members, slots).expect("constructed cohort is valid"))
}

/// The only reader of hidden infection status. Labels are released for
/// authorized (selected) individuals; aggregate prevalence queries exist for
/// the report side of the simulator and never flow into strategies.
#[derive(Debug, Clone)]
pub struct InfectionOracle {
    truth: BTreeMap<u64, bool>,
    authorized: BTreeSet<u64>,
}

impl InfectionOracle {
    pub fn for_population(pop: &[Individual]) -> Self {
        Self {
            truth: pop.iter().map(|i| (i.id, i.hidden_infected)).collect(),
            authorized: BTreeSet::new(),
        }
    }

    /// Build an oracle from explicit labels (test harnesses).
    pub fn from_labels(labels: impl IntoIterator<Item = (u64, bool)>) -> Self {
        Self {
            truth: labels.into_iter().collect(),
            authorized: BTreeSet::new(),
        }
    }

    pub fn authorize(&mut self, id: u64) {
        self.authorized.insert(id);
    }

    pub fn authorize_many(&mut self, ids: impl IntoIterator<Item = u64>) {
        self.authorized.extend(ids);
    }

    /// Test result for a selected individual: 1 infected, 0 not. Idempotent.
    pub fn label(&self, id: u64) -> Result<u8> {
        if !self.authorized.contains(&id) {
            return Err(Error::ContractViolation(format!(
                "individual {id} was never selected for testing"
            )));
        }
        match self.truth.get(&id) {
            Some(&infected) => Ok(u8::from(infected)),
            None => Err(Error::ContractViolation(format!("unknown individual {id}"))),
        }
    }

    /// Report-side aggregate: number of infected among `ids`.
    pub fn ground_truth_positives(&self, ids: &[u64]) -> usize {
        ids.iter()
            .filter(|id| self.truth.get(id).copied().unwrap_or(false))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tv_distance;

    #[test]
    fn national_header_rejected_when_column_missing() {
        let err = parse_national("age_bin,total,male\n0-4,8.3,8.5\n");
        assert!(matches!(err, Err(Error::Schema(_))));
    }

    #[test]
    fn national_negative_proportion_rejected() {
        let mut text = String::from("age_bin,total,male,female\n");
        for (label, _) in FINE_BINS {
            text.push_str(&format!("{label},1,1,{}\n", if label == "0-4" { "-1" } else { "1" }));
        }
        let err = parse_national(&text);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn national_all_zero_rejected() {
        let mut text = String::from("age_bin,total,male,female\n");
        for (label, _) in FINE_BINS {
            text.push_str(&format!("{label},0,0,0\n"));
        }
        let err = parse_national(&text);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn national_single_cell_becomes_point_mass() {
        let mut text = String::from("age_bin,total,male,female\n");
        for (label, _) in FINE_BINS {
            let male = if label == "25-29" { "7" } else { "0" };
            text.push_str(&format!("{label},0,{male},0\n"));
        }
        let table = parse_national(&text).unwrap();
        assert!((table.national_cell(AgeBin::From20To40, Gender::Male) - 1.0).abs() < 1e-12);
        assert_eq!(table.national_cell(AgeBin::Under20, Gender::Female), 0.0);
    }

    #[test]
    fn builtin_national_under20_male_share() {
        // Male <20 mass: fine rows 0-4 through 15-19 of the male column,
        // renormalized against the whole table (both columns sum to 100
        // each, so the joint divisor is 200).
        let table = DemographicTable::builtin_national();
        let expect = (8.5 + 8.9 + 9.6 + 10.5) / 200.0;
        assert!((table.national_cell(AgeBin::Under20, Gender::Male) - expect).abs() < 1e-9);
        let mut total = 0.0;
        for b in AgeBin::ALL {
            for g in [Gender::Male, Gender::Female] {
                total += table.national_cell(b, g);
            }
        }
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn statewise_builtin_regions_normalized() {
        let table = DemographicTable::builtin_statewise();
        assert_eq!(table.region_names().len(), 37);
        for region in table.region_names() {
            let mut total = 0.0;
            for b in AgeBin::ALL {
                for g in [Gender::Male, Gender::Female] {
                    total += table.region_cell(region, b, g).unwrap();
                }
            }
            assert!((total - 1.0).abs() < 1e-9, "{region} sums to {total}");
        }
        // Kerala has more women than men; Haryana the opposite.
        let share_f = |r: &str| {
            AgeBin::ALL
                .iter()
                .map(|&b| table.region_cell(r, b, Gender::Female).unwrap())
                .sum::<f64>()
        };
        assert!(share_f("Kerala") > 0.5);
        assert!(share_f("Haryana") < 0.5);
    }

    #[test]
    fn ingest_from_files_on_disk() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
        let national = ingest_demographic_table(
            &dir.join("national_age_gender.csv"),
            DemographicSchema::National,
        )
        .unwrap();
        assert_eq!(national, DemographicTable::builtin_national());
        let statewise = ingest_demographic_table(
            &dir.join("statewise_sex_age60.csv"),
            DemographicSchema::Statewise,
        )
        .unwrap();
        assert_eq!(statewise, DemographicTable::builtin_statewise());
        assert!(matches!(
            ingest_demographic_table(
                std::path::Path::new("/nonexistent/table.csv"),
                DemographicSchema::National
            ),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn generation_zero_prevalence_means_no_infected() {
        let demo = DemographicTable::builtin_national();
        let truth = GroundTruthModel {
            base_prevalence: 0.0,
            ..GroundTruthModel::default()
        };
        let pop =
            generate_population(2000, &demo, &truth, &FeatureRates::default(), 11).unwrap();
        let oracle = InfectionOracle::for_population(&pop);
        let ids: Vec<u64> = pop.iter().map(|i| i.id).collect();
        assert_eq!(oracle.ground_truth_positives(&ids), 0);
    }

    #[test]
    fn generation_is_deterministic() {
        let demo = DemographicTable::builtin_national();
        let truth = GroundTruthModel::default();
        let rates = FeatureRates::default();
        let a = generate_population(500, &demo, &truth, &rates, 99).unwrap();
        let b = generate_population(500, &demo, &truth, &rates, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generation_size_zero_rejected() {
        let demo = DemographicTable::builtin_national();
        let err = generate_population(
            0,
            &demo,
            &GroundTruthModel::default(),
            &FeatureRates::default(),
            1,
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn generation_matches_table_at_scale() {
        // Demographic fidelity: TV <= 0.02 at 1e5, and the <20 share within
        // one percentage point of the table's.
        let demo = DemographicTable::builtin_national();
        let pop = generate_population(
            100_000,
            &demo,
            &GroundTruthModel::default(),
            &FeatureRates::default(),
            7,
        )
        .unwrap();
        let mut counts: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for ind in &pop {
            *counts
                .entry((ind.age_bin().index(), ind.gender.index()))
                .or_insert(0.0) += 1.0;
        }
        let n = pop.len() as f64;
        let empirical: BTreeMap<(usize, usize), f64> =
            counts.into_iter().map(|(k, v)| (k, v / n)).collect();
        let mut target = BTreeMap::new();
        for bin in AgeBin::ALL {
            for gender in [Gender::Male, Gender::Female] {
                target.insert(
                    (bin.index(), gender.index()),
                    demo.national_cell(bin, gender),
                );
            }
        }
        assert!(tv_distance(&empirical, &target) <= 0.02);

        let under20 = pop.iter().filter(|i| i.age < 20).count() as f64 / n;
        let table_under20: f64 = [Gender::Male, Gender::Female]
            .into_iter()
            .map(|g| demo.national_cell(AgeBin::Under20, g))
            .sum();
        assert!((under20 - table_under20).abs() < 0.01);
    }

    #[test]
    fn cohort_uniform_slots_expectation() {
        let demo = DemographicTable::builtin_national();
        let pop = generate_population(
            5000,
            &demo,
            &GroundTruthModel::default(),
            &FeatureRates::default(),
            3,
        )
        .unwrap();
        let refs: Vec<&Individual> = pop.iter().collect();
        let arrival = ArrivalModel {
            cohort_size: 600,
            symptomatic_bias: 1.0,
            ..ArrivalModel::default()
        };
        let cohort = draw_daily_cohort(&refs, 1, &arrival, 21).unwrap();
        assert_eq!(cohort.len(), 600);
        for count in cohort.slot_counts() {
            // each slot expects 100; allow generous sampling noise
            assert!((60..=140).contains(&count), "slot count {count}");
        }
    }

    #[test]
    fn cohort_bias_raises_symptomatic_share() {
        let demo = DemographicTable::builtin_national();
        let pop = generate_population(
            20_000,
            &demo,
            &GroundTruthModel::default(),
            &FeatureRates::default(),
            5,
        )
        .unwrap();
        let refs: Vec<&Individual> = pop.iter().collect();
        let pop_share =
            pop.iter().filter(|i| i.symptomatic).count() as f64 / pop.len() as f64;

        let biased = ArrivalModel {
            cohort_size: 300,
            symptomatic_bias: 3.0,
            ..ArrivalModel::default()
        };
        let mut above = 0;
        let draws = 1000;
        for rep in 0..draws {
            let cohort = draw_daily_cohort(&refs, 1, &biased, 1000 + rep).unwrap();
            let share = cohort.members.iter().filter(|i| i.symptomatic).count() as f64
                / cohort.len() as f64;
            if share > pop_share {
                above += 1;
            }
        }
        // with bias 3x the cohort share should exceed the population share
        // in essentially every draw
        assert!(above as f64 / draws as f64 > 0.99, "only {above}/{draws}");
    }

    #[test]
    fn cohort_unbiased_matches_population_share() {
        let demo = DemographicTable::builtin_national();
        let pop = generate_population(
            20_000,
            &demo,
            &GroundTruthModel::default(),
            &FeatureRates::default(),
            5,
        )
        .unwrap();
        let refs: Vec<&Individual> = pop.iter().collect();
        let pop_share =
            pop.iter().filter(|i| i.symptomatic).count() as f64 / pop.len() as f64;
        let unbiased = ArrivalModel {
            cohort_size: 400,
            symptomatic_bias: 1.0,
            ..ArrivalModel::default()
        };
        let mut mean_share = 0.0;
        let draws = 400;
        for rep in 0..draws {
            let cohort = draw_daily_cohort(&refs, 1, &unbiased, 5000 + rep).unwrap();
            mean_share += cohort.members.iter().filter(|i| i.symptomatic).count() as f64
                / cohort.len() as f64;
        }
        mean_share /= draws as f64;
        assert!((mean_share - pop_share).abs() < 0.01);
    }

    #[test]
    fn empty_pool_yields_no_cohort() {
        assert!(draw_daily_cohort(&[], 1, &ArrivalModel::default(), 1).is_none());
    }

    #[test]
    fn oracle_enforces_selection_contract() {
        let mut oracle = InfectionOracle::from_labels([(1, true), (2, false)]);
        assert!(matches!(
            oracle.label(1),
            Err(Error::ContractViolation(_))
        ));
        oracle.authorize(1);
        oracle.authorize(2);
        assert_eq!(oracle.label(1).unwrap(), 1);
        assert_eq!(oracle.label(2).unwrap(), 0);
        // idempotent
        assert_eq!(oracle.label(1).unwrap(), oracle.label(1).unwrap());
        oracle.authorize(3);
        assert!(matches!(oracle.label(3), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn ground_truth_probability_reduces_to_base() {
        let truth = GroundTruthModel {
            base_prevalence: 0.37,
            log_odds_symptomatic: 0.0,
            log_odds_risky: 0.0,
            log_odds_comorbidity: 0.0,
            log_odds_age: 0.0,
            seed: 0,
        };
        for age in [0, 50, 100] {
            for sym in [false, true] {
                assert!((truth.infection_probability(age, sym, sym, sym) - 0.37).abs() < 1e-12);
            }
        }
    }
}
