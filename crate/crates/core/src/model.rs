//! The risk-assessment model: an online logistic classifier over encoded
//! individual features, and the utility family used to value testing an
//! individual (infection risk, predictive entropy, or uniform).

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{DemographicTable, Gender, Individual};

/// Fixed feature encoding: standardized age, gender one-hot, the three
/// boolean flags, a region one-hot over the known states, and any opaque
/// extras. Unknown regions encode to an all-zero region block.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    regions: Vec<String>,
    extra_len: usize,
}

impl Encoder {
    pub fn new(mut regions: Vec<String>, extra_len: usize) -> Self {
        regions.sort();
        regions.dedup();
        Self { regions, extra_len }
    }

    pub fn for_table(table: &DemographicTable) -> Self {
        Self::new(
            table.region_names().into_iter().map(String::from).collect(),
            0,
        )
    }

    pub fn len(&self) -> usize {
        6 + self.regions.len() + self.extra_len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, ind: &Individual) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        x.push(f64::from(ind.age) / 100.0);
        x.push(if ind.gender == Gender::Male { 1.0 } else { 0.0 });
        x.push(if ind.gender == Gender::Female { 1.0 } else { 0.0 });
        x.push(if ind.symptomatic { 1.0 } else { 0.0 });
        x.push(if ind.risky_history { 1.0 } else { 0.0 });
        x.push(if ind.comorbidity { 1.0 } else { 0.0 });
        for region in &self.regions {
            x.push(if *region == ind.region { 1.0 } else { 0.0 });
        }
        for i in 0..self.extra_len {
            x.push(ind.extras.get(i).copied().unwrap_or(0.0));
        }
        x
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = vec![
            "age".to_string(),
            "gender_male".to_string(),
            "gender_female".to_string(),
            "symptomatic".to_string(),
            "risky_history".to_string(),
            "comorbidity".to_string(),
        ];
        for region in &self.regions {
            names.push(format!("region_{region}"));
        }
        for i in 0..self.extra_len {
            names.push(format!("extra_{i}"));
        }
        names
    }
}

/// One logged decision for an individual: encoded context, the action taken
/// (1 = recommend testing), the label when it has come back, the logging
/// propensity of the action, and the day the label becomes visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledObservation {
    pub features: Vec<f64>,
    pub action: u8,
    pub label: Option<u8>,
    pub propensity: f64,
    pub visible_on_day: u32,
}

fn sigmoid(score: f64) -> f64 {
    (1.0 / (1.0 + (-score).exp())).clamp(1e-12, 1.0 - 1e-12)
}

/// Online logistic regression over the encoded features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub learning_rate: f64,
    pub update_count: u64,
}

impl RiskModel {
    pub fn new(dim: usize, learning_rate: f64) -> Self {
        assert!(learning_rate > 0.0);
        Self {
            weights: vec![0.0; dim],
            intercept: 0.0,
            learning_rate,
            update_count: 0,
        }
    }

    pub fn linear_score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        self.intercept
            + self
                .weights
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }

    /// Predicted infection probability, always strictly inside (0, 1).
    pub fn predict_encoded(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_score(x))
    }

    pub fn predict(&self, enc: &Encoder, ind: &Individual) -> f64 {
        self.predict_encoded(&enc.encode(ind))
    }

    /// Log-loss of a single weighted example.
    pub fn example_loss(&self, x: &[f64], y: u8) -> f64 {
        let p = self.predict_encoded(x);
        if y == 1 {
            -p.ln()
        } else {
            -(1.0 - p).ln()
        }
    }

    /// Analytic gradient of the example log-loss: (d/dweights, d/dintercept).
    pub fn example_gradient(&self, x: &[f64], y: u8) -> (Vec<f64>, f64) {
        let err = self.predict_encoded(x) - f64::from(y);
        (x.iter().map(|v| err * v).collect(), err)
    }

    /// One pass of SGD over the batch in an order shuffled by `seed`.
    /// Observations without a label or with action 0 are skipped; each
    /// example's gradient is scaled by its `weight`.
    pub fn update_weighted(&self, batch: &[(&[f64], u8, f64)], seed: u64) -> RiskModel {
        let mut next = self.clone();
        if batch.is_empty() {
            return next;
        }
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        for idx in order {
            let (x, y, w) = batch[idx];
            let (gw, gb) = next.example_gradient(x, y);
            for (wi, gi) in next.weights.iter_mut().zip(gw) {
                *wi -= next.learning_rate * w * gi;
            }
            next.intercept -= next.learning_rate * w * gb;
            next.update_count += 1;
        }
        next
    }

    /// Unweighted daily update from observations whose labels are visible.
    pub fn update(&self, batch: &[LabeledObservation], seed: u64) -> RiskModel {
        let items: Vec<(&[f64], u8, f64)> = batch
            .iter()
            .filter_map(|o| o.label.map(|y| (o.features.as_slice(), y, 1.0)))
            .collect();
        self.update_weighted(&items, seed)
    }

    pub fn mean_log_loss(&self, pairs: &[(Vec<f64>, u8)]) -> f64 {
        if pairs.is_empty() {
            return 0.0;
        }
        pairs
            .iter()
            .map(|(x, y)| self.example_loss(x, *y))
            .sum::<f64>()
            / pairs.len() as f64
    }

    /// Text checkpoint: one `name<TAB>weight` line per feature plus the
    /// intercept.
    pub fn save_checkpoint(&self, path: &std::path::Path, names: &[String]) -> Result<()> {
        if names.len() != self.weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} weights",
                names.len(),
                self.weights.len()
            )));
        }
        let mut out = String::new();
        for (name, w) in names.iter().zip(&self.weights) {
            out.push_str(&format!("{name}\t{w}\n"));
        }
        out.push_str(&format!("__intercept__\t{}\n", self.intercept));
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &std::path::Path, learning_rate: f64) -> Result<RiskModel> {
        let text = std::fs::read_to_string(path)?;
        let mut weights = Vec::new();
        let mut intercept = 0.0;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (name, value) = line
                .split_once('\t')
                .ok_or_else(|| Error::Schema(format!("bad checkpoint line `{line}`")))?;
            let v: f64 = value
                .parse()
                .map_err(|_| Error::Schema(format!("bad weight `{value}`")))?;
            if name == "__intercept__" {
                intercept = v;
            } else {
                weights.push(v);
            }
        }
        Ok(RiskModel {
            weights,
            intercept,
            learning_rate,
            update_count: 0,
        })
    }
}

/// The utility family for valuing a test on an individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Utility {
    /// Predicted infection probability.
    Risk,
    /// Predictive entropy in bits.
    Entropy,
    /// Constant 1.
    Uniform,
}

/// Binary entropy in bits; 0 at p in {0, 1}, maximal 1 bit at p = 0.5.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

pub fn utility(mode: Utility, model: &RiskModel, enc: &Encoder, ind: &Individual) -> f64 {
    match mode {
        Utility::Uniform => 1.0,
        Utility::Risk => model.predict(enc, ind),
        Utility::Entropy => binary_entropy(model.predict(enc, ind)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn individual(age: u8, symptomatic: bool) -> Individual {
        Individual::new(1, age, Gender::Male, "national", symptomatic, false, false)
    }

    fn encoder() -> Encoder {
        Encoder::new(vec![], 0)
    }

    #[test]
    fn encoding_is_deterministic_and_fixed_length() {
        let enc = Encoder::new(vec!["Kerala".into(), "Assam".into()], 0);
        let a = individual(42, true);
        assert_eq!(enc.encode(&a), enc.encode(&a));
        assert_eq!(enc.encode(&a).len(), enc.len());
        assert_eq!(enc.feature_names().len(), enc.len());

        let zero = individual(0, false);
        let hundred = individual(100, false);
        assert_eq!(enc.encode(&zero)[0], 0.0);
        assert_eq!(enc.encode(&hundred)[0], 1.0);
    }

    #[test]
    fn unknown_region_encodes_to_zero_block() {
        let enc = Encoder::new(vec!["Kerala".into()], 0);
        let ind = individual(30, false); // region "national", not in list
        let x = enc.encode(&ind);
        assert_eq!(x[6], 0.0);
    }

    #[test]
    fn untrained_model_predicts_half() {
        let enc = encoder();
        let model = RiskModel::new(enc.len(), 0.1);
        assert_eq!(model.predict(&enc, &individual(25, true)), 0.5);
        assert_eq!(model.predict(&enc, &individual(90, false)), 0.5);
    }

    #[test]
    fn large_scores_saturate_but_stay_open() {
        let mut model = RiskModel::new(1, 0.1);
        model.intercept = 10.0;
        let p = model.predict_encoded(&[0.0]);
        assert!(p > 0.9999 && p < 1.0);
        model.intercept = 1000.0;
        let p = model.predict_encoded(&[0.0]);
        assert!(p < 1.0);
    }

    #[test]
    fn symptomatic_weight_increase_raises_prediction() {
        let enc = encoder();
        let mut model = RiskModel::new(enc.len(), 0.1);
        let ind = individual(40, true);
        let before = model.predict(&enc, &ind);
        model.weights[3] = 1.0; // symptomatic feature
        assert!(model.predict(&enc, &ind) > before);
    }

    #[test]
    fn positive_batch_raises_prediction() {
        let enc = encoder();
        let model = RiskModel::new(enc.len(), 0.1);
        let x = enc.encode(&individual(40, true));
        let obs = LabeledObservation {
            features: x.clone(),
            action: 1,
            label: Some(1),
            propensity: 1.0,
            visible_on_day: 1,
        };
        let updated = model.update(&[obs.clone(), obs.clone(), obs], 3);
        assert!(updated.predict_encoded(&x) > model.predict_encoded(&x));
        assert_eq!(updated.update_count, 3);
    }

    #[test]
    fn empty_batch_is_identity() {
        let model = RiskModel::new(4, 0.1);
        let updated = model.update(&[], 1);
        assert_eq!(updated, model);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // central finite differences as the independent oracle
        let mut model = RiskModel::new(5, 0.1);
        model.weights = vec![0.3, -0.7, 1.2, 0.05, -0.4];
        model.intercept = 0.2;
        let x = [0.9, -1.3, 0.4, 2.0, -0.6];
        let h = 1e-5;
        for y in [0u8, 1u8] {
            let (grad_w, grad_b) = model.example_gradient(&x, y);
            for i in 0..5 {
                let mut plus = model.clone();
                plus.weights[i] += h;
                let mut minus = model.clone();
                minus.weights[i] -= h;
                let numeric = (plus.example_loss(&x, y) - minus.example_loss(&x, y)) / (2.0 * h);
                assert!(
                    (numeric - grad_w[i]).abs() < 1e-6,
                    "weight {i}: {numeric} vs {}",
                    grad_w[i]
                );
            }
            let mut plus = model.clone();
            plus.intercept += h;
            let mut minus = model.clone();
            minus.intercept -= h;
            let numeric = (plus.example_loss(&x, y) - minus.example_loss(&x, y)) / (2.0 * h);
            assert!((numeric - grad_b).abs() < 1e-6);
        }
    }

    #[test]
    fn separable_data_trains_below_point_three() {
        // 500 linearly separable points, 50 epochs
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        use rand::Rng;
        let mut pairs: Vec<(Vec<f64>, u8)> = Vec::new();
        for _ in 0..500 {
            let label = rng.random::<f64>() < 0.5;
            let margin = 0.5 + rng.random::<f64>();
            let x1 = if label { margin } else { -margin };
            let x2 = rng.random::<f64>() - 0.5;
            pairs.push((vec![x1, x2], u8::from(label)));
        }
        let mut model = RiskModel::new(2, 0.1);
        for epoch in 0..50 {
            let batch: Vec<(&[f64], u8, f64)> = pairs
                .iter()
                .map(|(x, y)| (x.as_slice(), *y, 1.0))
                .collect();
            model = model.update_weighted(&batch, epoch);
        }
        assert!(model.mean_log_loss(&pairs) < 0.3);
    }

    #[test]
    fn utility_modes() {
        let enc = encoder();
        let model = RiskModel::new(enc.len(), 0.1);
        let ind = individual(33, false);
        assert_eq!(utility(Utility::Uniform, &model, &enc, &ind), 1.0);
        // untrained model: p = 0.5, maximal entropy
        assert!((utility(Utility::Entropy, &model, &enc, &ind) - 1.0).abs() < 1e-12);
        assert_eq!(utility(Utility::Risk, &model, &enc, &ind), 0.5);
    }

    #[test]
    fn entropy_values_and_symmetry() {
        assert!((binary_entropy(0.25) - 0.811278).abs() < 1e-4);
        for p in [0.01, 0.1, 0.3, 0.47] {
            assert!((binary_entropy(p) - binary_entropy(1.0 - p)).abs() < 1e-12);
            assert!(binary_entropy(p) < binary_entropy(0.5));
        }
    }

    #[test]
    fn risk_utility_preserves_prediction_order() {
        let enc = encoder();
        let mut model = RiskModel::new(enc.len(), 0.1);
        model.weights[0] = 2.0; // age
        let young = individual(10, false);
        let old = individual(90, false);
        let by_risk = utility(Utility::Risk, &model, &enc, &old)
            > utility(Utility::Risk, &model, &enc, &young);
        let by_predict = model.predict(&enc, &old) > model.predict(&enc, &young);
        assert_eq!(by_risk, by_predict);
    }

    #[test]
    fn checkpoint_round_trip() {
        let enc = encoder();
        let mut model = RiskModel::new(enc.len(), 0.1);
        model.weights[2] = -1.25;
        model.intercept = 0.75;
        let dir = std::env::temp_dir().join("kitalloc_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.tsv");
        model.save_checkpoint(&path, &enc.feature_names()).unwrap();
        let loaded = RiskModel::load_checkpoint(&path, 0.1).unwrap();
        assert_eq!(loaded.weights, model.weights);
        assert_eq!(loaded.intercept, model.intercept);
    }
}
