//! Small statistics helpers used by reports and tests.

use std::collections::BTreeMap;

/// Total-variation distance between two discrete distributions over the
/// union of their keys.
pub fn tv_distance<K: Ord + Clone>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<K> = p.keys().cloned().collect();
    for k in q.keys() {
        if !p.contains_key(k) {
            keys.push(k.clone());
        }
    }
    0.5 * keys
        .iter()
        .map(|k| {
            let a = p.get(k).copied().unwrap_or(0.0);
            let b = q.get(k).copied().unwrap_or(0.0);
            (a - b).abs()
        })
        .sum::<f64>()
}

/// Mean negative log-likelihood of Bernoulli predictions, natural log.
pub fn log_loss(pairs: &[(f64, u8)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|&(p, y)| {
            let p = p.clamp(1e-12, 1.0 - 1e-12);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    sum / pairs.len() as f64
}

/// Rank-based AUC with midrank tie handling. `None` when only one class
/// is present.
pub fn auc(pairs: &[(f64, u8)]) -> Option<f64> {
    let n_pos = pairs.iter().filter(|&&(_, y)| y == 1).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, u8)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        // ranks are 1-based; ties share the average rank of their block
        let mid_rank = (i + 1 + j + 1) as f64 / 2.0;
        for item in &sorted[i..=j] {
            if item.1 == 1 {
                rank_sum_pos += mid_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Pearson chi-square statistic of observed counts against expected
/// probabilities. Cells with zero expectation are skipped (they must also
/// be unobserved for the statistic to be meaningful) and the returned df
/// counts only contributing cells minus one.
pub fn chi_square_stat(observed: &[u64], expected_probs: &[f64]) -> (f64, usize) {
    assert_eq!(observed.len(), expected_probs.len());
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&obs, &p) in observed.iter().zip(expected_probs) {
        if p <= 0.0 {
            continue;
        }
        let exp = p * n as f64;
        stat += (obs as f64 - exp).powi(2) / exp;
        cells += 1;
    }
    (stat, cells.saturating_sub(1))
}

/// 0.999 quantile of the chi-square distribution; a statistic below this
/// value means p > 0.001.
pub fn chi_square_crit_999(df: usize) -> f64 {
    // Standard table values for the dfs used in tests; Wilson-Hilferty
    // fallback for anything larger.
    const TABLE: [f64; 12] = [
        10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588, 31.264,
        32.909,
    ];
    if df == 0 {
        return 0.0;
    }
    if df <= TABLE.len() {
        return TABLE[df - 1];
    }
    let d = df as f64;
    let z = 3.0902; // standard normal 0.999 quantile
    d * (1.0 - 2.0 / (9.0 * d) + z * (2.0 / (9.0 * d)).sqrt()).powi(3)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_of_identical_is_zero() {
        let p: BTreeMap<u8, f64> = [(0, 0.3), (1, 0.7)].into_iter().collect();
        assert_eq!(tv_distance(&p, &p), 0.0);
    }

    #[test]
    fn tv_of_disjoint_is_one() {
        let p: BTreeMap<u8, f64> = [(0, 1.0)].into_iter().collect();
        let q: BTreeMap<u8, f64> = [(1, 1.0)].into_iter().collect();
        assert!((tv_distance(&p, &q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_perfect_ranking() {
        let pairs = [(0.1, 0), (0.2, 0), (0.8, 1), (0.9, 1)];
        assert_eq!(auc(&pairs), Some(1.0));
    }

    #[test]
    fn auc_random_ties() {
        let pairs = [(0.5, 0), (0.5, 1), (0.5, 0), (0.5, 1)];
        assert_eq!(auc(&pairs), Some(0.5));
    }

    #[test]
    fn auc_single_class_none() {
        assert_eq!(auc(&[(0.5, 1), (0.9, 1)]), None);
    }

    #[test]
    fn log_loss_of_confident_correct_is_small() {
        assert!(log_loss(&[(0.999, 1), (0.001, 0)]) < 0.01);
        assert!((log_loss(&[(0.5, 1)]) - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
