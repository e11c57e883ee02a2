//! Online mode: immediate accept/decline decisions under per-slot rate
//! limits. Each slot's share of the daily budget follows the previous day's
//! arrival proportions, and an arrival is recommended only while slot
//! capacity remains and it outscores the previous day's marginal scorer for
//! that slot.

use serde::{Deserialize, Serialize};

use crate::population::{DailyCohort, SLOTS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Recommend,
    Decline,
}

/// Slot arrival fractions from the previous day, or the uniform fallback
/// when there is no usable previous day.
pub fn compute_alphas(previous: Option<&DailyCohort>) -> [f64; SLOTS_PER_DAY] {
    match previous {
        None => uniform_alphas(),
        Some(cohort) => {
            let counts = cohort.slot_counts();
            let total: usize = counts.iter().sum();
            if total == 0 {
                return uniform_alphas();
            }
            std::array::from_fn(|t| counts[t] as f64 / total as f64)
        }
    }
}

pub fn uniform_alphas() -> [f64; SLOTS_PER_DAY] {
    [1.0 / SLOTS_PER_DAY as f64; SLOTS_PER_DAY]
}

/// Per-slot caps: `floor(alpha_t * budget)`, with the leftover kits from
/// rounding assigned to the busiest slot (smallest index on ties). Caps
/// always sum to at most the budget.
pub fn compute_slot_caps(alphas: &[f64; SLOTS_PER_DAY], budget: usize) -> [usize; SLOTS_PER_DAY] {
    let mut caps: [usize; SLOTS_PER_DAY] =
        std::array::from_fn(|t| (alphas[t] * budget as f64).floor() as usize);
    let assigned: usize = caps.iter().sum();
    if assigned < budget {
        let busiest = (0..SLOTS_PER_DAY)
            .max_by(|&a, &b| alphas[a].total_cmp(&alphas[b]).then(b.cmp(&a)))
            .unwrap();
        caps[busiest] += budget - assigned;
    }
    caps
}

/// Rate-limit state for one slot of one day.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    pub day: u32,
    pub slot: u8,
    pub cap: usize,
    pub accepted: usize,
    /// How many arrived in this slot on the previous day.
    pub prev_arrivals: usize,
    /// Previous day's scores for this slot, sorted descending.
    pub prev_scores_desc: Vec<f64>,
}

impl SlotState {
    pub fn new(day: u32, slot: u8, cap: usize, mut prev_scores: Vec<f64>) -> Self {
        prev_scores.sort_by(|a, b| b.total_cmp(a));
        Self {
            day,
            slot,
            cap,
            accepted: 0,
            prev_arrivals: prev_scores.len(),
            prev_scores_desc: prev_scores,
        }
    }

    /// The score to beat: the cap-th highest of yesterday's slot scores,
    /// absent when yesterday had fewer arrivals than the cap.
    pub fn threshold(&self) -> Option<f64> {
        if self.cap == 0 || self.prev_arrivals < self.cap {
            None
        } else {
            Some(self.prev_scores_desc[self.cap - 1])
        }
    }
}

/// One immediate decision. Recommends while capacity remains and either
/// yesterday's slot was underfull or the score strictly beats the marginal
/// scorer; ties decline. Accepting consumes capacity.
pub fn decide_online(state: &mut SlotState, score: f64) -> Decision {
    if state.accepted >= state.cap {
        return Decision::Decline;
    }
    let pass = match state.threshold() {
        None => true,
        Some(threshold) => score > threshold,
    };
    if pass {
        state.accepted += 1;
        Decision::Recommend
    } else {
        Decision::Decline
    }
}

/// All six slots of one day.
#[derive(Debug, Clone)]
pub struct DailyGate {
    pub slots: Vec<SlotState>,
}

impl DailyGate {
    pub fn new(
        day: u32,
        alphas: &[f64; SLOTS_PER_DAY],
        budget: usize,
        prev_slot_scores: [Vec<f64>; SLOTS_PER_DAY],
    ) -> Self {
        let caps = compute_slot_caps(alphas, budget);
        let slots = prev_slot_scores
            .into_iter()
            .enumerate()
            .map(|(t, scores)| SlotState::new(day, t as u8, caps[t], scores))
            .collect();
        Self { slots }
    }

    pub fn decide(&mut self, slot: u8, score: f64) -> Decision {
        decide_online(&mut self.slots[slot as usize], score)
    }

    pub fn accepted_total(&self) -> usize {
        self.slots.iter().map(|s| s.accepted).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{DailyCohort, Gender, Individual};
    use std::collections::BTreeMap;

    fn cohort_with_slots(counts: [usize; SLOTS_PER_DAY]) -> DailyCohort {
        let mut members = Vec::new();
        let mut slots = BTreeMap::new();
        let mut id = 0u64;
        for (slot, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                members.push(Individual::new(
                    id, 30, Gender::Male, "national", false, false, false,
                ));
                slots.insert(id, slot as u8);
                id += 1;
            }
        }
        DailyCohort::new(1, members, slots).unwrap()
    }

    #[test]
    fn alphas_match_arrival_proportions() {
        let cohort = cohort_with_slots([50, 100, 150, 200, 300, 200]);
        let alphas = compute_alphas(Some(&cohort));
        let expected = [0.05, 0.10, 0.15, 0.20, 0.30, 0.20];
        for (a, e) in alphas.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        assert!((alphas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_arrivals_in_one_slot() {
        let cohort = cohort_with_slots([10, 0, 0, 0, 0, 0]);
        let alphas = compute_alphas(Some(&cohort));
        assert_eq!(alphas, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_previous_day_falls_back_to_uniform() {
        let alphas = compute_alphas(None);
        for a in alphas {
            assert!((a - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn caps_sum_to_budget_with_floor_rounding() {
        let alphas = [0.05, 0.10, 0.15, 0.20, 0.30, 0.20];
        let caps = compute_slot_caps(&alphas, 50);
        assert_eq!(caps.iter().sum::<usize>(), 50);
        // floors are 2,5,7,10,15,10 = 49; the leftover goes to slot 4
        assert_eq!(caps, [2, 5, 7, 10, 16, 10]);
    }

    #[test]
    fn caps_never_exceed_budget() {
        for budget in [0usize, 1, 7, 13, 100] {
            let alphas = [0.17, 0.03, 0.4, 0.1, 0.2, 0.1];
            let caps = compute_slot_caps(&alphas, budget);
            assert!(caps.iter().sum::<usize>() <= budget);
        }
    }

    #[test]
    fn underfull_previous_slot_recommends_any_score() {
        // 3 arrivals yesterday, cap 5: capacity permitting, everyone passes
        let mut state = SlotState::new(2, 0, 5, vec![0.9, 0.5, 0.1]);
        assert_eq!(decide_online(&mut state, -100.0), Decision::Recommend);
        assert_eq!(decide_online(&mut state, 0.0), Decision::Recommend);
        assert_eq!(state.accepted, 2);
    }

    #[test]
    fn hard_cap_declines_regardless_of_score() {
        let mut state = SlotState::new(2, 0, 2, vec![]);
        assert_eq!(decide_online(&mut state, 1.0), Decision::Recommend);
        assert_eq!(decide_online(&mut state, 1.0), Decision::Recommend);
        assert_eq!(decide_online(&mut state, 100.0), Decision::Decline);
        assert_eq!(state.accepted, 2);
    }

    #[test]
    fn threshold_is_capth_highest_of_previous_day() {
        // scores [0.9, 0.7, 0.5, 0.3], cap 2: threshold 0.7, strict
        let mut state = SlotState::new(2, 3, 2, vec![0.5, 0.9, 0.3, 0.7]);
        assert_eq!(state.threshold(), Some(0.7));
        assert_eq!(decide_online(&mut state, 0.8), Decision::Recommend);
        assert_eq!(decide_online(&mut state, 0.6), Decision::Decline);
        // ties decline
        assert_eq!(decide_online(&mut state, 0.7), Decision::Decline);
        assert_eq!(state.accepted, 1);
    }

    #[test]
    fn recommendation_is_monotone_in_score() {
        // with free capacity and a fixed threshold, any score above an
        // accepted one is also accepted
        let threshold_scores = vec![0.6, 0.4, 0.2];
        for probe in [0.61, 0.7, 0.9, 5.0] {
            let mut state = SlotState::new(2, 1, 1, threshold_scores.clone());
            assert_eq!(decide_online(&mut state, probe), Decision::Recommend);
        }
        for probe in [0.6, 0.5, 0.0, -1.0] {
            let mut state = SlotState::new(2, 1, 1, threshold_scores.clone());
            assert_eq!(decide_online(&mut state, probe), Decision::Decline);
        }
    }

    #[test]
    fn gate_totals_stay_within_budget() {
        let cohort = cohort_with_slots([100, 80, 60, 40, 20, 0]);
        let alphas = compute_alphas(Some(&cohort));
        let mut gate = DailyGate::new(2, &alphas, 30, Default::default());
        for slot in 0..SLOTS_PER_DAY as u8 {
            for i in 0..200 {
                gate.decide(slot, i as f64);
            }
        }
        assert!(gate.accepted_total() <= 30);
    }
}
