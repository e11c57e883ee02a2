//! Budgeted test-kit allocation: selection strategies over daily arrival
//! cohorts (bucket randomization, stratified reweighting, a budgeted delayed
//! contextual bandit, and active learning), an online rate-limited gate,
//! mini-pool testing, and a deterministic day-loop simulator that evaluates
//! them on synthetic populations with delayed labels.

pub mod config;
pub mod error;
pub mod metrics;
pub mod model;
pub mod online;
pub mod pooling;
pub mod population;
pub mod sampling;
pub mod seed;
pub mod sim;
pub mod strategy;

pub use error::{Error, Result};
