//! Mini-pool (group) testing: random pool assignment, two-stage and
//! binary-split resolution against the oracle, and closed-form expected-cost
//! analytics used to size budgets.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::population::InfectionOracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingStrategy {
    /// Test the pool; on a positive, retest every member individually.
    Dorfman,
    /// Test the pool; on a positive, split in half and recurse.
    BinarySplit,
}

impl PoolingStrategy {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "dorfman" => Ok(PoolingStrategy::Dorfman),
            "binary" | "binary_split" => Ok(PoolingStrategy::BinarySplit),
            _ => Err(Error::InvalidArgument(format!(
                "unknown pooling strategy `{name}` (expected dorfman or binary)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PoolingStrategy::Dorfman => "dorfman",
            PoolingStrategy::BinarySplit => "binary",
        }
    }
}

/// Disjoint pools covering the selected set, each of at most `pool_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolPlan {
    pub pool_size: usize,
    pub strategy: PoolingStrategy,
    pub pools: Vec<Vec<u64>>,
}

/// Randomly partition the selected ids into ceil(n/s) pools; the last pool
/// may be smaller.
pub fn make_pools(
    selected: &[u64],
    pool_size: usize,
    strategy: PoolingStrategy,
    seed: u64,
) -> Result<PoolPlan> {
    if pool_size == 0 {
        return Err(Error::InvalidArgument("pool size must be >= 1".into()));
    }
    let mut ids: Vec<u64> = selected.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let pools = ids.chunks(pool_size).map(<[u64]>::to_vec).collect();
    Ok(PoolPlan {
        pool_size,
        strategy,
        pools,
    })
}

/// Resolve every pool to per-individual labels, counting every pool-level
/// and individual test. A singleton pool's test is its individual test.
pub fn resolve_pools(plan: &PoolPlan, oracle: &InfectionOracle) -> Result<(BTreeMap<u64, u8>, u64)> {
    let mut labels = BTreeMap::new();
    let mut tests = 0u64;
    for pool in &plan.pools {
        match plan.strategy {
            PoolingStrategy::Dorfman => resolve_dorfman(pool, oracle, &mut labels, &mut tests)?,
            PoolingStrategy::BinarySplit => {
                resolve_binary(pool, oracle, &mut labels, &mut tests)?
            }
        }
    }
    Ok((labels, tests))
}

fn pool_is_positive(pool: &[u64], oracle: &InfectionOracle) -> Result<bool> {
    for &id in pool {
        if oracle.label(id)? == 1 {
            return Ok(true);
        }
    }
    Ok(false)
}

fn resolve_dorfman(
    pool: &[u64],
    oracle: &InfectionOracle,
    labels: &mut BTreeMap<u64, u8>,
    tests: &mut u64,
) -> Result<()> {
    *tests += 1;
    if pool.len() == 1 {
        labels.insert(pool[0], oracle.label(pool[0])?);
        return Ok(());
    }
    if pool_is_positive(pool, oracle)? {
        for &id in pool {
            *tests += 1;
            labels.insert(id, oracle.label(id)?);
        }
    } else {
        for &id in pool {
            labels.insert(id, 0);
        }
    }
    Ok(())
}

fn resolve_binary(
    pool: &[u64],
    oracle: &InfectionOracle,
    labels: &mut BTreeMap<u64, u8>,
    tests: &mut u64,
) -> Result<()> {
    *tests += 1;
    if pool.len() == 1 {
        labels.insert(pool[0], oracle.label(pool[0])?);
        return Ok(());
    }
    if pool_is_positive(pool, oracle)? {
        let mid = pool.len().div_ceil(2);
        resolve_binary(&pool[..mid], oracle, labels, tests)?;
        resolve_binary(&pool[mid..], oracle, labels, tests)?;
    } else {
        for &id in pool {
            labels.insert(id, 0);
        }
    }
    Ok(())
}

/// Expected tests per person for a full pool of size `s` whose members are
/// infected independently with probability `p`.
///
/// Dorfman, s >= 2: `1/s + (1 - (1-p)^s)`. Binary split: every internal node
/// of the fixed split tree is retested exactly when it contains a positive,
/// so the expectation is `1 + 2 * sum over internal nodes of
/// (1 - (1-p)^size)`, divided by `s`. A pool of one is plain individual
/// testing.
pub fn expected_tests_per_person(
    pool_size: usize,
    prevalence: f64,
    strategy: PoolingStrategy,
) -> Result<f64> {
    if pool_size == 0 {
        return Err(Error::InvalidArgument("pool size must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&prevalence) {
        return Err(Error::InvalidArgument(format!(
            "prevalence {prevalence} outside [0, 1]"
        )));
    }
    if pool_size == 1 {
        return Ok(1.0);
    }
    let s = pool_size as f64;
    let any_positive = |n: usize| 1.0 - (1.0 - prevalence).powi(n as i32);
    let per_pool = match strategy {
        PoolingStrategy::Dorfman => 1.0 + s * any_positive(pool_size),
        PoolingStrategy::BinarySplit => {
            fn internal_sum(n: usize, any_positive: &dyn Fn(usize) -> f64) -> f64 {
                if n < 2 {
                    return 0.0;
                }
                let mid = n.div_ceil(2);
                any_positive(n)
                    + internal_sum(mid, any_positive)
                    + internal_sum(n - mid, any_positive)
            }
            1.0 + 2.0 * internal_sum(pool_size, &any_positive)
        }
    };
    Ok(per_pool / s)
}

/// How many people a kit budget covers in expectation under pooling.
/// Advisory: based on the expected cost, not a worst-case guarantee.
pub fn effective_budget(
    kits: u64,
    pool_size: usize,
    prevalence: f64,
    strategy: PoolingStrategy,
) -> Result<u64> {
    let per_person = expected_tests_per_person(pool_size, prevalence, strategy)?;
    Ok((kits as f64 / per_person).floor() as u64)
}
