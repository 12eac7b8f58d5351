//! Brute-force reference solvers and hard-instance generators.
//!
//! Everything here enumerates subsets in increasing bitmask order and uses
//! plain integer arithmetic on the instance types. Nothing from the solver
//! stack is used, so agreement with it is meaningful.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::covering::CoverInstance;
use crate::voting::{ApprovalElection, OrdinalElection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    /// Largest number of items whose subsets are enumerated.
    pub max_items: usize,
    pub timeout: Option<Duration>,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_items: 20,
            timeout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{items} items exceed the enumeration cap of {cap}")]
    CapExceeded { items: usize, cap: usize },
    #[error("enumeration exceeded {0:?}")]
    Timeout(Duration),
}

/// Cheapest subset found: total cost and ascending indices.
pub type Witness = (u64, Vec<usize>);

/// Minimum over subsets of `0..items` accepted by `ok`, with ties going to the smaller mask.
fn cheapest_subset(
    items: usize,
    budget: &OracleBudget,
    cost: impl Fn(usize) -> u64,
    mut ok: impl FnMut(&[usize]) -> bool,
) -> Result<Option<Witness>, OracleError> {
    if items > budget.max_items {
        return Err(OracleError::CapExceeded {
            items,
            cap: budget.max_items,
        });
    }
    let start = Instant::now();
    let mut best: Option<Witness> = None;
    let mut chosen = Vec::with_capacity(items);
    for mask in 0u64..(1u64 << items) {
        if mask % 4096 == 0 {
            if let Some(limit) = budget.timeout {
                if start.elapsed() > limit {
                    return Err(OracleError::Timeout(limit));
                }
            }
        }
        chosen.clear();
        chosen.extend((0..items).filter(|i| mask >> i & 1 == 1));
        let total: u64 = chosen.iter().map(|&i| cost(i)).sum();
        if best.as_ref().is_some_and(|(b, _)| total >= *b) {
            continue;
        }
        if ok(&chosen) {
            best = Some((total, chosen.clone()));
        }
    }
    Ok(best)
}

/// Cheapest subfamily meeting every requirement with total weight within budget.
pub fn brute_cover(
    instance: &CoverInstance,
    budget: &OracleBudget,
) -> Result<Option<Witness>, OracleError> {
    let found = cheapest_subset(
        instance.sets.len(),
        budget,
        |j| instance.weights[j],
        |chosen| {
            (0..instance.universe_size).all(|e| {
                let got: u64 = chosen
                    .iter()
                    .map(|&j| instance.sets[j].get(&e).copied().unwrap_or(0))
                    .sum();
                got >= instance.requirements[e]
            })
        },
    )?;
    Ok(found.filter(|(cost, _)| *cost <= instance.budget))
}

/// Fewest sets forming an exact cover, ignoring weights and budget.
pub fn min_cover_size(
    instance: &CoverInstance,
    budget: &OracleBudget,
) -> Result<Option<Witness>, OracleError> {
    let unit = CoverInstance {
        weights: vec![1; instance.sets.len()],
        budget: u64::MAX,
        ..instance.clone()
    };
    brute_cover(&unit, budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManipulationKind {
    /// Delete current voters.
    Delete,
    /// Add voters from the addable pool.
    Add,
    /// Replace chosen voters' ballots by `{p}`.
    Bribe,
}

fn p_wins(scores: &[u64], unique: bool) -> bool {
    scores.iter().skip(1).all(|&s| {
        if unique {
            s < scores[0]
        } else {
            s <= scores[0]
        }
    })
}

/// Cheapest action of the given kind making `p` (candidate 0) a winner within budget.
pub fn brute_manipulate(
    e: &ApprovalElection,
    kind: ManipulationKind,
    unique: bool,
    budget: &OracleBudget,
) -> Result<Option<Witness>, OracleError> {
    let m = e.candidates.len();
    let pool = match kind {
        ManipulationKind::Add => &e.addable,
        _ => &e.voters,
    };
    let found = cheapest_subset(
        pool.len(),
        budget,
        |i| pool[i].price,
        |chosen| {
            let mut scores = vec![0u64; m];
            for (i, v) in e.voters.iter().enumerate() {
                let picked = chosen.contains(&i);
                match kind {
                    ManipulationKind::Delete if picked => continue,
                    ManipulationKind::Bribe if picked => {
                        scores[0] += v.weight;
                        continue;
                    }
                    _ => {}
                }
                for &c in &v.approves {
                    scores[c] += v.weight;
                }
            }
            if kind == ManipulationKind::Add {
                for &i in chosen {
                    for &c in &e.addable[i].approves {
                        scores[c] += e.addable[i].weight;
                    }
                }
            }
            p_wins(&scores, unique)
        },
    )?;
    Ok(found.filter(|(cost, _)| *cost <= e.budget))
}

/// Cheapest set of deleted voters making `p` a winner under the scoring rule.
pub fn brute_scoring_ccdv(
    e: &OrdinalElection,
    unique: bool,
    budget: &OracleBudget,
) -> Result<Option<Witness>, OracleError> {
    let m = e.candidates.len();
    let found = cheapest_subset(
        e.voters.len(),
        budget,
        |i| e.voters[i].price,
        |chosen| {
            let mut scores = vec![0i64; m];
            for (i, v) in e.voters.iter().enumerate() {
                if chosen.contains(&i) {
                    continue;
                }
                for (pos, &c) in v.ranking.iter().enumerate() {
                    scores[c] += e.scoring[pos];
                }
            }
            scores.iter().skip(1).all(|&s| {
                if unique {
                    s < scores[0]
                } else {
                    s <= scores[0]
                }
            })
        },
    )?;
    Ok(found.filter(|(cost, _)| *cost <= e.budget))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardKind {
    /// Weighted multicover over one element, from Partition.
    PartitionWmm,
    /// Unit-weight multicover over two elements, from Subset Sum with a cardinality constraint.
    SubsetSumMmc,
}

impl std::str::FromStr for HardKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "partition-wmm" => Ok(HardKind::PartitionWmm),
            "subsetsum-mmc" => Ok(HardKind::SubsetSumMmc),
            other => Err(format!("unknown instance kind {other:?}")),
        }
    }
}

/// Single element; set `i` covers it `k_i` times at weight `k_i`; requirement
/// and budget are half the sum. An odd sum yields an infeasible instance.
pub fn partition_wmm(values: &[u64]) -> CoverInstance {
    let total: u64 = values.iter().sum();
    let sets = values
        .iter()
        .map(|&k| [(0, k)].into_iter().collect())
        .collect();
    CoverInstance::new(1, sets, vec![total.div_ceil(2)], total / 2).with_weights(values.to_vec())
}

/// For `2n` values and target `T`: set `i` has multiplicities `k_i` and
/// `nKT − k_i` (`K` the largest value); requirements `T` and `n²KT − T`;
/// at most `n` sets.
pub fn subsetsum_mmc(values: &[u64], target: u64) -> CoverInstance {
    assert!(values.len().is_multiple_of(2), "needs an even number of values");
    let n = values.len() as u64 / 2;
    let big = values.iter().copied().max().unwrap_or(0);
    let scale = n * big * target;
    let sets = values
        .iter()
        .map(|&k| [(0, k), (1, scale - k)].into_iter().collect())
        .collect();
    CoverInstance::new(2, sets, vec![target, n * scale - target], n)
}

/// A small random instance of the given hardness construction.
pub fn gen_hard_instances(kind: HardKind, seed: u64) -> CoverInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        HardKind::PartitionWmm => {
            let n = rng.gen_range(2..=8);
            let values: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=12)).collect();
            partition_wmm(&values)
        }
        HardKind::SubsetSumMmc => {
            let n = rng.gen_range(1..=3);
            let values: Vec<u64> = (0..2 * n).map(|_| rng.gen_range(1..=6)).collect();
            let target = rng.gen_range(1..=values.iter().sum::<u64>());
            subsetsum_mmc(&values, target)
        }
    }
}
