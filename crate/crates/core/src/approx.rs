//! ε-almost-cover for Multiset Multicover.
//!
//! Every input multiset is first decomposed into a few vectors `⌊β·V⌋` whose
//! shape `V` lives on the grid of multiples of `ε/2`. Vectors of equal shape
//! are interchangeable up to their scale `β`, so a single integer variable per
//! shape counts how many of them (largest `β` first) are used, and the coverage
//! they provide is a concave function of that count. Continuous miss variables
//! absorb the shortfall, which is held strictly below `ε·Σ r`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::covering::{CoverError, CoverInstance, Outcome};
use crate::emip::{EmipConstraint, EmipModel};
use crate::milp::{Solver, VarKind};
use crate::pwl::{PwlFunction, Shape};
use crate::rational::{format_rational, int, Rational};
use crate::reduction::{solve_emip, EmipStatus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApproxError {
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(String),
    #[error("parameters overflow for epsilon {epsilon} and m = {m}")]
    Overflow { epsilon: String, m: usize },
    #[error(transparent)]
    Cover(#[from] CoverError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApproxParams {
    pub epsilon: Rational,
    pub m: usize,
    /// `Z = ⌈4m/ε⌉`
    pub z: u64,
    /// `Y = Z + ⌈4Zm³/ε⌉`
    pub y: u64,
}

impl ApproxParams {
    pub fn new(epsilon: Rational, m: usize) -> Result<Self, ApproxError> {
        if epsilon <= Rational::zero() {
            return Err(ApproxError::NonPositiveEpsilon(format_rational(&epsilon)));
        }
        let overflow = || ApproxError::Overflow {
            epsilon: format_rational(&epsilon),
            m,
        };
        let mr = int(m as u64);
        let z = (int(4) * &mr / &epsilon).ceil().to_integer();
        let y = &z
            + (int(4) * Rational::from_integer(z.clone()) * &mr * &mr * &mr / &epsilon)
                .ceil()
                .to_integer();
        let params = Self {
            z: z.to_u64().ok_or_else(overflow)?,
            y: y.to_u64().ok_or_else(overflow)?,
            epsilon,
            m,
        };
        if m > 0 {
            let quarter = &params.epsilon / int(4);
            assert!(mr.clone() / int(params.z) <= quarter);
            assert!(int(params.z) * &mr * &mr * &mr / int(params.y - params.z) <= quarter);
        }
        Ok(params)
    }

    pub fn half_epsilon(&self) -> Rational {
        &self.epsilon / int(2)
    }
}

/// One vector `⌊β·shape⌋` emitted for the set `origin`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedVector {
    pub beta: u64,
    /// Indexed by element; entries are multiples of `ε/2`.
    pub shape: Vec<Rational>,
    pub origin: usize,
}

impl EmittedVector {
    /// `⌊β·shape⌋` componentwise.
    pub fn realized(&self) -> Vec<u64> {
        self.shape
            .iter()
            .map(|v| {
                (v * int(self.beta))
                    .floor()
                    .to_integer()
                    .to_u64()
                    .expect("shape entries are nonnegative")
            })
            .collect()
    }
}

impl Serialize for EmittedVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            origin: usize,
            beta: u64,
            shape: Vec<String>,
            realized: &'a [u64],
        }
        Repr {
            origin: self.origin,
            beta: self.beta,
            shape: self.shape.iter().map(format_rational).collect(),
            realized: &self.realized(),
        }
        .serialize(s)
    }
}

/// Emission record with the shape before grid rounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracedEmission {
    pub vector: EmittedVector,
    pub unrounded: Vec<Rational>,
    /// Position (in the sorted element order) where the shape was capped, if a jump caused it.
    pub jump: Option<usize>,
    /// Position where this shape started.
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionTrace {
    /// Elements in processing order: ascending multiplicity, ties by index.
    pub order: Vec<usize>,
    pub emissions: Vec<TracedEmission>,
}

/// Splits one multiset (`multiplicities[e]` for each element) into emitted vectors.
pub fn decompose(
    multiplicities: &[u64],
    params: &ApproxParams,
    origin: usize,
) -> Vec<EmittedVector> {
    decompose_traced(multiplicities, params, origin)
        .emissions
        .into_iter()
        .map(|t| t.vector)
        .collect()
}

pub fn decompose_traced(
    multiplicities: &[u64],
    params: &ApproxParams,
    origin: usize,
) -> DecompositionTrace {
    let m = multiplicities.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&e| (multiplicities[e], e));
    let mut remaining: Vec<u64> = order.iter().map(|&e| multiplicities[e]).collect();
    let mut trace = DecompositionTrace {
        order,
        emissions: Vec::new(),
    };
    let Some(mut start) = remaining.iter().position(|&t| t > 0) else {
        return trace;
    };
    let y = u128::from(params.y);
    let z = Rational::from_integer(BigInt::from(params.z));
    loop {
        let beta = remaining[start];
        let beta_r = int(beta);
        let mut unrounded = vec![Rational::zero(); m];
        unrounded[trace.order[start]] = int(1);
        let mut i = start + 1;
        let mut jump = None;
        while i < m {
            if u128::from(remaining[i]) < y * u128::from(remaining[i - 1]) {
                unrounded[trace.order[i]] = int(remaining[i]) / &beta_r;
                i += 1;
            } else {
                let cap = &z * int(remaining[i - 1]) / &beta_r;
                for j in i..m {
                    unrounded[trace.order[j]] = cap.clone();
                }
                jump = Some(i);
                break;
            }
        }
        let shape: Vec<Rational> = unrounded.iter().map(|v| round_to_grid(v, params)).collect();
        let vector = EmittedVector {
            beta,
            shape,
            origin,
        };
        let realized = vector.realized();
        for (pos, &e) in trace.order.iter().enumerate() {
            remaining[pos] -= realized[e];
        }
        trace.emissions.push(TracedEmission {
            vector,
            unrounded,
            jump,
            start,
        });
        match jump {
            Some(next) => start = next,
            None => return trace,
        }
    }
}

/// Largest multiple of `ε/2` not above `v`.
fn round_to_grid(v: &Rational, params: &ApproxParams) -> Rational {
    let half = params.half_epsilon();
    let steps = (v / &half).floor();
    steps * half
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlmostCoverSolution {
    pub chosen: Vec<EmittedVector>,
    pub coverage: Vec<u64>,
    pub misses: Vec<u64>,
    pub total_miss: u64,
    /// `ε·Σ r`; the total miss is strictly below it.
    #[serde(with = "crate::rational::serde_rational")]
    pub bound: Rational,
}

/// Shape groups in a fixed order, each sorted by descending `β`.
pub fn group_by_shape(vectors: Vec<EmittedVector>) -> Vec<Vec<EmittedVector>> {
    let mut groups: BTreeMap<Vec<Rational>, Vec<EmittedVector>> = BTreeMap::new();
    for v in vectors {
        groups.entry(v.shape.clone()).or_default().push(v);
    }
    groups
        .into_values()
        .map(|mut g| {
            g.sort_by(|a, b| b.beta.cmp(&a.beta).then(a.origin.cmp(&b.origin)));
            g
        })
        .collect()
}

/// Decomposes every set of `instance`.
pub fn decompose_instance(instance: &CoverInstance, params: &ApproxParams) -> Vec<EmittedVector> {
    (0..instance.sets.len())
        .flat_map(|j| {
            let mults: Vec<u64> = (0..instance.universe_size)
                .map(|e| instance.multiplicity(j, e))
                .collect();
            decompose(&mults, params, j)
        })
        .collect()
}

/// Picks at most `budget` emitted vectors whose total shortfall is below `ε·Σ r`.
///
/// Returns `None` when no such selection exists; if the instance has an exact
/// cover with `budget` sets, a selection always exists.
pub fn almost_cover(
    instance: &CoverInstance,
    epsilon: &Rational,
    solver: &Solver,
) -> Result<Outcome<AlmostCoverSolution>, ApproxError> {
    instance.validate()?;
    if let Some(set) = instance.weights.iter().position(|w| *w != 1) {
        return Err(CoverError::NonUnitWeight {
            set,
            weight: instance.weights[set],
        }
        .into());
    }
    let params = ApproxParams::new(epsilon.clone(), instance.universe_size)?;
    let total: u64 = instance.total_requirement();
    let bound = epsilon * int(total);
    let m = instance.universe_size;
    if total == 0 {
        return Ok(Outcome {
            solution: Some(AlmostCoverSolution {
                chosen: Vec::new(),
                coverage: vec![0; m],
                misses: vec![0; m],
                total_miss: 0,
                bound,
            }),
            stats: Default::default(),
        });
    }

    let groups = group_by_shape(decompose_instance(instance, &params));
    let mut model = EmipModel::new();
    let counts: Vec<_> = groups
        .iter()
        .enumerate()
        .map(|(j, g)| {
            model.add_variable(
                format!("v{j}"),
                VarKind::Integer,
                int(0),
                Some(int(g.len() as u64)),
            )
        })
        .collect();
    let misses: Vec<_> = (0..m)
        .map(|e| {
            model.add_variable(
                format!("miss{e}"),
                VarKind::Continuous,
                int(0),
                Some(int(instance.requirements[e])),
            )
        })
        .collect();

    model.add_constraint(EmipConstraint::linear_le(
        counts.iter().map(|v| (*v, int(1))),
        int(instance.budget),
    ));
    // Σ miss < ε·Σ r; the shortfall at integer counts is integral.
    let allowed = bound.ceil() - int(1);
    model.add_constraint(EmipConstraint::linear_le(
        misses.iter().map(|v| (*v, int(1))),
        allowed,
    ));
    let realized: Vec<Vec<Vec<u64>>> = groups
        .iter()
        .map(|g| g.iter().map(EmittedVector::realized).collect())
        .collect();
    for e in 0..m {
        // r_e ≤ Σ_j f_{e,j}(v_j) + miss_e
        let mut c = EmipConstraint::new(-int(instance.requirements[e]))
            .with_rhs(misses[e], PwlFunction::linear(int(1)))
            .expect("fresh variable");
        for (j, vectors) in realized.iter().enumerate() {
            if vectors.iter().all(|r| r[e] == 0) {
                continue;
            }
            let increments = vectors.iter().map(|r| int(r[e])).collect();
            let f = PwlFunction::from_unit_increments(Shape::Concave, Rational::zero(), increments)
                .expect("descending beta gives nonincreasing increments");
            c = c.with_rhs(counts[j], f).expect("distinct variables");
        }
        model.add_constraint(c);
    }

    let result = solve_emip(&model, solver).map_err(CoverError::from)?;
    let solution = match result.status {
        EmipStatus::Infeasible => None,
        EmipStatus::Feasible { assignment, .. } => {
            let mut chosen = Vec::new();
            for (j, g) in groups.iter().enumerate() {
                let take = assignment[counts[j].index()]
                    .to_integer()
                    .to_usize()
                    .expect("count within bounds");
                chosen.extend(g.iter().take(take).cloned());
            }
            let mut coverage = vec![0u64; m];
            for v in &chosen {
                for (e, r) in v.realized().into_iter().enumerate() {
                    coverage[e] += r;
                }
            }
            let misses: Vec<u64> = (0..m)
                .map(|e| instance.requirements[e].saturating_sub(coverage[e]))
                .collect();
            let total_miss: u64 = misses.iter().sum();
            if chosen.len() as u64 > instance.budget || int(total_miss) >= bound {
                return Err(CoverError::Inconsistent(
                    "almost-cover violates its guarantees".into(),
                )
                .into());
            }
            Some(AlmostCoverSolution {
                chosen,
                coverage,
                misses,
                total_miss,
                bound,
            })
        }
    };
    Ok(Outcome {
        solution,
        stats: result.stats,
    })
}
