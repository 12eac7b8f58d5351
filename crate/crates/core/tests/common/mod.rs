//! Generators and independent reference checks shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pwlmip::covering::CoverInstance;
use pwlmip::emip::{EmipConstraint, EmipModel};
use pwlmip::milp::{VarId, VarKind};
use pwlmip::pwl::{PwlFunction, Shape};
use pwlmip::rational::{int, ratio, Rational};
use pwlmip::voting::{ApprovalElection, ApprovalVoter, OrdinalElection, RankedVoter};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn half(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Rational {
    ratio(rng.gen_range(2 * lo..=2 * hi), 2)
}

/// Evaluates `f` by locating the piece that contains `x` and extending it
/// linearly from that piece's anchor point.
pub fn locate_eval(f: &PwlFunction, x: &Rational) -> Rational {
    let rho = f.breakpoints();
    let slopes = f.slopes();
    // Values at the breakpoints, walking outward from 0.
    let integral = |a: &Rational, b: &Rational| -> Rational {
        // ∫_a^b slope(t) dt for a ≤ b
        let mut total = Rational::zero();
        for (k, s) in slopes.iter().enumerate() {
            let lo = if k == 0 {
                a.clone()
            } else {
                rho[k - 1].clone().max(a.clone())
            };
            let hi = if k == rho.len() {
                b.clone()
            } else {
                rho[k].clone().min(b.clone())
            };
            if hi > lo {
                total += s * (hi - lo);
            }
        }
        total
    };
    let value_at = |t: &Rational| -> Rational {
        let zero = Rational::zero();
        if *t >= zero {
            f.value_at_zero() + integral(&zero, t)
        } else {
            f.value_at_zero() - integral(t, &zero)
        }
    };
    let k = rho.partition_point(|r| r <= x);
    let anchor = if k > 0 {
        rho[k - 1].clone()
    } else if let Some(first) = rho.first() {
        first.clone()
    } else {
        Rational::zero()
    };
    value_at(&anchor) + &slopes[k] * (x - &anchor)
}

/// Random function with at most `max_pieces` pieces and half-integer data.
pub fn random_pwl(rng: &mut ChaCha8Rng, shape: Shape, max_pieces: usize) -> PwlFunction {
    let pieces = rng.gen_range(1..=max_pieces);
    let mut breaks: Vec<i64> = (-2..=14).collect();
    breaks.shuffle(rng);
    let mut breaks: Vec<i64> = breaks[..pieces - 1].to_vec();
    breaks.sort_unstable();
    let mut slopes: Vec<i64> = (-8..=8).collect();
    slopes.shuffle(rng);
    let mut slopes: Vec<i64> = slopes[..pieces].to_vec();
    slopes.sort_unstable();
    if shape == Shape::Concave {
        slopes.reverse();
    }
    PwlFunction::new(
        shape,
        half(rng, -4, 4),
        breaks.into_iter().map(|b| ratio(b, 2)).collect(),
        slopes.into_iter().map(|s| ratio(s, 2)).collect(),
    )
    .expect("sorted data gives a valid function")
}

/// All-integer model: ≤ `max_vars` variables with bounds in `[0, max_bound]`,
/// ≤ `max_rows` constraints mixing convex, concave and linear terms.
pub fn random_integer_emip(
    rng: &mut ChaCha8Rng,
    max_vars: usize,
    max_bound: i64,
    max_rows: usize,
    max_pieces: usize,
) -> EmipModel {
    let mut model = EmipModel::new();
    let n = rng.gen_range(1..=max_vars);
    let vars: Vec<VarId> = (0..n)
        .map(|i| {
            let lo = rng.gen_range(0..=2.min(max_bound));
            let hi = rng.gen_range(lo..=max_bound);
            model.add_variable(format!("x{i}"), VarKind::Integer, int(lo), Some(int(hi)))
        })
        .collect();
    let rows = rng.gen_range(1..=max_rows);
    for _ in 0..rows {
        let mut c = EmipConstraint::new(half(rng, -6, 12));
        for &v in &vars {
            c = match rng.gen_range(0..5) {
                0 => c,
                1 => c
                    .with_lhs(v, random_pwl(rng, Shape::Convex, max_pieces))
                    .unwrap(),
                2 => c
                    .with_rhs(v, random_pwl(rng, Shape::Concave, max_pieces))
                    .unwrap(),
                3 => c
                    .with_lhs(v, PwlFunction::linear(half(rng, -3, 3)))
                    .unwrap(),
                _ => c
                    .with_rhs(v, PwlFunction::linear(half(rng, -3, 3)))
                    .unwrap(),
            };
        }
        model.add_constraint(c);
    }
    model
}

/// `Σ lhs ≤ Σ rhs + b` for every constraint, evaluated with [`locate_eval`],
/// plus bounds and integrality.
pub fn emip_holds(model: &EmipModel, x: &[Rational]) -> bool {
    if x.len() != model.variables.len() {
        return false;
    }
    for (v, value) in model.variables.iter().zip(x) {
        if *value < v.lower || v.upper.as_ref().is_some_and(|u| value > u) {
            return false;
        }
        if v.kind == VarKind::Integer && !value.is_integer() {
            return false;
        }
    }
    model.constraints.iter().all(|c| {
        let lhs: Rational = c
            .lhs
            .iter()
            .map(|(v, f)| locate_eval(f, &x[v.index()]))
            .sum();
        let rhs: Rational = c
            .rhs
            .iter()
            .map(|(v, g)| locate_eval(g, &x[v.index()]))
            .sum();
        lhs <= rhs + &c.b
    })
}

/// Integer points of the (bounded, all-integer) model's box in lexicographic order.
pub fn grid_points(model: &EmipModel) -> Vec<Vec<Rational>> {
    let ranges: Vec<(i64, i64)> = model
        .variables
        .iter()
        .map(|v| {
            let lo = v.lower.ceil().to_integer().try_into().unwrap();
            let hi = v
                .upper
                .as_ref()
                .expect("bounded")
                .floor()
                .to_integer()
                .try_into()
                .unwrap();
            (lo, hi)
        })
        .collect();
    let mut points = vec![Vec::new()];
    for (lo, hi) in ranges {
        points = points
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |k| {
                    let mut q = p.clone();
                    q.push(int(k));
                    q
                })
            })
            .collect();
    }
    points
}

pub fn grid_feasible(model: &EmipModel) -> Option<Vec<Rational>> {
    grid_points(model)
        .into_iter()
        .find(|p| emip_holds(model, p))
}

pub fn sets_from(rows: Vec<Vec<(usize, u64)>>) -> Vec<BTreeMap<usize, u64>> {
    rows.into_iter()
        .map(|r| r.into_iter().filter(|(_, t)| *t > 0).collect())
        .collect()
}

/// 0/1 multiplicities, weights in `1..=max_weight`.
pub fn random_set_instance(
    rng: &mut ChaCha8Rng,
    max_sets: usize,
    max_m: usize,
    max_weight: u64,
) -> CoverInstance {
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(1..=max_sets);
    let sets = sets_from(
        (0..n)
            .map(|_| (0..m).map(|e| (e, u64::from(rng.gen_bool(0.45)))).collect())
            .collect(),
    );
    let weights: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=max_weight)).collect();
    let requirements = (0..m).map(|_| rng.gen_range(0..=3)).collect();
    let total: u64 = weights.iter().sum();
    let budget = rng.gen_range(0..=total);
    CoverInstance::new(m, sets, requirements, budget).with_weights(weights)
}

/// Each set has one multiplicity `t ≤ max_t` on its support.
pub fn random_uniform_instance(
    rng: &mut ChaCha8Rng,
    max_sets: usize,
    max_m: usize,
    max_t: u64,
) -> CoverInstance {
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(1..=max_sets);
    let sets = sets_from(
        (0..n)
            .map(|_| {
                let t = rng.gen_range(1..=max_t);
                (0..m)
                    .map(|e| (e, if rng.gen_bool(0.5) { t } else { 0 }))
                    .collect()
            })
            .collect(),
    );
    let requirements = (0..m).map(|_| rng.gen_range(0..=2 * max_t)).collect();
    let budget = rng.gen_range(0..=n as u64);
    CoverInstance::new(m, sets, requirements, budget)
}

/// Arbitrary multiplicities up to `max_t`, unit weights.
pub fn random_multiset_instance(
    rng: &mut ChaCha8Rng,
    max_sets: usize,
    max_m: usize,
    max_t: u64,
) -> CoverInstance {
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(1..=max_sets);
    let sets = sets_from(
        (0..n)
            .map(|_| (0..m).map(|e| (e, rng.gen_range(0..=max_t))).collect())
            .collect(),
    );
    let requirements = (0..m).map(|_| rng.gen_range(0..=2 * max_t)).collect();
    CoverInstance::new(m, sets, requirements, n as u64)
}

/// Independent check of a cover: indices distinct and in range, requirements met, cost within budget.
pub fn cover_violation(instance: &CoverInstance, chosen: &[usize]) -> Option<String> {
    let mut seen = chosen.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != chosen.len() || seen.iter().any(|&j| j >= instance.sets.len()) {
        return Some(format!("bad indices {chosen:?}"));
    }
    let cost: u64 = chosen.iter().map(|&j| instance.weights[j]).sum();
    if cost > instance.budget {
        return Some(format!("cost {cost} > budget {}", instance.budget));
    }
    for e in 0..instance.universe_size {
        let got: u64 = chosen
            .iter()
            .map(|&j| instance.sets[j].get(&e).copied().unwrap_or(0))
            .sum();
        if got < instance.requirements[e] {
            return Some(format!("element {e}: {got} < {}", instance.requirements[e]));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElectionKind {
    Priced,
    Weighted,
}

/// Up to `max_voters` voters over `2..=max_candidates` candidates; addable pool for CCAV.
pub fn random_approval_election(
    rng: &mut ChaCha8Rng,
    kind: ElectionKind,
    max_voters: usize,
    max_candidates: usize,
    max_value: u64,
) -> ApprovalElection {
    let m = rng.gen_range(2..=max_candidates);
    let voter = |rng: &mut ChaCha8Rng| {
        let approves: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.4)).collect();
        let value = rng.gen_range(1..=max_value);
        match kind {
            ElectionKind::Priced => ApprovalVoter::new(approves).with_price(value),
            ElectionKind::Weighted => ApprovalVoter::new(approves).with_weight(value),
        }
    };
    let n = rng.gen_range(1..=max_voters);
    let voters: Vec<ApprovalVoter> = (0..n).map(|_| voter(rng)).collect();
    let q = rng.gen_range(0..=max_voters.min(6));
    let addable: Vec<ApprovalVoter> = (0..q).map(|_| voter(rng)).collect();
    let budget = match kind {
        ElectionKind::Priced => rng.gen_range(0..=3 * max_value),
        ElectionKind::Weighted => rng.gen_range(0..=n as u64 / 2 + 1),
    };
    let mut e = ApprovalElection::with_candidates(m, voters, budget);
    e.addable = addable;
    e
}

pub fn borda(m: usize) -> Vec<i64> {
    (0..m as i64).rev().collect()
}

pub fn k_approval(m: usize, k: usize) -> Vec<i64> {
    (0..m).map(|i| i64::from(i < k)).collect()
}

pub fn random_ordinal_election(
    rng: &mut ChaCha8Rng,
    m: usize,
    scoring: Vec<i64>,
    max_voters: usize,
    max_price: u64,
) -> OrdinalElection {
    let n = rng.gen_range(1..=max_voters);
    // A small pool of rankings so that several voters share one.
    let pool: Vec<Vec<usize>> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let mut r: Vec<usize> = (0..m).collect();
            r.shuffle(rng);
            r
        })
        .collect();
    let voters = (0..n)
        .map(|_| RankedVoter {
            ranking: pool.choose(rng).unwrap().clone(),
            price: rng.gen_range(1..=max_price),
        })
        .collect();
    let budget = rng.gen_range(0..=3 * max_price);
    OrdinalElection::with_candidates(m, voters, scoring, budget)
}

/// True if `p` (candidate 0) has at least as many points as everyone else.
pub fn p_ties_or_wins<T: PartialOrd>(scores: &[T]) -> bool {
    scores.iter().skip(1).all(|s| *s <= scores[0])
}

pub fn approval_scores<'a>(
    m: usize,
    voters: impl IntoIterator<Item = &'a ApprovalVoter>,
) -> Vec<u64> {
    let mut s = vec![0; m];
    for v in voters {
        for &c in &v.approves {
            s[c] += v.weight;
        }
    }
    s
}

pub fn nonnegative(x: &Rational) -> bool {
    !x.is_negative()
}

/// Multiplicities spread over several orders of magnitude; requirements are
/// drawn below the coverage of a random subfamily, so a cover always exists.
pub fn random_spread_instance(
    rng: &mut ChaCha8Rng,
    max_sets: usize,
    max_m: usize,
) -> CoverInstance {
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(1..=max_sets);
    let draw = |rng: &mut ChaCha8Rng| -> u64 {
        match rng.gen_range(0..5) {
            0 => 0,
            1 => rng.gen_range(1..=10),
            2 => rng.gen_range(100..=1_000),
            3 => rng.gen_range(10_000..=1_000_000),
            _ => rng.gen_range(1_000_000..=100_000_000),
        }
    };
    let sets = sets_from(
        (0..n)
            .map(|_| (0..m).map(|e| (e, draw(rng))).collect())
            .collect(),
    );
    let picked: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
    let requirements = (0..m)
        .map(|e| {
            let avail: u64 = picked
                .iter()
                .map(|&j| sets[j].get(&e).copied().unwrap_or(0))
                .sum();
            rng.gen_range(0..=avail)
        })
        .collect();
    CoverInstance::new(m, sets, requirements, n as u64)
}
