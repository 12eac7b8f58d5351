//! Multicover instances and the type-family solvers for Weighted Set
//! Multicover (WSM) and Uniform Multiset Multicover (UMM).
//!
//! Sets with the same support are interchangeable up to weight (WSM) or
//! multiplicity (UMM), so one integer variable per support counts how many of
//! them are taken; the cheapest (resp. largest) members are the ones chosen.
//! The sum over a family is a convex (resp. concave) function of that count,
//! which is exactly what an eMIP constraint can express.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emip::{EmipConstraint, EmipModel, EmipObjective};
use crate::io::{read_document, InputError};
use crate::milp::{Sense, SolveStats, Solver, VarId, VarKind};
use crate::pwl::PwlFunction;
use crate::rational::{int, Rational};
use crate::reduction::{solve_emip, EmipStatus, ReductionError};

pub const FORMAT: &str = "cover-v1";

/// Largest universe handled; supports are bitmasks over the elements.
pub const MAX_UNIVERSE: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverInstance {
    pub universe_size: usize,
    /// Element index to multiplicity; zero entries are ignored.
    pub sets: Vec<BTreeMap<usize, u64>>,
    pub weights: Vec<u64>,
    pub requirements: Vec<u64>,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverSolution {
    /// Chosen set indices, ascending.
    pub chosen: Vec<usize>,
    pub cost: u64,
    pub coverage: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome<T> {
    pub solution: Option<T>,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("set {set} has a multiplicity other than 0 or 1")]
    NotSetVariant { set: usize },
    #[error("set {set} has unequal nonzero multiplicities")]
    NotUniform { set: usize },
    #[error("set {set} has weight {weight}; unit weights required")]
    NonUnitWeight { set: usize, weight: u64 },
    #[error("decoded solution is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

/// Sort order inside a type family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyOrder {
    /// Ascending weight, ties by index.
    CheapestFirst,
    /// Descending uniform multiplicity, ties by index.
    LargestFirst,
}

impl CoverInstance {
    /// Instance with unit weights.
    pub fn new(
        universe_size: usize,
        sets: Vec<BTreeMap<usize, u64>>,
        requirements: Vec<u64>,
        budget: u64,
    ) -> Self {
        let weights = vec![1; sets.len()];
        Self {
            universe_size,
            sets,
            weights,
            requirements,
            budget,
        }
    }

    pub fn with_weights(mut self, weights: Vec<u64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn validate(&self) -> Result<(), CoverError> {
        let m = self.universe_size;
        if m > MAX_UNIVERSE {
            return Err(CoverError::Invalid(format!(
                "universe size {m} exceeds {MAX_UNIVERSE}"
            )));
        }
        if self.weights.len() != self.sets.len() {
            return Err(CoverError::Invalid(format!(
                "{} weights for {} sets",
                self.weights.len(),
                self.sets.len()
            )));
        }
        if self.requirements.len() != m {
            return Err(CoverError::Invalid(format!(
                "{} requirements for universe size {m}",
                self.requirements.len()
            )));
        }
        for (j, set) in self.sets.iter().enumerate() {
            if let Some(e) = set.keys().find(|e| **e >= m) {
                return Err(CoverError::Invalid(format!(
                    "set {j} mentions element {e} >= {m}"
                )));
            }
        }
        Ok(())
    }

    pub fn multiplicity(&self, set: usize, element: usize) -> u64 {
        self.sets[set].get(&element).copied().unwrap_or(0)
    }

    /// Bitmask of the elements with nonzero multiplicity.
    pub fn support(&self, set: usize) -> u32 {
        self.sets[set]
            .iter()
            .filter(|(_, t)| **t > 0)
            .fold(0, |mask, (e, _)| mask | (1 << e))
    }

    pub fn is_set_variant(&self) -> bool {
        self.sets.iter().all(|s| s.values().all(|t| *t <= 1))
    }

    /// Common nonzero multiplicity of set `j`, if it is uniform (0 for an empty set).
    pub fn uniform_multiplicity(&self, set: usize) -> Option<u64> {
        let mut values = self.sets[set].values().filter(|t| **t > 0);
        let first = values.next().copied().unwrap_or(0);
        values.all(|t| *t == first).then_some(first)
    }

    pub fn is_uniform_variant(&self) -> bool {
        (0..self.sets.len()).all(|j| self.uniform_multiplicity(j).is_some())
    }

    pub fn total_requirement(&self) -> u64 {
        self.requirements.iter().sum()
    }

    pub fn coverage_of(&self, chosen: &[usize]) -> Vec<u64> {
        let mut coverage = vec![0; self.universe_size];
        for &j in chosen {
            for (e, t) in &self.sets[j] {
                coverage[*e] += t;
            }
        }
        coverage
    }

    pub fn cost_of(&self, chosen: &[usize]) -> u64 {
        chosen.iter().map(|&j| self.weights[j]).sum()
    }

    pub fn solution_for(&self, mut chosen: Vec<usize>) -> CoverSolution {
        chosen.sort_unstable();
        CoverSolution {
            cost: self.cost_of(&chosen),
            coverage: self.coverage_of(&chosen),
            chosen,
        }
    }

    /// Checks a solution's own bookkeeping and that it meets requirements and budget.
    pub fn verify(&self, solution: &CoverSolution) -> Result<(), CoverError> {
        let fail = |m: String| Err(CoverError::Inconsistent(m));
        let mut sorted = solution.chosen.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != solution.chosen.len() || sorted.iter().any(|&j| j >= self.sets.len()) {
            return fail("chosen indices repeat or are out of range".into());
        }
        if solution.cost != self.cost_of(&solution.chosen) {
            return fail("cost differs from the chosen weights".into());
        }
        if solution.coverage != self.coverage_of(&solution.chosen) {
            return fail("coverage differs from the chosen sets".into());
        }
        if let Some(e) =
            (0..self.universe_size).find(|&e| solution.coverage[e] < self.requirements[e])
        {
            return fail(format!("element {e} is under-covered"));
        }
        if solution.cost > self.budget {
            return fail(format!(
                "cost {} exceeds budget {}",
                solution.cost, self.budget
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, InputError> {
        let doc: CoverDocument = read_document(text, FORMAT)?;
        let instance = doc.into_instance()?;
        instance
            .validate()
            .map_err(|e| InputError::Invalid(e.to_string()))?;
        Ok(instance)
    }

    pub fn to_json(&self) -> String {
        let doc = CoverDocument {
            format: FORMAT.to_string(),
            m: self.universe_size,
            sets: self
                .sets
                .iter()
                .map(|s| s.iter().map(|(e, t)| (e.to_string(), *t)).collect())
                .collect(),
            weights: Some(self.weights.clone()),
            requirements: self.requirements.clone(),
            budget: self.budget,
        };
        serde_json::to_string_pretty(&doc).expect("instance serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoverDocument {
    format: String,
    m: usize,
    sets: Vec<BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<u64>>,
    requirements: Vec<u64>,
    budget: u64,
}

impl CoverDocument {
    fn into_instance(self) -> Result<CoverInstance, InputError> {
        let mut sets = Vec::with_capacity(self.sets.len());
        for (j, set) in self.sets.into_iter().enumerate() {
            let mut parsed = BTreeMap::new();
            for (key, t) in set {
                let e: usize = key.parse().map_err(|_| {
                    InputError::Invalid(format!("set {j}: element key {key:?} is not an index"))
                })?;
                parsed.insert(e, t);
            }
            sets.push(parsed);
        }
        let weights = self.weights.unwrap_or_else(|| vec![1; sets.len()]);
        Ok(CoverInstance {
            universe_size: self.m,
            sets,
            weights,
            requirements: self.requirements,
            budget: self.budget,
        })
    }
}

/// Groups set indices by support. Every set appears in exactly one group.
pub fn type_families(instance: &CoverInstance, order: FamilyOrder) -> BTreeMap<u32, Vec<usize>> {
    let mut families: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for j in 0..instance.sets.len() {
        families.entry(instance.support(j)).or_default().push(j);
    }
    for members in families.values_mut() {
        match order {
            FamilyOrder::CheapestFirst => members.sort_by_key(|&j| (instance.weights[j], j)),
            FamilyOrder::LargestFirst => members.sort_by_key(|&j| {
                (
                    std::cmp::Reverse(instance.uniform_multiplicity(j).unwrap_or(0)),
                    j,
                )
            }),
        }
    }
    families
}

/// eMIP for an instance together with the family behind each variable.
#[derive(Debug, Clone)]
pub struct FamilyModel {
    pub model: EmipModel,
    pub families: Vec<(u32, Vec<usize>)>,
}

fn family_vars(model: &mut EmipModel, families: &[(u32, Vec<usize>)]) -> Vec<VarId> {
    families
        .iter()
        .map(|(mask, members)| {
            model.add_variable(
                format!("z{mask}"),
                VarKind::Integer,
                int(0),
                Some(int(members.len() as u64)),
            )
        })
        .collect()
}

fn nonempty_families(instance: &CoverInstance, order: FamilyOrder) -> Vec<(u32, Vec<usize>)> {
    type_families(instance, order)
        .into_iter()
        .filter(|(mask, _)| *mask != 0)
        .collect()
}

/// WSM as an eMIP: coverage `Σ_{U ∋ e} z_U ≥ r_e` and budget `Σ f_U(z_U) ≤ B`
/// with `f_U` the prefix sums of the family's sorted weights.
pub fn build_wsm_model(instance: &CoverInstance) -> Result<FamilyModel, CoverError> {
    instance.validate()?;
    if let Some(set) = (0..instance.sets.len()).find(|&j| instance.sets[j].values().any(|t| *t > 1))
    {
        return Err(CoverError::NotSetVariant { set });
    }
    let families = nonempty_families(instance, FamilyOrder::CheapestFirst);
    let mut model = EmipModel::new();
    let vars = family_vars(&mut model, &families);
    add_linear_coverage(&mut model, instance, &families, &vars);
    let mut budget = EmipConstraint::new(int(instance.budget));
    for ((_, members), var) in families.iter().zip(&vars) {
        let weights: Vec<i64> = members
            .iter()
            .map(|&j| weight_i64(instance.weights[j]))
            .collect();
        let f = PwlFunction::from_sorted_weights(&weights).expect("weights are nonnegative");
        budget = budget.with_lhs(*var, f).expect("distinct variables");
    }
    model.add_constraint(budget);
    Ok(FamilyModel { model, families })
}

/// UMM as an eMIP: coverage `Σ_{U ∋ e} g_U(z_U) ≥ r_e` with `g_U` the prefix
/// sums of the family's multiplicities (largest first), and `Σ z_U ≤ B`.
pub fn build_umm_model(instance: &CoverInstance) -> Result<FamilyModel, CoverError> {
    instance.validate()?;
    if let Some(set) =
        (0..instance.sets.len()).find(|&j| instance.uniform_multiplicity(j).is_none())
    {
        return Err(CoverError::NotUniform { set });
    }
    if let Some(set) = instance.weights.iter().position(|w| *w != 1) {
        return Err(CoverError::NonUnitWeight {
            set,
            weight: instance.weights[set],
        });
    }
    let families = nonempty_families(instance, FamilyOrder::LargestFirst);
    let mut model = EmipModel::new();
    let vars = family_vars(&mut model, &families);
    let gains: Vec<PwlFunction> = families
        .iter()
        .map(|(_, members)| {
            let mults: Vec<i64> = members
                .iter()
                .map(|&j| weight_i64(instance.uniform_multiplicity(j).expect("checked uniform")))
                .collect();
            PwlFunction::from_sorted_multiplicities(&mults).expect("nonempty support means t >= 1")
        })
        .collect();
    for e in 0..instance.universe_size {
        // 0 ≤ Σ g_U(z_U) − r_e
        let mut c = EmipConstraint::new(-int(instance.requirements[e]));
        for (((mask, _), var), g) in families.iter().zip(&vars).zip(&gains) {
            if mask & (1 << e) != 0 {
                c = c.with_rhs(*var, g.clone()).expect("distinct variables");
            }
        }
        model.add_constraint(c);
    }
    model.add_constraint(EmipConstraint::linear_le(
        vars.iter().map(|v| (*v, int(1))),
        int(instance.budget),
    ));
    Ok(FamilyModel { model, families })
}

fn weight_i64(value: u64) -> i64 {
    i64::try_from(value).expect("weights fit in i64")
}

fn add_linear_coverage(
    model: &mut EmipModel,
    instance: &CoverInstance,
    families: &[(u32, Vec<usize>)],
    vars: &[VarId],
) {
    for e in 0..instance.universe_size {
        let terms = families
            .iter()
            .zip(vars)
            .filter(|((mask, _), _)| mask & (1 << e) != 0)
            .map(|(_, var)| (*var, int(1)));
        model.add_constraint(EmipConstraint::linear_ge(
            terms,
            int(instance.requirements[e]),
        ));
    }
}

/// Turns the budget row `Σ f ≤ B` into `Σ f ≤ cost` and minimizes `cost` over `[0, hi]`.
pub(crate) fn with_cost_objective(model: &mut EmipModel, budget_row: usize, hi: u64) {
    let cost = model.add_variable("cost", VarKind::Continuous, int(0), Some(int(hi)));
    model.constraints[budget_row]
        .rhs
        .insert(cost, PwlFunction::linear(int(1)));
    model.constraints[budget_row].b = int(0);
    model.objective = Some(EmipObjective {
        sense: Sense::Minimize,
        coefficients: [(cost, int(1))].into_iter().collect(),
        bracket: Some((int(0), int(hi))),
    });
}

fn decode(
    instance: &CoverInstance,
    families: &[(u32, Vec<usize>)],
    assignment: &[Rational],
) -> Result<CoverSolution, CoverError> {
    let mut chosen = Vec::new();
    for (i, (_, members)) in families.iter().enumerate() {
        let count = assignment[i]
            .to_integer()
            .to_usize()
            .ok_or_else(|| CoverError::Inconsistent("negative family count".into()))?;
        chosen.extend(members.iter().take(count));
    }
    let solution = instance.solution_for(chosen);
    instance.verify(&solution)?;
    Ok(solution)
}

fn run(
    instance: &CoverInstance,
    built: FamilyModel,
    solver: &Solver,
) -> Result<Outcome<CoverSolution>, CoverError> {
    let result = solve_emip(&built.model, solver)?;
    let solution = match result.status {
        EmipStatus::Feasible { assignment, .. } => {
            Some(decode(instance, &built.families, &assignment)?)
        }
        EmipStatus::Infeasible => None,
    };
    Ok(Outcome {
        solution,
        stats: result.stats,
    })
}

/// Some WSM solution within budget, or `None` if there is none.
pub fn solve_wsm(
    instance: &CoverInstance,
    solver: &Solver,
) -> Result<Outcome<CoverSolution>, CoverError> {
    let built = build_wsm_model(instance)?;
    run(instance, built, solver)
}

/// A cheapest WSM solution within budget.
pub fn solve_wsm_min_cost(
    instance: &CoverInstance,
    solver: &Solver,
) -> Result<Outcome<CoverSolution>, CoverError> {
    let mut built = build_wsm_model(instance)?;
    let budget_row = built.model.constraints.len() - 1;
    let total: u64 = instance.weights.iter().sum();
    with_cost_objective(&mut built.model, budget_row, instance.budget.min(total));
    run(instance, built, solver)
}

/// Some UMM solution with at most `budget` sets, or `None`.
pub fn solve_umm(
    instance: &CoverInstance,
    solver: &Solver,
) -> Result<Outcome<CoverSolution>, CoverError> {
    let built = build_umm_model(instance)?;
    run(instance, built, solver)
}

/// A UMM solution with the fewest sets.
pub fn solve_umm_min_cost(
    instance: &CoverInstance,
    solver: &Solver,
) -> Result<Outcome<CoverSolution>, CoverError> {
    let mut built = build_umm_model(instance)?;
    let budget_row = built.model.constraints.len() - 1;
    let hi = instance.budget.min(instance.sets.len() as u64);
    with_cost_objective(&mut built.model, budget_row, hi);
    run(instance, built, solver)
}
