//! Mixed integer linear programs `A·x ≤ b` and an exact feasibility solver.
//!
//! Every row is stored with integer coefficients (denominators are cleared
//! when the row is added). Feasibility is decided by depth-first
//! branch-and-bound over an exact-rational bounded simplex, so a `Feasible`
//! answer comes with an assignment that satisfies every row exactly.

mod branch;
mod lp_format;
mod simplex;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::AddAssign;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{denominator_lcm, format_rational, Rational};

pub use lp_format::{export_lp, parse_lp, LpParseError};

pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Integer,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Sparse linear form `Σ coefficient·x`.
pub type LinearForm = BTreeMap<VarId, Rational>;

pub fn eval_form(form: &LinearForm, assignment: &[Rational]) -> Rational {
    form.iter()
        .map(|(v, c)| c * &assignment[v.index()])
        .fold(Rational::zero(), |acc, t| acc + t)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    pub sense: Sense,
    pub coefficients: LinearForm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MilpVariable {
    pub name: String,
    pub kind: VarKind,
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

/// `Σ coefficients·x ≤ rhs` with integer coefficients and right-hand side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    coefficients: LinearForm,
    rhs: Rational,
}

impl Row {
    /// Merges repeated variables, drops zero coefficients and clears denominators.
    pub fn new<I>(terms: I, rhs: Rational) -> Self
    where
        I: IntoIterator<Item = (VarId, Rational)>,
    {
        let mut coefficients = LinearForm::new();
        for (var, coef) in terms {
            *coefficients.entry(var).or_insert_with(Rational::zero) += coef;
        }
        coefficients.retain(|_, c| !c.is_zero());
        let scale = denominator_lcm(coefficients.values().chain(std::iter::once(&rhs)));
        if scale.is_one() {
            return Self { coefficients, rhs };
        }
        let scale = Rational::from_integer(scale);
        for c in coefficients.values_mut() {
            *c *= &scale;
        }
        Self {
            coefficients,
            rhs: rhs * scale,
        }
    }

    pub fn coefficients(&self) -> &LinearForm {
        &self.coefficients
    }

    pub fn rhs(&self) -> &Rational {
        &self.rhs
    }

    pub fn activity(&self, assignment: &[Rational]) -> Rational {
        eval_form(&self.coefficients, assignment)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MilpModel {
    variables: Vec<MilpVariable>,
    rows: Vec<Row>,
    pub objective: Option<Objective>,
}

/// First constraint an assignment breaks.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("assignment has {got} values for {expected} variables")]
    Length { expected: usize, got: usize },
    #[error("row {row}: activity {activity} exceeds {rhs}")]
    Row {
        row: usize,
        activity: String,
        rhs: String,
    },
    #[error("variable {name}: value {value} outside its bounds")]
    Bound { name: String, value: String },
    #[error("integer variable {name} has fractional value {value}")]
    Integrality { name: String, value: String },
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Integer bounds are rounded inward.
    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: Option<Rational>,
        upper: Option<Rational>,
    ) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Integer => (lower.map(|l| l.ceil()), upper.map(|u| u.floor())),
            VarKind::Continuous => (lower, upper),
        };
        self.variables.push(MilpVariable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_row<I>(&mut self, terms: I, rhs: Rational)
    where
        I: IntoIterator<Item = (VarId, Rational)>,
    {
        self.rows.push(Row::new(terms, rhs));
    }

    /// Adds `Σ terms ≥ rhs` as `Σ -terms ≤ -rhs`.
    pub fn add_ge_row<I>(&mut self, terms: I, rhs: Rational)
    where
        I: IntoIterator<Item = (VarId, Rational)>,
    {
        self.add_row(terms.into_iter().map(|(v, c)| (v, -c)), -rhs);
    }

    pub fn push_row(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn variables(&self) -> &[MilpVariable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &MilpVariable {
        &self.variables[id.index()]
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_integer_vars(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Integer)
            .count()
    }

    /// Exact check of every row, bound and integrality mark.
    pub fn check(&self, assignment: &[Rational]) -> Result<(), Violation> {
        if assignment.len() != self.variables.len() {
            return Err(Violation::Length {
                expected: self.variables.len(),
                got: assignment.len(),
            });
        }
        for (var, value) in self.variables.iter().zip(assignment) {
            let below = var.lower.as_ref().is_some_and(|l| value < l);
            let above = var.upper.as_ref().is_some_and(|u| value > u);
            if below || above {
                return Err(Violation::Bound {
                    name: var.name.clone(),
                    value: format_rational(value),
                });
            }
            if var.kind == VarKind::Integer && !value.is_integer() {
                return Err(Violation::Integrality {
                    name: var.name.clone(),
                    value: format_rational(value),
                });
            }
        }
        for (index, row) in self.rows.iter().enumerate() {
            let activity = row.activity(assignment);
            if activity > row.rhs {
                return Err(Violation::Row {
                    row: index,
                    activity: format_rational(&activity),
                    rhs: format_rational(&row.rhs),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub lp_pivots: u64,
    pub milp_solves: u64,
}

impl AddAssign for SolveStats {
    fn add_assign(&mut self, rhs: Self) {
        self.nodes += rhs.nodes;
        self.lp_pivots += rhs.lp_pivots;
        self.milp_solves += rhs.milp_solves;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveStatus {
    Feasible(Vec<Rational>),
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn assignment(&self) -> Option<&[Rational]> {
        match &self.status {
            SolveStatus::Feasible(x) => Some(x),
            SolveStatus::Infeasible => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self.status, SolveStatus::Feasible(_))
    }
}

/// Largest integer threshold `T*` with `objective ≥ T*` feasible, and a witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Maximum {
    pub threshold: BigInt,
    pub assignment: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaximizeResult {
    pub best: Option<Maximum>,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MilpError {
    #[error("integer variable {name} needs finite lower and upper bounds")]
    UnboundedInteger { name: String },
    #[error("node limit of {limit} exhausted")]
    ResourceExhausted { limit: u64 },
    #[error("empty threshold bracket [{lo}, {hi}]")]
    EmptyBracket { lo: String, hi: String },
    #[error("internal solver inconsistency: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    pub node_limit: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

/// Owns the options of one solve; instances are independent of each other.
#[derive(Debug, Clone, Default)]
pub struct Solver {
    options: SolverOptions,
}

impl Solver {
    pub fn new(options: SolverOptions) -> Self {
        Self { options }
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn solve_feasibility(&self, model: &MilpModel) -> Result<SolveResult, MilpError> {
        let result = branch::solve(model, &self.options)?;
        if let SolveStatus::Feasible(x) = &result.status {
            model
                .check(x)
                .map_err(|v| MilpError::Internal(format!("returned assignment fails: {v}")))?;
        }
        Ok(result)
    }

    /// Binary search for the largest integer `T` in `[t_lo, t_hi]` such that
    /// the model plus `objective ≥ T` is feasible.
    pub fn maximize(
        &self,
        model: &MilpModel,
        objective: &LinearForm,
        t_lo: &Rational,
        t_hi: &Rational,
    ) -> Result<MaximizeResult, MilpError> {
        if t_lo > t_hi {
            return Err(MilpError::EmptyBracket {
                lo: format_rational(t_lo),
                hi: format_rational(t_hi),
            });
        }
        let mut stats = SolveStats::default();
        let mut lo = t_lo.ceil().to_integer();
        let top = t_hi.floor().to_integer();
        if lo > top {
            return Ok(MaximizeResult { best: None, stats });
        }

        let mut probe = |threshold: &BigInt| -> Result<Option<Vec<Rational>>, MilpError> {
            let mut bounded = model.clone();
            bounded.add_ge_row(
                objective.iter().map(|(v, c)| (*v, c.clone())),
                Rational::from_integer(threshold.clone()),
            );
            let result = self.solve_feasibility(&bounded)?;
            stats += result.stats;
            Ok(match result.status {
                SolveStatus::Feasible(x) => Some(x),
                SolveStatus::Infeasible => None,
            })
        };

        let Some(mut witness) = probe(&lo)? else {
            return Ok(MaximizeResult { best: None, stats });
        };
        let mut hi = top.clone();
        let mut refuted_above: Option<BigInt> = None;
        lo = lo
            .max(eval_form(objective, &witness).floor().to_integer())
            .min(hi.clone());
        while lo < hi {
            let mid = &lo + (&hi - &lo + BigInt::one()) / BigInt::from(2);
            match probe(&mid)? {
                Some(x) => {
                    lo = mid
                        .max(eval_form(objective, &x).floor().to_integer())
                        .min(hi.clone());
                    witness = x;
                }
                None => {
                    hi = &mid - BigInt::one();
                    refuted_above = Some(mid);
                }
            }
        }
        let lo_rational = Rational::from_integer(lo.clone());
        if eval_form(objective, &witness) < lo_rational {
            return Err(MilpError::Internal("witness below threshold".into()));
        }
        if lo != top && refuted_above != Some(&lo + BigInt::one()) {
            return Err(MilpError::Internal(
                "threshold above optimum not refuted".into(),
            ));
        }
        Ok(MaximizeResult {
            best: Some(Maximum {
                threshold: lo,
                assignment: witness,
            }),
            stats,
        })
    }

    /// `min objective` as `-max(-objective)`; the returned threshold is the minimum.
    pub fn minimize(
        &self,
        model: &MilpModel,
        objective: &LinearForm,
        t_lo: &Rational,
        t_hi: &Rational,
    ) -> Result<MaximizeResult, MilpError> {
        let negated: LinearForm = objective.iter().map(|(v, c)| (*v, -c)).collect();
        let mut result = self.maximize(model, &negated, &-t_hi, &-t_lo)?;
        if let Some(best) = result.best.as_mut() {
            best.threshold = -best.threshold.clone();
        }
        Ok(result)
    }
}

pub fn solve_feasibility(model: &MilpModel) -> Result<SolveResult, MilpError> {
    Solver::default().solve_feasibility(model)
}

pub fn maximize(
    model: &MilpModel,
    objective: &LinearForm,
    t_lo: &Rational,
    t_hi: &Rational,
) -> Result<MaximizeResult, MilpError> {
    Solver::default().maximize(model, objective, t_lo, t_hi)
}
