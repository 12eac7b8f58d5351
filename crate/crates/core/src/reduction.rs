//! Lowering of a normalized eMIP to an ordinary MILP.
//!
//! Each constraint with a non-linear term becomes `Σ w ≤ Σ u + b` plus, per
//! convex term `f(x)` with breakpoints `ρ_ℓ`,
//!
//! ```text
//! z_ℓ ≥ 0,   z_ℓ ≥ x − ρ_ℓ,   x·der(0) + Σ_ℓ z_ℓ·(der(ℓ) − der(ℓ−1)) ≤ w
//! ```
//!
//! and per concave term `g(x)` the mirror image with `y_ℓ` and
//! `u ≤ x·der(0) + Σ_ℓ y_ℓ·(der(ℓ) − der(ℓ−1))`. Linear terms enter the main
//! row directly. All auxiliaries are continuous, so the integer variables of
//! the MILP are exactly those of the eMIP.

use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::emip::{AssignmentError, EmipModel, ModelViolation};
use crate::milp::{
    LinearForm, MilpError, MilpModel, Objective, Sense, SolveStats, SolveStatus, Solver, VarId,
    VarKind,
};
use crate::pwl::PwlFunction;
use crate::rational::{denominator_lcm, int, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("model is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ModelViolation>),
    #[error("model is not normalized (constraint {constraint})")]
    NotNormalized { constraint: usize },
    #[error("integer variable {name} is transformed but has no upper bound")]
    UnboundedTransformedInteger { name: String },
    #[error("objective needs a bracket: variable {name} is unbounded")]
    UnboundedObjective { name: String },
    #[error("MILP solution has {got} values, lowering has {expected}")]
    WitnessLength { expected: usize, got: usize },
    #[error("lifted assignment fails the eMIP: {0}")]
    LiftFailed(AssignmentError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lhs,
    Rhs,
}

/// Auxiliaries of one non-linear term: `w` (or `u`) and one `z` (or `y`) per breakpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermAux {
    pub constraint: usize,
    pub var: VarId,
    pub side: Side,
    pub value: VarId,
    pub breakpoints: Vec<VarId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoweringMap {
    /// MILP id of each eMIP variable.
    pub original: Vec<VarId>,
    pub terms: Vec<TermAux>,
    /// MILP row that carries each eMIP constraint.
    pub constraint_rows: Vec<usize>,
    num_milp_vars: usize,
    model: EmipModel,
}

impl LoweringMap {
    pub fn model(&self) -> &EmipModel {
        &self.model
    }

    pub fn num_auxiliaries(&self) -> usize {
        self.num_milp_vars - self.original.len()
    }
}

fn term_bounds(
    f: &PwlFunction,
    lower: &Rational,
    upper: Option<&Rational>,
) -> (Option<Rational>, Option<Rational>) {
    match upper {
        Some(u) => {
            let (min, max) = f.range_on(lower, u);
            (Some(min.floor()), Some(max.ceil()))
        }
        None => (None, None),
    }
}

/// Builds the MILP for a normalized model.
pub fn lower(model: &EmipModel) -> Result<(MilpModel, LoweringMap), ReductionError> {
    let violations = model.validate();
    if !violations.is_empty() {
        return Err(ReductionError::Invalid(violations));
    }
    for (j, c) in model.constraints.iter().enumerate() {
        let ok = c.lhs.iter().chain(c.rhs.iter()).all(|(v, f)| {
            let lower = &model.variable(*v).lower;
            f.value_at_zero().is_zero() && f.breakpoints().iter().all(|r| r > lower)
        });
        if !ok {
            return Err(ReductionError::NotNormalized { constraint: j });
        }
    }
    let transformed = model.transformed_variables();
    for (i, var) in model.variables.iter().enumerate() {
        if var.kind == VarKind::Integer && var.upper.is_none() && transformed.contains(&VarId(i)) {
            return Err(ReductionError::UnboundedTransformedInteger {
                name: var.name.clone(),
            });
        }
    }

    let mut milp = MilpModel::new();
    let original: Vec<VarId> = model
        .variables
        .iter()
        .map(|v| {
            milp.add_variable(
                v.name.clone(),
                v.kind,
                Some(v.lower.clone()),
                v.upper.clone(),
            )
        })
        .collect();
    let mut terms = Vec::new();
    let mut constraint_rows = Vec::with_capacity(model.constraints.len());

    for (j, c) in model.constraints.iter().enumerate() {
        // Main row: Σ lhs − Σ rhs ≤ b, with non-linear terms replaced by w / u.
        let mut main: Vec<(VarId, Rational)> = Vec::new();
        let mut aux_rows: Vec<(Vec<(VarId, Rational)>, Rational)> = Vec::new();
        let sides = [(Side::Lhs, &c.lhs), (Side::Rhs, &c.rhs)];
        for (side, functions) in sides {
            let sign = match side {
                Side::Lhs => int(1),
                Side::Rhs => int(-1),
            };
            for (v, f) in functions {
                let x = original[v.index()];
                if f.is_linear() {
                    main.push((x, &sign * &f.slopes()[0]));
                    continue;
                }
                let var = model.variable(*v);
                let tag = match side {
                    Side::Lhs => ("w", "z"),
                    Side::Rhs => ("u", "y"),
                };
                let (lo, hi) = term_bounds(f, &var.lower, var.upper.as_ref());
                let value = milp.add_variable(
                    format!("_{}.{j}.{}", tag.0, v.index()),
                    VarKind::Continuous,
                    lo,
                    hi,
                );
                main.push((value, sign.clone()));

                let mut linkage: Vec<(VarId, Rational)> = vec![(x, f.slopes()[0].clone())];
                let mut breakpoints = Vec::with_capacity(f.breakpoints().len());
                for (l, rho) in f.breakpoints().iter().enumerate() {
                    let cap = var.upper.as_ref().map(|u| {
                        let gap = u - rho;
                        if gap.is_positive() {
                            gap.ceil()
                        } else {
                            Rational::zero()
                        }
                    });
                    let aux = milp.add_variable(
                        format!("_{}.{j}.{}.{}", tag.1, v.index(), l + 1),
                        VarKind::Continuous,
                        None,
                        cap,
                    );
                    // aux ≥ 0
                    aux_rows.push((vec![(aux, int(-1))], Rational::zero()));
                    // aux ≥ x − ρ
                    aux_rows.push((vec![(x, int(1)), (aux, int(-1))], rho.clone()));
                    linkage.push((aux, f.slope_jump(l + 1)));
                    breakpoints.push(aux);
                }
                match side {
                    // x·der0 + Σ z·Δ − w ≤ 0
                    Side::Lhs => {
                        linkage.push((value, int(-1)));
                        aux_rows.push((linkage, Rational::zero()));
                    }
                    // u − x·der0 − Σ y·Δ ≤ 0
                    Side::Rhs => {
                        let mut row: Vec<(VarId, Rational)> =
                            linkage.into_iter().map(|(v, a)| (v, -a)).collect();
                        row.push((value, int(1)));
                        aux_rows.push((row, Rational::zero()));
                    }
                }
                terms.push(TermAux {
                    constraint: j,
                    var: *v,
                    side,
                    value,
                    breakpoints,
                });
            }
        }
        constraint_rows.push(milp.rows().len());
        milp.add_row(main, c.b.clone());
        for (row, rhs) in aux_rows {
            milp.add_row(row, rhs);
        }
    }

    if let Some(obj) = &model.objective {
        let scale = Rational::from_integer(denominator_lcm(obj.coefficients.values()));
        milp.objective = Some(Objective {
            sense: obj.sense,
            coefficients: obj
                .coefficients
                .iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|(v, c)| (original[v.index()], c * &scale))
                .collect(),
        });
    }

    let num_milp_vars = milp.num_vars();
    Ok((
        milp,
        LoweringMap {
            original,
            terms,
            constraint_rows,
            num_milp_vars,
            model: model.clone(),
        },
    ))
}

/// Restricts a MILP solution to the eMIP variables and re-checks it by direct evaluation.
pub fn witness_lift(
    map: &LoweringMap,
    milp_solution: &[Rational],
) -> Result<Vec<Rational>, ReductionError> {
    if milp_solution.len() != map.num_milp_vars {
        return Err(ReductionError::WitnessLength {
            expected: map.num_milp_vars,
            got: milp_solution.len(),
        });
    }
    let assignment: Vec<Rational> = map
        .original
        .iter()
        .map(|id| milp_solution[id.index()].clone())
        .collect();
    map.model
        .check(&assignment)
        .map_err(ReductionError::LiftFailed)?;
    Ok(assignment)
}

/// Extends an eMIP assignment with `w = f(x)`, `u = g(x)` and `z = y = max(0, x − ρ)`.
pub fn witness_embed(map: &LoweringMap, assignment: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); map.num_milp_vars];
    for (i, id) in map.original.iter().enumerate() {
        out[id.index()] = assignment[i].clone();
    }
    for term in &map.terms {
        let c = &map.model.constraints[term.constraint];
        let f = match term.side {
            Side::Lhs => &c.lhs[&term.var],
            Side::Rhs => &c.rhs[&term.var],
        };
        let x = &assignment[term.var.index()];
        out[term.value.index()] = f.eval(x);
        for (aux, rho) in term.breakpoints.iter().zip(f.breakpoints()) {
            let gap = x - rho;
            out[aux.index()] = if gap.is_positive() {
                gap
            } else {
                Rational::zero()
            };
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmipStatus {
    Feasible {
        assignment: Vec<Rational>,
        /// Objective value of `assignment`, when the model has an objective.
        objective: Option<Rational>,
    },
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmipSolution {
    pub status: EmipStatus,
    pub stats: SolveStats,
    pub milp_vars: usize,
    pub milp_integer_vars: usize,
    pub milp_rows: usize,
}

/// Normalizes, lowers and solves; with an objective, runs the threshold search.
pub fn solve_emip(model: &EmipModel, solver: &Solver) -> Result<EmipSolution, ReductionError> {
    let violations = model.validate();
    if !violations.is_empty() {
        return Err(ReductionError::Invalid(violations));
    }
    let normalized = model.normalize();
    let (milp, map) = lower(&normalized)?;
    let mut solution = EmipSolution {
        status: EmipStatus::Infeasible,
        stats: SolveStats::default(),
        milp_vars: milp.num_vars(),
        milp_integer_vars: milp.num_integer_vars(),
        milp_rows: milp.rows().len(),
    };
    let witness = match &milp.objective {
        None => {
            let result = solver.solve_feasibility(&milp)?;
            solution.stats = result.stats;
            match result.status {
                SolveStatus::Feasible(x) => Some(x),
                SolveStatus::Infeasible => None,
            }
        }
        Some(obj) => {
            let (lo, hi) = objective_bracket(model, &obj.coefficients, &map)?;
            let result = match obj.sense {
                Sense::Maximize => solver.maximize(&milp, &obj.coefficients, &lo, &hi)?,
                Sense::Minimize => solver.minimize(&milp, &obj.coefficients, &lo, &hi)?,
            };
            solution.stats = result.stats;
            result.best.map(|b| b.assignment)
        }
    };
    if let Some(x) = witness {
        let assignment = witness_lift(&map, &x)?;
        model
            .check(&assignment)
            .map_err(ReductionError::LiftFailed)?;
        solution.status = EmipStatus::Feasible {
            objective: model.objective_value(&assignment),
            assignment,
        };
    }
    Ok(solution)
}

/// Bracket for the scaled objective of the lowered model: the user bracket if
/// given, otherwise the range implied by the variable bounds.
fn objective_bracket(
    model: &EmipModel,
    scaled: &LinearForm,
    map: &LoweringMap,
) -> Result<(Rational, Rational), ReductionError> {
    let obj = model.objective.as_ref().expect("objective present");
    let scale = Rational::from_integer(denominator_lcm(obj.coefficients.values()));
    if let Some((lo, hi)) = &obj.bracket {
        return Ok((lo * &scale, hi * &scale));
    }
    let mut lo = Rational::zero();
    let mut hi = Rational::zero();
    for (i, id) in map.original.iter().enumerate() {
        let Some(c) = scaled.get(id) else { continue };
        let var = &model.variables[i];
        let Some(upper) = &var.upper else {
            return Err(ReductionError::UnboundedObjective {
                name: var.name.clone(),
            });
        };
        let (a, b) = (c * &var.lower, c * upper);
        if a <= b {
            lo += a;
            hi += b;
        } else {
            lo += b;
            hi += a;
        }
    }
    Ok((lo, hi))
}
