//! Mixed integer programs with piecewise-linear variable transformations.
//!
//! A constraint reads `Σ f_i(x_i) ≤ Σ g_i(x_i) + b` where every `f_i` is convex
//! (or linear) and every `g_i` is concave (or linear). Absent variables
//! contribute nothing. An optional linear objective is carried along and
//! realized later as a threshold constraint.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{read_document, InputError};
use crate::milp::{eval_form, LinearForm, Sense, VarId, VarKind};
use crate::pwl::{PwlError, PwlFunction};
use crate::rational::{format_rational, Rational, RationalText};

pub const FORMAT: &str = "emip-v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: Rational,
    pub upper: Option<Rational>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmipConstraint {
    pub lhs: BTreeMap<VarId, PwlFunction>,
    pub rhs: BTreeMap<VarId, PwlFunction>,
    pub b: Rational,
}

impl EmipConstraint {
    pub fn new(b: Rational) -> Self {
        Self {
            b,
            ..Self::default()
        }
    }

    /// Adds `f(x)` to the left side, summing with an existing term on `x`.
    pub fn with_lhs(mut self, var: VarId, f: PwlFunction) -> Result<Self, PwlError> {
        add_term(&mut self.lhs, var, f)?;
        Ok(self)
    }

    /// Adds `g(x)` to the right side, summing with an existing term on `x`.
    pub fn with_rhs(mut self, var: VarId, g: PwlFunction) -> Result<Self, PwlError> {
        add_term(&mut self.rhs, var, g)?;
        Ok(self)
    }

    /// `Σ a·x ≤ b`.
    pub fn linear_le<I>(terms: I, b: Rational) -> Self
    where
        I: IntoIterator<Item = (VarId, Rational)>,
    {
        let mut c = Self::new(b);
        for (var, a) in terms {
            add_term(&mut c.lhs, var, PwlFunction::linear(a)).expect("linear terms always add");
        }
        c
    }

    /// `Σ a·x ≥ b`, stored as `Σ -a·x ≤ -b`.
    pub fn linear_ge<I>(terms: I, b: Rational) -> Self
    where
        I: IntoIterator<Item = (VarId, Rational)>,
    {
        Self::linear_le(terms.into_iter().map(|(v, a)| (v, -a)), -b)
    }

    pub fn is_linear(&self) -> bool {
        self.lhs
            .values()
            .chain(self.rhs.values())
            .all(PwlFunction::is_linear)
    }

    /// Left side minus right side minus `b`; the constraint holds iff this is `≤ 0`.
    pub fn slack_deficit(&self, assignment: &[Rational]) -> Rational {
        let lhs: Rational = self
            .lhs
            .iter()
            .map(|(v, f)| f.eval(&assignment[v.index()]))
            .fold(Rational::zero(), |a, t| a + t);
        let rhs: Rational = self
            .rhs
            .iter()
            .map(|(v, g)| g.eval(&assignment[v.index()]))
            .fold(Rational::zero(), |a, t| a + t);
        lhs - rhs - &self.b
    }

    pub fn holds(&self, assignment: &[Rational]) -> bool {
        !self.slack_deficit(assignment).is_positive()
    }

    fn variables(&self) -> impl Iterator<Item = VarId> + '_ {
        self.lhs.keys().chain(self.rhs.keys()).copied()
    }
}

fn add_term(
    side: &mut BTreeMap<VarId, PwlFunction>,
    var: VarId,
    f: PwlFunction,
) -> Result<(), PwlError> {
    let combined = match side.get(&var) {
        Some(existing) => existing.sum(&f)?,
        None => f,
    };
    side.insert(var, combined);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmipObjective {
    pub sense: Sense,
    pub coefficients: LinearForm,
    /// Optional `[lo, hi]` bracket on the objective value for the threshold search.
    pub bracket: Option<(Rational, Rational)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmipModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<EmipConstraint>,
    pub objective: Option<EmipObjective>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelViolation {
    #[error("variable {var}: name must match [A-Za-z][A-Za-z0-9_.]*")]
    InvalidName { var: String },
    #[error("variable name {var} is used twice")]
    DuplicateName { var: String },
    #[error("variable {var}: lower bound exceeds upper bound")]
    EmptyDomain { var: String },
    #[error("constraint {constraint}: unknown variable {var}")]
    UnknownVariable { constraint: usize, var: VarId },
    #[error("constraint {constraint}, variable {var}: lhs requires convex")]
    LhsNotConvex { constraint: usize, var: String },
    #[error("constraint {constraint}, variable {var}: rhs requires concave")]
    RhsNotConcave { constraint: usize, var: String },
    #[error("variable {var}: transformed variables need lower bound >= 0")]
    NegativeTransformed { var: String },
    #[error("objective: unknown variable {var}")]
    UnknownObjectiveVariable { var: VarId },
    #[error("objective: empty bracket")]
    EmptyBracket,
}

/// Why an assignment fails a model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignmentError {
    #[error("assignment has {got} values for {expected} variables")]
    Length { expected: usize, got: usize },
    #[error("variable {var}: value {value} outside its bounds")]
    Bound { var: String, value: String },
    #[error("integer variable {var} has fractional value {value}")]
    Integrality { var: String, value: String },
    #[error("constraint {constraint} violated by {excess}")]
    Constraint { constraint: usize, excess: String },
}

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl EmipModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: Rational,
        upper: Option<Rational>,
    ) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_constraint(&mut self, constraint: EmipConstraint) {
        self.constraints.push(constraint);
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.index()]
    }

    /// Variables with a non-linear function in some constraint.
    pub fn transformed_variables(&self) -> HashSet<VarId> {
        self.constraints
            .iter()
            .flat_map(|c| c.lhs.iter().chain(c.rhs.iter()))
            .filter(|(_, f)| !f.is_linear())
            .map(|(v, _)| *v)
            .collect()
    }

    pub fn validate(&self) -> Vec<ModelViolation> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for var in &self.variables {
            if !is_valid_name(&var.name) {
                out.push(ModelViolation::InvalidName {
                    var: var.name.clone(),
                });
            }
            if !seen.insert(var.name.as_str()) {
                out.push(ModelViolation::DuplicateName {
                    var: var.name.clone(),
                });
            }
            if var.upper.as_ref().is_some_and(|u| *u < var.lower) {
                out.push(ModelViolation::EmptyDomain {
                    var: var.name.clone(),
                });
            }
        }
        let n = self.variables.len();
        for (j, c) in self.constraints.iter().enumerate() {
            for var in c.variables() {
                if var.index() >= n {
                    out.push(ModelViolation::UnknownVariable { constraint: j, var });
                }
            }
            let name = |v: &VarId| {
                self.variables
                    .get(v.index())
                    .map_or_else(|| v.to_string(), |x| x.name.clone())
            };
            for (v, f) in &c.lhs {
                if !f.is_convex_or_linear() {
                    out.push(ModelViolation::LhsNotConvex {
                        constraint: j,
                        var: name(v),
                    });
                }
            }
            for (v, g) in &c.rhs {
                if !g.is_concave_or_linear() {
                    out.push(ModelViolation::RhsNotConcave {
                        constraint: j,
                        var: name(v),
                    });
                }
            }
        }
        let mut transformed: Vec<VarId> = self.transformed_variables().into_iter().collect();
        transformed.sort();
        for v in transformed {
            if let Some(var) = self.variables.get(v.index()) {
                if var.lower.is_negative() {
                    out.push(ModelViolation::NegativeTransformed {
                        var: var.name.clone(),
                    });
                }
            }
        }
        if let Some(obj) = &self.objective {
            for var in obj.coefficients.keys() {
                if var.index() >= n {
                    out.push(ModelViolation::UnknownObjectiveVariable { var: *var });
                }
            }
            if let Some((lo, hi)) = &obj.bracket {
                if lo > hi {
                    out.push(ModelViolation::EmptyBracket);
                }
            }
        }
        out
    }

    /// Equivalent model with `f(0) = g(0) = 0` everywhere (constants folded into
    /// `b`) and every breakpoint at or below a variable's lower bound removed.
    pub fn normalize(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.constraints {
            let mut shift = Rational::zero();
            for (v, f) in c.lhs.iter_mut() {
                let restricted = f.restrict_from(&self.variables[v.index()].lower);
                shift -= restricted.value_at_zero();
                *f = restricted.without_constant();
            }
            for (v, g) in c.rhs.iter_mut() {
                let restricted = g.restrict_from(&self.variables[v.index()].lower);
                shift += restricted.value_at_zero();
                *g = restricted.without_constant();
            }
            c.b += shift;
        }
        out
    }

    /// True if every function vanishes at 0 and its breakpoints lie above the
    /// variable's lower bound.
    pub fn is_normalized(&self) -> bool {
        self.constraints.iter().all(|c| {
            c.lhs.iter().chain(c.rhs.iter()).all(|(v, f)| {
                let lower = &self.variables[v.index()].lower;
                f.value_at_zero().is_zero() && f.breakpoints().iter().all(|r| r > lower)
            })
        })
    }

    /// Exact check of bounds, integrality and every constraint.
    pub fn check(&self, assignment: &[Rational]) -> Result<(), AssignmentError> {
        if assignment.len() != self.variables.len() {
            return Err(AssignmentError::Length {
                expected: self.variables.len(),
                got: assignment.len(),
            });
        }
        for (var, value) in self.variables.iter().zip(assignment) {
            if *value < var.lower || var.upper.as_ref().is_some_and(|u| value > u) {
                return Err(AssignmentError::Bound {
                    var: var.name.clone(),
                    value: format_rational(value),
                });
            }
            if var.kind == VarKind::Integer && !value.is_integer() {
                return Err(AssignmentError::Integrality {
                    var: var.name.clone(),
                    value: format_rational(value),
                });
            }
        }
        for (j, c) in self.constraints.iter().enumerate() {
            let excess = c.slack_deficit(assignment);
            if excess.is_positive() {
                return Err(AssignmentError::Constraint {
                    constraint: j,
                    excess: format_rational(&excess),
                });
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, assignment: &[Rational]) -> Option<Rational> {
        self.objective
            .as_ref()
            .map(|o| eval_form(&o.coefficients, assignment))
    }

    pub fn from_json(text: &str) -> Result<Self, InputError> {
        let doc: EmipDocument = read_document(text, FORMAT)?;
        doc.into_model()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&EmipDocument::from_model(self)).expect("model serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmipDocument {
    format: String,
    variables: Vec<VariableDoc>,
    #[serde(default)]
    constraints: Vec<ConstraintDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objective: Option<ObjectiveDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    kind: VarKind,
    #[serde(default = "zero_text")]
    lower: RationalText,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<RationalText>,
}

fn zero_text() -> RationalText {
    RationalText(Rational::zero())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintDoc {
    #[serde(default)]
    lhs: BTreeMap<String, PwlFunction>,
    #[serde(default)]
    rhs: BTreeMap<String, PwlFunction>,
    #[serde(default = "zero_text")]
    b: RationalText,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveDoc {
    sense: Sense,
    coefficients: BTreeMap<String, RationalText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bracket: Option<[RationalText; 2]>,
}

impl EmipDocument {
    fn into_model(self) -> Result<EmipModel, InputError> {
        let mut model = EmipModel::new();
        let mut ids: HashMap<String, VarId> = HashMap::new();
        for v in self.variables {
            let id = model.add_variable(v.name.clone(), v.kind, v.lower.0, v.upper.map(|u| u.0));
            if ids.insert(v.name.clone(), id).is_some() {
                return Err(InputError::Invalid(format!(
                    "variable name {} is used twice",
                    v.name
                )));
            }
        }
        let lookup = |name: &str, context: &str| {
            ids.get(name)
                .copied()
                .ok_or_else(|| InputError::Invalid(format!("{context}: unknown variable {name}")))
        };
        for (j, c) in self.constraints.into_iter().enumerate() {
            let mut constraint = EmipConstraint::new(c.b.0);
            for (name, f) in c.lhs {
                constraint
                    .lhs
                    .insert(lookup(&name, &format!("constraint {j}"))?, f);
            }
            for (name, g) in c.rhs {
                constraint
                    .rhs
                    .insert(lookup(&name, &format!("constraint {j}"))?, g);
            }
            model.add_constraint(constraint);
        }
        if let Some(o) = self.objective {
            let mut coefficients = LinearForm::new();
            for (name, c) in o.coefficients {
                coefficients.insert(lookup(&name, "objective")?, c.0);
            }
            model.objective = Some(EmipObjective {
                sense: o.sense,
                coefficients,
                bracket: o.bracket.map(|[lo, hi]| (lo.0, hi.0)),
            });
        }
        let violations = model.validate();
        if !violations.is_empty() {
            let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(InputError::Invalid(text.join("; ")));
        }
        Ok(model)
    }

    fn from_model(model: &EmipModel) -> Self {
        let name = |v: &VarId| model.variables[v.index()].name.clone();
        Self {
            format: FORMAT.to_string(),
            variables: model
                .variables
                .iter()
                .map(|v| VariableDoc {
                    name: v.name.clone(),
                    kind: v.kind,
                    lower: RationalText(v.lower.clone()),
                    upper: v.upper.clone().map(RationalText),
                })
                .collect(),
            constraints: model
                .constraints
                .iter()
                .map(|c| ConstraintDoc {
                    lhs: c.lhs.iter().map(|(v, f)| (name(v), f.clone())).collect(),
                    rhs: c.rhs.iter().map(|(v, g)| (name(v), g.clone())).collect(),
                    b: RationalText(c.b.clone()),
                })
                .collect(),
            objective: model.objective.as_ref().map(|o| ObjectiveDoc {
                sense: o.sense,
                coefficients: o
                    .coefficients
                    .iter()
                    .map(|(v, c)| (name(v), RationalText(c.clone())))
                    .collect(),
                bracket: o
                    .bracket
                    .as_ref()
                    .map(|(lo, hi)| [RationalText(lo.clone()), RationalText(hi.clone())]),
            }),
        }
    }
}
