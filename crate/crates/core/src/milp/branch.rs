//! Depth-first branch-and-bound on the most fractional integer variable.

use num_traits::{One, Signed};

use super::simplex::{find_feasible_point, LpError};
use super::{MilpError, MilpModel, SolveResult, SolveStats, SolveStatus, SolverOptions, VarKind};
use crate::rational::Rational;

struct Node {
    lower: Vec<Option<Rational>>,
    upper: Vec<Option<Rational>>,
}

pub(super) fn solve(model: &MilpModel, options: &SolverOptions) -> Result<SolveResult, MilpError> {
    for var in model.variables() {
        if var.kind == VarKind::Integer && (var.lower.is_none() || var.upper.is_none()) {
            return Err(MilpError::UnboundedInteger {
                name: var.name.clone(),
            });
        }
    }
    let mut stats = SolveStats {
        milp_solves: 1,
        ..SolveStats::default()
    };
    let mut stack = vec![Node {
        lower: model.variables().iter().map(|v| v.lower.clone()).collect(),
        upper: model.variables().iter().map(|v| v.upper.clone()).collect(),
    }];

    while let Some(node) = stack.pop() {
        stats.nodes += 1;
        if stats.nodes > options.node_limit {
            return Err(MilpError::ResourceExhausted {
                limit: options.node_limit,
            });
        }
        let point = find_feasible_point(model, &node.lower, &node.upper, &mut stats.lp_pivots)
            .map_err(|e| match e {
                LpError::Unbounded => MilpError::Internal("phase-one objective unbounded".into()),
            })?;
        let Some(point) = point else { continue };

        let Some(branch_var) = most_fractional(model, &point) else {
            return Ok(SolveResult {
                status: SolveStatus::Feasible(point),
                stats,
            });
        };
        let value = &point[branch_var];
        let mut up = Node {
            lower: node.lower.clone(),
            upper: node.upper.clone(),
        };
        up.lower[branch_var] = Some(value.ceil());
        let mut down = node;
        down.upper[branch_var] = Some(value.floor());
        stack.push(up);
        stack.push(down);
    }
    Ok(SolveResult {
        status: SolveStatus::Infeasible,
        stats,
    })
}

/// Integer variable whose value is farthest from an integer; ties go to the lowest index.
fn most_fractional(model: &MilpModel, point: &[Rational]) -> Option<usize> {
    let half = Rational::new(One::one(), 2.into());
    let mut best: Option<(usize, Rational)> = None;
    for (j, var) in model.variables().iter().enumerate() {
        if var.kind != VarKind::Integer || point[j].is_integer() {
            continue;
        }
        let frac = &point[j] - point[j].floor();
        let distance = &half - (frac - &half).abs();
        if best.as_ref().is_none_or(|(_, d)| distance > *d) {
            best = Some((j, distance));
        }
    }
    best.map(|(j, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn picks_value_nearest_one_half() {
        let mut m = MilpModel::new();
        for i in 0..3 {
            m.add_variable(
                format!("x{i}"),
                VarKind::Integer,
                Some(int(0)),
                Some(int(5)),
            );
        }
        let point = [ratio(1, 10), ratio(5, 2), ratio(-1, 2)];
        assert_eq!(most_fractional(&m, &point), Some(1));
        let point = [int(1), ratio(7, 3), ratio(1, 3)];
        assert_eq!(most_fractional(&m, &point), Some(1));
        let point = [int(1), int(2), int(3)];
        assert_eq!(most_fractional(&m, &point), None);
    }
}
