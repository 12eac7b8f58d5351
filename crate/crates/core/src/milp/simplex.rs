//! Exact bounded-variable primal simplex, phase one only.
//!
//! Rows `a·x ≤ b` get a slack `s ≥ 0`; nonbasic structural variables start at
//! a finite bound (or 0 when free) and every row whose slack would be negative
//! receives an artificial variable. Minimizing the sum of artificials with
//! Bland's rule either drives it to zero (a feasible vertex) or proves the
//! relaxation infeasible. No objective is needed: branch-and-bound only asks
//! for some feasible point.

use num_traits::{Signed, Zero};

use super::MilpModel;
use crate::rational::{int, Rational};

#[derive(Debug)]
pub(super) enum LpError {
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    value: Vec<Rational>,
    lower: Vec<Option<Rational>>,
    upper: Vec<Option<Rational>>,
    artificial_from: usize,
}

/// Returns a point of the LP relaxation under the given bounds, or `None` if empty.
pub(super) fn find_feasible_point(
    model: &MilpModel,
    lower: &[Option<Rational>],
    upper: &[Option<Rational>],
    pivots: &mut u64,
) -> Result<Option<Vec<Rational>>, LpError> {
    let n = model.num_vars();
    for (l, u) in lower.iter().zip(upper) {
        if let (Some(l), Some(u)) = (l, u) {
            if l > u {
                return Ok(None);
            }
        }
    }
    let Some(mut tableau) = Tableau::build(model, lower, upper) else {
        return Ok(None);
    };
    tableau.run(pivots)?;
    if tableau.artificial_sum().is_positive() {
        return Ok(None);
    }
    Ok(Some(tableau.value[..n].to_vec()))
}

impl Tableau {
    fn build(
        model: &MilpModel,
        lower: &[Option<Rational>],
        upper: &[Option<Rational>],
    ) -> Option<Self> {
        let n = model.num_vars();
        let m = model.rows().len();
        let mut value: Vec<Rational> = (0..n)
            .map(|j| {
                lower[j]
                    .clone()
                    .or_else(|| upper[j].clone())
                    .unwrap_or_else(Rational::zero)
            })
            .collect();

        let residuals: Vec<Rational> = model
            .rows()
            .iter()
            .map(|row| row.rhs() - row.activity(&value[..n]))
            .collect();
        let needs_artificial: Vec<usize> = (0..m).filter(|&i| residuals[i].is_negative()).collect();
        let width = n + m + needs_artificial.len();
        let artificial_from = n + m;

        let mut var_lower: Vec<Option<Rational>> = lower.to_vec();
        let mut var_upper: Vec<Option<Rational>> = upper.to_vec();
        var_lower.extend(std::iter::repeat_n(
            Some(Rational::zero()),
            m + needs_artificial.len(),
        ));
        var_upper.extend(std::iter::repeat_n(None, m + needs_artificial.len()));
        value.extend(std::iter::repeat_n(
            Rational::zero(),
            m + needs_artificial.len(),
        ));

        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut basic_row = vec![None; width];
        let mut next_artificial = artificial_from;
        for (i, row) in model.rows().iter().enumerate() {
            let mut dense = vec![Rational::zero(); width];
            for (var, coef) in row.coefficients() {
                dense[var.index()] = coef.clone();
            }
            dense[n + i] = int(1);
            if residuals[i].is_negative() {
                for entry in dense.iter_mut() {
                    if !entry.is_zero() {
                        *entry = -&*entry;
                    }
                }
                dense[next_artificial] = int(1);
                value[next_artificial] = -residuals[i].clone();
                basic_row[next_artificial] = Some(i);
                basis.push(next_artificial);
                next_artificial += 1;
            } else {
                value[n + i] = residuals[i].clone();
                basic_row[n + i] = Some(i);
                basis.push(n + i);
            }
            rows.push(dense);
        }
        Some(Self {
            rows,
            basis,
            basic_row,
            value,
            lower: var_lower,
            upper: var_upper,
            artificial_from,
        })
    }

    fn width(&self) -> usize {
        self.value.len()
    }

    fn artificial_sum(&self) -> Rational {
        self.value[self.artificial_from..]
            .iter()
            .fold(Rational::zero(), |acc, v| acc + v)
    }

    /// Phase-one reduced cost of column `j`: `c_j - Σ_{rows with artificial basis} T_ij`.
    fn reduced_cost(&self, j: usize) -> Rational {
        let mut d = if j >= self.artificial_from {
            int(1)
        } else {
            Rational::zero()
        };
        for (i, &b) in self.basis.iter().enumerate() {
            if b >= self.artificial_from {
                let t = &self.rows[i][j];
                if !t.is_zero() {
                    d -= t;
                }
            }
        }
        d
    }

    /// Smallest-index nonbasic column that improves the phase-one objective,
    /// with its direction (+1 increase, -1 decrease).
    fn entering(&self) -> Option<(usize, i8)> {
        if self.basis.iter().all(|&b| b < self.artificial_from) {
            return None;
        }
        (0..self.width())
            .filter(|&j| self.basic_row[j].is_none())
            .find_map(|j| {
                let d = self.reduced_cost(j);
                let can_rise = self.upper[j].as_ref().is_none_or(|u| self.value[j] < *u);
                let can_fall = self.lower[j].as_ref().is_none_or(|l| self.value[j] > *l);
                if d.is_negative() && can_rise {
                    Some((j, 1))
                } else if d.is_positive() && can_fall {
                    Some((j, -1))
                } else {
                    None
                }
            })
    }

    fn run(&mut self, pivots: &mut u64) -> Result<(), LpError> {
        while let Some((j, direction)) = self.entering() {
            let dir = Rational::from_integer(direction.into());
            // (step, blocking variable, row) – row None means the entering variable flips bound.
            let mut best: Option<(Rational, usize, Option<usize>)> = None;
            let mut consider = |step: Rational, var: usize, row: Option<usize>| {
                let better = match &best {
                    None => true,
                    Some((s, v, _)) => step < *s || (step == *s && var < *v),
                };
                if better {
                    best = Some((step, var, row));
                }
            };
            if direction > 0 {
                if let Some(u) = &self.upper[j] {
                    consider(u - &self.value[j], j, None);
                }
            } else if let Some(l) = &self.lower[j] {
                consider(&self.value[j] - l, j, None);
            }
            for (i, row) in self.rows.iter().enumerate() {
                let t = &row[j];
                if t.is_zero() {
                    continue;
                }
                let b = self.basis[i];
                let rate = -(t * &dir);
                if rate.is_negative() {
                    if let Some(l) = &self.lower[b] {
                        consider((&self.value[b] - l) / -&rate, b, Some(i));
                    }
                } else if let Some(u) = &self.upper[b] {
                    consider((u - &self.value[b]) / &rate, b, Some(i));
                }
            }
            let Some((step, _, leaving_row)) = best else {
                return Err(LpError::Unbounded);
            };

            if !step.is_zero() {
                self.value[j] = &self.value[j] + &step * &dir;
                for i in 0..self.rows.len() {
                    let t = &self.rows[i][j];
                    if t.is_zero() {
                        continue;
                    }
                    let b = self.basis[i];
                    let delta = -(t * &dir) * &step;
                    self.value[b] = &self.value[b] + delta;
                }
            }
            if let Some(r) = leaving_row {
                self.pivot(r, j);
                *pivots += 1;
            }
        }
        Ok(())
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let leaving = self.basis[r];
        let pivot = self.rows[r][j].clone();
        for entry in self.rows[r].iter_mut() {
            if !entry.is_zero() {
                *entry = &*entry / &pivot;
            }
        }
        let pivot_row = self.rows[r].clone();
        let nonzero: Vec<usize> = (0..pivot_row.len())
            .filter(|&k| !pivot_row[k].is_zero())
            .collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[j].is_zero() {
                continue;
            }
            let factor = row[j].clone();
            for &k in &nonzero {
                let update = &factor * &pivot_row[k];
                row[k] = &row[k] - update;
            }
        }
        self.basis[r] = j;
        self.basic_row[j] = Some(r);
        self.basic_row[leaving] = None;
        if leaving >= self.artificial_from {
            // Artificials never re-enter.
            self.upper[leaving] = Some(Rational::zero());
        }
    }
}
