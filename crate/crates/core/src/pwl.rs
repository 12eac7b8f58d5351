//! Piecewise-linear convex and concave functions of one variable.
//!
//! A function is stored as its value at zero, the ascending breakpoints
//! `ρ(1) < … < ρ(ℓ)` and one slope per piece (`ℓ + 1` slopes). Pieces with
//! equal slopes are merged on construction, so a stored function is always in
//! its minimal form and its slopes are strictly monotone.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{int, Rational, RationalText};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Convex,
    Concave,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Convex => "convex",
            Shape::Concave => "concave",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PwlError {
    #[error("{slopes} slopes given for {breakpoints} breakpoints (need breakpoints + 1)")]
    SlopeCount { breakpoints: usize, slopes: usize },
    #[error("breakpoints must be strictly ascending (index {index})")]
    BreakpointOrder { index: usize },
    #[error("{shape} function needs strictly {} slopes (piece {index})", if *shape == Shape::Convex { "increasing" } else { "decreasing" })]
    SlopeOrder { shape: Shape, index: usize },
    #[error("weight {index} is negative")]
    NegativeWeight { index: usize },
    #[error("multiplicity {index} is not positive")]
    NonPositiveMultiplicity { index: usize },
    #[error("cannot add a convex and a concave function")]
    ShapeMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PwlRepr", into = "PwlRepr")]
pub struct PwlFunction {
    shape: Shape,
    value_at_zero: Rational,
    breakpoints: Vec<Rational>,
    slopes: Vec<Rational>,
}

impl PwlFunction {
    /// Builds a function, merging adjacent pieces that share a slope.
    pub fn new(
        shape: Shape,
        value_at_zero: Rational,
        breakpoints: Vec<Rational>,
        slopes: Vec<Rational>,
    ) -> Result<Self, PwlError> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(PwlError::SlopeCount {
                breakpoints: breakpoints.len(),
                slopes: slopes.len(),
            });
        }
        if let Some(index) = breakpoints.windows(2).position(|w| w[0] >= w[1]) {
            return Err(PwlError::BreakpointOrder { index: index + 1 });
        }
        let mut merged_breaks = Vec::with_capacity(breakpoints.len());
        let mut merged_slopes = Vec::with_capacity(slopes.len());
        let mut slopes = slopes.into_iter();
        merged_slopes.push(slopes.next().expect("at least one slope"));
        for (rho, slope) in breakpoints.into_iter().zip(slopes) {
            if merged_slopes.last() != Some(&slope) {
                merged_breaks.push(rho);
                merged_slopes.push(slope);
            }
        }
        for (index, pair) in merged_slopes.windows(2).enumerate() {
            let ok = match shape {
                Shape::Convex => pair[0] < pair[1],
                Shape::Concave => pair[0] > pair[1],
            };
            if !ok {
                return Err(PwlError::SlopeOrder {
                    shape,
                    index: index + 1,
                });
            }
        }
        Ok(Self {
            shape,
            value_at_zero,
            breakpoints: merged_breaks,
            slopes: merged_slopes,
        })
    }

    /// `x ↦ slope·x`. Linear functions are admissible on either side of a constraint.
    pub fn linear(slope: Rational) -> Self {
        Self::affine(Rational::zero(), slope)
    }

    pub fn affine(value_at_zero: Rational, slope: Rational) -> Self {
        Self {
            shape: Shape::Convex,
            value_at_zero,
            breakpoints: Vec::new(),
            slopes: vec![slope],
        }
    }

    /// Function on unit pieces `[0,1), [1,2), …` with `f(k+1) - f(k) = increments[k]`.
    ///
    /// The last piece extends to infinity; callers bound the argument.
    pub fn from_unit_increments(
        shape: Shape,
        value_at_zero: Rational,
        increments: Vec<Rational>,
    ) -> Result<Self, PwlError> {
        if increments.is_empty() {
            return Ok(Self {
                shape,
                ..Self::affine(value_at_zero, Rational::zero())
            });
        }
        let breakpoints = (1..increments.len()).map(int).collect();
        Self::new(shape, value_at_zero, breakpoints, increments)
    }

    /// Convex `f` with `f(j)` = sum of the `j` smallest weights.
    pub fn from_sorted_weights(weights: &[i64]) -> Result<Self, PwlError> {
        if let Some(index) = weights.iter().position(|w| *w < 0) {
            return Err(PwlError::NegativeWeight { index });
        }
        let mut sorted = weights.to_vec();
        sorted.sort_unstable();
        Self::from_unit_increments(
            Shape::Convex,
            Rational::zero(),
            sorted.into_iter().map(int).collect(),
        )
    }

    /// Concave `f` with `f(j)` = sum of the `j` largest multiplicities.
    pub fn from_sorted_multiplicities(mults: &[i64]) -> Result<Self, PwlError> {
        if let Some(index) = mults.iter().position(|t| *t <= 0) {
            return Err(PwlError::NonPositiveMultiplicity { index });
        }
        let mut sorted = mults.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        Self::from_unit_increments(
            Shape::Concave,
            Rational::zero(),
            sorted.into_iter().map(int).collect(),
        )
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn value_at_zero(&self) -> &Rational {
        &self.value_at_zero
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[Rational] {
        &self.slopes
    }

    pub fn pieces(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_linear(&self) -> bool {
        self.slopes.len() == 1
    }

    /// True if the function may appear on the `≤` side of a constraint.
    pub fn is_convex_or_linear(&self) -> bool {
        self.is_linear() || self.shape == Shape::Convex
    }

    pub fn is_concave_or_linear(&self) -> bool {
        self.is_linear() || self.shape == Shape::Concave
    }

    /// Slope increase at breakpoint `ℓ` (1-based): `der(ℓ) - der(ℓ-1)`.
    pub fn slope_jump(&self, l: usize) -> Rational {
        &self.slopes[l] - &self.slopes[l - 1]
    }

    /// Closed-form evaluation
    /// `f(0) + x·der(0) + Σ_ℓ (max(0, x-ρ(ℓ)) - max(0, -ρ(ℓ)))·(der(ℓ) - der(ℓ-1))`.
    ///
    /// The `max(0, -ρ)` correction vanishes whenever all breakpoints are nonnegative.
    pub fn eval(&self, x: &Rational) -> Rational {
        let mut value = &self.value_at_zero + x * &self.slopes[0];
        for (l, rho) in self.breakpoints.iter().enumerate() {
            let jump = self.slope_jump(l + 1);
            let beyond = positive_part(&(x - rho)) - positive_part(&-rho);
            value += beyond * jump;
        }
        value
    }

    /// Value at 0 of the zeroth piece's linear extension.
    pub fn zeroth_intercept(&self) -> Rational {
        let mut c = self.value_at_zero.clone();
        for (l, rho) in self.breakpoints.iter().enumerate() {
            c -= positive_part(&-rho) * self.slope_jump(l + 1);
        }
        c
    }

    /// Minimum and maximum over the closed interval `[lo, hi]`.
    pub fn range_on(&self, lo: &Rational, hi: &Rational) -> (Rational, Rational) {
        let mut min = self.eval(lo);
        let mut max = min.clone();
        let inner = self.breakpoints.iter().filter(|r| *r > lo && *r < hi);
        for point in inner.chain(std::iter::once(hi)) {
            let v = self.eval(point);
            if v < min {
                min = v.clone();
            }
            if v > max {
                max = v;
            }
        }
        (min, max)
    }

    /// Same function on `[lower, ∞)` with every breakpoint `≤ lower` dropped.
    ///
    /// The dropped pieces lie entirely at or below `lower`; the new zeroth piece
    /// is the one containing `lower`.
    pub fn restrict_from(&self, lower: &Rational) -> Self {
        let cut = self.breakpoints.iter().take_while(|r| *r <= lower).count();
        if cut == 0 {
            return self.clone();
        }
        let at_lower = self.eval(lower);
        let slope = &self.slopes[cut];
        let value_at_zero = at_lower - lower * slope;
        Self {
            shape: self.shape,
            value_at_zero,
            breakpoints: self.breakpoints[cut..].to_vec(),
            slopes: self.slopes[cut..].to_vec(),
        }
    }

    /// The same function minus the constant `f(0)`.
    pub fn without_constant(&self) -> Self {
        Self {
            value_at_zero: Rational::zero(),
            ..self.clone()
        }
    }

    /// Pointwise sum; both summands must share a shape unless one is linear.
    pub fn sum(&self, other: &Self) -> Result<Self, PwlError> {
        let shape = match (self.is_linear(), other.is_linear()) {
            (true, _) => other.shape,
            (false, true) => self.shape,
            (false, false) if self.shape == other.shape => self.shape,
            (false, false) => return Err(PwlError::ShapeMismatch),
        };
        let mut breakpoints: Vec<Rational> = self
            .breakpoints
            .iter()
            .chain(&other.breakpoints)
            .cloned()
            .collect();
        breakpoints.sort();
        breakpoints.dedup();
        let slope_after = |f: &Self, p: Option<&Rational>| {
            let index = p.map_or(0, |p| f.breakpoints.iter().take_while(|r| *r <= p).count());
            f.slopes[index].clone()
        };
        let slopes = std::iter::once(None)
            .chain(breakpoints.iter().map(Some))
            .map(|p| slope_after(self, p) + slope_after(other, p))
            .collect();
        Self::new(
            shape,
            &self.value_at_zero + &other.value_at_zero,
            breakpoints,
            slopes,
        )
    }

    pub fn scaled(&self, factor: &Rational) -> Self {
        let shape = if factor.is_negative() {
            match self.shape {
                Shape::Convex => Shape::Concave,
                Shape::Concave => Shape::Convex,
            }
        } else {
            self.shape
        };
        if factor.is_zero() {
            return Self::linear(Rational::zero());
        }
        Self {
            shape,
            value_at_zero: &self.value_at_zero * factor,
            breakpoints: self.breakpoints.clone(),
            slopes: self.slopes.iter().map(|s| s * factor).collect(),
        }
    }
}

fn positive_part(v: &Rational) -> Rational {
    if v.is_positive() {
        v.clone()
    } else {
        Rational::zero()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PwlRepr {
    shape: Shape,
    value_at_zero: RationalText,
    breakpoints: Vec<RationalText>,
    slopes: Vec<RationalText>,
}

impl TryFrom<PwlRepr> for PwlFunction {
    type Error = PwlError;

    fn try_from(repr: PwlRepr) -> Result<Self, Self::Error> {
        PwlFunction::new(
            repr.shape,
            repr.value_at_zero.0,
            repr.breakpoints.into_iter().map(|r| r.0).collect(),
            repr.slopes.into_iter().map(|r| r.0).collect(),
        )
    }
}

impl From<PwlFunction> for PwlRepr {
    fn from(f: PwlFunction) -> Self {
        PwlRepr {
            shape: f.shape,
            value_at_zero: RationalText(f.value_at_zero),
            breakpoints: f.breakpoints.into_iter().map(RationalText).collect(),
            slopes: f.slopes.into_iter().map(RationalText).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn convex_1_3() -> PwlFunction {
        PwlFunction::new(Shape::Convex, int(0), vec![int(2)], vec![int(1), int(3)]).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = convex_1_3();
        assert_eq!(f.eval(&int(1)), int(1));
        assert_eq!(f.eval(&int(3)), int(5));
        let g = PwlFunction::new(
            Shape::Concave,
            int(0),
            vec![int(1), int(2)],
            vec![int(5), int(3), int(1)],
        )
        .unwrap();
        assert_eq!(g.eval(&int(3)), int(9));
    }

    #[test]
    fn sorted_weight_prefix_sums() {
        let f = PwlFunction::from_sorted_weights(&[5, 2, 7]).unwrap();
        let got: Vec<_> = (0..=3).map(|j| f.eval(&int(j))).collect();
        assert_eq!(got, vec![int(0), int(2), int(7), int(14)]);
        assert_eq!(f.shape(), Shape::Convex);

        let zero = PwlFunction::from_sorted_weights(&[]).unwrap();
        assert!(zero.is_linear());
        assert_eq!(zero.eval(&int(4)), int(0));

        let flat = PwlFunction::from_sorted_weights(&[4, 4, 4]).unwrap();
        assert_eq!(flat.pieces(), 1);
        assert_eq!(flat.slopes(), &[int(4)]);
        assert_eq!(flat.eval(&int(2)), int(8));
    }

    #[test]
    fn sorted_multiplicity_prefix_sums() {
        let f = PwlFunction::from_sorted_multiplicities(&[1, 3, 2]).unwrap();
        let got: Vec<_> = (1..=3).map(|j| f.eval(&int(j))).collect();
        assert_eq!(got, vec![int(3), int(5), int(6)]);
        assert_eq!(f.shape(), Shape::Concave);

        let two = PwlFunction::from_sorted_multiplicities(&[2, 2]).unwrap();
        assert!(two.is_linear());
        assert_eq!(two.eval(&int(2)), int(4));

        let seven = PwlFunction::from_sorted_multiplicities(&[7]).unwrap();
        assert_eq!(seven.eval(&int(1)), int(7));
    }

    #[test]
    fn constructor_errors() {
        assert_eq!(
            PwlFunction::from_sorted_weights(&[1, -2]),
            Err(PwlError::NegativeWeight { index: 1 })
        );
        assert_eq!(
            PwlFunction::from_sorted_multiplicities(&[3, 0]),
            Err(PwlError::NonPositiveMultiplicity { index: 1 })
        );
        assert!(matches!(
            PwlFunction::new(Shape::Convex, int(0), vec![int(1)], vec![int(1)]),
            Err(PwlError::SlopeCount { .. })
        ));
        assert!(matches!(
            PwlFunction::new(
                Shape::Convex,
                int(0),
                vec![int(2), int(1)],
                vec![int(1), int(2), int(3)]
            ),
            Err(PwlError::BreakpointOrder { .. })
        ));
        assert!(matches!(
            PwlFunction::new(Shape::Concave, int(0), vec![int(1)], vec![int(1), int(2)]),
            Err(PwlError::SlopeOrder { .. })
        ));
    }

    #[test]
    fn equal_slopes_merge() {
        let f = PwlFunction::new(
            Shape::Convex,
            int(1),
            vec![int(1), int(2), int(3)],
            vec![int(1), int(1), int(2), int(2)],
        )
        .unwrap();
        assert_eq!(f.breakpoints(), &[int(2)]);
        assert_eq!(f.slopes(), &[int(1), int(2)]);
    }

    #[test]
    fn negative_breakpoints_evaluate_correctly() {
        // f(x) = |x| shifted: slopes -1, 1 with kink at -2, f(0) = 2.
        let f =
            PwlFunction::new(Shape::Convex, int(2), vec![int(-2)], vec![int(-1), int(1)]).unwrap();
        assert_eq!(f.eval(&int(0)), int(2));
        assert_eq!(f.eval(&int(-2)), int(0));
        assert_eq!(f.eval(&int(-5)), int(3));
        assert_eq!(f.zeroth_intercept(), int(-2));
    }

    #[test]
    fn restriction_keeps_values_above_lower() {
        let f = PwlFunction::new(
            Shape::Convex,
            int(3),
            vec![int(1), int(4)],
            vec![int(-2), int(1), int(5)],
        )
        .unwrap();
        let g = f.restrict_from(&int(2));
        assert_eq!(g.breakpoints(), &[int(4)]);
        for x in 2..10 {
            assert_eq!(f.eval(&int(x)), g.eval(&int(x)));
        }
        assert_eq!(f.restrict_from(&int(0)), f);
    }

    #[test]
    fn range_on_interval() {
        let f =
            PwlFunction::new(Shape::Convex, int(0), vec![int(2)], vec![int(-1), int(1)]).unwrap();
        assert_eq!(f.range_on(&int(0), &int(5)), (int(-2), int(1)));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let f = PwlFunction::new(
            Shape::Concave,
            ratio(-1, 3),
            vec![ratio(1, 2), int(7)],
            vec![int(4), ratio(5, 2), int(-1)],
        )
        .unwrap();
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(
            text,
            r#"{"shape":"concave","value_at_zero":"-1/3","breakpoints":["1/2","7"],"slopes":["4","5/2","-1"]}"#
        );
        let back: PwlFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn json_rejects_invalid_shape() {
        let text =
            r#"{"shape":"convex","value_at_zero":"0","breakpoints":["1"],"slopes":["3","1"]}"#;
        assert!(serde_json::from_str::<PwlFunction>(text).is_err());
    }

    #[test]
    fn sum_merges_breakpoints() {
        let f = convex_1_3();
        let g =
            PwlFunction::new(Shape::Convex, int(1), vec![int(1)], vec![int(0), int(1)]).unwrap();
        let h = f.sum(&g).unwrap();
        assert_eq!(h.breakpoints(), &[int(1), int(2)]);
        for x in -2..6 {
            assert_eq!(h.eval(&int(x)), f.eval(&int(x)) + g.eval(&int(x)));
        }
        let concave = PwlFunction::from_sorted_multiplicities(&[3, 1]).unwrap();
        assert_eq!(f.sum(&concave), Err(PwlError::ShapeMismatch));
        let linear = PwlFunction::linear(int(-2));
        assert_eq!(concave.sum(&linear).unwrap().shape(), Shape::Concave);
    }
}
