//! Piecewise smooth interval maps with one-sided critical and singular points.

mod builtin;
mod checks;
mod formula;
pub mod mapfile;
mod observable;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builtin::{builtin_map, BuiltinParams};
pub use checks::{
    verify_expansion, verify_order, ExpansionReport, ExpansionWitness, OrderCheck, OrderSample, ORDER_DRIFT_LIMIT,
};
pub use formula::{Formula, PowerTerm};
pub use observable::{Observable, ObservableKind, VectorObservable};

/// Which one-sided neighbourhood of a point is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `(c - δ, c)`
    Minus,
    /// `(c, c + δ)`
    Plus,
}

impl Side {
    /// +1 for `Plus`, -1 for `Minus`.
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Side::Plus => "+",
            Side::Minus => "-",
        }
    }
}

/// A critical (`order > 1`) or singular (`order < 1`) point seen from one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneSidedCriticalPoint {
    pub location: f64,
    pub side: Side,
    pub order: f64,
}

impl OneSidedCriticalPoint {
    pub fn new(location: f64, side: Side, order: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&location) {
            return Err(Error::InvalidMap(format!("critical point {location} outside [0,1]")));
        }
        if !(order > 0.0) || order == 1.0 || !order.is_finite() {
            return Err(Error::InvalidMap(format!(
                "critical order must be positive and different from 1, got {order}"
            )));
        }
        Ok(Self { location, side, order })
    }

    pub fn is_singular(&self) -> bool {
        self.order < 1.0
    }

    /// Open interval `Δ(c, δ)`, clipped to `[0, 1]`.
    pub fn neighbourhood(&self, delta: f64) -> (f64, f64) {
        match self.side {
            Side::Plus => (self.location, (self.location + delta).min(1.0)),
            Side::Minus => ((self.location - delta).max(0.0), self.location),
        }
    }

    pub fn contains(&self, x: f64, delta: f64) -> bool {
        let (a, b) = self.neighbourhood(delta);
        x > a && x < b
    }

    /// Label like `0.5+` used in file names and reports.
    pub fn label(&self) -> String {
        format!("{}{}", self.location, self.side.symbol())
    }
}

impl fmt::Display for OneSidedCriticalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (order {})", self.label(), self.order)
    }
}

/// A monotone smooth piece of the map on `[left, right]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub left: f64,
    pub right: f64,
    pub formula: Formula,
}

impl Branch {
    pub fn new(left: f64, right: f64, formula: Formula) -> Self {
        Self { left, right, formula }
    }

    pub fn len(&self) -> f64 {
        self.right - self.left
    }

    pub fn is_empty(&self) -> bool {
        self.right <= self.left
    }

    /// Sign of the derivative in the interior (+1 or -1).
    pub fn orientation(&self) -> f64 {
        let mid = 0.5 * (self.left + self.right);
        self.formula.deriv1(mid, 1.0).signum()
    }

    /// Value at a point of the closure, clamped into `[0, 1]`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.formula.value(x).clamp(0.0, 1.0)
    }

    /// First derivative on the closure; at the endpoints the one-sided
    /// derivative from inside the branch is returned.
    #[inline]
    pub fn deriv1(&self, x: f64) -> f64 {
        let dir = if x <= self.left { 1.0 } else { -1.0 };
        let dir = if x > self.left && x < self.right { 1.0 } else { dir };
        self.formula.deriv1(x, dir)
    }
}

/// Piecewise smooth map of `I = [0, 1]`.
///
/// Branches are contiguous and ordered; a point on an interior branch
/// boundary belongs to the right-hand branch unless a side is given
/// explicitly (see [`PiecewiseMap::eval_side`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapRepr")]
pub struct PiecewiseMap {
    name: String,
    branches: Vec<Branch>,
    critical: Vec<OneSidedCriticalPoint>,
    #[serde(skip)]
    breaks: Vec<f64>,
}

impl PiecewiseMap {
    /// Validates coverage, monotonicity and the critical set.
    pub fn new(name: impl Into<String>, branches: Vec<Branch>, critical: Vec<OneSidedCriticalPoint>) -> Result<Self> {
        let name = name.into();
        if branches.is_empty() {
            return Err(Error::InvalidMap("no branches".into()));
        }
        if branches[0].left != 0.0 || branches.last().map(|b| b.right) != Some(1.0) {
            return Err(Error::InvalidMap("branches must start at 0 and end at 1".into()));
        }
        for w in branches.windows(2) {
            if w[0].right != w[1].left {
                return Err(Error::InvalidMap(format!("branches must be contiguous: {} != {}", w[0].right, w[1].left)));
            }
        }
        for (i, br) in branches.iter().enumerate() {
            if br.is_empty() {
                return Err(Error::InvalidMap(format!("branch {i} is empty")));
            }
            let sign = br.orientation();
            if sign == 0.0 || !sign.is_finite() {
                return Err(Error::InvalidMap(format!("branch {i} has a flat midpoint")));
            }
            for j in 1..1000 {
                let x = br.left + br.len() * j as f64 / 1000.0;
                let d = br.formula.deriv1(x, 1.0);
                if d.signum() != sign || d == 0.0 {
                    return Err(Error::InvalidMap(format!("branch {i} is not monotone (derivative {d} at {x})")));
                }
            }
        }
        for c in &critical {
            OneSidedCriticalPoint::new(c.location, c.side, c.order)?;
        }
        let breaks = branches.iter().skip(1).map(|b| b.left).collect();
        Ok(Self { name, branches, critical, breaks })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn critical_set(&self) -> &[OneSidedCriticalPoint] {
        &self.critical
    }

    /// Interior branch boundaries.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// Index of the branch containing `x` (right-continuous convention).
    #[inline]
    pub fn locate(&self, x: f64) -> usize {
        self.breaks.partition_point(|&b| b <= x)
    }

    /// Index of the branch adjacent to `x` on the given side.
    pub fn locate_side(&self, x: f64, side: Side) -> usize {
        match side {
            Side::Plus => self.locate(x).min(self.branches.len() - 1),
            Side::Minus => {
                let i = self.breaks.partition_point(|&b| b < x);
                if x <= 0.0 {
                    0
                } else {
                    i
                }
            }
        }
    }

    /// One step of the dynamics without domain checks (hot path).
    #[inline]
    pub fn step(&self, x: f64) -> f64 {
        self.branches[self.locate(x)].value(x)
    }

    /// `f(x)`; points on branch boundaries take the right-hand branch.
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        Ok(self.step(x))
    }

    /// `f(x^±)`: value of the branch adjacent to `x` on `side`.
    pub fn eval_side(&self, x: f64, side: Side) -> Result<f64> {
        check_domain(x)?;
        Ok(self.branches[self.locate_side(x, side)].value(x))
    }

    /// `f'(x)` or `f''(x)`. At a critical/singular location the one-sided
    /// limit must be requested through [`PiecewiseMap::derivative_side`].
    pub fn derivative(&self, x: f64, order: u8) -> Result<f64> {
        check_domain(x)?;
        if self.critical.iter().any(|c| c.location == x) {
            return Err(Error::OneSidedLimitRequired(x));
        }
        self.derivative_in(self.locate(x), x, order)
    }

    pub fn derivative_side(&self, x: f64, side: Side, order: u8) -> Result<f64> {
        check_domain(x)?;
        self.derivative_in(self.locate_side(x, side), x, order)
    }

    fn derivative_in(&self, branch: usize, x: f64, order: u8) -> Result<f64> {
        let br = &self.branches[branch];
        match order {
            1 => Ok(br.deriv1(x)),
            2 => Ok(br.formula.deriv2(x)),
            _ => Err(Error::InvalidParameter(format!("derivative order {order} not supported"))),
        }
    }

    /// `ln |f'(x)|` on the branch containing `x`.
    #[inline]
    pub fn log_abs_deriv(&self, x: f64) -> f64 {
        self.branches[self.locate(x)].deriv1(x).abs().ln()
    }

    /// Distance from `x` to the critical/singular set, `+∞` if it is empty.
    pub fn distance_to_critical(&self, x: f64) -> f64 {
        self.critical.iter().map(|c| (x - c.location).abs()).fold(f64::INFINITY, f64::min)
    }

    /// The critical point whose one-sided δ-neighbourhood contains `x`
    /// (nearest location wins when neighbourhoods overlap).
    pub fn neighbourhood_of(&self, x: f64, delta: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.critical.iter().enumerate() {
            if c.contains(x, delta) {
                let d = (x - c.location).abs();
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// Iterate `n` times from `x`.
    pub fn iterate(&self, mut x: f64, n: usize) -> f64 {
        for _ in 0..n {
            x = self.step(x);
        }
        x
    }

    /// `true` for the map `x ↦ 2x mod 1` written with its two affine
    /// branches. Such maps admit exact orbit sampling by bit shifting.
    pub fn is_binary_shift(&self) -> bool {
        matches!(
            self.branches.as_slice(),
            [Branch { left: l0, right: r0, formula: Formula::Affine { intercept: i0, slope: s0 } },
             Branch { left: _, right: r1, formula: Formula::Affine { intercept: i1, slope: s1 } }]
            if *l0 == 0.0 && *r0 == 0.5 && *r1 == 1.0 && *i0 == 0.0 && *s0 == 2.0 && *i1 == -1.0 && *s1 == 2.0
        )
    }

    /// Apply branches in the order given by `itinerary`, starting from `x`,
    /// regardless of where the iterates fall. Returns the final point and
    /// `ln |(f^n)'(x)|` accumulated along the way.
    #[inline]
    pub fn follow(&self, mut x: f64, itinerary: &[u8]) -> (f64, f64) {
        let mut log_d = 0.0;
        for &b in itinerary {
            let br = &self.branches[b as usize];
            log_d += br.deriv1(x).abs().ln();
            x = br.value(x);
        }
        (x, log_d)
    }

    /// Like [`PiecewiseMap::follow`] but only the final point.
    #[inline]
    pub fn follow_value(&self, mut x: f64, itinerary: &[u8]) -> f64 {
        for &b in itinerary {
            x = self.branches[b as usize].value(x);
        }
        x
    }
}

#[derive(Deserialize)]
struct MapRepr {
    name: String,
    branches: Vec<Branch>,
    critical: Vec<OneSidedCriticalPoint>,
}

impl TryFrom<MapRepr> for PiecewiseMap {
    type Error = Error;

    fn try_from(r: MapRepr) -> Result<Self> {
        PiecewiseMap::new(r.name, r.branches, r.critical)
    }
}

fn check_domain(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ulam() -> PiecewiseMap {
        builtin_map("ulam", &BuiltinParams::default()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let doubling = builtin_map("doubling", &BuiltinParams::default()).unwrap();
        assert!((doubling.eval(0.3).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(ulam().eval(0.5).unwrap(), 1.0);
        let cusp = builtin_map("cusp", &BuiltinParams { gamma: 0.75 }).unwrap();
        assert_eq!(cusp.eval(0.5).unwrap(), 1.0);
        assert!(matches!(ulam().eval(1.5), Err(Error::Domain(_))));
        assert!(matches!(ulam().eval(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_examples() {
        let doubling = builtin_map("doubling", &BuiltinParams::default()).unwrap();
        assert_eq!(doubling.derivative(0.3, 1).unwrap(), 2.0);
        assert_eq!(ulam().derivative_side(1.0, Side::Minus, 1).unwrap(), -4.0);
        let cusp = builtin_map("cusp", &BuiltinParams { gamma: 0.75 }).unwrap();
        let d = cusp.derivative_side(0.0, Side::Plus, 1).unwrap();
        assert!((d.abs() - 1.5).abs() < 1e-12);
        // The cusp is increasing on [0, 1/2].
        assert!(d > 0.0);
        assert!(matches!(ulam().derivative(0.5, 1), Err(Error::OneSidedLimitRequired(_))));
        assert_eq!(cusp.derivative_side(0.5, Side::Minus, 1).unwrap(), f64::INFINITY);
        assert_eq!(cusp.derivative_side(0.5, Side::Plus, 1).unwrap(), f64::NEG_INFINITY);
        assert_eq!(ulam().derivative(0.2, 2).unwrap(), -8.0);
    }

    #[test]
    fn distance_examples() {
        assert!((ulam().distance_to_critical(0.3) - 0.2).abs() < 1e-15);
        assert_eq!(ulam().distance_to_critical(0.5), 0.0);
        let doubling = builtin_map("doubling", &BuiltinParams::default()).unwrap();
        assert_eq!(doubling.distance_to_critical(0.3), f64::INFINITY);
    }

    #[test]
    fn boundary_side_convention() {
        let doubling = builtin_map("doubling", &BuiltinParams::default()).unwrap();
        assert_eq!(doubling.eval(0.5).unwrap(), 0.0);
        assert_eq!(doubling.eval_side(0.5, Side::Minus).unwrap(), 1.0);
        assert_eq!(doubling.eval(1.0).unwrap(), 1.0);
        assert!(doubling.is_binary_shift());
        assert!(!ulam().is_binary_shift());
    }

    #[test]
    fn rejects_non_monotone_branch() {
        let bad = PiecewiseMap::new("bad", vec![Branch::new(0.0, 1.0, Formula::Logistic { r: 4.0 })], vec![]);
        assert!(matches!(bad, Err(Error::InvalidMap(_))));
    }

    #[test]
    fn rejects_gaps_and_unit_order() {
        let gap = PiecewiseMap::new(
            "gap",
            vec![
                Branch::new(0.0, 0.4, Formula::Affine { intercept: 0.0, slope: 2.0 }),
                Branch::new(0.5, 1.0, Formula::Affine { intercept: -1.0, slope: 2.0 }),
            ],
            vec![],
        );
        assert!(gap.is_err());
        assert!(OneSidedCriticalPoint::new(0.5, Side::Plus, 1.0).is_err());
        assert!(OneSidedCriticalPoint::new(0.5, Side::Plus, -2.0).is_err());
    }

    #[test]
    fn branch_coverage_and_monotonicity() {
        for m in [ulam(), builtin_map("cusp", &BuiltinParams { gamma: 0.6 }).unwrap()] {
            let total: f64 = m.branches().iter().map(Branch::len).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for br in m.branches() {
                let s = br.orientation();
                for j in 1..1000 {
                    let x = br.left + br.len() * j as f64 / 1000.0;
                    assert_eq!(br.formula.deriv1(x, 1.0).signum(), s);
                }
            }
        }
    }

    #[test]
    fn finite_differences_match_derivative() {
        let maps = [
            ulam(),
            builtin_map("cusp", &BuiltinParams { gamma: 0.75 }).unwrap(),
            builtin_map("doubling", &BuiltinParams::default()).unwrap(),
        ];
        for m in &maps {
            for j in 0..1000 {
                let x = 1e-3 + (1.0 - 2e-3) * (j as f64 + 0.5) / 1000.0;
                if m.distance_to_critical(x) < 1e-3 {
                    continue;
                }
                let br = &m.branches()[m.locate(x)];
                if x - br.left < 1e-3 || br.right - x < 1e-3 {
                    continue;
                }
                let h = 1e-6 * x.min(1.0 - x).max(1e-4);
                let fd = (br.formula.value(x + h) - br.formula.value(x - h)) / (2.0 * h);
                let d = m.derivative(x, 1).unwrap();
                assert!(((fd - d) / d).abs() < 1e-6, "{} at {x}: {fd} vs {d}", m.name());
            }
        }
    }
}
