use serde::{Deserialize, Serialize};

/// One term `coef * |x - center|^exponent` of a [`Formula::PowerSum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub coef: f64,
    pub center: f64,
    pub exponent: f64,
}

impl PowerTerm {
    pub fn new(coef: f64, center: f64, exponent: f64) -> Self {
        Self { coef, center, exponent }
    }

    fn value(&self, x: f64) -> f64 {
        if self.exponent == 0.0 {
            return self.coef;
        }
        self.coef * (x - self.center).abs().powf(self.exponent)
    }

    /// `dir` picks the one-sided derivative when `x` sits on the centre.
    fn deriv1(&self, x: f64, dir: f64) -> f64 {
        let e = self.exponent;
        if e == 0.0 || self.coef == 0.0 {
            return 0.0;
        }
        let u = x - self.center;
        let sgn = if u > 0.0 {
            1.0
        } else if u < 0.0 {
            -1.0
        } else {
            dir.signum()
        };
        if e == 1.0 {
            return self.coef * sgn;
        }
        let mag = u.abs().powf(e - 1.0);
        self.coef * e * mag * sgn
    }

    fn deriv2(&self, x: f64) -> f64 {
        let e = self.exponent;
        if e == 0.0 || e == 1.0 || self.coef == 0.0 {
            return 0.0;
        }
        if e == 2.0 {
            return 2.0 * self.coef;
        }
        self.coef * e * (e - 1.0) * (x - self.center).abs().powf(e - 2.0)
    }
}

/// Closed-form branch formula. Every kind extends continuously to the
/// closure of its branch interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Formula {
    /// `intercept + slope * x`
    Affine { intercept: f64, slope: f64 },
    /// `r * x * (1 - x)`
    Logistic { r: f64 },
    /// `Σ coef * |x - center|^exponent`
    PowerSum { terms: Vec<PowerTerm> },
}

impl Formula {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Formula::Affine { intercept, slope } => intercept + slope * x,
            Formula::Logistic { r } => r * x * (1.0 - x),
            Formula::PowerSum { terms } => terms.iter().map(|t| t.value(x)).sum(),
        }
    }

    /// First derivative; `dir` (±1) resolves one-sided limits at term centres.
    #[inline]
    pub fn deriv1(&self, x: f64, dir: f64) -> f64 {
        match self {
            Formula::Affine { slope, .. } => *slope,
            Formula::Logistic { r } => r * (1.0 - 2.0 * x),
            Formula::PowerSum { terms } => terms.iter().map(|t| t.deriv1(x, dir)).sum(),
        }
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        match self {
            Formula::Affine { .. } => 0.0,
            Formula::Logistic { r } => -2.0 * r,
            Formula::PowerSum { terms } => terms.iter().map(|t| t.deriv2(x)).sum(),
        }
    }

    /// `f'(x + s)`, exact in `s` at term centres and the logistic vertex.
    pub fn deriv1_offset(&self, x: f64, s: f64) -> f64 {
        match self {
            Formula::Affine { slope, .. } => *slope,
            Formula::Logistic { r } => r * (1.0 - 2.0 * x - 2.0 * s),
            Formula::PowerSum { terms } => terms
                .iter()
                .map(|t| {
                    if t.exponent == 0.0 || t.coef == 0.0 {
                        0.0
                    } else if x == t.center {
                        let sgn = if s < 0.0 { -1.0 } else { 1.0 };
                        if t.exponent == 1.0 {
                            t.coef * sgn
                        } else {
                            t.coef * t.exponent * s.abs().powf(t.exponent - 1.0) * sgn
                        }
                    } else {
                        t.deriv1(x + s, s)
                    }
                })
                .sum(),
        }
    }

    /// `f(x + s) - f(x)` evaluated without cancellation where the formula
    /// allows it.
    pub fn increment(&self, x: f64, s: f64) -> f64 {
        match self {
            Formula::Affine { slope, .. } => slope * s,
            Formula::Logistic { r } => r * s * (1.0 - 2.0 * x - s),
            Formula::PowerSum { terms } => terms
                .iter()
                .map(|t| {
                    if t.exponent == 0.0 {
                        0.0
                    } else if x == t.center {
                        t.coef * s.abs().powf(t.exponent)
                    } else {
                        t.value(x + s) - t.value(x)
                    }
                })
                .sum(),
        }
    }
}
