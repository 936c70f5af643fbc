use super::{Branch, Formula, OneSidedCriticalPoint, PiecewiseMap, PowerTerm, Side};
use crate::error::{Error, Result};

/// Parameters for the builtin families; only the cusp uses `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuiltinParams {
    pub gamma: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self { gamma: 0.75 }
    }
}

/// Canonical example maps.
///
/// * `doubling`: `2x mod 1`, no critical set.
/// * `ulam`: `4x(1-x)`, quadratic critical point at 1/2 (order 2 on both sides).
/// * `cusp`: `1 - |2x-1|^γ` with `γ ∈ (1/2, 1)`, singular point at 1/2 of order γ.
pub fn builtin_map(name: &str, params: &BuiltinParams) -> Result<PiecewiseMap> {
    match name {
        "doubling" => PiecewiseMap::new(
            "doubling",
            vec![
                Branch::new(0.0, 0.5, Formula::Affine { intercept: 0.0, slope: 2.0 }),
                Branch::new(0.5, 1.0, Formula::Affine { intercept: -1.0, slope: 2.0 }),
            ],
            vec![],
        ),
        "ulam" => PiecewiseMap::new(
            "ulam",
            vec![
                Branch::new(0.0, 0.5, Formula::Logistic { r: 4.0 }),
                Branch::new(0.5, 1.0, Formula::Logistic { r: 4.0 }),
            ],
            vec![OneSidedCriticalPoint::new(0.5, Side::Minus, 2.0)?, OneSidedCriticalPoint::new(0.5, Side::Plus, 2.0)?],
        ),
        "cusp" => {
            let g = params.gamma;
            if !(g > 0.5 && g < 1.0) {
                return Err(Error::InvalidParameter(format!("cusp exponent must lie in (1/2, 1), got {g}")));
            }
            // |2x - 1|^γ = 2^γ |x - 1/2|^γ
            let terms = vec![PowerTerm::new(1.0, 0.5, 0.0), PowerTerm::new(-(2f64.powf(g)), 0.5, g)];
            PiecewiseMap::new(
                format!("cusp({g})"),
                vec![
                    Branch::new(0.0, 0.5, Formula::PowerSum { terms: terms.clone() }),
                    Branch::new(0.5, 1.0, Formula::PowerSum { terms }),
                ],
                vec![OneSidedCriticalPoint::new(0.5, Side::Minus, g)?, OneSidedCriticalPoint::new(0.5, Side::Plus, g)?],
            )
        }
        other => Err(Error::UnknownMap(other.to_string())),
    }
}
