use super::{BindingContext, Cell};
use crate::map_model::PiecewiseMap;

/// Parametrization of a cell by `u ∈ [0, 1]`, `u = 0` at the left end.
///
/// Free cells use `x = left + u·len`. Bound cells use the offset
/// `s = s_left + u (s_right − s_left)` from the critical point after the
/// free flight, and follow the binding part relative to the critical orbit.
/// Their `x(u)` integrates a linear model of `1/|(f^ℓ₀)'|` between the end
/// values, normalized to the cell length.
#[derive(Debug, Clone, Copy)]
pub struct CellChart<'a> {
    pub map: &'a PiecewiseMap,
    pub cell: &'a Cell,
    bound: Option<(&'a BindingContext, f64, f64)>,
    a_left: f64,
    a_right: f64,
}

impl<'a> CellChart<'a> {
    pub fn new(map: &'a PiecewiseMap, cell: &'a Cell, contexts: &'a [BindingContext]) -> Self {
        let bound = match (cell.critical, cell.offsets) {
            (Some(ci), Some((s0, s1))) => Some((&contexts[ci], s0, s1)),
            _ => None,
        };
        let (mut a_left, mut a_right) = (1.0, 1.0);
        if bound.is_some() && cell.entry > 0 {
            let prefix = &cell.itinerary[..cell.entry];
            a_left = (-map.follow(cell.left, prefix).1).exp();
            a_right = (-map.follow(cell.right, prefix).1).exp();
            if !(a_left.is_finite() && a_right.is_finite() && a_left > 0.0 && a_right > 0.0) {
                (a_left, a_right) = (1.0, 1.0);
            }
        }
        Self { map, cell, bound, a_left, a_right }
    }

    pub fn is_bound(&self) -> bool {
        self.bound.is_some()
    }

    /// Offset from the critical point at `u`, for bound cells.
    pub fn offset(&self, u: f64) -> Option<f64> {
        self.bound.map(|(_, s0, s1)| s0 + u * (s1 - s0))
    }

    pub fn x(&self, u: f64) -> f64 {
        let c = self.cell;
        let w = c.right - c.left;
        if u >= 1.0 {
            return c.right;
        }
        if u <= 0.0 {
            return c.left;
        }
        let frac = if self.bound.is_some() && self.a_left != self.a_right {
            let (al, ar) = (self.a_left, self.a_right);
            (al * u + 0.5 * (ar - al) * u * u) / (0.5 * (al + ar))
        } else {
            u
        };
        (c.left + w * frac).clamp(c.left, c.right)
    }

    /// Inverse of [`CellChart::x`].
    pub fn u_of_x(&self, x: f64) -> f64 {
        let c = self.cell;
        if x <= c.left {
            return 0.0;
        }
        if x >= c.right {
            return 1.0;
        }
        let frac = (x - c.left) / (c.right - c.left);
        if self.bound.is_none() || self.a_left == self.a_right {
            return frac;
        }
        // Solve al u + (ar − al) u²/2 = frac (al + ar)/2 for u ∈ [0, 1].
        let (al, ar) = (self.a_left, self.a_right);
        let (qa, qb, qc) = (0.5 * (ar - al), al, -frac * 0.5 * (al + ar));
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        // Numerically stable root of the quadratic.
        let u = (2.0 * -qc) / (qb + disc.sqrt());
        u.clamp(0.0, 1.0)
    }

    /// `F` at `u`.
    pub fn image(&self, u: f64) -> f64 {
        let c = self.cell;
        match self.bound {
            Some((ctx, s0, s1)) => ctx.offset_image(self.map, s0 + u * (s1 - s0), &c.itinerary[c.entry..]).0,
            None => self.map.follow_value(self.x(u), &c.itinerary),
        }
    }

    /// `(F, F')` at `u` as functions of `u`.
    pub fn image_and_slope(&self, u: f64) -> (f64, f64) {
        let c = self.cell;
        match self.bound {
            Some((ctx, s0, s1)) => {
                let s = s0 + u * (s1 - s0);
                let (v, ld) = ctx.offset_image(self.map, s, &c.itinerary[c.entry..]);
                (v, self.slope_sign() * ld.exp() * (s1 - s0).abs())
            }
            None => {
                let (v, ld) = self.map.follow(self.x(u), &c.itinerary);
                (v, c.orientation * ld.exp() * (c.right - c.left))
            }
        }
    }

    /// Sign of `dF/du`.
    pub fn slope_sign(&self) -> f64 {
        match self.bound {
            Some((ctx, s0, s1)) => {
                let c = self.cell;
                let bound_orient: f64 =
                    c.itinerary[c.entry..].iter().map(|&k| self.map.branches()[k as usize].orientation()).product();
                ctx.point.side.sign() * bound_orient * (s1 - s0).signum()
            }
            None => self.cell.orientation,
        }
    }

    /// Orbit `f^ℓ(x(u))` for `0 ≤ ℓ ≤ τ`, appended to `out`.
    pub fn path(&self, u: f64, out: &mut Vec<f64>) {
        let c = self.cell;
        let branches = self.map.branches();
        let mut x = self.x(u);
        let free = if self.bound.is_some() { c.entry } else { c.tau };
        for &k in &c.itinerary[..free] {
            out.push(x);
            x = branches[k as usize].value(x);
        }
        match self.bound {
            Some((ctx, s0, s1)) => ctx.offset_path(self.map, s0 + u * (s1 - s0), &c.itinerary[c.entry..], out),
            None => out.push(x),
        }
    }
}
