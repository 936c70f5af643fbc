use super::{Cell, CellChart, InducedScheme};
use crate::error::{Error, Result};
use crate::map_model::Observable;
use crate::par;

/// `Φ(y) = Σ_{ℓ<τ(y)} φ(f^ℓ y)`.
#[derive(Debug, Clone)]
pub struct InducedObservable<'a> {
    pub scheme: &'a InducedScheme,
    pub phi: Observable,
}

pub fn induced_observable(scheme: &InducedScheme, phi: Observable) -> InducedObservable<'_> {
    InducedObservable { scheme, phi }
}

impl InducedObservable<'_> {
    pub fn eval(&self, y: f64) -> Result<f64> {
        let cell = self.scheme.cell_at(y)?;
        Ok(self.eval_in(cell, y))
    }

    /// `Φ` on a known cell, following its itinerary.
    pub fn eval_in(&self, cell: &Cell, y: f64) -> f64 {
        let branches = self.scheme.map.branches();
        let mut x = y;
        let mut sum = 0.0;
        for &k in &cell.itinerary {
            sum += self.phi.eval(x);
            x = branches[k as usize].value(x);
        }
        sum
    }

    /// `Φ` at the midpoints of `k` equal grid cells, following each orbit
    /// through the cell chart; `0` where no retained cell covers the point.
    pub fn grid_values(&self, k: usize) -> Vec<f64> {
        let s = self.scheme;
        let contexts = s.binding_contexts();
        par::map_range(k, |i| {
            let y = (i as f64 + 0.5) / k as f64;
            let Ok(ci) = s.cell_index(y) else {
                return 0.0;
            };
            let cell = &s.cells[ci];
            let chart = CellChart::new(&s.map, cell, &contexts);
            let mut path = Vec::with_capacity(cell.tau + 1);
            chart.path(chart.u_of_x(y), &mut path);
            path[..cell.tau].iter().map(|&x| self.phi.eval(x.clamp(0.0, 1.0))).sum()
        })
    }

    /// Per-cell sup and variation from `samples + 1` uniform points.
    pub fn weighted(&self, samples: usize) -> WeightedObservable {
        WeightedObservable::from_fn(self.scheme, format!("induced {}", self.phi.name()), samples, |i, y| {
            self.eval_in(&self.scheme.cells[i], y)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSupVar {
    pub sup: f64,
    pub var: f64,
    pub tau: usize,
}

/// Per-cell sup/variation data of a function on the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedObservable {
    pub name: String,
    pub cells: Vec<CellSupVar>,
}

impl WeightedObservable {
    /// Sample `f(cell_index, y)` at `samples + 1` uniform points per cell.
    pub fn from_fn<F>(scheme: &InducedScheme, name: impl Into<String>, samples: usize, f: F) -> Self
    where
        F: Fn(usize, f64) -> f64 + Sync + Send,
    {
        let n = samples.max(1);
        let cells = par::map_range(scheme.cells.len(), |i| {
            let c = &scheme.cells[i];
            let mut prev = f(i, c.left);
            let mut sup = prev.abs();
            let mut var = 0.0;
            for k in 1..=n {
                let y = if k == n { c.right } else { c.left + c.len() * k as f64 / n as f64 };
                let v = f(i, y);
                sup = sup.max(v.abs());
                var += (v - prev).abs();
                prev = v;
            }
            CellSupVar { sup, var, tau: c.tau }
        });
        Self { name: name.into(), cells }
    }

    /// `sup_a (sup_a |Ψ| + var_a Ψ) / τ(a)`.
    pub fn norm(&self) -> f64 {
        self.cells.iter().map(|c| (c.sup + c.var) / c.tau as f64).fold(0.0, f64::max)
    }
}

pub fn weighted_bv_norm(psi: &WeightedObservable) -> f64 {
    psi.norm()
}

/// `v̂(y) = v(f^{j(a)} y)` for `y ∈ a`, with `0 ≤ j(a) < τ(a)`.
pub fn level_observable(
    scheme: &InducedScheme,
    v: &Observable,
    levels: &[usize],
    samples: usize,
) -> Result<WeightedObservable> {
    if levels.len() != scheme.cells.len() {
        return Err(Error::InvalidParameter("one level per cell required".into()));
    }
    if let Some((i, c)) = scheme.cells.iter().enumerate().find(|(i, c)| levels[*i] >= c.tau) {
        return Err(Error::InvalidParameter(format!("level {} not below tau = {} on cell {i}", levels[i], c.tau)));
    }
    let map = &scheme.map;
    Ok(WeightedObservable::from_fn(scheme, format!("level {}", v.name()), samples, |i, y| {
        let c = &scheme.cells[i];
        v.eval(map.follow_value(y, &c.itinerary[..levels[i]]))
    }))
}
