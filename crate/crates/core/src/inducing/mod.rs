//! Inducing scheme: free flight until the first entry to `Δ`, binding to the
//! critical orbit, and the induced map `F = f^τ` on the resulting partition.

mod analysis;
mod binding;
mod build;
mod chart;
mod observable;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_model::PiecewiseMap;
use crate::output::{Field, Table};

pub use analysis::{
    cell_statistics, f_condition_sums, scheme_orbits, tau_distribution, CellStatistics, FConditionSums, LevelRow,
    TauDistribution, Weight,
};
pub use binding::{first_entry_time, Binding, BindingContext};
pub use chart::CellChart;
pub use observable::{
    induced_observable, level_observable, weighted_bv_norm, CellSupVar, InducedObservable, WeightedObservable,
};

/// Construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub delta: f64,
    pub q0: usize,
    pub tau_max: usize,
    /// Relative tolerance of the adaptive sampling of `1/|F'|`.
    pub refine_tol: f64,
    /// Escape factor of the binding rule: `|f^n x − f^n c| > θ d_n(c)`.
    pub theta: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self { delta: 0.05, q0: 10, tau_max: 60, refine_tol: 1e-6, theta: 0.5 }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if self.q0 == 0 || self.tau_max == 0 {
            return bad("q0 and tau_max must be at least 1");
        }
        if !(self.refine_tol > 0.0) {
            return bad("refine_tol must be positive");
        }
        if !(self.theta > 0.0) {
            return bad("theta must be positive");
        }
        Ok(())
    }
}

/// One element `a` of the partition `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub left: f64,
    pub right: f64,
    pub tau: usize,
    /// Binding level; 0 for free cells.
    pub binding: usize,
    /// First entry time `ℓ_0`; `q_0` for free cells.
    pub entry: usize,
    /// Index into the critical set of the point bound to.
    pub critical: Option<usize>,
    /// Branch indices of `x, f x, …, f^{τ−1} x`.
    pub itinerary: Vec<u8>,
    /// Sign of `F'` on the cell.
    pub orientation: f64,
    pub sup_inv_deriv: f64,
    pub var_inv_deriv: f64,
    /// Offsets `|f^entry x − c|` at `left` and `right` for bound cells.
    pub offsets: Option<(f64, f64)>,
}

impl Cell {
    pub fn len(&self) -> f64 {
        self.right - self.left
    }

    pub fn is_empty(&self) -> bool {
        self.right <= self.left
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.left && x < self.right
    }

    pub fn itinerary_label(&self) -> String {
        self.itinerary.iter().map(|b| char::from(b'0' + b)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscardReason {
    /// `τ > τ_max`.
    TauExceeded,
    /// The binding period was not resolved within `τ_max` steps.
    BindingCap,
    /// Labels disagreed across the cell.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discarded {
    pub left: f64,
    pub right: f64,
    pub reason: DiscardReason,
}

/// Lebesgue mass removed from the partition, by reason.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TruncationLedger {
    pub tau_exceeded: f64,
    pub binding_cap: f64,
    pub unresolved: f64,
    pub unresolved_cells: usize,
}

impl TruncationLedger {
    pub fn total(&self) -> f64 {
        self.tau_exceeded + self.binding_cap + self.unresolved
    }
}

/// Partition `α`, return time `τ` and induced map `F = f^τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedScheme {
    pub map: PiecewiseMap,
    pub params: SchemeParams,
    pub cells: Vec<Cell>,
    pub discarded: Vec<Discarded>,
    pub ledger: TruncationLedger,
    pub coverage: f64,
}

/// Coverage below which a scheme is reported with a warning.
pub const COVERAGE_WARNING: f64 = 0.95;

/// Subdivide `[0, 1]` into cells with constant itinerary, first entry time
/// and binding level.
pub fn build_partition(map: &PiecewiseMap, params: &SchemeParams) -> Result<InducedScheme> {
    build::build(map, params)
}

impl InducedScheme {
    pub fn coverage_warning(&self) -> bool {
        self.coverage < COVERAGE_WARNING
    }

    /// Index of the retained cell containing `x`.
    pub fn cell_index(&self, x: f64) -> Result<usize> {
        let i = self.cells.partition_point(|c| c.left <= x);
        if i > 0 {
            let c = &self.cells[i - 1];
            if c.contains(x) || (x == 1.0 && c.right == 1.0) {
                return Ok(i - 1);
            }
        }
        Err(Error::NotCovered(x))
    }

    pub fn cell_at(&self, x: f64) -> Result<&Cell> {
        Ok(&self.cells[self.cell_index(x)?])
    }

    pub fn return_time(&self, x: f64) -> Result<usize> {
        Ok(self.cell_at(x)?.tau)
    }

    /// `(F(y), ln |F'(y)|)` along the cell itinerary.
    pub fn induced_map_eval(&self, y: f64) -> Result<(f64, f64)> {
        let cell = self.cell_at(y)?;
        let mut x = y;
        let mut log_d = 0.0;
        for &k in &cell.itinerary {
            if self.map.critical_set().iter().any(|c| c.location == x) {
                return Err(Error::SingularHit(y));
            }
            let br = &self.map.branches()[k as usize];
            log_d += br.deriv1(x).abs().ln();
            x = br.value(x);
        }
        Ok((x, log_d))
    }

    /// Binding contexts of the critical set, as used by the construction.
    pub fn binding_contexts(&self) -> Vec<BindingContext> {
        self.map
            .critical_set()
            .iter()
            .map(|c| BindingContext::new(&self.map, *c, self.params.tau_max, self.params.theta))
            .collect()
    }

    pub fn min_tau(&self) -> usize {
        self.cells.iter().map(|c| c.tau).min().unwrap_or(0)
    }

    pub fn max_tau(&self) -> usize {
        self.cells.iter().map(|c| c.tau).max().unwrap_or(0)
    }

    /// Columns `cell_left, cell_right, tau, b, itinerary, sup_invF, var_invF`.
    pub fn cells_table(&self) -> Table {
        let mut t = Table::new(["cell_left", "cell_right", "tau", "b", "itinerary", "sup_invF", "var_invF"]);
        for c in &self.cells {
            t.push(vec![
                Field::Num(c.left),
                Field::Num(c.right),
                Field::from(c.tau),
                Field::from(c.binding),
                Field::Text(c.itinerary_label()),
                Field::Num(c.sup_inv_deriv),
                Field::Num(c.var_inv_deriv),
            ]);
        }
        t
    }

    /// One-row summary: `delta, q0, tau_max, coverage` and the ledger.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new([
            "delta",
            "q0",
            "tau_max",
            "coverage",
            "cells",
            "lost_tau_exceeded",
            "lost_binding_cap",
            "lost_unresolved",
            "unresolved_cells",
        ]);
        t.push(vec![
            Field::Num(self.params.delta),
            Field::from(self.params.q0),
            Field::from(self.params.tau_max),
            Field::Num(self.coverage),
            Field::from(self.cells.len()),
            Field::Num(self.ledger.tau_exceeded),
            Field::Num(self.ledger.binding_cap),
            Field::Num(self.ledger.unresolved),
            Field::from(self.ledger.unresolved_cells),
        ]);
        t
    }
}
