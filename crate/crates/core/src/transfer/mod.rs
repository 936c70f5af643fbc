//! Ulam discretisations of the transfer operators `L` (Lebesgue) and
//! `P = h⁻¹ L h` (invariant) for `f` and the induced map `F`.

mod gordin;
mod renewal;
mod sparse;
mod spectral;
mod tower;
mod twisted;
mod ulam;

use serde::Serialize;

use crate::output::{Field, Table};

pub use gordin::{gordin_solve, GordinReport};
pub use nalgebra::Complex;
pub use renewal::{
    renewal_operators, renewal_spectrum_check, renewal_table, tail_norm_sums, RenewalFamily, RenewalPoint, TailNormSums,
};
pub use sparse::SparseMatrix;
pub use spectral::{conjugate, invariant_density, spectral_gap, GapMethod, GapReport, SpectralReport};
pub use tower::{cell_masses, pushdown_measure, TowerMeasure};
pub use twisted::{twisted_operator, TwistedOperator};
pub use ulam::{ulam_map, ulam_scheme, SchemeOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorKind {
    /// `L_f`
    MapTransfer,
    /// `L_F`
    InducedTransfer,
    /// `P_F`
    InducedInvariant,
}

impl OperatorKind {
    pub fn label(self) -> &'static str {
        match self {
            OperatorKind::MapTransfer => "L_f",
            OperatorKind::InducedTransfer => "L_F",
            OperatorKind::InducedInvariant => "P_F",
        }
    }
}

/// Rows rescaled to restore mass lost to discarded cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RowCorrection {
    pub rescaled_rows: usize,
    pub max_deficit: f64,
    /// Lebesgue mass of the missing row parts.
    pub lost_mass: f64,
}

/// Row-stochastic matrix on `k` equal cells of `[0, 1]`.
///
/// For the `L` kinds, `matrix[i][j] = m(B_i ∩ T⁻¹B_j)/m(B_i)` and densities
/// are pushed forward as `v ↦ vM`. For `P_F`, `matrix[j][i] = h_i M_ij / h_j`
/// and functions are pushed forward as `v ↦ Qv`.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    pub k: usize,
    pub kind: OperatorKind,
    pub source: String,
    pub matrix: SparseMatrix,
    pub empty_rows: Vec<usize>,
    pub correction: RowCorrection,
    /// Grid density `h` used for `P_F`.
    pub density: Option<Vec<f64>>,
    transpose: SparseMatrix,
}

impl UlamOperator {
    pub fn new(
        kind: OperatorKind,
        source: String,
        matrix: SparseMatrix,
        empty_rows: Vec<usize>,
        correction: RowCorrection,
        density: Option<Vec<f64>>,
    ) -> Self {
        let transpose = matrix.transpose();
        Self { k: matrix.n_rows, kind, source, matrix, empty_rows, correction, density, transpose }
    }

    /// Wrap a given row-stochastic matrix, e.g. a synthetic test case.
    pub fn from_matrix(kind: OperatorKind, source: impl Into<String>, matrix: SparseMatrix) -> Self {
        let empty_rows = (0..matrix.n_rows).filter(|&i| matrix.row_sum(i) == 0.0).collect();
        Self::new(kind, source.into(), matrix, empty_rows, RowCorrection::default(), None)
    }

    /// The transfer operator applied to a grid function.
    pub fn transfer(&self, v: &[f64]) -> Vec<f64> {
        match self.kind {
            OperatorKind::InducedInvariant => self.matrix.mul_vec(v),
            _ => self.transpose.mul_vec(v),
        }
    }

    /// `w ↦ w∘T` on the grid (`L` kinds).
    pub fn koopman(&self, w: &[f64]) -> Vec<f64> {
        match self.kind {
            OperatorKind::InducedInvariant => self.transpose.mul_vec(w),
            _ => self.matrix.mul_vec(w),
        }
    }

    pub(crate) fn transpose(&self) -> &SparseMatrix {
        &self.transpose
    }

    pub fn midpoints(&self) -> Vec<f64> {
        grid_midpoints(self.k)
    }

    /// `max_i |Σ_j M_ij − 1|` over non-empty rows.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.k)
            .filter(|i| !self.empty_rows.contains(i))
            .map(|i| (self.matrix.row_sum(i) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn grid_midpoints(k: usize) -> Vec<f64> {
    (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect()
}

/// `∫ |u − v| dm` for grid functions on the same grid.
pub fn l1_distance(u: &[f64], v: &[f64]) -> f64 {
    let k = u.len() as f64;
    crate::numeric::compensated_sum(u.iter().zip(v).map(|(a, b)| (a - b).abs())) / k
}

/// `∫ |u − g| dm` with `g` integrated exactly over each cell by `g_int`
/// (the antiderivative).
pub fn l1_distance_to(u: &[f64], g: impl Fn(f64) -> f64, g_int: impl Fn(f64) -> f64) -> f64 {
    let k = u.len();
    let kf = k as f64;
    let total: f64 = (0..k)
        .map(|i| {
            let (a, b) = (i as f64 / kf, (i + 1) as f64 / kf);
            // Split at the crossing, if any, to integrate |u − g| exactly
            // for monotone g on the cell; otherwise fall back to sampling.
            let mass = g_int(b) - g_int(a);
            let ui = u[i];
            let (ga, gb) = (g(a.max(1e-300)), g(b.min(1.0 - 1e-16)));
            if (ga - ui) * (gb - ui) >= 0.0 {
                (ui / kf - mass).abs()
            } else {
                let n = 64;
                let h = (b - a) / n as f64;
                (0..n)
                    .map(|m| {
                        let (p, q) = (a + m as f64 * h, a + (m + 1) as f64 * h);
                        (ui * h - (g_int(q) - g_int(p))).abs()
                    })
                    .sum::<f64>()
            }
        })
        .sum();
    total
}

/// Two-column table `x, density`.
pub fn density_table(h: &[f64]) -> Table {
    let mut t = Table::new(["x", "density"]);
    for (x, v) in grid_midpoints(h.len()).into_iter().zip(h) {
        t.push(vec![Field::Num(x), Field::Num(*v)]);
    }
    t
}

/// `sup |v| + Σ |v_{i+1} − v_i|` on the grid.
pub fn grid_bv_norm(v: &[f64]) -> f64 {
    let sup = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let var: f64 = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    sup + var
}

#[cfg(test)]
mod tests;
