use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use super::sparse::SparseMatrix;
use super::spectral::conjugate_entries;
use super::{OperatorKind, SchemeOperator, UlamOperator};
use crate::error::{Error, Result};
use crate::inducing::{CellStatistics, InducedScheme};
use crate::numeric::{compensated_sum, linear_fit, LineFit};
use crate::output::{Field, Table};

/// `P_n v = P(1_{τ=n} v)` on the grid, with `P(z) = Σ P_n zⁿ`.
#[derive(Debug, Clone)]
pub struct RenewalFamily {
    /// `P` itself.
    pub op: UlamOperator,
    /// `(n, P_n)` in the same row convention as `op.matrix`.
    pub parts: Vec<(usize, SparseMatrix)>,
    /// Scheme truncation mass, the tolerance for `Σ P_n = P`.
    pub truncation_mass: f64,
}

pub fn renewal_operators(scheme: &InducedScheme, sop: &SchemeOperator, op_p: &UlamOperator) -> Result<RenewalFamily> {
    let h = match (&op_p.density, op_p.kind) {
        (Some(h), OperatorKind::InducedInvariant) if h.len() == sop.op.k => h,
        _ => return Err(Error::InvalidParameter("renewal_operators expects the P operator of the scheme".into())),
    };
    let parts = sop.by_tau.iter().map(|(n, m)| (*n, conjugate_entries(&m.transpose(), h))).collect();
    Ok(RenewalFamily { op: op_p.clone(), parts, truncation_mass: scheme.ledger.total() })
}

impl RenewalFamily {
    pub fn k(&self) -> usize {
        self.op.k
    }

    /// Dense `P(z)`.
    pub fn p_at(&self, z: Complex<f64>) -> DMatrix<Complex<f64>> {
        let k = self.k();
        let mut out = DMatrix::<Complex<f64>>::zeros(k, k);
        for (n, m) in &self.parts {
            let zn = z.powu(*n as u32);
            for i in 0..k {
                for (j, a) in m.row(i) {
                    out[(i, j)] += zn * a;
                }
            }
        }
        out
    }

    /// `‖Σ_n P_n − P‖_∞`.
    pub fn completeness_error(&self) -> f64 {
        let total = SparseMatrix::sum(self.k(), self.k(), self.parts.iter().map(|(_, m)| m));
        total.max_row_abs_diff(&self.op.matrix)
    }

    /// `max_j |(P(1) 1)_j − 1|` over rows with positive density.
    pub fn p1_residual(&self) -> f64 {
        let total = SparseMatrix::sum(self.k(), self.k(), self.parts.iter().map(|(_, m)| m));
        let ones = vec![1.0; self.k()];
        let v = total.mul_vec(&ones);
        v.iter()
            .enumerate()
            .filter(|(j, _)| !self.op.empty_rows.contains(j))
            .map(|(_, x)| (x - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `(n, ‖P_n‖_∞)` on the grid.
    pub fn part_norms(&self) -> Vec<(usize, f64)> {
        self.parts
            .iter()
            .map(|(n, m)| (*n, (0..m.n_rows).map(|i| m.row(i).map(|e| e.1.abs()).sum::<f64>()).fold(0.0, f64::max)))
            .collect()
    }

    /// Log-linear fit of the positive part norms against `n`.
    pub fn norm_decay_fit(&self) -> Option<LineFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            self.part_norms().into_iter().filter(|(_, v)| *v > 0.0).map(|(n, v)| (n as f64, v.ln())).unzip();
        linear_fit(&xs, &ys)
    }

    /// Columns `n, norm`.
    pub fn norms_table(&self) -> Table {
        let mut t = Table::new(["n", "norm_Pn"]);
        for (n, v) in self.part_norms() {
            t.push(vec![Field::from(n), Field::Num(v)]);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenewalPoint {
    pub re: f64,
    pub im: f64,
    /// Smallest singular value of `Id − P(z)`.
    pub min_singular: f64,
    /// At `z = 1`: eigenvalues of `P(1)` within `1e-8` of one.
    pub unit_eigenvalues: Option<usize>,
    /// At `z = 1`: second eigenvalue modulus of `P(1)`.
    pub gamma: Option<f64>,
    /// Simplicity failure at `z = 1`, or `min_singular < tol` elsewhere.
    pub flagged: bool,
}

/// Check at each `z` that one is a simple isolated eigenvalue of `P(1)`,
/// and that `Id − P(z)` is invertible for `z ≠ 1`.
pub fn renewal_spectrum_check(fam: &RenewalFamily, zs: &[Complex<f64>], tol: f64) -> Vec<RenewalPoint> {
    let k = fam.k();
    zs.iter()
        .map(|&z| {
            let pz = fam.p_at(z);
            let a = DMatrix::<Complex<f64>>::identity(k, k) - &pz;
            let min_singular = a.singular_values().iter().copied().fold(f64::INFINITY, f64::min);
            if (z - Complex::new(1.0, 0.0)).norm() < 1e-15 {
                let re = pz.map(|c| c.re);
                let mut ev: Vec<f64> = re.complex_eigenvalues().iter().map(|c| c.norm()).collect();
                ev.sort_by(|a, b| b.total_cmp(a));
                let ones = ev.iter().filter(|m| (*m - 1.0).abs() < 1e-8).count();
                RenewalPoint {
                    re: z.re,
                    im: z.im,
                    min_singular,
                    unit_eigenvalues: Some(ones),
                    gamma: ev.get(1).copied(),
                    flagged: ones != 1 || ev.get(1).is_some_and(|g| *g > 1.0 - 1e-8),
                }
            } else {
                RenewalPoint {
                    re: z.re,
                    im: z.im,
                    min_singular,
                    unit_eigenvalues: None,
                    gamma: None,
                    flagged: min_singular < tol,
                }
            }
        })
        .collect()
}

/// Columns `theta, re, im, min_singular, flagged`.
pub fn renewal_table(points: &[RenewalPoint]) -> Table {
    let mut t = Table::new(["theta", "re", "im", "min_singular", "flagged"]);
    for p in points {
        t.push(vec![
            Field::Num(p.im.atan2(p.re)),
            Field::Num(p.re),
            Field::Num(p.im),
            Field::Num(p.min_singular),
            Field::Text(p.flagged.to_string()),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailNormSums {
    pub p: f64,
    /// `Σ_{n≥1} n^{p−1} Σ_{τ(a)>n} sup_a(1/|F'|)`.
    pub first: f64,
    /// The same with `var_a(1/|F'|)`.
    pub second: f64,
    /// Bound on the contribution of binding levels beyond the retained
    /// ones, from the fitted level constants.
    pub first_tail: f64,
    pub second_tail: f64,
}

pub fn tail_norm_sums(scheme: &InducedScheme, stats: &CellStatistics, p: f64) -> TailNormSums {
    let weight = |tau: usize| -> f64 { (1..tau).map(|n| (n as f64).powf(p - 1.0)).sum() };
    let first = compensated_sum(scheme.cells.iter().map(|c| c.sup_inv_deriv * weight(c.tau)));
    let second = compensated_sum(scheme.cells.iter().map(|c| c.var_inv_deriv * weight(c.tau)));
    let q0 = scheme.params.q0;
    let b_last = stats.levels.iter().map(|r| r.binding).max().unwrap_or(0);
    let horizon = stats.orbits.iter().map(|o| o.horizon).min().unwrap_or(0);
    let has_critical = stats.orbits.iter().any(|o| !o.is_singular());
    let cm = stats.m_hat as f64;
    let (mut first_tail, mut second_tail) = (0.0, 0.0);
    if has_critical {
        for b in (b_last + 1)..=horizon {
            let w = weight(q0 + b + 1);
            first_tail += stats.c_sup * cm * w / stats.min_e(b);
            if b >= 2 {
                second_tail += stats.c_var * cm * stats.var_scale(b) * w;
            }
        }
    }
    TailNormSums { p, first, second, first_tail, second_tail }
}
