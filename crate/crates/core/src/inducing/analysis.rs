use std::collections::BTreeMap;

use super::InducedScheme;
use crate::critical_orbits::{orbit_data, CriticalOrbitData};
use crate::error::Result;
use crate::numeric::{compensated_sum, linear_fit, LineFit};
use crate::output::{Field, Table};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRow {
    pub binding: usize,
    pub count: usize,
    pub max_sup: f64,
    pub max_var: f64,
}

/// Per-level counts and the smallest constants for which the three
/// binding-level bounds hold on the retained cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStatistics {
    pub levels: Vec<LevelRow>,
    /// `M̂ = max_b #α(b)`
    pub m_hat: usize,
    /// Smallest `C` with `sup_a |1/F'| ≤ C E_b^{-1}` (`E_0 := 1`).
    pub c_sup: f64,
    /// Smallest `C` with `var_a |1/F'| ≤ C (1 + log d_{b-1}^{-1}) d_{b-1}^{-1} E_{b-1}^{-1}`, `b ≥ 2`.
    pub c_var: f64,
    /// Critical orbit data used for `d_n`, `E_n`, one per critical point.
    pub orbits: Vec<CriticalOrbitData>,
}

impl CellStatistics {
    pub fn c_hat(&self) -> f64 {
        self.c_sup.max(self.c_var)
    }

    /// Smallest `E_b` over the non-singular critical points (`1` if none).
    pub fn min_e(&self, b: usize) -> f64 {
        if b == 0 {
            return 1.0;
        }
        self.orbits
            .iter()
            .filter(|o| !o.is_singular())
            .map(|o| o.log_e.get(b).copied().unwrap_or(f64::NAN).exp())
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_c (1 + log d_{b-1}^{-1}) d_{b-1}^{-1} E_{b-1}^{-1}` for `b ≥ 2`.
    pub fn var_scale(&self, b: usize) -> f64 {
        self.orbits.iter().filter(|o| !o.is_singular()).filter_map(|o| var_scale(o, b)).fold(0.0, f64::max)
    }

    /// Columns `b, count, max_sup_invF, max_var_invF, E_b, M_hat, C_hat`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["b", "count", "max_sup_invF", "max_var_invF", "E_b", "M_hat", "C_hat"]);
        for r in &self.levels {
            t.push(vec![
                Field::from(r.binding),
                Field::from(r.count),
                Field::Num(r.max_sup),
                Field::Num(r.max_var),
                Field::Num(self.min_e(r.binding)),
                Field::from(self.m_hat),
                Field::Num(self.c_hat()),
            ]);
        }
        t
    }
}

fn var_scale(o: &CriticalOrbitData, b: usize) -> Option<f64> {
    if b < 2 || b - 1 > o.horizon {
        return None;
    }
    let ld = o.log_d[b - 1];
    let le = o.log_e[b - 1];
    Some((1.0 - ld) * (-ld - le).exp())
}

/// Orbit data for each critical point of the scheme's map, long enough
/// for tail estimates beyond `τ_max`.
pub fn scheme_orbits(scheme: &InducedScheme, horizon: usize) -> Result<Vec<CriticalOrbitData>> {
    scheme.map.critical_set().iter().map(|c| orbit_data(&scheme.map, c, horizon)).collect()
}

pub fn cell_statistics(scheme: &InducedScheme) -> Result<CellStatistics> {
    let orbits = scheme_orbits(scheme, 4 * scheme.params.tau_max + scheme.params.q0)?;
    let mut by_level: BTreeMap<usize, LevelRow> = BTreeMap::new();
    let mut c_sup = 0.0f64;
    let mut c_var = 0.0f64;
    for cell in &scheme.cells {
        let row = by_level.entry(cell.binding).or_insert(LevelRow {
            binding: cell.binding,
            count: 0,
            max_sup: 0.0,
            max_var: 0.0,
        });
        row.count += 1;
        row.max_sup = row.max_sup.max(cell.sup_inv_deriv);
        row.max_var = row.max_var.max(cell.var_inv_deriv);
        let orbit = cell.critical.map(|ci| &orbits[ci]);
        if orbit.is_some_and(|o| o.is_singular()) {
            continue;
        }
        let e_b = match orbit {
            Some(o) => o.log_e[cell.binding].exp(),
            None => 1.0,
        };
        c_sup = c_sup.max(cell.sup_inv_deriv * e_b);
        if let Some(scale) = orbit.and_then(|o| var_scale(o, cell.binding)) {
            if scale.is_finite() && scale > 0.0 {
                c_var = c_var.max(cell.var_inv_deriv / scale);
            }
        }
    }
    let levels: Vec<LevelRow> = by_level.into_values().collect();
    let m_hat = levels.iter().map(|r| r.count).max().unwrap_or(0);
    Ok(CellStatistics { levels, m_hat, c_sup, c_var, orbits })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FConditionSums {
    pub p: f64,
    /// `Σ_a sup_a(1/|F'|) τ(a)^p` over retained cells.
    pub f1: f64,
    /// `Σ_a var_a(1/|F'|) τ(a)^p` over retained cells.
    pub f2: f64,
    /// `Ĉ M̂ Σ_b E_b^{-1} (b + q_0)^p` over levels beyond the retained ones.
    pub f1_tail: f64,
    pub f2_tail: f64,
    /// The same bounds summed over all levels `b ≥ 0`.
    pub f1_bound: f64,
    pub f2_bound: f64,
}

pub fn f_condition_sums(scheme: &InducedScheme, stats: &CellStatistics, p: f64) -> FConditionSums {
    let f1 = compensated_sum(scheme.cells.iter().map(|c| c.sup_inv_deriv * (c.tau as f64).powf(p)));
    let f2 = compensated_sum(scheme.cells.iter().map(|c| c.var_inv_deriv * (c.tau as f64).powf(p)));
    let q0 = scheme.params.q0 as f64;
    let b_last = stats.levels.iter().map(|r| r.binding).max().unwrap_or(0);
    let horizon = stats.orbits.iter().map(|o| o.horizon).min().unwrap_or(0);
    let cm = stats.m_hat as f64;
    let term1 = |b: usize| stats.c_sup * cm * (b as f64 + q0).powf(p) / stats.min_e(b);
    let term2 = |b: usize| {
        if b < 2 {
            0.0
        } else {
            stats.c_var * cm * stats.var_scale(b) * (b as f64 + q0).powf(p)
        }
    };
    let has_critical = stats.orbits.iter().any(|o| !o.is_singular());
    let (mut f1_tail, mut f2_tail, mut f1_bound, mut f2_bound) = (0.0, 0.0, 0.0, 0.0);
    for b in 0..=horizon {
        if b > 0 && !has_critical {
            break;
        }
        let (t1, t2) = (term1(b), term2(b));
        f1_bound += t1;
        f2_bound += t2;
        if b > b_last {
            f1_tail += t1;
            f2_tail += t2;
        }
    }
    FConditionSums { p, f1, f2, f1_tail, f2_tail, f1_bound, f2_bound }
}

/// Cell weights for [`tau_distribution`].
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    /// Cell length.
    Lebesgue,
    /// One mass per retained cell, e.g. `μ_Y(a)`.
    Cells(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauDistribution {
    /// `tail[n] = μ(τ > n)` for `0 ≤ n ≤ max τ`.
    pub tail: Vec<f64>,
    pub total_mass: f64,
    /// `∫ τ dμ`
    pub mean: f64,
    /// `(∫ τ^p dμ)^{1/p}` for `p = 1, 2, 3`.
    pub lp_norms: [f64; 3],
}

impl TauDistribution {
    /// Log-linear fit of the positive tail entries.
    pub fn tail_fit(&self) -> Option<LineFit> {
        let pts: Vec<(f64, f64)> =
            self.tail.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(n, v)| (n as f64, v.ln())).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&xs, &ys)
    }

    /// `μ(τ > x)` for real `x ≥ 0`.
    pub fn tail_at(&self, x: f64) -> f64 {
        let n = x.max(0.0).floor() as usize;
        self.tail.get(n).copied().unwrap_or(0.0)
    }
}

pub fn tau_distribution(scheme: &InducedScheme, weight: &Weight) -> TauDistribution {
    let w: Vec<f64> = match weight {
        Weight::Lebesgue => scheme.cells.iter().map(|c| c.len()).collect(),
        Weight::Cells(v) => v.clone(),
    };
    let max_tau = scheme.max_tau();
    let mut mass_at = vec![0.0; max_tau + 1];
    for (c, wi) in scheme.cells.iter().zip(&w) {
        mass_at[c.tau] += wi;
    }
    let mut tail = vec![0.0; max_tau + 1];
    let mut acc = 0.0;
    for n in (0..=max_tau).rev() {
        tail[n] = acc;
        acc += mass_at[n];
    }
    let total_mass = compensated_sum(w.iter().copied());
    let moment = |p: f64| compensated_sum(scheme.cells.iter().zip(&w).map(|(c, wi)| wi * (c.tau as f64).powf(p)));
    let mean = moment(1.0);
    TauDistribution { tail, total_mass, mean, lp_norms: [mean, moment(2.0).sqrt(), moment(3.0).cbrt()] }
}
