use serde::Serialize;

use crate::error::{Error, Result};
use crate::inducing::{CellChart, InducedScheme};
use crate::numeric::compensated_sum;
use crate::par;

/// `μ_X = μ_Y × ν / ∫τ dμ_Y` pushed down to `I`.
#[derive(Debug, Clone, Serialize)]
pub struct TowerMeasure {
    /// `μ_Y(a)` per retained cell, normalized to total one.
    pub cell_mass: Vec<f64>,
    /// `∫ τ dμ_Y`
    pub mean_tau: f64,
    /// Density of the pushed measure on `k` equal cells.
    pub density: Vec<f64>,
}

/// `μ_Y(a) = ∫_a h dm` for a grid density `h`, normalized over the
/// retained cells.
pub fn cell_masses(scheme: &InducedScheme, h: &[f64]) -> Vec<f64> {
    let k = h.len();
    let kf = k as f64;
    let raw: Vec<f64> = par::map_slice(&scheme.cells, |c| {
        let first = ((c.left * kf).floor() as usize).min(k - 1);
        let mut m = 0.0;
        let mut i = first;
        while i < k {
            let (a, b) = (i as f64 / kf, (i + 1) as f64 / kf);
            if a >= c.right {
                break;
            }
            let len = b.min(c.right) - a.max(c.left);
            if len > 0.0 {
                m += h[i] * len;
            }
            i += 1;
        }
        m
    });
    let total = compensated_sum(raw.iter().copied());
    raw.into_iter().map(|m| m / total).collect()
}

/// Add mass `w` spread uniformly over `[y1, y2]` to the difference
/// representation `(bins, diff)` on `k` cells.
fn deposit(bins: &mut [f64], diff: &mut [f64], y1: f64, y2: f64, w: f64) {
    let k = bins.len();
    let kf = k as f64;
    let (lo, hi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
    let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
    let b1 = ((lo * kf) as usize).min(k - 1);
    let b2 = ((hi * kf) as usize).min(k - 1);
    if b1 == b2 || hi <= lo {
        bins[b1] += w;
        return;
    }
    let rate = w / (hi - lo);
    bins[b1] += rate * ((b1 + 1) as f64 / kf - lo);
    bins[b2] += rate * (hi - b2 as f64 / kf);
    if b2 > b1 + 1 {
        diff[b1 + 1] += rate / kf;
        diff[b2] -= rate / kf;
    }
}

/// Spread each cell's `μ_Y` mass along `f^ℓ(a)`, `0 ≤ ℓ < τ(a)`, and
/// normalize by `∫τ dμ_Y`. Cells are cut into about `budget · μ_Y(a)`
/// segments (at least enough to resolve `h`), each carried along its
/// accurate orbit and spread uniformly over its image.
pub fn pushdown_measure(scheme: &InducedScheme, h: &[f64], k_out: usize, budget: usize) -> Result<TowerMeasure> {
    if k_out < 1 || h.is_empty() {
        return Err(Error::InvalidParameter("pushdown needs a density and k_out ≥ 1".into()));
    }
    let cell_mass = cell_masses(scheme, h);
    let mean_tau = compensated_sum(scheme.cells.iter().zip(&cell_mass).map(|(c, m)| m * c.tau as f64));
    let contexts = scheme.binding_contexts();
    let kh = h.len() as f64;
    const CHUNKS: usize = 64;
    let n = scheme.cells.len();
    let chunk_len = n.div_ceil(CHUNKS).max(1);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = par::map_range(n.div_ceil(chunk_len), |ch| {
        let mut bins = vec![0.0; k_out];
        let mut diff = vec![0.0; k_out + 1];
        let mut path_a = Vec::new();
        let mut path_b = Vec::new();
        let range = (ch * chunk_len)..((ch + 1) * chunk_len).min(n);
        for (cell, &mass) in scheme.cells[range.clone()].iter().zip(&cell_mass[range]) {
            if mass <= 0.0 {
                continue;
            }
            let chart = CellChart::new(&scheme.map, cell, &contexts);
            let by_mass = (budget as f64 * mass).ceil() as usize;
            let by_grid = (2.0 * cell.len() * kh.max(k_out as f64)).ceil() as usize;
            let segs = by_mass.max(by_grid).clamp(1, 4096);
            // Segment weights from h at the segment midpoint.
            let xs: Vec<f64> = (0..=segs).map(|m| chart.x(m as f64 / segs as f64)).collect();
            let ws: Vec<f64> = xs
                .windows(2)
                .map(|w| {
                    let mid = 0.5 * (w[0] + w[1]);
                    let i = ((mid * kh) as usize).min(h.len() - 1);
                    h[i] * (w[1] - w[0])
                })
                .collect();
            let wsum: f64 = ws.iter().sum();
            path_a.clear();
            chart.path(0.0, &mut path_a);
            for (m, w) in ws.iter().enumerate() {
                path_b.clear();
                chart.path((m + 1) as f64 / segs as f64, &mut path_b);
                let share = if wsum > 0.0 { mass * w / wsum } else { mass / segs as f64 };
                for l in 0..cell.tau {
                    deposit(&mut bins, &mut diff, path_a[l], path_b[l], share);
                }
                std::mem::swap(&mut path_a, &mut path_b);
            }
        }
        (bins, diff)
    });
    let mut bins = vec![0.0; k_out];
    let mut diff = vec![0.0; k_out + 1];
    for (b, d) in partials {
        bins.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        diff.iter_mut().zip(d).for_each(|(x, y)| *x += y);
    }
    let mut run = 0.0;
    for (i, b) in bins.iter_mut().enumerate() {
        run += diff[i];
        *b += run;
    }
    let total = compensated_sum(bins.iter().copied());
    let kf = k_out as f64;
    let density = bins.iter().map(|m| m * kf / total).collect();
    Ok(TowerMeasure { cell_mass, mean_tau, density })
}
