use std::collections::HashMap;

use super::sparse::SparseMatrix;
use super::{OperatorKind, RowCorrection, UlamOperator};
use crate::error::{Error, Result};
use crate::inducing::{BindingContext, CellChart, InducedScheme, COVERAGE_WARNING};
use crate::map_model::PiecewiseMap;
use crate::numeric::invert_monotone;
use crate::par;

fn bin_of(y: f64, k: usize) -> u32 {
    ((y * k as f64).floor().max(0.0) as usize).min(k - 1) as u32
}

/// Grid values `j/k` strictly inside `(min(a, b), max(a, b))`, ascending.
fn grid_values_between(a: f64, b: f64, k: usize) -> impl Iterator<Item = f64> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let kf = k as f64;
    let first = (lo * kf).floor() as i64 + 1;
    let last = (hi * kf).ceil() as i64 - 1;
    (first.max(1)..=last.min(k as i64 - 1)).map(move |j| j as f64 / kf).filter(move |y| *y > lo && *y < hi)
}

/// Scale rows to sum to one; rows with no mass are reported empty.
fn normalize_rows(
    rows: &mut [Vec<(u32, f64)>],
    parts: &mut [Vec<Vec<(u32, f64)>>],
    k: usize,
) -> (RowCorrection, Vec<usize>) {
    let mut corr = RowCorrection::default();
    let mut empty = Vec::new();
    for (i, row) in rows.iter_mut().enumerate() {
        let sum: f64 = row.iter().map(|e| e.1).sum();
        if sum <= 0.0 {
            empty.push(i);
            row.clear();
            for p in parts.iter_mut() {
                p[i].clear();
            }
            continue;
        }
        let deficit = 1.0 - sum;
        if deficit.abs() > 1e-12 {
            corr.rescaled_rows += 1;
            corr.lost_mass += deficit / k as f64;
        }
        corr.max_deficit = corr.max_deficit.max(deficit.abs());
        for e in row.iter_mut() {
            e.1 /= sum;
        }
        for p in parts.iter_mut() {
            for e in p[i].iter_mut() {
                e.1 /= sum;
            }
        }
    }
    (corr, empty)
}

/// `m(B_i ∩ f⁻¹B_j) / m(B_i)` on `k` equal cells, by inverting each branch at
/// the grid values inside its image.
pub fn ulam_map(map: &PiecewiseMap, k: usize) -> Result<UlamOperator> {
    if k < 2 {
        return Err(Error::InvalidParameter("grid size k must be at least 2".into()));
    }
    let kf = k as f64;
    let mut rows: Vec<Vec<(u32, f64)>> = par::map_range(k, |i| {
        let (x0, x1) = (i as f64 / kf, if i + 1 == k { 1.0 } else { (i + 1) as f64 / kf });
        let mut out = Vec::new();
        for br in map.branches() {
            let (a, b) = (x0.max(br.left), x1.min(br.right));
            if b <= a {
                continue;
            }
            let inc = br.orientation() > 0.0;
            let (ya, yb) = (br.value(a), br.value(b));
            let mut xs = vec![a];
            for y in grid_values_between(ya, yb, k) {
                xs.push(invert_monotone(|x| (br.value(x), br.deriv1(x)), a, b, y, inc, 0.0));
            }
            xs.push(b);
            xs.sort_by(f64::total_cmp);
            for w in xs.windows(2) {
                if w[1] > w[0] {
                    let mid = 0.5 * (w[0] + w[1]);
                    out.push((bin_of(br.value(mid), k), (w[1] - w[0]) * kf));
                }
            }
        }
        out
    });
    let (correction, empty_rows) = normalize_rows(&mut rows, &mut [], k);
    let matrix = SparseMatrix::from_rows(k, rows);
    Ok(UlamOperator::new(OperatorKind::MapTransfer, map.name().to_string(), matrix, empty_rows, correction, None))
}

/// Ulam operator of the induced map together with its restrictions to
/// `{τ = n}`.
#[derive(Debug, Clone)]
pub struct SchemeOperator {
    pub op: UlamOperator,
    /// `(n, M_n)` with `Σ_n M_n = M`, rows scaled like `M`.
    pub by_tau: Vec<(usize, SparseMatrix)>,
}

/// Critical point index and binding itinerary.
type LevelKey<'a> = (usize, &'a [u8]);

/// Grid crossings of `s ↦ f^b(c ± s)` along one binding itinerary.
struct LevelTable {
    s_min: f64,
    s_max: f64,
    /// Offsets where the image crosses a grid value, ascending.
    knots: Vec<f64>,
    first_bin: i64,
    dir: i64,
}

impl LevelTable {
    fn build(ctx: &BindingContext, map: &PiecewiseMap, branches: &[u8], s_min: f64, s_max: f64, k: usize) -> Self {
        let eval = |s: f64| ctx.offset_image(map, s, branches);
        let (g_lo, g_hi) = (eval(s_min).0, eval(s_max).0);
        let inc = g_hi >= g_lo;
        let sign = if inc { 1.0 } else { -1.0 };
        let mut knots: Vec<f64> = grid_values_between(g_lo, g_hi, k)
            .map(|y| {
                invert_monotone(
                    |s| {
                        let (v, ld) = eval(s);
                        (v, sign * ld.exp())
                    },
                    s_min,
                    s_max,
                    y,
                    inc,
                    0.0,
                )
            })
            .collect();
        knots.sort_by(f64::total_cmp);
        let kf = k as f64;
        let (first_bin, dir) = if inc { ((g_lo * kf).floor() as i64, 1) } else { ((g_lo * kf).ceil() as i64 - 1, -1) };
        Self { s_min, s_max, knots, first_bin, dir }
    }

    fn bin_at(&self, idx: usize, k: usize) -> u32 {
        (self.first_bin + self.dir * idx as i64).clamp(0, k as i64 - 1) as u32
    }
}

/// Ulam matrix of the induced map `F` on `k` cells. Bound cells are measured
/// through their offset charts; mass lost to discarded cells is restored by
/// rescaling rows.
pub fn ulam_scheme(scheme: &InducedScheme, k: usize) -> Result<SchemeOperator> {
    if k < 2 {
        return Err(Error::InvalidParameter("grid size k must be at least 2".into()));
    }
    if scheme.coverage < COVERAGE_WARNING {
        return Err(Error::InvalidParameter(format!(
            "scheme coverage {:.4} is below {COVERAGE_WARNING}",
            scheme.coverage
        )));
    }
    let map = &scheme.map;
    let contexts = scheme.binding_contexts();

    // One table per (critical point, binding itinerary).
    let mut ranges: HashMap<LevelKey, (f64, f64)> = HashMap::new();
    for c in &scheme.cells {
        if let (Some(ci), Some((s0, s1))) = (c.critical, c.offsets) {
            let e = ranges.entry((ci, &c.itinerary[c.entry..])).or_insert((f64::INFINITY, 0.0));
            e.0 = e.0.min(s0.min(s1));
            e.1 = e.1.max(s0.max(s1));
        }
    }
    let mut keys: Vec<(LevelKey, (f64, f64))> = ranges.into_iter().collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    let tables: Vec<LevelTable> =
        par::map_slice(&keys, |((ci, br), (lo, hi))| LevelTable::build(&contexts[*ci], map, br, *lo, *hi, k));
    let table_of: HashMap<LevelKey, usize> = keys.iter().enumerate().map(|(i, (key, _))| (*key, i)).collect();

    let taus: Vec<usize> = {
        let mut t: Vec<usize> = scheme.cells.iter().map(|c| c.tau).collect();
        t.sort_unstable();
        t.dedup();
        t
    };
    let tau_slot: HashMap<usize, usize> = taus.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let kf = k as f64;

    // Per row: (tau slot, bin, weight).
    let raw: Vec<Vec<(usize, u32, f64)>> = par::map_range(k, |i| {
        let (x0, x1) = (i as f64 / kf, if i + 1 == k { 1.0 } else { (i + 1) as f64 / kf });
        let mut out = Vec::new();
        let start = scheme.cells.partition_point(|c| c.right <= x0);
        for cell in scheme.cells[start..].iter().take_while(|c| c.left < x1) {
            let (xa, xb) = (cell.left.max(x0), cell.right.min(x1));
            if xb <= xa {
                continue;
            }
            let slot = tau_slot[&cell.tau];
            let chart = CellChart::new(map, cell, &contexts);
            let ua = if xa == cell.left { 0.0 } else { chart.u_of_x(xa) };
            let ub = if xb == cell.right { 1.0 } else { chart.u_of_x(xb) };
            let x_at = |u: f64| {
                if u == ua {
                    xa
                } else if u == ub {
                    xb
                } else {
                    chart.x(u)
                }
            };
            match (cell.critical, cell.offsets) {
                (Some(ci), Some((s0, s1))) => {
                    let t = &tables[table_of[&(ci, &cell.itinerary[cell.entry..])]];
                    let (sa, sb) = (s0 + ua * (s1 - s0), s0 + ub * (s1 - s0));
                    let (lo, hi) = if sa <= sb { (sa, sb) } else { (sb, sa) };
                    let lo = lo.clamp(t.s_min, t.s_max);
                    let hi = hi.clamp(t.s_min, t.s_max);
                    let first = t.knots.partition_point(|&s| s <= lo);
                    let mut prev_s = lo;
                    let mut idx = first;
                    let u_of_s = |s: f64| {
                        if s == sa {
                            ua
                        } else if s == sb {
                            ub
                        } else if s1 == s0 {
                            0.5
                        } else {
                            ((s - s0) / (s1 - s0)).clamp(0.0, 1.0)
                        }
                    };
                    loop {
                        let next = if idx < t.knots.len() && t.knots[idx] < hi { t.knots[idx] } else { hi };
                        let dx = (x_at(u_of_s(next)) - x_at(u_of_s(prev_s))).abs();
                        if dx > 0.0 {
                            out.push((slot, t.bin_at(idx, k), dx * kf));
                        }
                        if next >= hi {
                            break;
                        }
                        prev_s = next;
                        idx += 1;
                    }
                }
                _ => {
                    let (fa, fb) = (chart.image(ua), chart.image(ub));
                    let inc = chart.slope_sign() > 0.0;
                    let mut us = vec![ua, ub];
                    for y in grid_values_between(fa, fb, k) {
                        us.push(invert_monotone(|u| chart.image_and_slope(u), ua, ub, y, inc, 0.0));
                    }
                    us.sort_by(f64::total_cmp);
                    for w in us.windows(2) {
                        let dx = x_at(w[1]) - x_at(w[0]);
                        if dx > 0.0 {
                            out.push((slot, bin_of(chart.image(0.5 * (w[0] + w[1])), k), dx * kf));
                        }
                    }
                }
            }
        }
        out
    });

    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(k);
    let mut parts: Vec<Vec<Vec<(u32, f64)>>> = vec![vec![Vec::new(); k]; taus.len()];
    for (i, entries) in raw.into_iter().enumerate() {
        let mut row = Vec::with_capacity(entries.len());
        for (slot, j, w) in entries {
            row.push((j, w));
            parts[slot][i].push((j, w));
        }
        rows.push(row);
    }
    // Merge duplicates before normalizing so sums are formed once.
    let merge = |r: &mut Vec<(u32, f64)>| {
        let m = SparseMatrix::from_rows(k, vec![std::mem::take(r)]);
        *r = m.row(0).map(|(j, v)| (j as u32, v)).collect();
    };
    rows.iter_mut().for_each(merge);
    parts.iter_mut().for_each(|p| p.iter_mut().for_each(merge));
    let (correction, empty_rows) = normalize_rows(&mut rows, &mut parts, k);
    let matrix = SparseMatrix::from_rows(k, rows);
    let by_tau = taus.into_iter().zip(parts).map(|(t, p)| (t, SparseMatrix::from_rows(k, p))).collect();
    let op = UlamOperator::new(
        OperatorKind::InducedTransfer,
        format!("{} induced", map.name()),
        matrix,
        empty_rows,
        correction,
        None,
    );
    Ok(SchemeOperator { op, by_tau })
}
