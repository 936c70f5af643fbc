use super::binding::{Binding, BindingContext};
use super::{Cell, DiscardReason, Discarded, InducedScheme, SchemeParams, TruncationLedger};
use crate::error::Result;
use crate::map_model::PiecewiseMap;
use crate::numeric::{compensated_sum, invert_monotone};
use crate::par;

/// Interval of `x` on which `f^j` follows a fixed itinerary.
struct Piece {
    lo: f64,
    hi: f64,
    /// `f^j([lo, hi])` as `(min, max)`.
    img: (f64, f64),
    orient: f64,
    itin: Vec<u8>,
}

struct RawCell {
    left: f64,
    right: f64,
    tau: usize,
    binding: usize,
    entry: usize,
    critical: Option<usize>,
    itinerary: Vec<u8>,
    /// Offsets `|f^entry x − c|` at `left` and `right`.
    offsets: Option<(f64, f64)>,
}

struct Builder<'a> {
    map: &'a PiecewiseMap,
    p: SchemeParams,
    contexts: Vec<BindingContext>,
    thresholds: Vec<Vec<f64>>,
    splits: Vec<f64>,
    cells: Vec<RawCell>,
    discarded: Vec<Discarded>,
}

pub(super) fn build(map: &PiecewiseMap, params: &SchemeParams) -> Result<InducedScheme> {
    params.validate()?;
    let contexts: Vec<BindingContext> =
        map.critical_set().iter().map(|c| BindingContext::new(map, *c, params.tau_max, params.theta)).collect();
    let thresholds = contexts.iter().map(|c| c.thresholds(map, params.delta)).collect();
    let mut splits: Vec<f64> = map.breakpoints().to_vec();
    for c in map.critical_set() {
        let (a, b) = c.neighbourhood(params.delta);
        splits.extend([a, b, c.location]);
    }
    splits.retain(|v| *v > 0.0 && *v < 1.0);
    splits.sort_by(f64::total_cmp);
    splits.dedup();

    let mut b = Builder { map, p: *params, contexts, thresholds, splits, cells: Vec::new(), discarded: Vec::new() };
    b.run();
    b.finish()
}

impl Builder<'_> {
    fn run(&mut self) {
        let mut stack = vec![Piece { lo: 0.0, hi: 1.0, img: (0.0, 1.0), orient: 1.0, itin: Vec::new() }];
        while let Some(piece) = stack.pop() {
            self.process(piece, &mut stack);
        }
    }

    fn discard(&mut self, a: f64, b: f64, reason: DiscardReason) {
        if b > a {
            self.discarded.push(Discarded { left: a, right: b, reason });
        }
    }

    /// `x ∈ [lo, hi]` with `f^j(x) = y` along the piece itinerary.
    fn pull(&self, piece: &Piece, y: f64) -> f64 {
        if piece.itin.is_empty() {
            return y;
        }
        let itin = &piece.itin;
        let orient = piece.orient;
        invert_monotone(
            |x| {
                let (v, ld) = self.map.follow(x, itin);
                (v, orient * ld.exp())
            },
            piece.lo,
            piece.hi,
            y,
            orient > 0.0,
            0.0,
        )
    }

    fn process(&mut self, piece: Piece, stack: &mut Vec<Piece>) {
        let j = piece.itin.len();
        if j >= self.p.tau_max {
            self.discard(piece.lo, piece.hi, DiscardReason::TauExceeded);
            return;
        }
        let (a, b) = piece.img;
        let mut ys = vec![a];
        ys.extend(self.splits.iter().copied().filter(|s| *s > a && *s < b));
        ys.push(b);
        let mut xs: Vec<f64> = Vec::with_capacity(ys.len());
        for (i, &y) in ys.iter().enumerate() {
            let x = if i == 0 {
                if piece.orient > 0.0 {
                    piece.lo
                } else {
                    piece.hi
                }
            } else if i == ys.len() - 1 {
                if piece.orient > 0.0 {
                    piece.hi
                } else {
                    piece.lo
                }
            } else {
                self.pull(&piece, y)
            };
            xs.push(x);
        }
        for i in 0..ys.len() - 1 {
            let (u, v) = (ys[i], ys[i + 1]);
            let (xl, xr) = if xs[i] <= xs[i + 1] { (xs[i], xs[i + 1]) } else { (xs[i + 1], xs[i]) };
            if xr <= xl {
                continue;
            }
            let mid = 0.5 * (u + v);
            if let Some(ci) = self.map.neighbourhood_of(mid, self.p.delta) {
                self.bind(&piece, (u, v), (xs[i], xs[i + 1]), ci);
                continue;
            }
            let k = self.map.locate(mid);
            let br = &self.map.branches()[k];
            let (fu, fv) = (br.value(u), br.value(v));
            let mut itin = piece.itin.clone();
            itin.push(k as u8);
            if j + 1 == self.p.q0 {
                if self.p.q0 > self.p.tau_max {
                    self.discard(xl, xr, DiscardReason::TauExceeded);
                } else {
                    self.cells.push(RawCell {
                        left: xl,
                        right: xr,
                        tau: self.p.q0,
                        binding: 0,
                        entry: self.p.q0,
                        critical: None,
                        itinerary: itin,
                        offsets: None,
                    });
                }
            } else {
                stack.push(Piece {
                    lo: xl,
                    hi: xr,
                    img: (fu.min(fv), fu.max(fv)),
                    orient: piece.orient * br.orientation(),
                    itin,
                });
            }
        }
    }

    /// Split an entry piece by binding level. `ends` are the preimages of
    /// `img.0` and `img.1`.
    fn bind(&mut self, piece: &Piece, img: (f64, f64), ends: (f64, f64), ci: usize) {
        let j = piece.itin.len();
        let ctx = &self.contexts[ci];
        let c = ctx.point.location;
        let sign = ctx.point.side.sign();
        let thr = &self.thresholds[ci];
        let b_max = ctx.b_max();
        let n_cap = (self.p.tau_max - j).min(b_max);
        // Offsets s = |y - c| of the image endpoints, with their preimages.
        let (s_a, s_b) = (sign * (img.0 - c), sign * (img.1 - c));
        let ((s_lo, x_lo), (s_hi, x_hi)) =
            if s_a <= s_b { ((s_a, ends.0), (s_b, ends.1)) } else { ((s_b, ends.1), (s_a, ends.0)) };

        // Segments (upper, lower, level) in decreasing s; level 0 marks
        // discarded mass.
        let bounds: Vec<(f64, Option<usize>)> = (1..=n_cap).map(|n| (thr[n], Some(n))).collect();
        let deepest = thr[b_max];
        let mut segments: Vec<(f64, f64, Option<usize>, DiscardReason)> = Vec::new();
        let mut upper = s_hi;
        for &(t, lvl) in &bounds {
            let lower = t.max(s_lo);
            if lower < upper {
                segments.push((upper, lower, lvl, DiscardReason::TauExceeded));
                upper = lower;
            }
            if upper <= s_lo {
                break;
            }
        }
        if upper > s_lo {
            let lower = deepest.max(s_lo);
            if n_cap < b_max && lower < upper {
                segments.push((upper, lower, None, DiscardReason::TauExceeded));
                upper = lower;
            }
            if upper > s_lo {
                segments.push((upper, s_lo, None, DiscardReason::BindingCap));
            }
        }

        let pull_s = |s: f64| -> f64 {
            if s == s_lo {
                x_lo
            } else if s == s_hi {
                x_hi
            } else {
                self.pull(piece, c + sign * s)
            }
        };
        let mut xs: Vec<f64> = Vec::with_capacity(segments.len() + 1);
        if let Some(first) = segments.first() {
            xs.push(pull_s(first.0));
        }
        for seg in &segments {
            xs.push(pull_s(seg.1));
        }
        let mut new_cells = Vec::new();
        let mut new_discards = Vec::new();
        for (i, &(su, sl, lvl, reason)) in segments.iter().enumerate() {
            let ((xl, sl_at), (xr, sr_at)) =
                if xs[i] <= xs[i + 1] { ((xs[i], su), (xs[i + 1], sl)) } else { ((xs[i + 1], sl), (xs[i], su)) };
            if xr <= xl {
                continue;
            }
            match lvl {
                Some(n) => {
                    let s_mid = if sl > 0.0 { (su * sl).sqrt() } else { 0.5 * su };
                    let (bnd, branches) = ctx.binding_branches(self.map, s_mid);
                    if bnd != Binding::Bound(n) {
                        new_discards.push((xl, xr, DiscardReason::Unresolved));
                        continue;
                    }
                    let mut itinerary = piece.itin.clone();
                    itinerary.extend(branches);
                    new_cells.push(RawCell {
                        left: xl,
                        right: xr,
                        tau: j + n,
                        binding: n,
                        entry: j,
                        critical: Some(ci),
                        itinerary,
                        offsets: Some((sl_at, sr_at)),
                    });
                }
                None => new_discards.push((xl, xr, reason)),
            }
        }
        self.cells.extend(new_cells);
        for (a, b, r) in new_discards {
            self.discard(a, b, r);
        }
    }

    /// `(ℓ_0, b, itinerary)` of `x` by direct iteration.
    fn direct_label(&self, x: f64) -> Option<(usize, usize, Vec<u8>)> {
        let mut y = x;
        let mut itin = Vec::with_capacity(self.p.q0);
        for j in 0..self.p.q0 {
            if let Some(ci) = self.map.neighbourhood_of(y, self.p.delta) {
                let ctx = &self.contexts[ci];
                let (bnd, branches) = ctx.binding_branches(self.map, (y - ctx.point.location).abs());
                let b = bnd.value()?;
                itin.extend(branches);
                return Some((j, b, itin));
            }
            itin.push(self.map.locate(y) as u8);
            y = self.map.step(y);
        }
        Some((self.p.q0, 0, itin))
    }

    fn validate(&self, cell: &RawCell) -> bool {
        let w = cell.right - cell.left;
        [0.25, 0.5, 0.75].iter().all(|f| {
            let x = cell.left + f * w;
            if x <= cell.left || x >= cell.right {
                return false;
            }
            match self.direct_label(x) {
                Some((entry, b, itin)) => entry == cell.entry && b == cell.binding && itin == cell.itinerary,
                None => false,
            }
        })
    }

    fn finish(mut self) -> Result<InducedScheme> {
        let raw = std::mem::take(&mut self.cells);
        let ok = par::map_slice(&raw, |c| self.validate(c));
        let map = self.map;
        let tol = self.p.refine_tol;
        let mut kept = Vec::with_capacity(raw.len());
        let mut unresolved_cells = 0;
        for (c, good) in raw.into_iter().zip(ok) {
            if good {
                kept.push(c);
            } else {
                unresolved_cells += 1;
                self.discard(c.left, c.right, DiscardReason::Unresolved);
            }
        }
        let stats = par::map_slice(&kept, |c| self.inv_deriv_stats(c, tol));
        let mut cells: Vec<Cell> = kept
            .into_iter()
            .zip(stats)
            .map(|(c, (sup, var))| {
                let orientation = c.itinerary.iter().map(|&k| map.branches()[k as usize].orientation()).product();
                Cell {
                    left: c.left,
                    right: c.right,
                    tau: c.tau,
                    binding: c.binding,
                    entry: c.entry,
                    critical: c.critical,
                    itinerary: c.itinerary,
                    orientation,
                    sup_inv_deriv: sup,
                    var_inv_deriv: var,
                    offsets: c.offsets,
                }
            })
            .collect();
        cells.sort_by(|a, b| a.left.total_cmp(&b.left));
        let mut discarded = self.discarded;
        discarded.sort_by(|a, b| a.left.total_cmp(&b.left));
        let mut ledger = TruncationLedger { unresolved_cells, ..Default::default() };
        let by =
            |r: DiscardReason| compensated_sum(discarded.iter().filter(|d| d.reason == r).map(|d| d.right - d.left));
        ledger.tau_exceeded = by(DiscardReason::TauExceeded);
        ledger.binding_cap = by(DiscardReason::BindingCap);
        ledger.unresolved = by(DiscardReason::Unresolved);
        let coverage = compensated_sum(cells.iter().map(Cell::len));
        Ok(InducedScheme { map: map.clone(), params: self.p, cells, discarded, ledger, coverage })
    }
}

/// Relative change between successive estimates.
fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

impl Builder<'_> {
    /// Sup and variation of `1/|F'|` on a cell.
    ///
    /// Entry cells are parametrized by the offset from the critical point
    /// after the free flight, so the near-critical factor keeps its
    /// relative accuracy. Uniform samples locate the turning points, which
    /// are refined by golden-section search; the sample count doubles until
    /// both values change by less than `tol` (at most 4096 intervals).
    fn inv_deriv_stats(&self, cell: &RawCell, tol: f64) -> (f64, f64) {
        let map = self.map;
        let (l, w) = (cell.left, cell.right - cell.left);
        let g = |t: f64| -> f64 {
            let x = l + t * w;
            match (cell.critical, cell.offsets) {
                (Some(ci), Some((s0, s1))) => {
                    let (prefix, bound) = cell.itinerary.split_at(cell.entry);
                    let s = s0 + t * (s1 - s0);
                    let a = -map.follow(x, prefix).1;
                    (a + self.contexts[ci].log_inv_deriv(map, s, bound)).exp()
                }
                _ => (-map.follow(x, &cell.itinerary).1).exp(),
            }
        };
        let mut n = 16;
        let mut prev = piecewise_monotone_stats(&g, 0.0, 1.0, n);
        while n < 4096 {
            n *= 2;
            let cur = piecewise_monotone_stats(&g, 0.0, 1.0, n);
            let done = rel(cur.0, prev.0) < tol && rel(cur.1, prev.1) < tol;
            prev = cur;
            if done {
                break;
            }
        }
        prev
    }
}

fn piecewise_monotone_stats<G: Fn(f64) -> f64>(g: &G, l: f64, r: f64, n: usize) -> (f64, f64) {
    let xs: Vec<f64> = (0..=n).map(|i| if i == n { r } else { l + (r - l) * i as f64 / n as f64 }).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mut path = vec![vs[0]];
    for i in 1..n {
        let (d0, d1) = (vs[i] - vs[i - 1], vs[i + 1] - vs[i]);
        if d0 * d1 < 0.0 {
            path.push(golden_extremum(g, xs[i - 1], xs[i + 1], d0 > 0.0));
        }
    }
    path.push(vs[n]);
    let sup = path.iter().copied().fold(0.0, f64::max);
    let var = path.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    (sup, var)
}

/// Extreme value of a unimodal `g` on `[a, b]`.
fn golden_extremum<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64, maximum: bool) -> f64 {
    const R: f64 = 0.618_033_988_749_894_8;
    let better = |u: f64, v: f64| if maximum { u > v } else { u < v };
    let mut x1 = b - R * (b - a);
    let mut x2 = a + R * (b - a);
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..60 {
        if !(x1 > a && x2 < b && x1 < x2) {
            break;
        }
        if better(f1, f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - R * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + R * (b - a);
            f2 = g(x2);
        }
    }
    if better(f1, f2) {
        f1
    } else {
        f2
    }
}
