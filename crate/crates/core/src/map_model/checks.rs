//! Numerical diagnostics for the nondegeneracy and expansion assumptions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OneSidedCriticalPoint, PiecewiseMap};
use crate::error::{Error, Result};
use crate::numeric::{linear_fit, log_spaced};
use crate::output::{Field, Table};

/// Drift of `ln ratio` against `ln d(x, c)` above which the declared order
/// is rejected.
pub const ORDER_DRIFT_LIMIT: f64 = 0.25;

/// Smallest relative distance to `c` sampled by [`verify_order`].
const ORDER_SAMPLE_SPAN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderSample {
    /// Distance `d(x, c)`.
    pub distance: f64,
    /// `|f(x) - f(c)| / d^ℓ`
    pub value_ratio: f64,
    /// `|f'(x)| / d^(ℓ-1)`
    pub deriv1_ratio: f64,
    /// `|f''(x)| / d^(ℓ-2)`
    pub deriv2_ratio: f64,
}

/// Ratio bounds for one declared critical/singular point.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderCheck {
    pub point: OneSidedCriticalPoint,
    pub delta: f64,
    /// `(min, max)` of the value, first- and second-derivative ratios.
    pub bounds: [(f64, f64); 3],
    /// Log-log slope of each ratio against the distance; zero for a
    /// correctly declared order.
    pub drift: [f64; 3],
    pub samples: Vec<OrderSample>,
}

impl OrderCheck {
    pub fn max_drift(&self) -> f64 {
        self.drift.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }

    /// Columns `distance, value_ratio, deriv1_ratio, deriv2_ratio`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["distance", "value_ratio", "deriv1_ratio", "deriv2_ratio"]);
        for s in &self.samples {
            t.push(vec![
                Field::Num(s.distance),
                Field::Num(s.value_ratio),
                Field::Num(s.deriv1_ratio),
                Field::Num(s.deriv2_ratio),
            ]);
        }
        t
    }
}

/// Compare `|f(x)-f(c)|`, `|f'(x)|`, `|f''(x)|` with the powers of `d(x, c)`
/// implied by the declared order on a log-spaced sample of `Δ(c, δ)`.
pub fn verify_order(map: &PiecewiseMap, c: &OneSidedCriticalPoint, delta: f64, n_samples: usize) -> Result<OrderCheck> {
    if n_samples < 4 || !(delta > 0.0) {
        return Err(Error::InvalidParameter("verify_order needs δ > 0 and at least 4 samples".into()));
    }
    let bi = map.locate_side(c.location, c.side);
    let br = &map.branches()[bi];
    let room = match c.side {
        super::Side::Plus => br.right - c.location,
        super::Side::Minus => c.location - br.left,
    };
    if delta > room {
        return Err(Error::InvalidParameter(format!("Δ({}, {delta}) leaves its branch", c.label())));
    }
    let sign = c.side.sign();
    let l = c.order;
    let samples: Vec<OrderSample> = log_spaced(delta * ORDER_SAMPLE_SPAN, delta, n_samples)
        .into_iter()
        .map(|d| {
            let x = c.location + sign * d;
            OrderSample {
                distance: d,
                value_ratio: br.formula.increment(c.location, sign * d).abs() / d.powf(l),
                deriv1_ratio: br.deriv1(x).abs() / d.powf(l - 1.0),
                deriv2_ratio: br.formula.deriv2(x).abs() / d.powf(l - 2.0),
            }
        })
        .collect();

    let logd: Vec<f64> = samples.iter().map(|s| s.distance.ln()).collect();
    let mut bounds = [(f64::INFINITY, 0.0f64); 3];
    let mut drift = [0.0; 3];
    for (k, pick) in
        [(|s: &OrderSample| s.value_ratio) as fn(&OrderSample) -> f64, |s| s.deriv1_ratio, |s| s.deriv2_ratio]
            .iter()
            .enumerate()
    {
        let vals: Vec<f64> = samples.iter().map(pick).collect();
        bounds[k] = vals.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let usable: Vec<(f64, f64)> =
            logd.iter().zip(&vals).filter(|(_, v)| **v > 0.0 && v.is_finite()).map(|(x, v)| (*x, v.ln())).collect();
        if usable.len() >= 2 {
            let (xs, ys): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
            if let Some(fit) = linear_fit(&xs, &ys) {
                drift[k] = fit.slope;
            }
        }
    }
    let check = OrderCheck { point: *c, delta, bounds, drift, samples };
    let worst = check.max_drift();
    if worst > ORDER_DRIFT_LIMIT {
        let d = check.drift.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        return Err(Error::OrderMismatch { location: c.location, side: c.side.symbol(), declared: c.order, drift: d });
    }
    Ok(check)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionWitness {
    pub start: f64,
    pub steps: usize,
    pub log_derivative: f64,
}

/// Empirical constants of the expansion assumption away from `Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub delta: f64,
    /// `κ̂`: smallest `|(f^n)'(x)|` over segments that end in `Δ`.
    pub kappa: f64,
    /// `true` when no segment entered `Δ` (empty critical set); `kappa` is
    /// then the smallest expansion over all sampled segments.
    pub kappa_vacuous: bool,
    pub c_delta: f64,
    pub lambda_delta: f64,
    /// `(n, min ln|(f^n)'|, segment count)` for each horizon with data.
    pub min_log_derivative: Vec<(usize, f64, usize)>,
    pub witnesses: Vec<ExpansionWitness>,
    /// No qualifying segment was found; constants are meaningless.
    pub inconclusive: bool,
}

impl ExpansionReport {
    /// Columns `n, min_log_derivative, segments`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["n", "min_log_derivative", "segments"]);
        for (n, v, c) in &self.min_log_derivative {
            t.push(vec![Field::from(*n), Field::Num(*v), Field::from(*c)]);
        }
        t
    }

    /// `quantity, value` rows for the fitted constants.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(["quantity", "value"]);
        for (k, v) in [
            ("delta", Field::Num(self.delta)),
            ("kappa", Field::Num(self.kappa)),
            ("kappa_vacuous", Field::Text(self.kappa_vacuous.to_string())),
            ("c_delta", Field::Num(self.c_delta)),
            ("lambda_delta", Field::Num(self.lambda_delta)),
            ("inconclusive", Field::Text(self.inconclusive.to_string())),
        ] {
            t.push(vec![Field::from(k), v]);
        }
        t
    }
}

/// Sample orbits from uniformly random starts and record derivative growth
/// along segments that stay `δ`-away from the critical set.
pub fn verify_expansion(
    map: &PiecewiseMap,
    delta: f64,
    horizon: usize,
    n_orbits: usize,
    seed: u64,
) -> Result<ExpansionReport> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_log = vec![f64::INFINITY; horizon + 1];
    let mut min_witness = vec![None; horizon + 1];
    let mut counts = vec![0usize; horizon + 1];
    let mut kappa_entry: Option<ExpansionWitness> = None;

    for _ in 0..n_orbits {
        let start: f64 = rng.random();
        if map.distance_to_critical(start) <= delta {
            continue;
        }
        let mut x = start;
        let mut log_d = 0.0;
        for n in 1..=horizon {
            log_d += map.log_abs_deriv(x);
            x = map.step(x);
            counts[n] += 1;
            if log_d < min_log[n] {
                min_log[n] = log_d;
                min_witness[n] = Some(ExpansionWitness { start, steps: n, log_derivative: log_d });
            }
            if map.distance_to_critical(x) <= delta {
                if kappa_entry.is_none_or(|w| log_d < w.log_derivative) {
                    kappa_entry = Some(ExpansionWitness { start, steps: n, log_derivative: log_d });
                }
                break;
            }
        }
    }

    let table: Vec<(usize, f64, usize)> =
        (1..=horizon).filter(|&n| counts[n] > 0).map(|n| (n, min_log[n], counts[n])).collect();
    if table.is_empty() {
        return Ok(ExpansionReport {
            delta,
            kappa: f64::NAN,
            kappa_vacuous: true,
            c_delta: f64::NAN,
            lambda_delta: f64::NAN,
            min_log_derivative: table,
            witnesses: vec![],
            inconclusive: true,
        });
    }
    // Horizons sampled by very few segments make the minimum unreliable.
    let min_count = (n_orbits / 1000).max(3);
    let fit_rows: Vec<&(usize, f64, usize)> = table.iter().filter(|r| r.2 >= min_count).collect();
    let fit_rows = if fit_rows.len() >= 2 { fit_rows } else { table.iter().collect() };
    let xs: Vec<f64> = fit_rows.iter().map(|r| r.0 as f64).collect();
    let ys: Vec<f64> = fit_rows.iter().map(|r| r.1).collect();
    let lambda = linear_fit(&xs, &ys).map(|f| f.slope).unwrap_or(ys[0] / xs[0]);
    let log_c = fit_rows.iter().map(|r| r.1 - lambda * r.0 as f64).fold(f64::INFINITY, f64::min);

    let (kappa, vacuous) = match kappa_entry {
        Some(w) => (w.log_derivative.exp(), false),
        None => (table.iter().map(|r| r.1).fold(f64::INFINITY, f64::min).exp(), true),
    };
    let mut witnesses: Vec<ExpansionWitness> = kappa_entry.into_iter().collect();
    if let Some(w) = fit_rows.last().and_then(|r| min_witness[r.0]) {
        witnesses.push(w);
    }
    Ok(ExpansionReport {
        delta,
        kappa,
        kappa_vacuous: vacuous,
        c_delta: log_c.exp(),
        lambda_delta: lambda,
        min_log_derivative: table,
        witnesses,
        inconclusive: false,
    })
}
