//! Derivative growth and recurrence along critical orbits.
//!
//! All sequences are kept in natural-log scale: `D_n` grows like `4^n` for
//! the Ulam map and leaves the range of `f64` long before the horizons used
//! here.

use crate::error::{Error, Result};
use crate::map_model::{OneSidedCriticalPoint, PiecewiseMap};
use crate::numeric::{compensated_sum, linear_fit};
use crate::output::{Field, Table};

/// Orbit of `f(c±)` with `ln d_n`, `ln D_n`, `ln E_n` for `0 ≤ n ≤ N`.
///
/// Index 0 holds the conventions `d_0 = d(c, 𝒞) = 0`, `D_0 = 1`, `E_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalOrbitData {
    pub point: OneSidedCriticalPoint,
    pub horizon: usize,
    /// `f^n(c±)`, with `orbit[0] = c`.
    pub orbit: Vec<f64>,
    pub log_d: Vec<f64>,
    pub log_big_d: Vec<f64>,
    pub log_e: Vec<f64>,
    /// First `n ≥ 1` with `d_n = 0` or a vanishing/infinite derivative.
    pub degenerate_at: Option<usize>,
}

impl CriticalOrbitData {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate_at.is_some()
    }

    pub fn is_singular(&self) -> bool {
        self.point.is_singular()
    }

    /// `ln(d_n E_n)` for `1 ≤ n ≤ N`.
    pub fn log_recurrence(&self) -> Vec<f64> {
        (1..=self.horizon).map(|n| self.log_d[n] + self.log_e[n]).collect()
    }

    /// Columns `n, d_n, D_n, E_n, term3(p), term4(p)`, all but `n` as log10.
    pub fn to_table(&self, p: f64) -> Table {
        let mut t = Table::new(["n", "log10_d", "log10_D", "log10_E", "log10_term3", "log10_term4"]);
        let l10 = std::f64::consts::LN_10;
        for n in 1..=self.horizon {
            t.push(vec![
                Field::Int(n as i64),
                Field::Num(self.log_d[n] / l10),
                Field::Num(self.log_big_d[n] / l10),
                Field::Num(self.log_e[n] / l10),
                Field::Num(log_term3(self, n, p) / l10),
                Field::Num(log_term4(self, n, p) / l10),
            ]);
        }
        t
    }
}

/// Iterate the one-sided critical orbit for `n_max` steps.
pub fn orbit_data(map: &PiecewiseMap, c: &OneSidedCriticalPoint, n_max: usize) -> Result<CriticalOrbitData> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let exponent = 2.0 * c.order - 1.0;
    let mut orbit = Vec::with_capacity(n_max + 1);
    let mut log_d = Vec::with_capacity(n_max + 1);
    let mut log_big_d = Vec::with_capacity(n_max + 1);
    let mut log_e = Vec::with_capacity(n_max + 1);
    orbit.push(c.location);
    log_d.push(f64::NEG_INFINITY);
    log_big_d.push(0.0);
    log_e.push(0.0);

    let mut x = map.eval_side(c.location, c.side)?;
    let mut degenerate_at = None;
    for n in 1..=n_max {
        orbit.push(x);
        let d = map.distance_to_critical(x);
        log_d.push(d.min(1.0).ln());
        let step = map.log_abs_deriv(x);
        if degenerate_at.is_none() && (d == 0.0 || !step.is_finite()) {
            degenerate_at = Some(n);
        }
        let prev = log_big_d[n - 1];
        log_e.push(if exponent > 0.0 { prev / exponent } else { f64::NAN });
        log_big_d.push(prev + step);
        x = map.step(x);
    }
    Ok(CriticalOrbitData { point: *c, horizon: n_max, orbit, log_d, log_big_d, log_e, degenerate_at })
}

fn log_term4(data: &CriticalOrbitData, n: usize, p: f64) -> f64 {
    p * (n as f64).ln() - data.log_e[n]
}

fn log_term3(data: &CriticalOrbitData, n: usize, p: f64) -> f64 {
    let ld = data.log_d[n];
    // d^{-1} log d^{-1} with the convention 0 at d = 1.
    if ld == 0.0 {
        return f64::NEG_INFINITY;
    }
    if ld == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    p * (n as f64).ln() - ld + (-ld).ln() - data.log_e[n]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Converging,
    Diverging,
    Inconclusive,
    /// Singular points carry no orbit condition.
    NotApplicable,
}

impl Convergence {
    pub fn as_str(self) -> &'static str {
        match self {
            Convergence::Converging => "converging",
            Convergence::Diverging => "diverging",
            Convergence::Inconclusive => "inconclusive",
            Convergence::NotApplicable => "not_applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummabilityReport {
    pub p: f64,
    pub horizon: usize,
    /// `Σ_{n≤N} n^p d_n^{-1} log d_n^{-1} E_n^{-1}`
    pub s3: f64,
    /// `Σ_{n≤N} n^p E_n^{-1}`
    pub s4: f64,
    /// Geometric ratio fitted to the last quartile of the terms.
    pub tail_ratio3: f64,
    pub tail_ratio4: f64,
    pub verdict3: Convergence,
    pub verdict4: Convergence,
}

/// Classify a series from the logs of its terms.
///
/// The last quartile is fitted both as a geometric and as a power-law
/// sequence; the better fit decides. Ratio below 0.99 or exponent below
/// -1.1 counts as converging, ratio at least 1 or exponent at least -1 as
/// diverging.
pub fn classify_tail(log_terms: &[(usize, f64)]) -> (f64, Convergence) {
    let start = log_terms.len() * 3 / 4;
    let tail: Vec<(f64, f64)> =
        log_terms[start..].iter().filter(|(_, v)| v.is_finite()).map(|(n, v)| (*n as f64, *v)).collect();
    if log_terms[start..].iter().any(|(_, v)| *v == f64::INFINITY) {
        return (f64::INFINITY, Convergence::Diverging);
    }
    if tail.len() < 3 {
        // All tail terms vanish identically.
        if log_terms[start..].iter().all(|(_, v)| *v == f64::NEG_INFINITY) && !log_terms.is_empty() {
            return (0.0, Convergence::Converging);
        }
        return (f64::NAN, Convergence::Inconclusive);
    }
    let xs: Vec<f64> = tail.iter().map(|t| t.0).collect();
    let ys: Vec<f64> = tail.iter().map(|t| t.1).collect();
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let (Some(g), Some(w)) = (linear_fit(&xs, &ys), linear_fit(&lx, &ys)) else {
        return (f64::NAN, Convergence::Inconclusive);
    };
    let geo = g.slope.exp();
    let verdict = if g.r2 >= w.r2 {
        if geo < 0.99 {
            Convergence::Converging
        } else if geo >= 1.0 {
            Convergence::Diverging
        } else {
            Convergence::Inconclusive
        }
    } else if w.slope < -1.1 {
        Convergence::Converging
    } else if w.slope >= -1.0 {
        Convergence::Diverging
    } else {
        Convergence::Inconclusive
    };
    (geo, verdict)
}

/// Partial sums of the two summability series up to `n_max ≤ N`.
pub fn summability_report(data: &CriticalOrbitData, p: f64, n_max: usize) -> SummabilityReport {
    let n_max = n_max.min(data.horizon);
    let t3: Vec<(usize, f64)> = (1..=n_max).map(|n| (n, log_term3(data, n, p))).collect();
    let t4: Vec<(usize, f64)> = (1..=n_max).map(|n| (n, log_term4(data, n, p))).collect();
    let s3 = compensated_sum(t3.iter().map(|(_, v)| v.exp()));
    let s4 = compensated_sum(t4.iter().map(|(_, v)| v.exp()));
    let (r3, mut v3) = classify_tail(&t3);
    let (r4, mut v4) = classify_tail(&t4);
    if data.is_singular() {
        v3 = Convergence::NotApplicable;
        v4 = Convergence::NotApplicable;
    } else if data.is_degenerate() {
        v3 = Convergence::Diverging;
        v4 = Convergence::Diverging;
    }
    SummabilityReport { p, horizon: n_max, s3, s4, tail_ratio3: r3, tail_ratio4: r4, verdict3: v3, verdict4: v4 }
}

/// Log-linear fit of `d_n E_n ≥ C_0 e^{c_0 n}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceFit {
    /// `ĉ_0`
    pub rate: f64,
    pub intercept: f64,
    /// `Ĉ_0 = min_n d_n E_n e^{-ĉ_0 n}`
    pub constant: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    /// `ĉ_0 > 0` and the pointwise bound holds for every `n ≤ N`.
    pub holds: bool,
}

/// Fit `log_values[n-1] = ln(d_n E_n)` for `n = 1, …, N`.
pub fn fit_recurrence(log_values: &[f64]) -> Result<RecurrenceFit> {
    if log_values.len() < 10 {
        return Err(Error::InvalidParameter("recurrence fit needs at least 10 terms".into()));
    }
    let xs: Vec<f64> = (1..=log_values.len()).map(|n| n as f64).collect();
    if log_values.iter().any(|v| !v.is_finite()) {
        return Ok(RecurrenceFit {
            rate: f64::NAN,
            intercept: f64::NAN,
            constant: 0.0,
            residual: f64::NAN,
            holds: false,
        });
    }
    let fit = linear_fit(&xs, log_values).ok_or_else(|| Error::Numerical("degenerate fit".into()))?;
    let rss: f64 = xs.iter().zip(log_values).map(|(x, y)| (y - fit.intercept - fit.slope * x).powi(2)).sum();
    let log_c = xs.iter().zip(log_values).map(|(x, y)| y - fit.slope * x).fold(f64::INFINITY, f64::min);
    let rate = if fit.slope.abs() < 1e-12 { 0.0 } else { fit.slope };
    let constant = log_c.exp();
    Ok(RecurrenceFit {
        rate,
        intercept: fit.intercept,
        constant,
        residual: (rss / xs.len() as f64).sqrt(),
        holds: rate > 0.0 && constant > 0.0,
    })
}

pub fn exp_recurrence_check(data: &CriticalOrbitData) -> Result<RecurrenceFit> {
    fit_recurrence(&data.log_recurrence())
}
