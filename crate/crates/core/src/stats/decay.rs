use serde::Serialize;

use super::clt::EstimateMethod;
use super::ensemble::OrbitEnsemble;
use crate::error::{Error, Result};
use crate::inducing::TauDistribution;
use crate::map_model::{Observable, PiecewiseMap};
use crate::numeric::{compensated_sum, dot, gauss3, linear_fit, mean_var, LineFit};
use crate::output::{Field, Table};
use crate::output::{LinePlot, Scale, Series};
use crate::transfer::{invariant_density, ulam_map, OperatorKind, UlamOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecayKind {
    /// `|ρ(n)| ≈ C e^{−cn}`; `rate = c`.
    Exponential,
    /// `|ρ(n)| ≈ C n^{−β}`; `rate = β`.
    Polynomial,
    /// Every point at `n ≥ 1` is below the noise floor.
    TooFast,
    /// Fewer than [`MIN_FIT_POINTS`] usable points, but some.
    Insufficient,
}

pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub kind: DecayKind,
    pub rate: f64,
    pub r2: f64,
    /// Lags used: the leading run of `n ≥ 1` above the floor.
    pub points: usize,
    pub exponential: Option<(f64, f64, f64)>,
    pub polynomial: Option<(f64, f64, f64)>,
}

fn triple(f: &LineFit) -> (f64, f64, f64) {
    (f.slope, f.intercept, f.r2)
}

/// Fit `log|ρ|` against `n` and against `log n` on the leading run of lags
/// `n ≥ 1` with `|ρ(n)| > floor(n)`; the better `R²` wins.
pub fn decay_fit(ns: &[usize], rho: &[f64], floor: &[f64]) -> DecayFit {
    let usable: Vec<(f64, f64)> = ns
        .iter()
        .zip(rho)
        .zip(floor)
        .filter(|((n, _), _)| **n >= 1)
        .take_while(|((_, r), f)| r.abs() > **f && r.abs() > 0.0)
        .map(|((n, r), _)| (*n as f64, r.abs().ln()))
        .collect();
    let empty = |kind| DecayFit {
        kind,
        rate: f64::NAN,
        r2: f64::NAN,
        points: usable.len(),
        exponential: None,
        polynomial: None,
    };
    if usable.is_empty() {
        return empty(DecayKind::TooFast);
    }
    if usable.len() < MIN_FIT_POINTS {
        return empty(DecayKind::Insufficient);
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.0).collect();
    let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1).collect();
    let (Some(e), Some(p)) = (linear_fit(&xs, &ys), linear_fit(&logs, &ys)) else {
        return empty(DecayKind::Insufficient);
    };
    let (kind, best) = if e.r2 >= p.r2 { (DecayKind::Exponential, e) } else { (DecayKind::Polynomial, p) };
    DecayFit {
        kind,
        rate: -best.slope,
        r2: best.r2,
        points: usable.len(),
        exponential: Some(triple(&e)),
        polynomial: Some(triple(&p)),
    }
}

/// `ρ_{v,w}(n)` for `0 ≤ n ≤ n_max`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub method: EstimateMethod,
    pub n: Vec<usize>,
    pub rho: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Below this `|ρ(n)|` is not resolved: three standard errors for Monte
    /// Carlo, three times the change under grid halving for the operator.
    pub floor: Vec<f64>,
    pub fit: DecayFit,
}

impl DecayReport {
    fn new(method: EstimateMethod, rho: Vec<f64>, stderr: Vec<f64>, floor: Vec<f64>) -> Self {
        let n: Vec<usize> = (0..rho.len()).collect();
        let fit = decay_fit(&n, &rho, &floor);
        Self { method, n, rho, stderr, floor, fit }
    }

    /// Columns `n, rho, abs_rho, stderr, floor`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["n", "rho", "abs_rho", "stderr", "floor"]);
        for i in 0..self.n.len() {
            t.push(vec![
                Field::from(self.n[i]),
                Field::Num(self.rho[i]),
                Field::Num(self.rho[i].abs()),
                Field::Num(self.stderr[i]),
                Field::Num(self.floor[i]),
            ]);
        }
        t
    }

    /// Log-linear plot of `|ρ(n)|`, the floor and the fitted line.
    pub fn plot(&self, title: &str, envelope: Option<&EnvelopeCheck>) -> String {
        let pts = |v: &[f64]| -> Vec<(f64, f64)> {
            self.n.iter().zip(v).filter(|(n, r)| **n >= 1 && r.abs() > 0.0).map(|(n, r)| (*n as f64, r.abs())).collect()
        };
        let mut plot = LinePlot::new(title, "n", "|rho(n)|")
            .with_scales(Scale::Linear, Scale::Log)
            .with_series(Series::new("|rho|", pts(&self.rho)))
            .with_series(Series::new("floor", pts(&self.floor)).dashed());
        if let Some((slope, icpt, r2)) = self.fit.exponential.filter(|_| self.fit.kind == DecayKind::Exponential) {
            let line = (1..=self.fit.points).map(|n| (n as f64, (icpt + slope * n as f64).exp())).collect();
            plot = plot
                .with_series(Series::new("exp fit", line).dashed())
                .annotate(format!("rate c = {:.4}, R2 = {:.4}", -slope, r2));
        } else if let Some((slope, icpt, r2)) = self.fit.polynomial.filter(|_| self.fit.kind == DecayKind::Polynomial) {
            let line = (1..=self.fit.points).map(|n| (n as f64, (icpt + slope * (n as f64).ln()).exp())).collect();
            plot = plot
                .with_series(Series::new("power fit", line).dashed())
                .annotate(format!("beta = {:.4}, R2 = {:.4}", -slope, r2));
        } else {
            plot = plot.annotate(format!("fit: {:?}", self.fit.kind));
        }
        if let Some(env) = envelope {
            plot = plot.with_series(Series::new("C * envelope", env.curve.clone()).dashed());
        }
        plot.render()
    }
}

/// Monte Carlo `ρ_{v,w}(n)` from the stationary pairs `(x_t, x_{t+n})`,
/// `t < horizon − n_max`, of every orbit.
pub fn correlation_mc(ens: &OrbitEnsemble, v: &Observable, w: &Observable, n_max: usize) -> Result<DecayReport> {
    ens.validate()?;
    let horizon = ens.horizon;
    if horizon <= n_max {
        return Err(Error::InvalidParameter("correlation horizon must exceed n_max".into()));
    }
    let starts = horizon - n_max;
    // Per orbit: mean of v over starts, mean of w over the shifted windows,
    // and the lagged products.
    let per: Vec<(f64, Vec<f64>, Vec<f64>)> = ens.map_orbits(|_, orbit| {
        let pts: Vec<f64> = orbit.take(horizon).collect();
        let vs: Vec<f64> = pts.iter().map(|&x| v.eval(x)).collect();
        let ws: Vec<f64> = pts.iter().map(|&x| w.eval(x)).collect();
        let mv = compensated_sum(vs[..starts].iter().copied()) / starts as f64;
        let mut mw = Vec::with_capacity(n_max + 1);
        let mut prod = Vec::with_capacity(n_max + 1);
        // Sliding window sums of w; the drift over n_max steps is negligible.
        let mut sw = compensated_sum(ws[..starts].iter().copied());
        for j in 0..=n_max {
            if j > 0 {
                sw += ws[j + starts - 1] - ws[j - 1];
            }
            mw.push(sw / starts as f64);
            prod.push(dot(&vs[..starts], &ws[j..j + starts]) / starts as f64);
        }
        (mv, mw, prod)
    });
    let m = per.len() as f64;
    let mean_v = compensated_sum(per.iter().map(|p| p.0)) / m;
    let mut rho = Vec::with_capacity(n_max + 1);
    let mut stderr = Vec::with_capacity(n_max + 1);
    for j in 0..=n_max {
        let mean_w = compensated_sum(per.iter().map(|p| p.1[j])) / m;
        // Per-orbit centred products; orbits are independent.
        let c: Vec<f64> = per.iter().map(|p| p.2[j] - mean_v * p.1[j] - mean_w * p.0 + mean_v * mean_w).collect();
        let (mean, var) = mean_var(&c);
        rho.push(mean);
        stderr.push((var / m).sqrt());
    }
    let floor = stderr.iter().map(|e| 3.0 * e).collect();
    Ok(DecayReport::new(EstimateMethod::MonteCarlo, rho, stderr, floor))
}

/// Cell averages of `φ` on `k` equal cells (two Gauss panels per cell).
pub fn cell_averages(phi: &Observable, k: usize) -> Vec<f64> {
    let kf = k as f64;
    (0..k)
        .map(|i| {
            let (a, b) = (i as f64 / kf, (i + 1) as f64 / kf);
            let m = 0.5 * (a + b);
            (gauss3(a, m, |x| phi.eval(x)) + gauss3(m, b, |x| phi.eval(x))) * kf
        })
        .collect()
}

/// `∫ Lⁿ(ṽh) w̃ dm` on the grid, `ṽ, w̃` centred against `h`.
pub(super) fn operator_correlations(op: &UlamOperator, h: &[f64], v: &[f64], w: &[f64], n_max: usize) -> Vec<f64> {
    let kf = op.k as f64;
    let mv = compensated_sum(v.iter().zip(h).map(|(a, b)| a * b)) / kf;
    let mw = compensated_sum(w.iter().zip(h).map(|(a, b)| a * b)) / kf;
    let wc: Vec<f64> = w.iter().map(|x| x - mw).collect();
    let mut u: Vec<f64> = v.iter().zip(h).map(|(a, b)| (a - mv) * b).collect();
    let mut rho = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            u = op.transfer(&u);
        }
        rho.push(compensated_sum(u.iter().zip(&wc).map(|(a, b)| a * b)) / kf);
    }
    rho
}

/// Operator estimate of `ρ_{v,w}` with `L_f` on `k` cells; the floor
/// compares with the same estimate on `k/2` cells.
pub fn correlation_operator(
    map: &PiecewiseMap,
    k: usize,
    v: &Observable,
    w: &Observable,
    n_max: usize,
) -> Result<DecayReport> {
    if k < 4 || !k.is_multiple_of(2) {
        return Err(Error::InvalidParameter("operator correlations need an even grid with k ≥ 4".into()));
    }
    let run = |k: usize| -> Result<Vec<f64>> {
        let op = ulam_map(map, k)?;
        let h = invariant_density(&op)?.density;
        Ok(operator_correlations(&op, &h, &cell_averages(v, k), &cell_averages(w, k), n_max))
    };
    let fine = run(k)?;
    let coarse = run(k / 2)?;
    let floor = fine.iter().zip(&coarse).map(|(a, b)| 3.0 * (a - b).abs() + 1e-15).collect();
    Ok(DecayReport::new(EstimateMethod::Operator, fine, vec![0.0; n_max + 1], floor))
}

/// Operator estimate from a prepared `L_f` operator and density.
pub fn correlation_with(op: &UlamOperator, h: &[f64], v: &[f64], w: &[f64], n_max: usize) -> Result<Vec<f64>> {
    if op.kind != OperatorKind::MapTransfer || h.len() != op.k || v.len() != op.k || w.len() != op.k {
        return Err(Error::InvalidParameter("correlation_with expects L_f and grid functions on its grid".into()));
    }
    Ok(operator_correlations(op, h, v, w, n_max))
}

/// `Σ_{j>δn} μ(τ>j) + n μ(τ>δn) + n^{−q}`.
pub fn envelope(tau: &TauDistribution, n: usize, q: f64, delta: f64) -> f64 {
    let nf = n as f64;
    let start = (delta * nf).floor() as usize + 1;
    let sum: f64 = tau.tail.iter().skip(start).sum();
    sum + nf * tau.tail_at(delta * nf) + nf.powf(-q)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeCheck {
    pub q: f64,
    pub delta: f64,
    /// `C = max |ρ(n)|/E(n)` over resolved lags in the first half.
    pub constant: f64,
    /// Every lag satisfies `|ρ(n)| ≤ C E(n) + floor(n)`.
    pub holds: bool,
    /// `max_n (|ρ(n)| − floor(n)) / (C E(n))`.
    pub worst_ratio: f64,
    /// `(n, C E(n))`
    pub curve: Vec<(f64, f64)>,
}

/// Fit `C` on the first half of the lags and check the whole curve.
pub fn envelope_check(report: &DecayReport, tau: &TauDistribution, q: f64, delta: f64) -> EnvelopeCheck {
    let n_max = report.n.last().copied().unwrap_or(0);
    let env: Vec<f64> = report.n.iter().map(|&n| envelope(tau, n.max(1), q, delta)).collect();
    let constant = report
        .n
        .iter()
        .enumerate()
        .filter(|(_, &n)| n >= 1 && 2 * n <= n_max.max(2))
        .map(|(i, _)| report.rho[i].abs() / env[i])
        .fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for (i, &n) in report.n.iter().enumerate() {
        if n >= 1 {
            let excess = report.rho[i].abs() - report.floor[i];
            worst = worst.max(excess / (constant * env[i]));
        }
    }
    let curve = report.n.iter().zip(&env).filter(|(n, _)| **n >= 1).map(|(n, e)| (*n as f64, constant * e)).collect();
    EnvelopeCheck { q, delta, constant, holds: worst <= 1.0, worst_ratio: worst, curve }
}
