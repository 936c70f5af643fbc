use serde::Serialize;

use super::clt::Centering;
use super::ensemble::OrbitEnsemble;
use crate::error::{Error, Result};
use crate::inducing::TauDistribution;
use crate::map_model::Observable;
use crate::numeric::{linear_fit, LineFit};
use crate::output::{Field, Table};

/// `μ(|φ_n| ≥ εn)` over a grid of `n`.
#[derive(Debug, Clone, Serialize)]
pub struct LdReport {
    pub eps: f64,
    pub n: Vec<usize>,
    pub counts: Vec<usize>,
    pub n_orbits: usize,
    pub prob: Vec<f64>,
    /// 95% upper confidence bound; `3/N` for zero counts.
    pub upper: Vec<f64>,
    /// `log p` against `n` over positive counts.
    pub exponential: Option<LineFit>,
    /// `log p` against `log n` over positive counts.
    pub polynomial: Option<LineFit>,
}

impl LdReport {
    pub fn all_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// Columns `eps, n, count, prob, upper`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["eps", "n", "count", "prob", "upper"]);
        for i in 0..self.n.len() {
            t.push(vec![
                Field::Num(self.eps),
                Field::from(self.n[i]),
                Field::from(self.counts[i]),
                Field::Num(self.prob[i]),
                Field::Num(self.upper[i]),
            ]);
        }
        t
    }
}

/// Tail probabilities for several `ε` from one pass over the ensemble,
/// whose horizon must reach the largest `n`.
pub fn large_deviations(
    ens: &OrbitEnsemble,
    v: &Observable,
    eps: &[f64],
    n_grid: &[usize],
    centering: Centering,
) -> Result<Vec<LdReport>> {
    ens.validate()?;
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParameter("large deviations need ε > 0".into()));
    }
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let n_top = *grid.last().ok_or_else(|| Error::InvalidParameter("empty n grid".into()))?;
    if grid[0] == 0 || n_top > ens.horizon {
        return Err(Error::InvalidParameter("n grid must lie in 1..=horizon".into()));
    }
    let mean = centering.resolve(ens, v);
    // Per orbit, |φ_n| at each grid point.
    let sums: Vec<Vec<f64>> = ens.map_orbits(|_, orbit| {
        let mut out = Vec::with_capacity(grid.len());
        let mut s = 0.0;
        let mut next = 0;
        for (t, x) in orbit.take(n_top).enumerate() {
            s += v.eval(x) - mean;
            if t + 1 == grid[next] {
                out.push(s.abs());
                next += 1;
            }
        }
        out
    });
    let n_orbits = sums.len();
    let nf = n_orbits as f64;
    Ok(eps
        .iter()
        .map(|&e| {
            let counts: Vec<usize> =
                (0..grid.len()).map(|g| sums.iter().filter(|s| s[g] >= e * grid[g] as f64).count()).collect();
            let prob: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
            let upper = counts
                .iter()
                .zip(&prob)
                .map(|(&c, &p)| if c == 0 { 3.0 / nf } else { (p + 1.96 * (p * (1.0 - p) / nf).sqrt()).min(1.0) })
                .collect();
            let pos: Vec<(f64, f64)> =
                grid.iter().zip(&prob).filter(|(_, p)| **p > 0.0).map(|(n, p)| (*n as f64, p.ln())).collect();
            let xs: Vec<f64> = pos.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pos.iter().map(|p| p.1).collect();
            let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            LdReport {
                eps: e,
                n: grid.clone(),
                counts,
                n_orbits,
                prob,
                upper,
                exponential: linear_fit(&xs, &ys),
                polynomial: linear_fit(&logs, &ys),
            }
        })
        .collect())
}

pub fn large_deviation(
    ens: &OrbitEnsemble,
    v: &Observable,
    eps: f64,
    n_grid: &[usize],
    centering: Centering,
) -> Result<LdReport> {
    Ok(large_deviations(ens, v, &[eps], n_grid, centering)?.remove(0))
}

/// `β` with `μ(τ > n) = O(n^{−(β+1)})` from a log-log fit of the positive
/// tail beyond its first quarter, ignoring `n < min τ`; infinite when
/// nothing is left.
pub fn tail_exponent(tau: &TauDistribution) -> Option<f64> {
    let pts: Vec<(f64, f64)> = tau
        .tail
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, t)| **t > 0.0 && **t < tau.tail[0])
        .map(|(n, t)| ((n as f64).ln(), t.ln()))
        .collect();
    if pts.is_empty() {
        return Some(f64::INFINITY);
    }
    let skip = pts.len() / 4;
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts[skip..].iter().copied().unzip();
    linear_fit(&xs, &ys).map(|f| -f.slope - 1.0)
}
