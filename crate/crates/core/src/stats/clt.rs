use nalgebra::DMatrix;
use serde::Serialize;

use super::decay::{decay_fit, DecayFit, DecayKind};
use super::ensemble::OrbitEnsemble;
use crate::error::{Error, Result};
use crate::map_model::{Observable, VectorObservable};
use crate::numeric::{compensated_sum, dot, ks_distance, mean_var, normal_cdf};
use crate::output::{Field, Table};
use crate::transfer::{OperatorKind, UlamOperator};

/// How the observable is centred before summing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Centering {
    /// Subtract the ensemble space-time mean.
    Estimate,
    /// Subtract a known `∫ φ dμ`.
    Given(f64),
    /// Use `φ` as it is.
    None,
}

impl Centering {
    pub(super) fn resolve(self, ens: &OrbitEnsemble, phi: &Observable) -> f64 {
        match self {
            Centering::Estimate => ens.mean(phi),
            Centering::Given(m) => m,
            Centering::None => 0.0,
        }
    }
}

/// Path functionals of `W_n(t) = n^{-1/2} φ_{nt}`, linearly interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathStats {
    /// `W_n(1)`
    pub end: f64,
    /// `max_{0≤t≤1} W_n(t)`, attained at a node.
    pub max: f64,
    /// `∫₀¹ W_n dt`
    pub integral: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BirkhoffSamples {
    pub n: usize,
    /// The constant subtracted from `φ`.
    pub centering: f64,
    /// `n^{-1/2} φ_n` per orbit.
    pub samples: Vec<f64>,
    pub paths: Vec<PathStats>,
}

/// One normalized Birkhoff sum per orbit, with its path functionals.
pub fn birkhoff_samples(ens: &OrbitEnsemble, phi: &Observable, centering: Centering) -> Result<BirkhoffSamples> {
    ens.validate()?;
    let mean = centering.resolve(ens, phi);
    let n = ens.horizon;
    let scale = 1.0 / (n as f64).sqrt();
    let paths: Vec<PathStats> = ens.map_orbits(|_, orbit| {
        // Plain running sums: the partial sums are the path itself.
        let mut s = 0.0;
        let mut max = 0.0f64;
        let mut area = 0.0;
        for x in orbit.take(n) {
            let prev = s;
            s += phi.eval(x) - mean;
            max = max.max(s);
            area += 0.5 * (prev + s);
        }
        PathStats { end: s * scale, max: max * scale, integral: area * scale / n as f64 }
    });
    Ok(BirkhoffSamples { n, centering: mean, samples: paths.iter().map(|p| p.end).collect(), paths })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimateMethod {
    MonteCarlo,
    Operator,
}

/// `σ² = ∫φ² dμ + 2 Σ_{1≤n≤n_max} ρ(n)` for centred `φ`.
#[derive(Debug, Clone, Serialize)]
pub struct GreenKubo {
    pub method: EstimateMethod,
    pub sigma2: f64,
    /// `ρ(0), …, ρ(n_max)`
    pub autocov: Vec<f64>,
    /// Standard errors (Monte Carlo only; zero for the operator method).
    pub stderr: Vec<f64>,
    pub fit: DecayFit,
    /// `2 Σ_{n>n_max} |ρ(n)|` from the fitted decay; not added to `sigma2`.
    pub tail: f64,
    /// False when the fitted decay is not summable.
    pub summable: bool,
}

impl GreenKubo {
    fn finish(method: EstimateMethod, autocov: Vec<f64>, stderr: Vec<f64>, floor: Vec<f64>) -> Self {
        let sigma2 = autocov[0] + 2.0 * compensated_sum(autocov[1..].iter().copied());
        let ns: Vec<usize> = (0..autocov.len()).collect();
        let fit = decay_fit(&ns, &autocov, &floor);
        let last = autocov.len() - 1;
        let (tail, summable) = match fit.kind {
            DecayKind::Exponential => {
                let q = (-fit.rate).exp();
                (2.0 * autocov[last].abs() * q / (1.0 - q), fit.rate > 0.0)
            }
            DecayKind::Polynomial if fit.rate > 1.0 => {
                // Σ_{n>N} (N/n)^β ≤ N/(β − 1)
                (2.0 * autocov[last].abs() * last as f64 / (fit.rate - 1.0), true)
            }
            DecayKind::Polynomial => (f64::INFINITY, false),
            _ => (2.0 * floor.get(last).copied().unwrap_or(0.0), true),
        };
        Self { method, sigma2, autocov, stderr, fit, tail, summable }
    }

    /// Columns `n, autocov, stderr`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["n", "autocov", "stderr"]);
        for (i, (c, e)) in self.autocov.iter().zip(&self.stderr).enumerate() {
            t.push(vec![Field::from(i), Field::Num(*c), Field::Num(*e)]);
        }
        t
    }
}

/// Lagged products along each orbit: per-orbit means of `φ_t φ_{t+j}`
/// over `t < horizon − n_max`, for `0 ≤ j ≤ n_max`.
fn lagged_means(
    ens: &OrbitEnsemble,
    a: &[&Observable],
    b: &[&Observable],
    mean_a: &[f64],
    mean_b: &[f64],
    n_max: usize,
) -> Vec<Vec<f64>> {
    let horizon = ens.horizon;
    let starts = horizon - n_max;
    let (da, db) = (a.len(), b.len());
    ens.map_orbits(|_, orbit| {
        let pts: Vec<f64> = orbit.take(horizon).collect();
        let va: Vec<f64> = (0..da).flat_map(|p| pts.iter().map(move |&x| a[p].eval(x) - mean_a[p])).collect();
        let vb: Vec<f64> = (0..db).flat_map(|q| pts.iter().map(move |&x| b[q].eval(x) - mean_b[q])).collect();
        // Layout: [(p, q, j)] flattened.
        let mut out = vec![0.0; da * db * (n_max + 1)];
        for p in 0..da {
            let xa = &va[p * horizon..(p + 1) * horizon];
            for q in 0..db {
                let xb = &vb[q * horizon..(q + 1) * horizon];
                for j in 0..=n_max {
                    let s = dot(&xa[..starts], &xb[j..j + starts]);
                    out[(p * db + q) * (n_max + 1) + j] = s / starts as f64;
                }
            }
        }
        out
    })
}

fn mean_and_stderr(per_orbit: &[Vec<f64>], idx: usize) -> (f64, f64) {
    let vals: Vec<f64> = per_orbit.iter().map(|v| v[idx]).collect();
    let (m, var) = mean_var(&vals);
    (m, (var / vals.len() as f64).sqrt())
}

/// Green–Kubo sum from Monte Carlo autocovariances on `ens` (its horizon
/// must exceed `n_max`), centring `φ` by `mean`.
pub fn green_kubo_sigma(ens: &OrbitEnsemble, phi: &Observable, mean: f64, n_max: usize) -> Result<GreenKubo> {
    ens.validate()?;
    if ens.horizon <= n_max {
        return Err(Error::InvalidParameter("Green–Kubo horizon must exceed n_max".into()));
    }
    let per = lagged_means(ens, &[phi], &[phi], &[mean], &[mean], n_max);
    let (autocov, stderr): (Vec<f64>, Vec<f64>) = (0..=n_max).map(|j| mean_and_stderr(&per, j)).unzip();
    let floor = stderr.iter().map(|e| 3.0 * e).collect();
    Ok(GreenKubo::finish(EstimateMethod::MonteCarlo, autocov, stderr, floor))
}

/// Green–Kubo sum with `ρ(n) = ∫ Lⁿ(φh) φ dm` on the grid of an `L_f`
/// operator; `phi` holds cell averages, centred here against `h`.
pub fn green_kubo_operator(op: &UlamOperator, h: &[f64], phi: &[f64], n_max: usize) -> Result<GreenKubo> {
    if op.kind != OperatorKind::MapTransfer || h.len() != op.k || phi.len() != op.k {
        return Err(Error::InvalidParameter(
            "green_kubo_operator expects L_f with matching density and observable".into(),
        ));
    }
    let autocov = super::decay::operator_correlations(op, h, phi, phi, n_max);
    let n = autocov.len();
    let floor = autocov.iter().map(|c| 1e-13 * c.abs().max(autocov[0].abs())).collect();
    Ok(GreenKubo::finish(EstimateMethod::Operator, autocov, vec![0.0; n], floor))
}

/// Sample variance of `n^{-1/2} φ_n` across orbits: each orbit is one
/// batch of length `n`.
pub fn batch_variance(samples: &BirkhoffSamples) -> f64 {
    mean_var(&samples.samples).1
}

/// Variance of means over consecutive batches of `batch` points within
/// one long series, times the batch length.
pub fn batch_means_variance(series: &[f64], batch: usize) -> f64 {
    let m = series.len() / batch.max(1);
    if m < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> =
        (0..m).map(|b| compensated_sum(series[b * batch..(b + 1) * batch].iter().copied()) / batch as f64).collect();
    mean_var(&means).1 * batch as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub n: usize,
    pub n_orbits: usize,
    pub sigma2_gk: f64,
    pub sigma2_batch: f64,
    /// KS distance to `N(0, σ²_GK)`; `NaN` in the degenerate case.
    pub ks: f64,
    pub threshold: f64,
    pub pass: bool,
    pub degenerate: bool,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `max |n^{-1/2} φ_n|`, the statistic of the degenerate test.
    pub max_abs: f64,
}

impl CltReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new([
            "n",
            "orbits",
            "sigma2_gk",
            "sigma2_batch",
            "ks",
            "threshold",
            "pass",
            "mean",
            "variance",
            "skewness",
            "excess_kurtosis",
        ]);
        t.push(vec![
            Field::from(self.n),
            Field::from(self.n_orbits),
            Field::Num(self.sigma2_gk),
            Field::Num(self.sigma2_batch),
            Field::Num(self.ks),
            Field::Num(self.threshold),
            Field::Text(self.pass.to_string()),
            Field::Num(self.mean),
            Field::Num(self.variance),
            Field::Num(self.skewness),
            Field::Num(self.excess_kurtosis),
        ]);
        t
    }
}

/// Below this `σ²` the limit is treated as degenerate.
pub const DEGENERATE_SIGMA2: f64 = 1e-10;

/// KS test of the samples against `N(0, σ²)`. With `σ² ≈ 0` the verdict is
/// instead `max |n^{-1/2} φ_n| < threshold`.
pub fn clt_test(samples: &BirkhoffSamples, sigma2: f64, threshold: f64) -> CltReport {
    let s = &samples.samples;
    let (mean, variance) = mean_var(s);
    let sd = variance.sqrt();
    let nf = s.len() as f64;
    let (m3, m4) = if sd > 0.0 {
        (
            compensated_sum(s.iter().map(|x| ((x - mean) / sd).powi(3))) / nf,
            compensated_sum(s.iter().map(|x| ((x - mean) / sd).powi(4))) / nf - 3.0,
        )
    } else {
        (0.0, 0.0)
    };
    let max_abs = s.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let degenerate = sigma2 < DEGENERATE_SIGMA2;
    let (ks, pass) = if degenerate {
        (f64::NAN, max_abs < threshold)
    } else {
        let sigma = sigma2.sqrt();
        let ks = ks_distance(s, |x| normal_cdf(x / sigma));
        (ks, ks < threshold)
    };
    CltReport {
        n: samples.n,
        n_orbits: s.len(),
        sigma2_gk: sigma2,
        sigma2_batch: variance,
        ks,
        threshold,
        pass,
        degenerate,
        mean,
        variance,
        skewness: m3,
        excess_kurtosis: m4,
        max_abs,
    }
}

/// KS distances of path functionals against Brownian motion with
/// variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FcltReport {
    /// `W_n(1)/σ` against `N(0, 1)`.
    pub ks_end: f64,
    /// `max_t W_n(t)/σ` against `P(M ≤ c) = 2Φ(c) − 1`.
    pub ks_max: f64,
    /// `∫₀¹ W_n dt / σ` against `N(0, 1/3)`.
    pub ks_integral: f64,
}

impl FcltReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["functional", "ks"]);
        for (name, v) in [("end", self.ks_end), ("max", self.ks_max), ("integral", self.ks_integral)] {
            t.push(vec![Field::from(name), Field::Num(v)]);
        }
        t
    }
}

pub fn fclt_paths(samples: &BirkhoffSamples, sigma2: f64) -> Result<FcltReport> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("functional CLT needs σ² > 0".into()));
    }
    let sigma = sigma2.sqrt();
    let col = |f: fn(&PathStats) -> f64| -> Vec<f64> { samples.paths.iter().map(|p| f(p) / sigma).collect() };
    let ks_end = ks_distance(&col(|p| p.end), normal_cdf);
    let ks_max = ks_distance(&col(|p| p.max), |c| if c <= 0.0 { 0.0 } else { 2.0 * normal_cdf(c) - 1.0 });
    let sd_int = (1.0f64 / 3.0).sqrt();
    let ks_integral = ks_distance(&col(|p| p.integral), |c| normal_cdf(c / sd_int));
    Ok(FcltReport { ks_end, ks_max, ks_integral })
}

/// Long-run covariance `Σ = Σ_{|j|≤n_max} Cov(φ, φ∘f^j)` of a vector
/// observable, with symmetry and positivity diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    pub dim: usize,
    /// Row-major `d × d`.
    pub matrix: Vec<f64>,
    pub means: Vec<f64>,
    /// `max |Σ_pq − Σ_qp|`
    pub asymmetry: f64,
    /// Smallest eigenvalue of the symmetrised matrix.
    pub min_eigenvalue: f64,
}

impl CovarianceReport {
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol
    }
}

pub fn covariance_matrix(ens: &OrbitEnsemble, phi: &VectorObservable, n_max: usize) -> Result<CovarianceReport> {
    ens.validate()?;
    let d = phi.dim();
    if d == 0 || ens.horizon <= n_max {
        return Err(Error::InvalidParameter("covariance needs a nonempty observable and horizon > n_max".into()));
    }
    let comps: Vec<&Observable> = phi.0.iter().collect();
    let means: Vec<f64> = comps.iter().map(|c| ens.mean(c)).collect();
    let per = lagged_means(ens, &comps, &comps, &means, &means, n_max);
    let stride = n_max + 1;
    let lag = |p: usize, q: usize, j: usize| mean_and_stderr(&per, (p * d + q) * stride + j).0;
    let mut matrix = vec![0.0; d * d];
    for p in 0..d {
        for q in 0..d {
            // Cov(φ_p, φ_q∘f^j) for j ≥ 0 and Cov(φ_q, φ_p∘f^j) for the negative lags.
            let mut s = lag(p, q, 0);
            for j in 1..=n_max {
                s += lag(p, q, j) + lag(q, p, j);
            }
            matrix[p * d + q] = s;
        }
    }
    let m = DMatrix::from_row_slice(d, d, &matrix);
    let asymmetry = (&m - m.transpose()).abs().max();
    let sym = (&m + m.transpose()) * 0.5;
    let min_eigenvalue = sym.symmetric_eigenvalues().min();
    Ok(CovarianceReport { dim: d, matrix, means, asymmetry, min_eigenvalue })
}
