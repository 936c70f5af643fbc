//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three operations: the invariant density of a builtin map, the derivative
//! growth along its first critical orbit, and a CLT experiment. Everything runs
//! single-threaded in the page.

use ergolab::critical_orbits::{exp_recurrence_check, orbit_data};
use ergolab::map_model::{builtin_map, BuiltinParams};
use ergolab::stats::{birkhoff_samples, clt_test, green_kubo_sigma, Centering, OrbitEnsemble};
use ergolab::transfer::{invariant_density, ulam_map};
use ergolab::{Observable, PiecewiseMap};
use wasm_bindgen::prelude::*;

const MAX_CELLS: usize = 8192;
const MAX_SAMPLES: usize = 20_000_000;

fn map(name: &str, gamma: f64) -> Result<PiecewiseMap, JsError> {
    Ok(builtin_map(name, &BuiltinParams { gamma })?)
}

/// Ulam estimate of the invariant density on `k` equal cells.
#[wasm_bindgen]
pub fn density(name: &str, gamma: f64, k: usize) -> Result<Vec<f64>, JsError> {
    if !(2..=MAX_CELLS).contains(&k) {
        return Err(JsError::new(&format!("k must lie in 2..={MAX_CELLS}")));
    }
    Ok(invariant_density(&ulam_map(&map(name, gamma)?, k)?)?.density)
}

/// Critical orbit of the first point of the critical set.
#[wasm_bindgen]
pub struct CriticalOrbit {
    label: String,
    rows: Vec<f64>,
    rate: f64,
}

#[wasm_bindgen]
impl CriticalOrbit {
    pub fn label(&self) -> String {
        self.label.clone()
    }

    /// Rows `n, log10 d_n, log10 D_n, log10 E_n` flattened.
    pub fn rows(&self) -> Vec<f64> {
        self.rows.clone()
    }

    /// Fitted `c` in `d_n E_n >= C e^{cn}`; NaN for singular points.
    pub fn rate(&self) -> f64 {
        self.rate
    }
}

#[wasm_bindgen]
pub fn critical_orbit(name: &str, gamma: f64, n: usize) -> Result<CriticalOrbit, JsError> {
    let m = map(name, gamma)?;
    let c = m.critical_set().first().ok_or_else(|| JsError::new(&format!("{name} has no critical points")))?;
    let d = orbit_data(&m, c, n.clamp(1, 2000))?;
    let l10 = std::f64::consts::LN_10;
    let rows =
        (1..=d.horizon).flat_map(|i| [i as f64, d.log_d[i] / l10, d.log_big_d[i] / l10, d.log_e[i] / l10]).collect();
    let rate = if c.is_singular() { f64::NAN } else { exp_recurrence_check(&d).map_or(f64::NAN, |f| f.rate) };
    Ok(CriticalOrbit { label: c.label(), rows, rate })
}

/// Normalised Birkhoff sums and their fit to the standard normal law.
#[wasm_bindgen]
pub struct CltRun {
    sigma2: f64,
    ks: f64,
    normalised: Vec<f64>,
}

#[wasm_bindgen]
impl CltRun {
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn ks(&self) -> f64 {
        self.ks
    }

    /// `φ_n / sqrt(n σ²)` for each orbit.
    pub fn normalised(&self) -> Vec<f64> {
        self.normalised.clone()
    }
}

#[wasm_bindgen]
pub fn clt(
    name: &str,
    gamma: f64,
    observable: &str,
    n_orbits: usize,
    horizon: usize,
    seed: u64,
) -> Result<CltRun, JsError> {
    if n_orbits.saturating_mul(horizon) > MAX_SAMPLES {
        return Err(JsError::new(&format!("at most {MAX_SAMPLES} map evaluations per run")));
    }
    let phi = Observable::parse(observable)?;
    let ens = OrbitEnsemble::new(map(name, gamma)?, n_orbits, horizon, seed);
    let samples = birkhoff_samples(&ens, &phi, Centering::Estimate)?;
    let lags = (horizon / 10).clamp(1, 30);
    let gk = green_kubo_sigma(&ens.with_horizon(horizon.min(2000).max(lags + 1)), &phi, samples.centering, lags)?;
    let report = clt_test(&samples, gk.sigma2, 0.05);
    let sigma = gk.sigma2.sqrt();
    let normalised = if report.degenerate { Vec::new() } else { samples.samples.iter().map(|s| s / sigma).collect() };
    Ok(CltRun { sigma2: gk.sigma2, ks: report.ks, normalised })
}
