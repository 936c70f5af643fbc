use serde::Serialize;

use super::{OperatorKind, UlamOperator};
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// `Φ = Φ̂ + χ∘F − χ` with `χ = Σ_{n≥1} PⁿΦ`.
///
/// `Φ̂` is kept as a function of the transition `(y, Fy)`: on the grid pair
/// `(i, j)` it is `Φ_i − χ_j + χ_i`, carried by the stationary pair measure
/// `h_i M_ij / k`. `PΦ̂` is evaluated on that measure.
#[derive(Debug, Clone, Serialize)]
pub struct GordinReport {
    /// `∫ Φ dμ_Y` before centering.
    pub mean: f64,
    pub chi: Vec<f64>,
    pub terms: usize,
    pub converged: bool,
    /// `‖PΦ̂‖_{L²(μ_Y)}`
    pub residual: f64,
    /// `‖Φ̂‖_{L²}` on the pair measure.
    pub norm_hat: f64,
    pub norm_phi: f64,
}

impl GordinReport {
    pub fn relative_residual(&self) -> f64 {
        if self.norm_hat == 0.0 {
            self.residual
        } else {
            self.residual / self.norm_hat
        }
    }
}

fn l2(v: &[f64], h: &[f64]) -> f64 {
    let k = v.len() as f64;
    (compensated_sum(v.iter().zip(h).map(|(x, w)| w * x * x)) / k).sqrt()
}

/// Sum the series until the increment falls below `1e-12 ‖Φ‖`.
pub fn gordin_solve(op_p: &UlamOperator, phi: &[f64]) -> Result<GordinReport> {
    let h = match (&op_p.density, op_p.kind) {
        (Some(h), OperatorKind::InducedInvariant) if h.len() == phi.len() => h,
        _ => return Err(Error::InvalidParameter("gordin_solve expects the P operator and one value per cell".into())),
    };
    let k = phi.len();
    let kf = k as f64;
    let mean = compensated_sum(phi.iter().zip(h).map(|(p, w)| p * w)) / kf;
    let phi_c: Vec<f64> = phi.iter().map(|p| p - mean).collect();
    let norm_phi = l2(&phi_c, h);
    let mut chi = vec![0.0; k];
    let mut u = op_p.transfer(&phi_c);
    let mut terms = 0;
    let mut converged = norm_phi == 0.0;
    while !converged && terms < 100_000 {
        terms += 1;
        chi.iter_mut().zip(&u).for_each(|(c, x)| *c += x);
        u = op_p.transfer(&u);
        converged = l2(&u, h) < 1e-12 * norm_phi;
    }
    let q = &op_p.matrix;
    let mut p_hat = vec![0.0; k];
    let mut hat_sq = 0.0;
    for j in 0..k {
        let mut acc = 0.0;
        for (i, a) in q.row(j) {
            let v = phi_c[i] - chi[j] + chi[i];
            acc += a * v;
            hat_sq += h[j] * a * v * v;
        }
        p_hat[j] = acc;
    }
    Ok(GordinReport { mean, residual: l2(&p_hat, h), norm_hat: (hat_sq / kf).sqrt(), norm_phi, chi, terms, converged })
}
