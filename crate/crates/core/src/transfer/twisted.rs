use nalgebra::Complex;

use super::{OperatorKind, UlamOperator};
use crate::error::{Error, Result};

/// `L_t v = L(e^{itΦ} v)` on the grid, in the row convention of `L`.
#[derive(Debug, Clone)]
pub struct TwistedOperator {
    pub t: f64,
    pub k: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<Complex<f64>>,
    /// `sup_i |e^{itΦ_i} − 1| + Σ_i |e^{itΦ_{i+1}} − e^{itΦ_i}|`, which bounds
    /// the grid BV norm of `L_t − L_0` by the norm of the multiplier.
    pub distance: f64,
}

impl TwistedOperator {
    /// `v ↦ L_t v` for a complex grid density.
    pub fn transfer(&self, v: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let mut out = vec![Complex::new(0.0, 0.0); self.k];
        for (i, vi) in v.iter().enumerate() {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[p] as usize] += self.vals[p] * vi;
            }
        }
        out
    }
}

/// Twist the rows of an `L` operator by `e^{itΦ_i}`, `Φ_i` the midpoint value.
pub fn twisted_operator(op: &UlamOperator, phi: &[f64], t: f64) -> Result<TwistedOperator> {
    if op.kind == OperatorKind::InducedInvariant || phi.len() != op.k {
        return Err(Error::InvalidParameter("twisted_operator expects an L operator and one value per cell".into()));
    }
    let m = &op.matrix;
    let mult: Vec<Complex<f64>> = phi.iter().map(|&p| Complex::from_polar(1.0, t * p)).collect();
    let mut vals = Vec::with_capacity(m.nnz());
    for (i, w) in mult.iter().enumerate() {
        for (_, a) in m.row(i) {
            vals.push(if t == 0.0 { Complex::new(a, 0.0) } else { w * a });
        }
    }
    let one = Complex::new(1.0, 0.0);
    let sup = mult.iter().map(|w| (w - one).norm()).fold(0.0, f64::max);
    let var: f64 = mult.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    Ok(TwistedOperator {
        t,
        k: op.k,
        row_ptr: m.row_ptr.clone(),
        cols: m.cols.clone(),
        vals,
        distance: if t == 0.0 { 0.0 } else { sup + var },
    })
}
