use nalgebra::{Complex, DMatrix};
use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::sparse::SparseMatrix;
use super::{grid_bv_norm, OperatorKind, UlamOperator};
use crate::error::{Error, Result};
use crate::output::{Field, Table};

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    /// `‖vM‖₁ / ‖v‖₁` at the fixed vector.
    pub eigenvalue: f64,
    /// Grid density with `∫ h dm = 1`.
    pub density: Vec<f64>,
    pub iterations: usize,
    /// `‖vM − v‖₁` for the normalized fixed vector `v`.
    pub residual: f64,
    pub converged: bool,
    /// Size of the communicating block the iteration ran on.
    pub block_size: usize,
    pub warning: Option<String>,
    pub bv_density: f64,
    /// Grid BV norm of `1/h`; infinite if `h` vanishes somewhere.
    pub bv_inverse: f64,
    /// Grid value of `∫ h⁻¹ dm`.
    pub integral_inverse: f64,
}

impl SpectralReport {
    pub fn max_min_ratio(&self) -> f64 {
        let max = self.density.iter().copied().fold(0.0, f64::max);
        let min = self.density.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Columns `quantity, value`.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(["quantity", "value"]);
        let rows: [(&str, Field); 8] = [
            ("eigenvalue", Field::Num(self.eigenvalue)),
            ("residual", Field::Num(self.residual)),
            ("iterations", Field::from(self.iterations)),
            ("converged", Field::Text(self.converged.to_string())),
            ("block_size", Field::from(self.block_size)),
            ("bv_density", Field::Num(self.bv_density)),
            ("bv_inverse_density", Field::Num(self.bv_inverse)),
            ("integral_inverse_density", Field::Num(self.integral_inverse)),
        ];
        for (k, v) in rows {
            t.push(vec![Field::Text(k.into()), v]);
        }
        t
    }
}

/// Largest closed communicating class of the nonzero pattern, skipping
/// empty rows. Returns the class and the number of classes.
fn retained_block(m: &SparseMatrix, empty: &[usize]) -> (Vec<usize>, usize) {
    let k = m.n_rows;
    let mut g = DiGraph::<(), ()>::with_capacity(k, m.nnz());
    let nodes: Vec<_> = (0..k).map(|_| g.add_node(())).collect();
    for i in 0..k {
        for (j, a) in m.row(i) {
            if a > 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    // Kosaraju runs on an explicit stack; deep grids overflow recursive Tarjan.
    let sccs = kosaraju_scc(&g);
    let n_classes = sccs.len();
    let mut comp = vec![0usize; k];
    for (c, scc) in sccs.iter().enumerate() {
        for n in scc {
            comp[n.index()] = c;
        }
    }
    let closed = |c: usize| {
        sccs[c].iter().all(|n| {
            let i = n.index();
            !empty.contains(&i) && m.row(i).all(|(j, a)| a == 0.0 || comp[j] == c)
        })
    };
    let best = (0..sccs.len())
        .filter(|&c| closed(c))
        .max_by_key(|&c| (sccs[c].len(), std::cmp::Reverse(sccs[c].iter().map(|n| n.index()).min())));
    let mut block: Vec<usize> = match best {
        Some(c) => sccs[c].iter().map(|n| n.index()).collect(),
        None => (0..k).filter(|i| !empty.contains(i)).collect(),
    };
    block.sort_unstable();
    (block, n_classes)
}

/// Left fixed vector of an `L` operator by power iteration on its largest
/// closed communicating block, normalized as a density.
pub fn invariant_density(op: &UlamOperator) -> Result<SpectralReport> {
    if op.kind == OperatorKind::InducedInvariant {
        return Err(Error::InvalidParameter("invariant_density expects an L operator".into()));
    }
    const TOL: f64 = 1e-12;
    const MAX_ITER: usize = 50_000;
    let k = op.k;
    let (block, n_classes) = retained_block(&op.matrix, &op.empty_rows);
    let mut in_block = vec![false; k];
    for &i in &block {
        in_block[i] = true;
    }
    let warning = (n_classes > 1 && block.len() < k)
        .then(|| format!("operator is reducible ({n_classes} classes); using a closed block of {} cells", block.len()));
    let mut v = vec![0.0; k];
    for &i in &block {
        v[i] = 1.0 / block.len() as f64;
    }
    let mut residual = f64::INFINITY;
    let mut eigenvalue = f64::NAN;
    let mut iterations = 0;
    let mut lazy = false;
    while iterations < MAX_ITER {
        iterations += 1;
        let mut w = op.transfer(&v);
        for (i, x) in w.iter_mut().enumerate() {
            if !in_block[i] {
                *x = 0.0;
            }
        }
        let mass: f64 = w.iter().sum();
        eigenvalue = mass / v.iter().sum::<f64>();
        if lazy {
            for (x, y) in w.iter_mut().zip(&v) {
                *x = 0.5 * (*x / mass + y);
            }
        } else {
            w.iter_mut().for_each(|x| *x /= mass);
        }
        residual = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = w;
        if residual < TOL {
            break;
        }
        // Periodic blocks never settle; the lazy chain shares the fixed
        // vector and is aperiodic.
        if iterations == 2_000 && !lazy {
            lazy = true;
        }
    }
    let converged = residual < TOL;
    let kf = k as f64;
    let density: Vec<f64> = v.iter().map(|x| x * kf).collect();
    let bv_density = grid_bv_norm(&density);
    let (bv_inverse, integral_inverse) = if density.iter().all(|&x| x > 0.0) {
        let inv: Vec<f64> = density.iter().map(|x| 1.0 / x).collect();
        (grid_bv_norm(&inv), inv.iter().sum::<f64>() / kf)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(SpectralReport {
        eigenvalue,
        density,
        iterations,
        residual,
        converged,
        block_size: block.len(),
        warning,
        bv_density,
        bv_inverse,
        integral_inverse,
    })
}

/// `P = h⁻¹ L h` from an `L_F` operator and its density.
pub fn conjugate(op: &UlamOperator, h: &[f64]) -> Result<UlamOperator> {
    if op.kind == OperatorKind::InducedInvariant || h.len() != op.k {
        return Err(Error::InvalidParameter("conjugate expects an L operator and a matching density".into()));
    }
    Ok(conjugate_matrix(op.transpose(), h, op))
}

pub(super) fn conjugate_matrix(transposed: &SparseMatrix, h: &[f64], op: &UlamOperator) -> UlamOperator {
    let q = conjugate_entries(transposed, h);
    let empty: Vec<usize> = (0..op.k).filter(|&j| h[j] <= 0.0).collect();
    UlamOperator::new(OperatorKind::InducedInvariant, op.source.clone(), q, empty, op.correction, Some(h.to_vec()))
}

/// Rows `j`: `h_i M_ij / h_j`, or empty where `h_j = 0`.
pub(super) fn conjugate_entries(transposed: &SparseMatrix, h: &[f64]) -> SparseMatrix {
    let rows: Vec<Vec<(u32, f64)>> = (0..transposed.n_rows)
        .map(|j| {
            if h[j] <= 0.0 {
                return Vec::new();
            }
            transposed.row(j).map(|(i, a)| (i as u32, h[i] * a / h[j])).collect()
        })
        .collect();
    SparseMatrix::from_rows(transposed.n_cols, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GapMethod {
    Dense,
    Subspace,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    /// Second largest eigenvalue modulus `γ̂`.
    pub gamma: f64,
    /// Leading eigenvalues by modulus (`re`, `im`).
    pub eigenvalues: Vec<(f64, f64)>,
    /// Number of eigenvalues with modulus within `1e-8` of one.
    pub peripheral: usize,
    pub mixing: bool,
    pub method: GapMethod,
    pub iterations: usize,
}

impl GapReport {
    /// Columns `index, re, im, modulus`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["index", "re", "im", "modulus"]);
        for (i, (re, im)) in self.eigenvalues.iter().enumerate() {
            t.push(vec![Field::from(i), Field::Num(*re), Field::Num(*im), Field::Num(re.hypot(*im))]);
        }
        t
    }
}

const PERIPHERAL_TOL: f64 = 1e-8;
/// Grid sizes up to this use a dense eigensolve.
pub const DENSE_LIMIT: usize = 512;

fn sorted_by_modulus(mut ev: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)).then(b.im.total_cmp(&a.im)));
    ev
}

/// `γ̂` and a simplicity check for the eigenvalue one: dense eigenvalues for
/// `k ≤ 512`, subspace iteration on mean-zero vectors above.
pub fn spectral_gap(op: &UlamOperator, n_eigs: usize) -> GapReport {
    let n_eigs = n_eigs.max(2);
    if op.k <= DENSE_LIMIT {
        let ev = sorted_by_modulus(op.matrix.to_dense().complex_eigenvalues().iter().copied().collect());
        let peripheral = ev.iter().filter(|z| z.norm() > 1.0 - PERIPHERAL_TOL).count();
        let gamma = ev.get(1).map_or(0.0, |z| z.norm());
        return GapReport {
            gamma,
            eigenvalues: ev.iter().take(n_eigs).map(|z| (z.re, z.im)).collect(),
            peripheral,
            mixing: peripheral == 1,
            method: GapMethod::Dense,
            iterations: 0,
        };
    }
    subspace_gap(op, n_eigs)
}

/// Subspace iteration for `x ↦ Mᵀx` on the invariant subspace `Σ x = 0`,
/// which excludes the eigenvalue one of a row-stochastic `M`.
pub(super) fn subspace_gap(op: &UlamOperator, n_eigs: usize) -> GapReport {
    let k = op.k;
    let p = n_eigs + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let project = |col: &mut [f64]| {
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        col.iter_mut().for_each(|x| *x -= mean);
    };
    let mut x = DMatrix::<f64>::from_fn(k, p, |_, _| rng.random::<f64>() - 0.5);
    for mut c in x.column_iter_mut() {
        project(c.as_mut_slice());
    }
    x = x.qr().q();
    let apply = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let mut y = DMatrix::<f64>::zeros(k, x.ncols());
        for c in 0..x.ncols() {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            let mut out = op.transpose().mul_vec(&col);
            project(&mut out);
            y.column_mut(c).copy_from_slice(&out);
        }
        y
    };
    let mut ritz: Vec<Complex<f64>> = Vec::new();
    let mut prev = f64::NAN;
    let mut iterations = 0;
    for it in 1..=3_000 {
        iterations = it;
        let y = apply(&x);
        if y.norm() < 1e-280 {
            ritz = vec![Complex::new(0.0, 0.0); p];
            break;
        }
        if it % 5 == 0 {
            let h = x.transpose() * &y;
            ritz = sorted_by_modulus(h.complex_eigenvalues().iter().copied().collect());
            let g = ritz[0].norm();
            if (g - prev).abs() <= 1e-10 * g.max(1e-300) {
                break;
            }
            prev = g;
        }
        x = y.qr().q();
    }
    let gamma = ritz.first().map_or(0.0, |z| z.norm());
    let peripheral = 1 + ritz.iter().filter(|z| z.norm() > 1.0 - PERIPHERAL_TOL).count();
    let mut eigenvalues = vec![(1.0, 0.0)];
    eigenvalues.extend(ritz.iter().take(n_eigs - 1).map(|z| (z.re, z.im)));
    GapReport { gamma, eigenvalues, peripheral, mixing: peripheral == 1, method: GapMethod::Subspace, iterations }
}
