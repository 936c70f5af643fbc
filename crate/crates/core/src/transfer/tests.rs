use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::inducing::{build_partition, cell_statistics, induced_observable, InducedScheme, SchemeParams};
use crate::map_model::{builtin_map, BuiltinParams, Observable, PiecewiseMap};

fn map(name: &str) -> PiecewiseMap {
    builtin_map(name, &BuiltinParams::default()).unwrap()
}

fn scheme(name: &str, q0: usize) -> InducedScheme {
    let p = SchemeParams { q0, ..Default::default() };
    build_partition(&map(name), &p).unwrap()
}

fn arcsine_density(x: f64) -> f64 {
    1.0 / (PI * (x * (1.0 - x)).sqrt())
}

fn arcsine_cdf(x: f64) -> f64 {
    2.0 / PI * x.clamp(0.0, 1.0).sqrt().asin()
}

struct UlamScheme {
    scheme: InducedScheme,
    sop: SchemeOperator,
    h: Vec<f64>,
    p: UlamOperator,
}

/// Default Ulam scheme with its `k = 256` operators, built once.
fn ulam_scheme_256() -> &'static UlamScheme {
    static S: OnceLock<UlamScheme> = OnceLock::new();
    S.get_or_init(|| {
        let scheme = scheme("ulam", 10);
        let sop = ulam_scheme(&scheme, 256).unwrap();
        let h = invariant_density(&sop.op).unwrap().density;
        let p = conjugate(&sop.op, &h).unwrap();
        UlamScheme { scheme, sop, h, p }
    })
}

#[test]
fn doubling_two_cells() {
    let op = ulam_map(&map("doubling"), 2).unwrap();
    let d = op.matrix.to_dense();
    for i in 0..2 {
        for j in 0..2 {
            assert!((d[(i, j)] - 0.5).abs() < 1e-15, "{d}");
        }
        assert!((op.matrix.row_sum(i) - 1.0).abs() < 1e-15);
    }
    assert!(ulam_map(&map("doubling"), 1).is_err());
}

#[test]
fn rows_are_stochastic() {
    for (name, k) in [("ulam", 1024), ("cusp", 512), ("doubling", 333)] {
        let op = ulam_map(&map(name), k).unwrap();
        assert!(op.empty_rows.is_empty());
        assert!(op.max_row_sum_error() < 1e-12, "{name}: {}", op.max_row_sum_error());
        assert!(op.min_entry() >= 0.0);
    }
    let s = ulam_scheme_256();
    assert!(s.sop.op.max_row_sum_error() < 1e-12);
    assert!(s.sop.op.min_entry() >= 0.0);
    assert!(s.p.max_row_sum_error() < 1e-12);
}

#[test]
fn doubling_density_is_lebesgue() {
    let op = ulam_map(&map("doubling"), 512).unwrap();
    let r = invariant_density(&op).unwrap();
    assert!(r.converged);
    assert!((r.eigenvalue - 1.0).abs() < 1e-10);
    assert!(l1_distance(&r.density, &vec![1.0; 512]) < 1e-12);
    assert!((r.integral_inverse - 1.0).abs() < 1e-12);
}

#[test]
fn ulam_density_matches_arcsine_law() {
    let op = ulam_map(&map("ulam"), 2048).unwrap();
    let r = invariant_density(&op).unwrap();
    assert!(r.converged);
    let d = l1_distance_to(&r.density, arcsine_density, arcsine_cdf);
    assert!(d < 0.05, "L1 distance {d}");
    assert!(r.density.iter().all(|&x| x >= 0.0));
}

#[test]
fn cusp_density_is_bounded() {
    let op = ulam_map(&map("cusp"), 1024).unwrap();
    let r = invariant_density(&op).unwrap();
    assert!(r.converged);
    let ratio = r.max_min_ratio();
    assert!(ratio.is_finite() && ratio > 1.0, "{ratio}");
    let integral: f64 = r.density.iter().sum::<f64>() / 1024.0;
    assert!((integral - 1.0).abs() < 1e-12);
    assert!(r.integral_inverse.is_finite());
}

#[test]
fn density_converges_with_grid() {
    let ks = [256, 512, 1024, 2048];
    let hs: Vec<Vec<f64>> =
        ks.iter().map(|&k| invariant_density(&ulam_map(&map("ulam"), k).unwrap()).unwrap().density).collect();
    let mut prev = f64::INFINITY;
    for w in hs.windows(2) {
        // Refine the coarse density onto the fine grid.
        let fine: Vec<f64> = (0..w[1].len()).map(|i| w[0][i / 2]).collect();
        let d = l1_distance(&fine, &w[1]);
        let k = w[0].len() as f64;
        assert!(d < prev, "not decreasing: {d} after {prev}");
        assert!(d < 2.0 / k.sqrt(), "{d} at k = {k}");
        prev = d;
    }
}

#[test]
fn power_iteration_preserves_mass() {
    let op = ulam_map(&map("ulam"), 300).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut v: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
    let mass: f64 = v.iter().sum();
    for _ in 0..50 {
        v = op.transfer(&v);
    }
    assert!((v.iter().sum::<f64>() - mass).abs() < 1e-9 * mass);
}

#[test]
fn duality_with_composition() {
    let f = map("ulam");
    let k = 512;
    let op = ulam_map(&f, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let v: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        // Smooth test function, so `w∘f` has a midpoint quadrature.
        let (a, b) = (rng.random::<f64>() * 4.0, rng.random::<f64>() * 6.0);
        let w = |x: f64| (a * x).sin() + (b * x * x).cos();
        let wg: Vec<f64> = op.midpoints().iter().map(|&x| w(x)).collect();
        let lhs: f64 = op.transfer(&v).iter().zip(&wg).map(|(p, q)| p * q).sum::<f64>() / k as f64;
        // Fine sampling of `v · w∘f` inside each cell.
        let sub = 64;
        let rhs: f64 = (0..k)
            .map(|i| {
                (0..sub).map(|m| w(f.step((i as f64 + (m as f64 + 0.5) / sub as f64) / k as f64))).sum::<f64>() * v[i]
                    / sub as f64
            })
            .sum::<f64>()
            / k as f64;
        assert!((lhs - rhs).abs() < 20.0 / k as f64, "{lhs} vs {rhs}");
        // On the grid the identity is exact.
        let grid: f64 = v.iter().zip(op.koopman(&wg)).map(|(p, q)| p * q).sum::<f64>() / k as f64;
        assert!((lhs - grid).abs() < 1e-12);
    }
}

#[test]
fn conjugation_is_entrywise() {
    let s = ulam_scheme_256();
    let l = &s.sop.op.matrix;
    for j in 0..256 {
        if s.h[j] <= 1e-8 {
            assert_eq!(s.p.matrix.row(j).count(), 0);
            continue;
        }
        for (i, q) in s.p.matrix.row(j) {
            let expect = s.h[i] * l.get(i, j) / s.h[j];
            assert!((q - expect).abs() <= 1e-14 * expect.max(1.0));
        }
    }
    let ones = vec![1.0; 256];
    let p1 = s.p.transfer(&ones);
    for (j, x) in p1.iter().enumerate() {
        if s.h[j] > 0.0 {
            assert!((x - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn scheme_density_vanishes_only_off_the_images() {
    // `F` never lands in the grid cells next to `0` and `1`: landing there
    // needs an orbit close to the critical orbit at return.
    let s = ulam_scheme_256();
    let zeros: Vec<usize> = (0..256).filter(|&i| s.h[i] == 0.0).collect();
    assert!(zeros.iter().all(|&i| !(16..=240).contains(&i)), "{zeros:?}");
    assert!(zeros.len() < 26);
    for &i in &zeros {
        assert_eq!(s.sop.op.transpose().row(i).filter(|&(r, a)| a > 0.0 && s.h[r] > 0.0).count(), 0);
    }
}

#[test]
fn doubling_gap_at_small_grid() {
    let r = spectral_gap(&ulam_map(&map("doubling"), 64).unwrap(), 4);
    assert_eq!(r.method, GapMethod::Dense);
    assert!(r.mixing);
    assert_eq!(r.peripheral, 1);
    assert!((r.eigenvalues[0].0 - 1.0).abs() < 1e-10);
    // The Ulam projection sends dyadic step functions on `k` cells to ones
    // on `k/2` cells, so the discrete operator is nilpotent on mean-zero
    // vectors and `γ̂` collapses to round-off.
    assert!(r.gamma < 1e-2, "{}", r.gamma);
}

#[test]
fn two_cycle_is_flagged() {
    let m = SparseMatrix::from_rows(2, vec![vec![(1, 1.0)], vec![(0, 1.0)]]);
    let op = UlamOperator::from_matrix(OperatorKind::MapTransfer, "2-cycle", m);
    let r = spectral_gap(&op, 2);
    assert_eq!(r.peripheral, 2);
    assert!(!r.mixing);
    assert!((r.gamma - 1.0).abs() < 1e-12);
    // The lazy fallback still finds the fixed vector.
    let d = invariant_density(&op).unwrap();
    assert!(d.converged);
    assert!(l1_distance(&d.density, &[1.0, 1.0]) < 1e-9);
}

#[test]
fn ulam_gap_dense_and_subspace_agree() {
    let op = ulam_map(&map("ulam"), 400).unwrap();
    let dense = spectral_gap(&op, 4);
    let sub = super::spectral::subspace_gap(&op, 4);
    assert_eq!(sub.method, GapMethod::Subspace);
    assert!(dense.mixing && sub.mixing);
    assert!(dense.gamma < 0.9);
    assert!((dense.gamma - sub.gamma).abs() < 1e-6, "{} vs {}", dense.gamma, sub.gamma);
    let big = spectral_gap(&ulam_map(&map("ulam"), 1024).unwrap(), 4);
    assert!(big.mixing && big.gamma < 0.9, "{}", big.gamma);
}

#[test]
fn doubling_renewal_family() {
    let s = scheme("doubling", 3);
    let sop = ulam_scheme(&s, 64).unwrap();
    let h = invariant_density(&sop.op).unwrap().density;
    let p = conjugate(&sop.op, &h).unwrap();
    let fam = renewal_operators(&s, &sop, &p).unwrap();
    assert_eq!(fam.parts.len(), 1);
    assert_eq!(fam.parts[0].0, 3);
    assert!(fam.parts[0].1.max_row_abs_diff(&p.matrix) < 1e-14);
    assert!(fam.completeness_error() <= fam.truncation_mass + 1e-14);
    assert!(fam.p1_residual() < 1e-10);
    let zs = [
        Complex::new(0.0, 0.0),
        Complex::new(1.0, 0.0),
        Complex::from_polar(1.0, PI / 3.0),
        Complex::from_polar(1.0, 2.0 * PI / 3.0),
    ];
    let pts = renewal_spectrum_check(&fam, &zs, 0.01);
    assert!((pts[0].min_singular - 1.0).abs() < 1e-12);
    assert_eq!(pts[1].unit_eigenvalues, Some(1));
    assert!(!pts[1].flagged);
    // `P(z) = z³P` is `−P` here and `P` at the cube root of unity.
    assert!(!pts[2].flagged && pts[2].min_singular > 0.5, "{:?}", pts[2]);
    assert!(pts[3].flagged, "{:?}", pts[3]);
}

#[test]
fn ulam_renewal_family() {
    let s = ulam_scheme_256();
    let fam = renewal_operators(&s.scheme, &s.sop, &s.p).unwrap();
    assert!(fam.completeness_error() <= fam.truncation_mass + 1e-12);
    assert!(fam.p1_residual() < 1e-10);
    assert!(fam.parts.iter().all(|(_, m)| m.vals.iter().all(|&v| v >= 0.0)));
    let fit = fam.norm_decay_fit().unwrap();
    assert!(fit.slope < 0.0, "{fit:?}");
    let zs: Vec<Complex<f64>> = [0.5, 1.0, 2.0, 3.0].iter().map(|&t| Complex::from_polar(1.0, t)).collect();
    for pt in renewal_spectrum_check(&fam, &zs, 0.01) {
        assert!(!pt.flagged && pt.min_singular > 0.01, "{pt:?}");
    }
    assert_eq!(renewal_table(&[]).rows.len(), 0);
}

#[test]
fn doubling_tail_sums() {
    for q0 in [1, 3, 6] {
        let s = scheme("doubling", q0);
        let stats = cell_statistics(&s).unwrap();
        let t = tail_norm_sums(&s, &stats, 1.0);
        assert!((t.first - (q0 as f64 - 1.0)).abs() < 1e-12, "{t:?}");
        assert!(t.second.abs() < 1e-12);
        assert_eq!(t.first_tail, 0.0);
    }
}

#[test]
fn twisted_operator_continuity() {
    let s = ulam_scheme_256();
    let phi = induced_observable(&s.scheme, Observable::parse("x").unwrap()).grid_values(256);
    let l0 = twisted_operator(&s.sop.op, &phi, 0.0).unwrap();
    assert_eq!(l0.distance, 0.0);
    for (p, a) in l0.vals.iter().zip(&s.sop.op.matrix.vals) {
        assert_eq!(*p, Complex::new(*a, 0.0));
    }
    let ts = crate::numeric::log_spaced(1e-3, 1e-1, 9);
    let ds: Vec<f64> = ts.iter().map(|&t| twisted_operator(&s.sop.op, &phi, t).unwrap().distance).collect();
    for &t in &ts {
        let a = twisted_operator(&s.sop.op, &phi, t).unwrap().distance;
        let b = twisted_operator(&s.sop.op, &phi, 2.0 * t).unwrap().distance;
        assert!(b <= 2.0 * a + 1e-12, "{a} {b}");
    }
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    let fit = crate::numeric::linear_fit(&xs, &ys).unwrap();
    assert!(fit.slope >= 0.5, "{fit:?}");
    // A twist by `t` on a density agrees with twisting it first.
    let v: Vec<Complex<f64>> = (0..256).map(|i| Complex::new(1.0 + (i % 3) as f64, 0.0)).collect();
    let lt = twisted_operator(&s.sop.op, &phi, 0.3).unwrap().transfer(&v);
    let pre: Vec<f64> = v.iter().zip(&phi).map(|(z, p)| z.re * (0.3 * p).cos()).collect();
    let re = s.sop.op.transfer(&pre);
    for (a, b) in lt.iter().zip(&re) {
        assert!((a.re - b).abs() < 1e-12);
    }
}

#[test]
fn gordin_on_doubling_cosine() {
    let s = scheme("doubling", 1);
    let sop = ulam_scheme(&s, 512).unwrap();
    let h = invariant_density(&sop.op).unwrap().density;
    let p = conjugate(&sop.op, &h).unwrap();
    let phi = induced_observable(&s, Observable::parse("cos2pi").unwrap()).grid_values(512);
    let g = gordin_solve(&p, &phi).unwrap();
    assert!(g.mean.abs() < 1e-12);
    let chi = g.chi.iter().map(|x| x.abs()).fold(0.0, f64::max);
    // Exact `P cos = 0`; the grid leaves an `O(1/k)` remainder.
    assert!(chi < 1e-2, "{chi}");
    assert!((g.norm_hat - g.norm_phi).abs() < 1e-2);
    assert!(g.relative_residual() < 1e-8);
}

#[test]
fn gordin_on_zero() {
    let s = ulam_scheme_256();
    let g = gordin_solve(&s.p, &vec![0.0; 256]).unwrap();
    assert!(g.converged);
    assert_eq!(g.terms, 0);
    assert!(g.chi.iter().all(|&x| x == 0.0));
    assert_eq!(g.norm_hat, 0.0);
    assert!(gordin_solve(&s.sop.op, &vec![0.0; 256]).is_err());
}

#[test]
fn gordin_kernel_property_on_ulam() {
    let s = ulam_scheme_256();
    let phi = induced_observable(&s.scheme, Observable::parse("x").unwrap().centered(0.5)).grid_values(256);
    let g = gordin_solve(&s.p, &phi).unwrap();
    assert!(g.converged);
    assert!(g.relative_residual() < 1e-8, "{}", g.relative_residual());
}

#[test]
fn doubling_pushdown_is_lebesgue() {
    let s = scheme("doubling", 4);
    let t = pushdown_measure(&s, &vec![1.0; 64], 128, 10_000).unwrap();
    assert!((t.mean_tau - 4.0).abs() < 1e-12);
    for d in &t.density {
        assert!((d - 1.0).abs() < 1e-9, "{d}");
    }
}

#[test]
fn ulam_pushdown_matches_direct_density() {
    let s = ulam_scheme_256();
    let t = pushdown_measure(&s.scheme, &s.h, 2048, 200_000).unwrap();
    let integral: f64 = t.density.iter().sum::<f64>() / 2048.0;
    assert!((integral - 1.0).abs() < 1e-9);
    let direct = invariant_density(&ulam_map(&map("ulam"), 2048).unwrap()).unwrap().density;
    let d = l1_distance(&t.density, &direct);
    assert!(d < 0.1, "{d}");
    assert!((t.cell_mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn bad_inputs_are_rejected() {
    let s = ulam_scheme_256();
    assert!(invariant_density(&s.p).is_err());
    assert!(conjugate(&s.sop.op, &[1.0]).is_err());
    assert!(twisted_operator(&s.p, &vec![0.0; 256], 1.0).is_err());
    assert!(pushdown_measure(&s.scheme, &[], 10, 10).is_err());
}
