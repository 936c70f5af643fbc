use std::f64::consts::TAU;
use std::sync::LazyLock;

use ergolab::inducing::{build_partition, induced_observable, SchemeParams};
use ergolab::map_model::{builtin_map, BuiltinParams, Observable};
use ergolab::transfer::{conjugate, gordin_solve, invariant_density, ulam_map, ulam_scheme, UlamOperator};
use ergolab::PiecewiseMap;
use proptest::prelude::*;

const NAMES: [&str; 3] = ["doubling", "ulam", "cusp"];

fn map(i: usize) -> PiecewiseMap {
    builtin_map(NAMES[i], &BuiltinParams::default()).unwrap()
}

static OPS: LazyLock<Vec<UlamOperator>> = LazyLock::new(|| (0..3).map(|i| ulam_map(&map(i), 512).unwrap()).collect());

/// `∫ g(T x) dx` over `[a, b]` by the midpoint rule.
fn composed_integral(map: &PiecewiseMap, g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| g(map.step(a + (i as f64 + 0.5) * h))).sum::<f64>() * h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rows_are_stochastic(i in 0usize..3, k in 2usize..700) {
        let op = ulam_map(&map(i), k).unwrap();
        prop_assert!(op.empty_rows.is_empty());
        prop_assert!(op.max_row_sum_error() <= 1e-12);
        prop_assert!(op.min_entry() >= 0.0);
    }

    #[test]
    fn iteration_preserves_mass(i in 0usize..3, v in prop::collection::vec(0.0f64..1.0, 512), n in 1usize..50) {
        let op = &OPS[i];
        let mass: f64 = v.iter().sum();
        let mut w = v.clone();
        for _ in 0..n {
            w = op.transfer(&w);
        }
        let after: f64 = w.iter().sum();
        prop_assert!((after - mass).abs() <= 1e-9 * mass.max(1.0));
    }

    #[test]
    fn transfer_is_dual_to_composition(i in 0usize..3, v in prop::collection::vec(-1.0f64..1.0, 512), m in 1u32..4) {
        let (op, f) = (&OPS[i], map(i));
        let k = op.k;
        let g = |x: f64| (TAU * m as f64 * x).cos();
        let lv = op.transfer(&v);
        let lhs: f64 = lv.iter().zip(op.midpoints()).map(|(a, x)| a * g(x)).sum::<f64>() / k as f64;
        let rhs: f64 = (0..k)
            .map(|j| v[j] * composed_integral(&f, g, j as f64 / k as f64, (j + 1) as f64 / k as f64, 16))
            .sum();
        // Cell averaging of g costs its Lipschitz constant over the grid size.
        let tol = 2.0 * TAU * m as f64 / k as f64;
        prop_assert!((lhs - rhs).abs() <= tol, "{} vs {}", lhs, rhs);
    }
}

#[test]
fn conjugation_is_entrywise() {
    for op in OPS.iter() {
        let h = invariant_density(op).unwrap().density;
        let p = conjugate(op, &h).unwrap();
        for i in 0..op.k {
            for (j, m) in op.matrix.row(i) {
                if h[i] > 1e-8 && h[j] > 1e-8 {
                    let want = h[i] * m / h[j];
                    assert!((p.matrix.get(j, i) - want).abs() <= 1e-12 * want.max(1.0));
                }
            }
        }
        // P fixes constants.
        let one = p.transfer(&vec![1.0; op.k]);
        for (j, v) in one.iter().enumerate() {
            if h[j] > 1e-8 {
                assert!((v - 1.0).abs() < 1e-9, "row {j}: {v}");
            }
        }
    }
}

#[test]
fn densities_are_probability_densities() {
    for op in OPS.iter() {
        let r = invariant_density(op).unwrap();
        assert!(r.density.iter().all(|h| *h >= 0.0));
        let mass: f64 = r.density.iter().sum::<f64>() / op.k as f64;
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((r.eigenvalue - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn gordin_kernel_on_doubling_schemes(q0 in 2usize..7, m in 1u32..5) {
        let s = build_partition(&map(0), &SchemeParams { q0, ..SchemeParams::default() }).unwrap();
        let sop = ulam_scheme(&s, 256).unwrap();
        let h = invariant_density(&sop.op).unwrap().density;
        let p = conjugate(&sop.op, &h).unwrap();
        let phi = Observable::parse(&format!("cos2pi({m})")).unwrap();
        let g = gordin_solve(&p, &induced_observable(&s, phi).grid_values(256)).unwrap();
        prop_assert!(g.converged);
        prop_assert!(g.relative_residual() <= 1e-8, "{}", g.relative_residual());
    }
}
