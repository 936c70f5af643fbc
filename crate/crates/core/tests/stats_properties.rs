use ergolab::map_model::{builtin_map, BuiltinParams, Observable};
use ergolab::stats::{
    birkhoff_samples, clt_test, correlation_mc, green_kubo_sigma, large_deviations, Centering, OrbitEnsemble,
};
use proptest::prelude::*;

const NAMES: [&str; 3] = ["doubling", "ulam", "cusp"];
const OBSERVABLES: [&str; 4] = ["x", "cos2pi", "sin2pi(2)", "indicator(0.2,0.7)"];

fn ensemble(i: usize, n_orbits: usize, horizon: usize, seed: u64) -> OrbitEnsemble {
    let map = builtin_map(NAMES[i], &BuiltinParams::default()).unwrap();
    OrbitEnsemble::new(map, n_orbits, horizon, seed).with_burn_in(100)
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn worker_count_does_not_change_results(i in 0usize..3, o in 0usize..4, seed in any::<u64>()) {
        let ens = ensemble(i, 64, 200, seed);
        let phi = Observable::parse(OBSERVABLES[o]).unwrap();
        let run = |t| pool(t).install(|| birkhoff_samples(&ens, &phi, Centering::Estimate).unwrap());
        let (a, b) = (run(1), run(3));
        prop_assert_eq!(a.centering.to_bits(), b.centering.to_bits());
        prop_assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn doubling_phi_scales_sigma2_by_four(i in 0usize..3, o in 0usize..4, seed in any::<u64>()) {
        let ens = ensemble(i, 200, 400, seed);
        let phi = Observable::parse(OBSERVABLES[o]).unwrap();
        let mean = ens.mean(&phi);
        let one = green_kubo_sigma(&ens, &phi, mean, 10).unwrap();
        let two = green_kubo_sigma(&ens, &phi.clone().scaled(2.0), 2.0 * mean, 10).unwrap();
        prop_assert_eq!(two.sigma2, 4.0 * one.sigma2);
        let s1 = birkhoff_samples(&ens, &phi, Centering::Given(mean)).unwrap();
        let s2 = birkhoff_samples(&ens, &phi.scaled(2.0), Centering::Given(2.0 * mean)).unwrap();
        let (c1, c2) = (clt_test(&s1, one.sigma2, 0.05), clt_test(&s2, two.sigma2, 0.05));
        prop_assert_eq!(c1.ks, c2.ks);
        prop_assert_eq!(c1.pass, c2.pass);
    }

    #[test]
    fn estimates_stay_in_range(i in 0usize..3, o in 0usize..4, seed in any::<u64>()) {
        let ens = ensemble(i, 100, 300, seed);
        let phi = Observable::parse(OBSERVABLES[o]).unwrap();
        let mean = ens.mean(&phi);
        let gk = green_kubo_sigma(&ens, &phi, mean, 10).unwrap();
        prop_assert!(gk.sigma2 >= 0.0);
        let samples = birkhoff_samples(&ens, &phi, Centering::Given(mean)).unwrap();
        let clt = clt_test(&samples, gk.sigma2, 0.05);
        prop_assert!((0.0..=1.0).contains(&clt.ks));
    }

    #[test]
    fn correlations_are_bounded(i in 0usize..3, o in 0usize..4, seed in any::<u64>()) {
        let ens = ensemble(i, 100, 300, seed);
        let v = Observable::parse(OBSERVABLES[o]).unwrap();
        let r = correlation_mc(&ens, &v, &v, 10).unwrap();
        let sup = v.sup_norm();
        for (rho, se) in r.rho.iter().zip(&r.stderr) {
            prop_assert!(rho.abs() <= sup * sup + 3.0 * se);
        }
    }

    #[test]
    fn tails_are_probabilities_falling_in_eps(i in 0usize..3, seed in any::<u64>(), mut eps in prop::collection::vec(0.001f64..0.6, 1..6)) {
        let ens = ensemble(i, 200, 100, seed);
        eps.sort_by(f64::total_cmp);
        let phi = Observable::parse("x").unwrap();
        let reports = large_deviations(&ens, &phi, &eps, &[1, 10, 50, 100], Centering::Given(0.5)).unwrap();
        for r in &reports {
            prop_assert!(r.prob.iter().all(|p| (0.0..=1.0).contains(p)));
        }
        for w in reports.windows(2) {
            prop_assert!(w[0].prob.iter().zip(&w[1].prob).all(|(a, b)| b <= a));
        }
    }
}
