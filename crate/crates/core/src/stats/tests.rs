use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::inducing::{build_partition, tau_distribution, SchemeParams, Weight};
use crate::map_model::{builtin_map, BuiltinParams, Observable, PiecewiseMap, VectorObservable};

fn map(name: &str) -> PiecewiseMap {
    builtin_map(name, &BuiltinParams::default()).unwrap()
}

fn obs(s: &str) -> Observable {
    Observable::parse(s).unwrap()
}

#[test]
fn zero_observable_gives_zero_sums() {
    let ens = OrbitEnsemble::new(map("ulam"), 200, 300, 1);
    let s = birkhoff_samples(&ens, &Observable::constant(0.0), Centering::Estimate).unwrap();
    assert!(s.samples.iter().all(|&x| x == 0.0));
    assert!(s.paths.iter().all(|p| p.max == 0.0 && p.integral == 0.0));
}

#[test]
fn single_step_samples_are_centred_values() {
    let ens = OrbitEnsemble::new(map("doubling"), 20_000, 1, 5);
    let s = birkhoff_samples(&ens, &obs("x"), Centering::Given(0.5)).unwrap();
    let firsts: Vec<f64> = (0..20_000).map(|i| ens.orbit(i).next().unwrap() - 0.5).collect();
    assert_eq!(s.samples, firsts);
    let mean = s.samples.iter().sum::<f64>() / 20_000.0;
    assert!(mean.abs() < 3.0 * (1.0f64 / 12.0 / 20_000.0).sqrt(), "{mean}");
}

#[test]
fn doubling_sum_variance() {
    let ens = OrbitEnsemble::new(map("doubling"), 5_000, 2_000, 2);
    let s = birkhoff_samples(&ens, &obs("x"), Centering::Estimate).unwrap();
    let v = batch_variance(&s);
    assert!((v - 0.25).abs() < 0.025, "{v}");
}

#[test]
fn green_kubo_oracles_on_doubling() {
    let ens = OrbitEnsemble::new(map("doubling"), 2_000, 2_000, 3);
    let gk = green_kubo_sigma(&ens, &obs("x"), 0.5, 30).unwrap();
    assert!((gk.sigma2 - 0.25).abs() < 0.005, "{}", gk.sigma2);
    assert!(gk.summable);
    for (n, c) in gk.autocov.iter().enumerate().take(6) {
        let exact = 2f64.powi(-(n as i32)) / 12.0;
        assert!((c - exact).abs() < 4.0 * gk.stderr[n] + 1e-12, "lag {n}: {c} vs {exact}");
    }
    let gk = green_kubo_sigma(&ens, &obs("cos2pi"), 0.0, 30).unwrap();
    assert!((gk.sigma2 - 0.5).abs() < 0.01, "{}", gk.sigma2);
    assert_eq!(gk.to_table().len(), 31);
}

#[test]
fn operator_green_kubo_on_doubling() {
    // The grid forgets correlations after log2(k) steps.
    let k = 1 << 16;
    let op = crate::transfer::ulam_map(&map("doubling"), k).unwrap();
    let h = vec![1.0; k];
    let gk = green_kubo_operator(&op, &h, &cell_averages(&obs("x"), k), 40).unwrap();
    assert!((gk.sigma2 - 0.25).abs() < 1e-5, "{}", gk.sigma2);
    let gk = green_kubo_operator(&op, &h, &cell_averages(&obs("cos2pi"), k), 10).unwrap();
    assert!((gk.sigma2 - 0.5).abs() < 1e-5, "{}", gk.sigma2);
}

#[test]
fn coboundary_is_degenerate() {
    // φ = ψ∘f − ψ with ψ(x) = x.
    let f = map("ulam");
    let g = f.clone();
    let phi = Observable::custom("cob", move |x| g.step(x) - x);
    let ens = OrbitEnsemble::new(f, 2_000, 2_000, 4);
    let mean = ens.mean(&phi);
    let gk = green_kubo_sigma(&ens, &phi, mean, 30).unwrap();
    assert!(gk.sigma2.abs() < 0.01, "{}", gk.sigma2);
    let s = birkhoff_samples(&ens, &phi, Centering::Given(mean)).unwrap();
    // |φ_n| ≤ 2 sup|ψ|, so the normalized sums shrink like n^{-1/2}.
    assert!(s.samples.iter().all(|x| x.abs() <= 2.0 / (2_000f64).sqrt() + 1e-9));
    let r = clt_test(&s, 0.0, 0.05);
    assert!(r.degenerate && r.pass && r.ks.is_nan());
}

fn normal_samples(n: usize, sigma: f64, seed: u64) -> BirkhoffSamples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            sigma * (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect();
    let paths = samples.iter().map(|&x| PathStats { end: x, max: x.max(0.0), integral: 0.0 }).collect();
    BirkhoffSamples { n: 1, centering: 0.0, samples, paths }
}

#[test]
fn ks_null_distribution() {
    let n = 2_000;
    let bound = 1.36 / (n as f64).sqrt();
    let passes = (0..60).filter(|&seed| clt_test(&normal_samples(n, 1.5, seed), 2.25, bound).pass).count();
    // 95% nominal coverage; 60 trials leave this at least seven sigma wide.
    assert!(passes >= 50, "{passes}");
    let r = clt_test(&normal_samples(n, 1.5, 0), 2.25, bound);
    assert!((0.0..=1.0).contains(&r.ks));
    assert!(r.skewness.abs() < 0.2 && r.excess_kurtosis.abs() < 0.4);
    // The wrong variance is rejected.
    assert!(!clt_test(&normal_samples(n, 1.5, 0), 1.0, bound).pass);
}

#[test]
fn clt_on_doubling() {
    let ens = OrbitEnsemble::new(map("doubling"), 4_000, 2_000, 6);
    let s = birkhoff_samples(&ens, &obs("x"), Centering::Given(0.5)).unwrap();
    let r = clt_test(&s, 0.25, 0.05);
    assert!(r.pass, "{r:?}");
    let f = fclt_paths(&s, 0.25).unwrap();
    assert_eq!(f.ks_end, r.ks);
    assert!(f.ks_max < 0.06 && f.ks_integral < 0.05, "{f:?}");
    assert!(s.paths.iter().all(|p| p.max >= 0.0));
    assert!(fclt_paths(&s, 0.0).is_err());
}

#[test]
fn scaling_by_two_is_exact() {
    let ens = OrbitEnsemble::new(map("ulam"), 500, 1_000, 8);
    let (a, b) = (obs("x"), obs("x").scaled(2.0));
    let sa = birkhoff_samples(&ens, &a, Centering::Estimate).unwrap();
    let sb = birkhoff_samples(&ens, &b, Centering::Estimate).unwrap();
    assert!(sa.samples.iter().zip(&sb.samples).all(|(x, y)| 2.0 * x == *y));
    let ga = green_kubo_sigma(&ens, &a, sa.centering, 20).unwrap();
    let gb = green_kubo_sigma(&ens, &b, sb.centering, 20).unwrap();
    assert_eq!(4.0 * ga.sigma2, gb.sigma2);
    let (ra, rb) = (clt_test(&sa, ga.sigma2, 0.05), clt_test(&sb, gb.sigma2, 0.05));
    assert_eq!(ra.ks, rb.ks);
    assert_eq!(ra.pass, rb.pass);
    assert_eq!(4.0 * ra.sigma2_batch, rb.sigma2_batch);
}

#[test]
fn results_are_reproducible() {
    let ens = OrbitEnsemble::new(map("cusp"), 300, 500, 11);
    let run = || {
        let s = birkhoff_samples(&ens, &obs("x"), Centering::Estimate).unwrap();
        let g = green_kubo_sigma(&ens, &obs("x"), s.centering, 10).unwrap();
        (s.samples, g.autocov)
    };
    assert_eq!(run(), run());
    #[cfg(feature = "parallel")]
    {
        let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        let one = pool(1).install(run);
        let three = pool(3).install(run);
        assert_eq!(one, three);
    }
}

#[test]
fn lag_zero_is_the_covariance() {
    let ens = OrbitEnsemble::new(map("doubling"), 1_000, 500, 12);
    let r = correlation_mc(&ens, &obs("x"), &obs("x^2"), 5).unwrap();
    // Cov(x, x²) = 1/4 − 1/6 under Lebesgue.
    assert!((r.rho[0] - 1.0 / 12.0).abs() < 4.0 * r.stderr[0], "{}", r.rho[0]);
    let c = correlation_mc(&ens, &obs("cos2pi"), &obs("cos2pi"), 3).unwrap();
    assert!(c.rho[1].abs() < 4.0 * c.stderr[1], "{} ± {}", c.rho[1], c.stderr[1]);
    assert_eq!(c.to_table().len(), 4);
}

#[test]
fn ulam_indicator_correlations_match_the_eigenfunction() {
    // 1_{[0,3/4)} is conjugate to 1_{[0,2/3)} under the tent map, an
    // eigenfunction with eigenvalue −1/2 after centring.
    let ens = OrbitEnsemble::new(map("ulam"), 2_000, 2_000, 13);
    let v = obs("indicator(0,0.75)");
    let r = correlation_mc(&ens, &v, &v, 10).unwrap();
    for n in 0..=10 {
        let exact = 2.0 / 9.0 * (-0.5f64).powi(n as i32);
        assert!((r.rho[n] - exact).abs() < 4.0 * r.stderr[n], "lag {n}: {} vs {exact}", r.rho[n]);
    }
}

#[test]
fn monte_carlo_and_operator_agree() {
    let n_max = 20;
    // Doubling: the Ulam operator is exact on step functions up to the
    // log2(k) steps after which it forgets.
    let ens = OrbitEnsemble::new(map("doubling"), 2_000, 2_000, 14);
    let v = obs("x");
    let mc = correlation_mc(&ens, &v, &v, n_max).unwrap();
    let op = correlation_operator(&map("doubling"), 1 << 16, &v, &v, n_max).unwrap();
    for n in 0..=n_max {
        assert!((mc.rho[n] - op.rho[n]).abs() < 3.0 * mc.stderr[n], "lag {n}");
    }
    // Ulam: the grid density converges like k^{-1/2} near the endpoints, so
    // the operator side carries its grid-halving error estimate.
    let ens = OrbitEnsemble::new(map("ulam"), 2_000, 2_000, 15);
    let v = obs("indicator(0,0.75)");
    let mc = correlation_mc(&ens, &v, &v, n_max).unwrap();
    let op = correlation_operator(&map("ulam"), 4096, &v, &v, n_max).unwrap();
    for n in 0..=n_max {
        let se = mc.stderr[n].hypot(op.floor[n] / 3.0);
        assert!((mc.rho[n] - op.rho[n]).abs() < 3.0 * se, "lag {n}");
    }
}

#[test]
fn synthetic_decay_fits() {
    let ns: Vec<usize> = (0..=30).collect();
    let zero = vec![0.0; 31];
    let e: Vec<f64> = ns.iter().map(|&n| (-0.7 * n as f64).exp()).collect();
    let f = decay_fit(&ns, &e, &zero);
    assert_eq!(f.kind, DecayKind::Exponential);
    assert!((f.rate - 0.7).abs() < 1e-9 && f.r2 > 1.0 - 1e-12);
    let p: Vec<f64> = ns.iter().map(|&n| if n == 0 { 1.0 } else { (n as f64).powi(-2) }).collect();
    let f = decay_fit(&ns, &p, &zero);
    assert_eq!(f.kind, DecayKind::Polynomial);
    assert!((f.rate - 2.0).abs() < 1e-9);
    let f = decay_fit(&ns, &e, &vec![1.0; 31]);
    assert_eq!(f.kind, DecayKind::TooFast);
    let few: Vec<f64> = e.iter().map(|x| x * 1e-3).collect();
    let floor = vec![1e-6; 31];
    assert_eq!(decay_fit(&ns, &few, &floor).kind, DecayKind::Insufficient);
}

#[test]
fn envelope_bounds_ulam_correlations() {
    let f = map("ulam");
    let scheme = build_partition(&f, &SchemeParams::default()).unwrap();
    let tau = tau_distribution(&scheme, &Weight::Lebesgue);
    let ens = OrbitEnsemble::new(f, 2_000, 2_000, 16);
    let v = obs("indicator(0,0.75)");
    let r = correlation_mc(&ens, &v, &v, 20).unwrap();
    let env = envelope_check(&r, &tau, 2.0, 0.5);
    assert!(env.holds, "{env:?}");
    assert!(env.constant > 0.0 && env.curve.len() == 20);
    // The envelope itself is nonincreasing once the tail term dominates.
    assert!(envelope(&tau, 40, 2.0, 0.5) < envelope(&tau, 20, 2.0, 0.5));
    assert!(r.plot("ulam", Some(&env)).contains("<svg"));
}

#[test]
fn large_deviation_trivial_regimes() {
    let ens = OrbitEnsemble::new(map("doubling"), 10_000, 50, 17);
    let v = obs("x");
    let r = large_deviation(&ens, &v, 0.51, &[1, 10, 50], Centering::Given(0.5)).unwrap();
    assert!(r.all_zero());
    assert!(r.upper.iter().all(|&u| u == 3.0 / 10_000.0));
    // n = 1: μ(|x − 1/2| ≥ 0.3) = 0.4.
    let r = large_deviation(&ens, &v, 0.3, &[1], Centering::Given(0.5)).unwrap();
    let se = (0.4f64 * 0.6 / 10_000.0).sqrt();
    assert!((r.prob[0] - 0.4).abs() < 4.0 * se, "{}", r.prob[0]);
    let many = large_deviations(&ens, &v, &[0.05, 0.1, 0.2], &[5, 20, 50], Centering::Given(0.5)).unwrap();
    for g in 0..3 {
        assert!(many[0].prob[g] >= many[1].prob[g] && many[1].prob[g] >= many[2].prob[g]);
    }
    assert!(large_deviation(&ens, &v, 0.0, &[1], Centering::None).is_err());
    assert!(large_deviation(&ens, &v, 0.1, &[51], Centering::None).is_err());
}

#[test]
fn doubling_tails_decay_exponentially() {
    let ens = OrbitEnsemble::new(map("doubling"), 20_000, 400, 18);
    let r = large_deviation(&ens, &obs("x"), 0.1, &[50, 100, 150, 200, 250], Centering::Given(0.5)).unwrap();
    let fit = r.exponential.unwrap();
    assert!(fit.slope < 0.0 && fit.r2 > 0.9, "{fit:?} {:?}", r.counts);
    assert_eq!(r.to_table().len(), 5);
}

#[test]
fn tail_exponent_of_constant_return_time() {
    let s = build_partition(&map("doubling"), &SchemeParams { q0: 4, ..Default::default() }).unwrap();
    let tau = tau_distribution(&s, &Weight::Lebesgue);
    assert_eq!(tail_exponent(&tau), Some(f64::INFINITY));
}

#[test]
fn vector_covariance_is_symmetric_and_psd() {
    let ens = OrbitEnsemble::new(map("doubling"), 1_000, 1_000, 19);
    let phi = VectorObservable(vec![obs("x"), obs("cos2pi"), obs("sin2pi")]);
    let c = covariance_matrix(&ens, &phi, 20).unwrap();
    assert!(c.asymmetry < 1e-12);
    assert!(c.is_psd(1e-3), "{}", c.min_eigenvalue);
    // Diagonal entries are the Green–Kubo variances.
    assert!((c.matrix[0] - 0.25).abs() < 0.01);
    assert!((c.matrix[4] - 0.5).abs() < 0.02);
}

#[test]
fn batch_means_of_a_long_orbit() {
    let ens = OrbitEnsemble::new(map("doubling"), 1, 400_000, 20);
    let xs: Vec<f64> = ens.orbit(0).take(400_000).map(|x| x - 0.5).collect();
    let v = batch_means_variance(&xs, 1_000);
    assert!((v - 0.25).abs() < 0.05, "{v}");
    assert!(batch_means_variance(&xs[..10], 1_000).is_nan());
}
