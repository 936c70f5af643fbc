use ergolab::inducing::{tau_distribution, Weight};
use ergolab::output::Field;
use ergolab::stats::{
    birkhoff_samples, clt_test, correlation_mc, envelope_check, fclt_paths, green_kubo_sigma, large_deviations,
    Centering, DecayKind, OrbitEnsemble,
};
use ergolab::Observable;

use crate::cache;
use crate::config::Loaded;
use crate::manifest::Run;
use crate::RunError;

/// Margin above the sampled sup norm beyond which tails must vanish.
const TRIVIAL_MARGIN: f64 = 1.01;

/// Birkhoff sums, CLT and functional CLT, correlation decay against the
/// return-time envelope, and large deviation tails.
pub(super) fn run(loaded: &Loaded, run: &mut Run) -> Result<(), RunError> {
    let s = &loaded.config.stats;
    let map = loaded.map.clone();
    let phi = Observable::parse(&s.observable)?;
    let centering = s.mean.map_or(Centering::Estimate, Centering::Given);
    let ens = OrbitEnsemble::new(map, s.n_orbits, s.horizon, s.seed).with_burn_in(s.burn_in);

    let samples = birkhoff_samples(&ens, &phi, centering)?;
    let mean = samples.centering;
    let gk = green_kubo_sigma(&ens.with_horizon(s.gk_horizon), &phi, mean, s.n_max)?;
    run.table("green_kubo.csv", &gk.to_table())?;
    let clt = clt_test(&samples, gk.sigma2, s.ks_threshold);
    run.table("clt.csv", &clt.to_table())?;
    run.check("CLT KS", clt.pass, clt.ks, format!("< {}", s.ks_threshold));
    if clt.degenerate {
        run.warn(format!("sigma2 = {} is degenerate; the functional CLT is skipped", gk.sigma2));
    } else {
        let fclt = fclt_paths(&samples, gk.sigma2)?;
        run.table("fclt.csv", &fclt.to_table())?;
        run.check("FCLT max functional KS", fclt.ks_max < s.ks_threshold, fclt.ks_max, format!("< {}", s.ks_threshold));
    }

    let v = Observable::parse(&s.decay_observable)?;
    let decay = correlation_mc(&ens.with_horizon(s.decay_horizon), &v, &v, s.decay_n_max)?;
    let fit = &decay.fit;
    match fit.kind {
        DecayKind::Exponential | DecayKind::Polynomial => {
            let ok = fit.r2 > s.fit_r2 && fit.rate > 0.0;
            run.check(format!("decay fit {:?}", fit.kind), ok, fit.r2, format!("R2 > {} with positive rate", s.fit_r2));
        }
        DecayKind::TooFast => run.check("decay below floor from lag 1", true, 0.0, "no resolved lag"),
        DecayKind::Insufficient => run.warn(format!("decay: only {} lags above the noise floor, no fit", fit.points)),
    }

    let params = loaded.config.inducing.params();
    let (scheme, hit) = cache::scheme(&run.out, &loaded.map, &params)?;
    run.note_cache(format!("scheme {}", if hit { "hit" } else { "built" }));
    let envelope = if scheme.cells.is_empty() {
        run.warn("no retained cells; the decay envelope is skipped");
        None
    } else {
        let tau = tau_distribution(&scheme, &Weight::Lebesgue);
        let env = envelope_check(&decay, &tau, s.envelope_q, s.envelope_delta);
        run.check("decay below C * envelope", env.holds, env.worst_ratio, "<= 1");
        Some(env)
    };
    let mut table = decay.to_table();
    if let Some(env) = &envelope {
        table.header.push("envelope".into());
        for (i, row) in table.rows.iter_mut().enumerate() {
            // The curve starts at lag 1.
            let e = if i == 0 { f64::NAN } else { env.curve[i - 1].1 };
            row.push(Field::Num(e));
        }
    }
    run.table("decay.csv", &table)?;
    let title = format!("{} on {}", s.decay_observable, loaded.map.name());
    run.write("decay.svg", &decay.plot(&title, envelope.as_ref()))?;

    let n_top = s.ld_n.iter().copied().max().unwrap_or(1);
    let ld = large_deviations(&ens.with_horizon(n_top), &phi, &s.eps, &s.ld_n, Centering::Given(mean))?;
    let mut table = ld[0].to_table();
    for r in &ld[1..] {
        table.rows.extend(r.to_table().rows);
    }
    run.table("ld.csv", &table)?;
    let sup = phi.clone().centered(mean).sup_norm();
    for r in &ld {
        if r.eps > TRIVIAL_MARGIN * sup {
            let total: usize = r.counts.iter().sum();
            run.check(format!("LD eps={} above sup norm", r.eps), r.all_zero(), total as f64, "all counts zero");
        }
    }
    Ok(())
}
