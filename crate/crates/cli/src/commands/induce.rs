use ergolab::critical_orbits::{summability_report, Convergence};
use ergolab::inducing::{cell_statistics, f_condition_sums, scheme_orbits, tau_distribution, Weight};
use ergolab::output::{Field, Table};

use crate::cache;
use crate::config::Loaded;
use crate::manifest::Run;
use crate::RunError;

const F_EXPONENTS: [f64; 3] = [1.0, 2.0, 3.0];

/// Build (or load) the partition and report its structure, the
/// summability series, the binding-level bounds and the sums behind the
/// conditions on `F`.
pub(super) fn run(loaded: &Loaded, run: &mut Run) -> Result<(), RunError> {
    let params = loaded.config.inducing.params();
    let (scheme, hit) = cache::scheme(&run.out, &loaded.map, &params)?;
    run.note_cache(format!("scheme {}", if hit { "hit" } else { "built" }));
    run.table("cells.csv", &scheme.cells_table())?;
    run.table("scheme.csv", &scheme.summary_table())?;

    let p = loaded.config.analysis.p;
    let horizon = 4 * params.tau_max + params.q0;
    let mut summ =
        Table::new(["point", "p", "horizon", "s3", "s4", "tail_ratio3", "tail_ratio4", "verdict3", "verdict4"]);
    for data in scheme_orbits(&scheme, horizon)? {
        let r = summability_report(&data, p, horizon);
        summ.push(vec![
            Field::from(data.point.label()),
            Field::Num(p),
            Field::from(r.horizon),
            Field::Num(r.s3),
            Field::Num(r.s4),
            Field::Num(r.tail_ratio3),
            Field::Num(r.tail_ratio4),
            Field::from(r.verdict3.as_str()),
            Field::from(r.verdict4.as_str()),
        ]);
        let bad = r.verdict3 == Convergence::Diverging || r.verdict4 == Convergence::Diverging;
        run.check(format!("summability c{}", data.point.label()), !bad, r.s4, "series not diverging");
    }
    run.table("summability.csv", &summ)?;

    if scheme.coverage_warning() {
        run.warn(format!(
            "coverage {} is below {}; the truncation ledger holds the missing mass",
            scheme.coverage,
            ergolab::inducing::COVERAGE_WARNING
        ));
    }
    if scheme.cells.is_empty() {
        return Ok(());
    }

    let q0 = params.q0;
    let outside = scheme.cells.iter().filter(|c| c.tau < c.binding || c.tau > q0 + c.binding).count();
    run.check("tau within [b, q0 + b]", outside == 0, outside as f64, "no cell outside");

    let stats = cell_statistics(&scheme)?;
    run.table("propbind.csv", &stats.to_table())?;
    run.check("binding constants finite", stats.c_hat().is_finite(), stats.c_hat(), "finite C_hat");

    let mut f = Table::new(["p", "F1", "F2", "F1_tail", "F2_tail", "F1_bound", "F2_bound"]);
    for p in F_EXPONENTS {
        let s = f_condition_sums(&scheme, &stats, p);
        f.push([s.p, s.f1, s.f2, s.f1_tail, s.f2_tail, s.f1_bound, s.f2_bound].map(Field::Num).to_vec());
        if p == 1.0 {
            run.check("F1 partial sum finite", s.f1.is_finite(), s.f1, "finite");
            run.check("F2 partial sum finite", s.f2.is_finite(), s.f2, "finite");
        }
    }
    run.table("F_conditions.csv", &f)?;

    let tau = tau_distribution(&scheme, &Weight::Lebesgue);
    let mut t = Table::new(["n", "tail"]);
    for (n, v) in tau.tail.iter().enumerate() {
        t.push(vec![Field::from(n), Field::Num(*v)]);
    }
    run.table("tau_tail.csv", &t)?;
    Ok(())
}
