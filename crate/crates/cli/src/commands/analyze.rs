use ergolab::critical_orbits::{exp_recurrence_check, orbit_data};
use ergolab::map_model::{verify_expansion, verify_order, ORDER_DRIFT_LIMIT};
use ergolab::output::{Field, Table};

use crate::config::Loaded;
use crate::manifest::Run;
use crate::RunError;

/// Order checks per critical point, expansion constants and critical-orbit
/// recurrence. A declared order that the ratios contradict aborts the run.
pub(super) fn run(loaded: &Loaded, run: &mut Run) -> Result<(), RunError> {
    let cfg = &loaded.config.analysis;
    let map = &loaded.map;
    for c in map.critical_set() {
        let check = verify_order(map, c, cfg.delta, cfg.order_samples)?;
        run.table(&format!("order_c{}.csv", c.label()), &check.to_table())?;
        run.check(
            format!("order c{}", c.label()),
            true,
            check.max_drift(),
            format!("ratio drift <= {ORDER_DRIFT_LIMIT}"),
        );
    }

    let exp = verify_expansion(map, cfg.delta, cfg.expansion_horizon, cfg.expansion_orbits, loaded.config.stats.seed)?;
    run.table("expansion.csv", &exp.to_table())?;
    run.table("expansion_summary.csv", &exp.summary_table())?;
    if exp.inconclusive {
        run.warn("expansion: no orbit segment avoided the critical neighbourhoods");
    } else {
        run.check("expansion rate", exp.lambda_delta > 0.0, exp.lambda_delta, "> 0");
    }

    let mut rec = Table::new(["point", "order", "rate", "constant", "residual", "holds"]);
    for c in map.critical_set() {
        let data = orbit_data(map, c, cfg.orbit_horizon)?;
        run.table(&format!("orbit_c{}.csv", c.label()), &data.to_table(cfg.p))?;
        if c.is_singular() {
            continue;
        }
        let fit = exp_recurrence_check(&data)?;
        rec.push(vec![
            Field::from(c.label()),
            Field::Num(c.order),
            Field::Num(fit.rate),
            Field::Num(fit.constant),
            Field::Num(fit.residual),
            Field::Text(fit.holds.to_string()),
        ]);
        run.check(format!("recurrence c{}", c.label()), fit.holds, fit.rate, "d_n E_n >= C e^{cn} with c > 0");
    }
    if !rec.is_empty() {
        run.table("recurrence.csv", &rec)?;
    }
    Ok(())
}
