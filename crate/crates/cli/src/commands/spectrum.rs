use ergolab::inducing::induced_observable;
use ergolab::output::{Field, Table};
use ergolab::transfer::{
    conjugate, density_table, gordin_solve, grid_midpoints, invariant_density, l1_distance, l1_distance_to,
    pushdown_measure, renewal_operators, renewal_spectrum_check, renewal_table, spectral_gap, twisted_operator,
    ulam_map, ulam_scheme, Complex,
};
use ergolab::Observable;

use super::{reference_density, reference_tolerance};
use crate::cache;
use crate::config::Loaded;
use crate::manifest::Run;
use crate::RunError;

const GAP_LIMIT: f64 = 0.9;
const GORDIN_LIMIT: f64 = 1e-8;
const PUSHDOWN_LIMIT: f64 = 0.1;

/// Ulam operators of `f` and of the induced map, their densities and
/// spectra, the renewal family and the coboundary decomposition.
pub(super) fn run(loaded: &Loaded, run: &mut Run) -> Result<(), RunError> {
    let o = &loaded.config.operator;
    let map = &loaded.map;
    let builtin = loaded.builtin();

    let op = ulam_map(map, o.k)?;
    if o.k <= o.export_limit {
        run.table("matrix_L_f.csv", &op.matrix.triplets_table())?;
    }
    let dens = invariant_density(&op)?;
    let mut table = density_table(&dens.density);
    if let Some((g, _)) = reference_density(builtin) {
        table.header.push("reference".into());
        for (row, x) in table.rows.iter_mut().zip(grid_midpoints(o.k)) {
            row.push(Field::Num(g(x)));
        }
    }
    run.table("density.csv", &table)?;
    run.table("density_summary.csv", &dens.summary_table())?;
    run.check("L_f fixed vector converged", dens.converged, dens.residual, "power iteration converged");
    if let Some(w) = &dens.warning {
        run.warn(format!("L_f: {w}"));
    }
    if let Some((g, g_int)) = reference_density(builtin) {
        let tol = reference_tolerance(builtin);
        let d = l1_distance_to(&dens.density, g, g_int);
        run.check("density L1 to reference", d < tol, d, format!("< {tol}"));
    }
    let gap = spectral_gap(&op, o.n_eigs);
    run.table("spectrum_L_f.csv", &gap.to_table())?;
    run.check("L_f eigenvalue 1 simple", gap.peripheral == 1, gap.peripheral as f64, "exactly one unit eigenvalue");
    run.check("L_f gap", gap.gamma < GAP_LIMIT, gap.gamma, format!("< {GAP_LIMIT}"));

    let params = loaded.config.inducing.params();
    let (scheme, hit) = cache::scheme(&run.out, map, &params)?;
    run.note_cache(format!("scheme {}", if hit { "hit" } else { "built" }));
    if scheme.coverage_warning() {
        run.warn(format!("coverage {} too low for the induced operators; skipped", scheme.coverage));
        return Ok(());
    }

    let sop = ulam_scheme(&scheme, o.k_scheme)?;
    let h_f = invariant_density(&sop.op)?;
    run.table("density_F.csv", &density_table(&h_f.density))?;
    run.table("density_F_summary.csv", &h_f.summary_table())?;
    if let Some(w) = &h_f.warning {
        run.warn(format!("L_F: {w}"));
    }
    let p = conjugate(&sop.op, &h_f.density)?;
    let gap_f = spectral_gap(&p, o.n_eigs);
    run.table("spectrum_P_F.csv", &gap_f.to_table())?;
    run.check("P_F eigenvalue 1 simple", gap_f.peripheral == 1, gap_f.peripheral as f64, "exactly one unit eigenvalue");
    run.check("P_F gap", gap_f.gamma < GAP_LIMIT, gap_f.gamma, format!("< {GAP_LIMIT}"));

    let fam = renewal_operators(&scheme, &sop, &p)?;
    let mut zs = vec![Complex::new(1.0, 0.0)];
    zs.extend(o.thetas.iter().map(|&t| Complex::from_polar(1.0, t)));
    let points = renewal_spectrum_check(&fam, &zs, o.singular_tol);
    run.table("renewal.csv", &renewal_table(&points))?;
    run.table("renewal_norms.csv", &fam.norms_table())?;
    for pt in &points {
        match pt.unit_eigenvalues {
            Some(ones) => run.check(
                "renewal z=1 unit eigenvalue simple",
                !pt.flagged,
                ones as f64,
                "one isolated unit eigenvalue",
            ),
            None => {
                let theta = pt.im.atan2(pt.re);
                let crit = format!("min singular value >= {}", o.singular_tol);
                run.check(format!("renewal theta={theta}"), !pt.flagged, pt.min_singular, crit);
            }
        }
    }
    let completeness = fam.completeness_error();
    let ledger = fam.truncation_mass;
    run.check(
        "renewal completeness",
        completeness <= ledger + 1e-12,
        completeness,
        format!("<= truncation ledger {ledger}"),
    );

    let stats = &loaded.config.stats;
    let phi = Observable::parse(&stats.observable)?.centered(stats.mean.unwrap_or(0.0));
    let phi_grid = induced_observable(&scheme, phi).grid_values(o.k_scheme);
    let g = gordin_solve(&p, &phi_grid)?;
    let mut gt = Table::new(["quantity", "value"]);
    for (k, v) in [
        ("mean", g.mean),
        ("terms", g.terms as f64),
        ("residual", g.residual),
        ("norm_hat", g.norm_hat),
        ("norm_phi", g.norm_phi),
        ("relative_residual", g.relative_residual()),
    ] {
        gt.push(vec![Field::from(k), Field::Num(v)]);
    }
    run.table("gordin.csv", &gt)?;
    run.check(
        "Gordin kernel",
        g.converged && g.relative_residual() <= GORDIN_LIMIT,
        g.relative_residual(),
        format!("<= {GORDIN_LIMIT}"),
    );

    let mut tt = Table::new(["t", "distance"]);
    for &t in &o.twists {
        tt.push(vec![Field::Num(t), Field::Num(twisted_operator(&sop.op, &phi_grid, t)?.distance)]);
    }
    run.table("twisted.csv", &tt)?;

    let tower = pushdown_measure(&scheme, &h_f.density, o.pushdown_k, o.pushdown_budget)?;
    let direct = if o.pushdown_k == o.k {
        dens.density.clone()
    } else {
        invariant_density(&ulam_map(map, o.pushdown_k)?)?.density
    };
    let mut pt = density_table(&tower.density);
    pt.header.push("direct".into());
    for (row, d) in pt.rows.iter_mut().zip(&direct) {
        row.push(Field::Num(*d));
    }
    run.table("pushdown.csv", &pt)?;
    let d = l1_distance(&tower.density, &direct);
    run.check("pushdown matches L_f density", d < PUSHDOWN_LIMIT, d, format!("< {PUSHDOWN_LIMIT}"));
    Ok(())
}
