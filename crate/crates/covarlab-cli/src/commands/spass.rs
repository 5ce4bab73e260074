use serde::Serialize;
use serde_json::json;

use covarlab::geometry::{CauchyClass, Region};
use covarlab::lct::{diagonal_kinematic_check, diagonal_theory, kg_theory, mu_monotone, rce_factorization_check, spass_demo as demo, Catalog, DiagonalSpec};
use covarlab::solver::Metric;

use crate::config::ExperimentConfig;
use crate::report::{Check, Recorder};
use crate::RunError;

#[derive(Serialize)]
struct TableRow {
    n_x: usize,
    mass: f64,
    spacetime: String,
    mu: usize,
    dim_a: usize,
    dim_diagonal: usize,
    dim_power: usize,
    zeta1_iso: bool,
    zeta2_iso: bool,
}

pub fn spass_demo(cfg: &ExperimentConfig, scale: usize, rec: &mut Recorder) -> Result<(), RunError> {
    let t = &cfg.tolerances;
    let spec = DiagonalSpec { lambda_compact: cfg.lambda_compact };
    let lc = spec.lambda_compact;
    let mut table = Vec::new();
    let mut patterns = Vec::new();
    for &r in &cfg.resolutions {
        let n_x = cfg.catalog_n_x * r * scale;
        let cat = Catalog::standard(n_x)?;
        for &mass in &cfg.masses {
            let tag = format!("n={n_x} m={mass}");
            let rep = rec.timed(format!("spass {tag}"), || demo(&cat, mass, spec))?;
            let mut pattern = Vec::new();
            let mut pattern_ok = rep.failure_exhibited;
            let mut dims_ok = true;
            let mut mu_ok = true;
            for row in &rep.rows {
                let (_, m) = cat.spacetimes.iter().find(|(n, _)| *n == row.spacetime).expect("catalog entry");
                let classes = m.cauchy_classification();
                let noncompact = classes.iter().all(|&c| c == CauchyClass::Noncompact);
                pattern_ok &= row.zeta1_iso == noncompact && row.zeta2_iso == !noncompact;
                pattern.push((row.zeta1_iso, row.zeta2_iso));
                let lattice: usize = m.components.iter().map(|c| 2 * c.n_x).sum();
                let mu = if noncompact { 1 } else { lc };
                mu_ok &= row.mu == mu;
                dims_ok &= row.dim_a == lattice && row.dim_diagonal == mu * lattice && row.dim_power == lc * lattice;
                table.push(TableRow {
                    n_x,
                    mass,
                    spacetime: row.spacetime.clone(),
                    mu: row.mu,
                    dim_a: row.dim_a,
                    dim_diagonal: row.dim_diagonal,
                    dim_power: row.dim_power,
                    zeta1_iso: row.zeta1_iso,
                    zeta2_iso: row.zeta2_iso,
                });
            }
            patterns.push(pattern.clone());
            let rows_json = serde_json::to_value(&rep.rows).expect("rows serialise");
            rec.push(Check::new(
                format!("spass-pattern {tag}"),
                pattern_ok,
                json!({ "rows": rows_json, "failure_exhibited": rep.failure_exhibited }),
                || "ζ₁/ζ₂ iso pattern differs from (noncompact: iso/non, compact: non/iso); see spass_table.csv".into(),
            ));
            rec.push(Check::new(
                format!("spass-dimensions {tag}"),
                dims_ok,
                json!({ "lambda_compact": lc }),
                || "dimensions differ from 2·Σn_x times the multiplicity; see spass_table.csv".into(),
            ));
            let embeddings: Vec<_> = cat.embeddings.iter().map(|(_, e)| e.clone()).collect();
            let monotone = mu_monotone(spec, &embeddings);
            rec.push(Check::new(
                format!("spass-mu {tag}"),
                mu_ok && monotone,
                json!({ "mu": rep.rows.iter().map(|r| r.mu).collect::<Vec<_>>(), "monotone": monotone }),
                || "μ table or μ monotonicity along catalog embeddings fails".into(),
            ));
            let worst = rep.naturality.iter().map(|n| n.max_residual).fold(0.0, f64::max);
            rec.push(Check::new(
                format!("spass-naturality {tag}"),
                worst <= t.law,
                json!({ "max_residual": worst, "bound": t.law }),
                || format!("ζ naturality residual {worst:e}"),
            ));
            let classes: Vec<String> = rep.local_class.iter().map(|s| format!("{}: {:?}", s.transformation, s.classification)).collect();
            rec.push(Check::new(
                format!("spass-local-class {tag}"),
                rep.local_class_consistent,
                json!({ "classifications": classes }),
                || "a partial equivalence among massive powers is not an equivalence".into(),
            ));

            let a = kg_theory(mass)?;
            let diag = diagonal_theory(&a, spec)?;
            for (name, m) in &cat.spacetimes {
                let Some(o) = probe_region(m) else { continue };
                let d = diagonal_kinematic_check(&diag, m, &o)?;
                rec.push(Check::new(
                    format!("diagonal-kinematic {tag} {name}"),
                    d.pass,
                    serde_json::to_value(&d).expect("report serialises"),
                    || format!("kinematic subspace has dim {} against one copy's {}", d.kin_dim, d.one_copy_kin_dim),
                ));
            }
            let (_, c) = &cat.spacetimes[1];
            for (i, p) in cfg.perturbations.iter().enumerate() {
                let r = rce_factorization_check(&diag, c, &Metric::single(*p))?;
                let pass = r.pass && r.residual <= t.rce_factorization;
                rec.push(Check::new(
                    format!("rce-factorization {tag} perturbation {i}"),
                    pass,
                    serde_json::to_value(&r).expect("report serialises"),
                    || format!("copy-wise rce residual {:e}", r.residual),
                ));
            }
        }
    }
    if patterns.len() > 1 {
        let stable = patterns.windows(2).all(|w| w[0] == w[1]);
        rec.push(Check::new(
            "spass-stability",
            stable,
            json!({ "resolutions": cfg.resolutions }),
            || "iso pattern changes under catalog refinement".into(),
        ));
    }
    rec.write_csv("spass_table.csv", &table)?;
    Ok(())
}

/// A diamond on the first component over the middle 60% of its extent,
/// based on the reference slice.
fn probe_region(m: &covarlab::geometry::Spacetime) -> Option<Region> {
    let comp = &m.components[0];
    let (lo, hi) = match comp.circumference() {
        Some(l) => (comp.x0, comp.x0 + l),
        None => {
            let [a, b] = comp.admissible_range();
            (a, b)
        }
    };
    let mid = 0.5 * (lo + hi);
    let w = 0.3 * (hi - lo);
    let o = Region::diamond(0, m.t_ref, [mid - w, mid + w]);
    o.validate(m).ok().map(|_| o)
}
