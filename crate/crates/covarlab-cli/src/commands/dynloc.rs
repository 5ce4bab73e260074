use serde::Serialize;
use serde_json::json;

use covarlab::geometry::CompactSet;
use covarlab::localization::{
    additivity_check, bullet_subspace_numeric, bullet_subspace_oracle, check_net_properties, compare_subspaces,
    constant_vector, extended_locality_check, locality_verdict, net_cases, PerturbationSampler,
};

use super::build;
use crate::config::ExperimentConfig;
use crate::report::{Check, Recorder};
use crate::RunError;

#[derive(Serialize)]
struct SummaryRow {
    spacetime: String,
    mass: f64,
    region: String,
    dim_kin: usize,
    dim_dyn: usize,
    max_angle: f64,
    local: bool,
    expected: Option<bool>,
    witness_file: Option<String>,
}

pub fn dynloc_report(cfg: &ExperimentConfig, scale: usize, rec: &mut Recorder) -> Result<(), RunError> {
    let t = &cfg.tolerances;
    let mut rows = Vec::new();
    for (ci, case) in cfg.regions.iter().enumerate() {
        for &r in &cfg.resolutions {
            let (name, m) = build(&cfg.spacetimes[case.spacetime], r * scale)?;
            let compact = m.components.iter().any(|c| c.is_periodic());
            for &mass in &cfg.masses {
                let v = rec.timed(format!("locality {name} {} m={mass}", case.label), || locality_verdict(&m, &case.region, mass))?;
                let gap = v.dim_dyn as i64 - v.dim_kin as i64;
                let witness_file = if v.pass {
                    None
                } else {
                    let rel = format!("witnesses/region{ci}-r{r}-m{mass}.json");
                    rec.write_json(&rel, &v.witnesses)?;
                    Some(rel)
                };
                let constant_residual = v.witnesses.iter().filter_map(|w| w.rce_residual).fold(None, |a: Option<f64>, b| Some(a.map_or(b, |a| a.max(b))));
                let expect = case.expect.iter().find(|e| e.mass == mass);
                rows.push(SummaryRow {
                    spacetime: name.clone(),
                    mass,
                    region: case.label.clone(),
                    dim_kin: v.dim_kin,
                    dim_dyn: v.dim_dyn,
                    max_angle: v.max_angle,
                    local: v.pass,
                    expected: expect.map(|e| e.local),
                    witness_file: witness_file.clone(),
                });
                let Some(e) = expect else { continue };
                let pass = if e.local {
                    v.pass && v.max_angle <= t.angle
                } else {
                    !v.pass
                        && e.gap.is_none_or(|g| gap == g as i64)
                        && constant_residual.is_none_or(|x| x <= t.constant_residual)
                        && (mass != 0.0 || !compact || constant_residual.is_some())
                };
                rec.push(Check::new(
                    format!("locality {name} m={mass} {}", case.label),
                    pass,
                    json!({
                        "expected_local": e.local,
                        "local": v.pass,
                        "dim_kin": v.dim_kin,
                        "dim_dyn": v.dim_dyn,
                        "gap": gap,
                        "expected_gap": e.gap,
                        "max_angle": v.max_angle,
                        "constant_witness_residual": constant_residual,
                        "witness_file": witness_file,
                    }),
                    || match &witness_file {
                        Some(f) => f.clone(),
                        None => format!("expected non-local, got dim_kin = dim_dyn = {}", v.dim_kin),
                    },
                ));
            }
        }
    }
    rec.write_csv("summary.csv", &rows)?;

    for (i, n) in cfg.numeric.iter().enumerate() {
        let (name, m) = build(&cfg.spacetimes[n.spacetime], scale)?;
        let oracle = bullet_subspace_oracle(&m, &n.compact, n.mass)?;
        let sampler = PerturbationSampler::new(n.window);
        let nb = rec.timed(format!("numeric bullet {i}"), || bullet_subspace_numeric(&m, &n.compact, n.mass, &sampler))?;
        let cmp = compare_subspaces(&oracle, &nb.subspace)?;
        let worst = cmp.angles.iter().copied().fold(0.0, f64::max);
        rec.push(Check::new(
            format!("numeric-bullet {name} m={} case {i}", n.mass),
            !nb.degenerate && worst <= t.numeric_angle,
            json!({
                "oracle_dim": oracle.dim(),
                "numeric_dim": nb.subspace.dim(),
                "max_angle": worst,
                "bound": t.numeric_angle,
                "degenerate": nb.degenerate,
            }),
            || format!("principal angle {worst:e} > {:e} or degenerate spectrum", t.numeric_angle),
        ));
    }

    for spec in &cfg.spacetimes {
        let (name, m) = build(spec, scale)?;
        let periodic = m.components.iter().any(|c| c.is_periodic());
        for &mass in &cfg.masses {
            let mut failed = Vec::new();
            let cases = net_cases(&m);
            for (label, k1, k2) in &cases {
                let r = check_net_properties(&m, k1, k2, mass)?;
                if !r.pass {
                    let bad: Vec<&str> = r.inclusions.iter().filter(|i| !i.holds).map(|i| i.name.as_str()).collect();
                    failed.push(format!("{label}: {}", bad.join(", ")));
                }
            }
            rec.push(Check::new(
                format!("net {name} m={mass}"),
                failed.is_empty(),
                json!({ "cases": cases.len(), "failed": failed }),
                || failed.join("; "),
            ));

            let empty = bullet_subspace_oracle(&m, &CompactSet::empty(), mass)?;
            let want = if mass == 0.0 && periodic { m.components.iter().filter(|c| c.is_periodic()).count() } else { 0 };
            let const_res: f64 = (0..m.n_components())
                .filter(|&c| mass == 0.0 && m.components[c].is_periodic())
                .map(|c| empty.residual(&constant_vector(&m, c)))
                .fold(0.0, f64::max);
            rec.push(Check::new(
                format!("bullet-empty {name} m={mass}"),
                empty.dim() == want && const_res <= t.constant_residual,
                json!({ "dim": empty.dim(), "expected_dim": want, "constant_residual": const_res }),
                || format!("A•(∅) has dim {} (expected {want}), constant residual {const_res:e}", empty.dim()),
            ));

            let a = rec.timed(format!("additivity {name} m={mass}"), || additivity_check(&m, mass))?;
            let pass = a.reaches_covered_dim && (!periodic || a.reaches_phase_dim);
            rec.push(Check::new(
                format!("additivity {name} m={mass}"),
                pass,
                json!({ "join_dim": a.join_dim, "covered_dim": a.covered_dim, "phase_dim": a.phase_dim }),
                || format!("join of the covering family has dim {} < {}", a.join_dim, a.covered_dim),
            ));
        }
    }

    for (i, p) in cfg.extended.iter().enumerate() {
        let (name, m) = build(&cfg.spacetimes[p.spacetime], scale)?;
        for &mass in &cfg.masses {
            let ok = extended_locality_check(&m, &p.a, &p.b, mass)?;
            rec.push(Check::new(
                format!("extended-locality {name} m={mass} pair {i}"),
                ok,
                json!({ "trivial_meet": ok }),
                || "kinematic subspaces of causally disjoint regions intersect".into(),
            ));
        }
    }
    Ok(())
}
