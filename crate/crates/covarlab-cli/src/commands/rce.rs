use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use covarlab::geometry::Spacetime;
use covarlab::rce::{identity_convergence, rce_map, verify_identity, LinearSymplecticMap};
use covarlab::solver::{DataSpec, Metric, MetricPerturbation};

use super::{build, defect_bound, polarization, rel_distance};
use crate::cache::{header, sha_hex, CacheEvent, MatrixCache};
use crate::config::ExperimentConfig;
use crate::report::{Check, Recorder};
use crate::RunError;

/// `rce[h]` through the cache; the defect is recomputed from the matrix.
fn cached_rce(
    m: &Spacetime,
    mass: f64,
    h: &Metric,
    cache: Option<&MatrixCache>,
    rec: &mut Recorder,
    key: &str,
) -> Result<LinearSymplecticMap, RunError> {
    let Some(cache) = cache else {
        rec.timings.cache.push((key.into(), CacheEvent::Disabled));
        return Ok(rec.timed(format!("rce {key}"), || rce_map(m, mass, h))?);
    };
    let n = m.phase_dim();
    let hd = header(sha_hex(&m.spec), sha_hex(&(h, mass)), "rce".into(), n, n);
    let (matrix, ev) = rec.timed(format!("rce {key}"), || cache.get_or_compute(&hd, || rce_map(m, mass, h).map(|r| r.matrix)))?;
    rec.timings.cache.push((key.into(), ev));
    let w = covarlab::linalg::omega(m);
    Ok(LinearSymplecticMap::new(matrix, "rce[h]", &w, &w))
}

/// Whether data with support `[c − r, c + r]` at `t_ref` stays causally
/// disjoint from the support of `p`, with one cell of slack.
fn disjoint_from(m: &Spacetime, d: &DataSpec, p: &MetricPerturbation) -> bool {
    let DataSpec::Bump { center, radius, .. } = *d else { return false };
    let comp = &m.components[p.component];
    let [t0, t1] = p.bump.time_range();
    let [x0, x1] = p.bump.space_range();
    let reach = (t0 - m.t_ref).abs().max((t1 - m.t_ref).abs());
    let gap = [center - radius, center + radius]
        .iter()
        .map(|&e| comp.distance_to_interval(e, x0, x1))
        .fold(f64::INFINITY, f64::min);
    let inside = comp.distance_to_interval(center, x0 - radius, x1 + radius) == 0.0;
    !inside && gap > reach + comp.dx
}

pub fn rce_check(cfg: &ExperimentConfig, scale: usize, cache: Option<&MatrixCache>, rec: &mut Recorder) -> Result<(), RunError> {
    let t = &cfg.tolerances;
    for spec in &cfg.spacetimes {
        for (ri, &r) in cfg.resolutions.iter().enumerate() {
            let (name, m) = build(spec, r * scale)?;
            let n = m.phase_dim();
            for &mass in &cfg.masses {
                // h = 0, as an empty metric and as a zero-amplitude bump.
                let mut zero_err: f64 = 0.0;
                let mut fixtures = vec![Metric::flat()];
                fixtures.extend(cfg.perturbations.iter().map(|p| Metric::single(p.scaled(0.0))));
                for h in &fixtures {
                    let map = rce_map(&m, mass, h)?;
                    zero_err = zero_err.max((map.matrix - DMatrix::<f64>::identity(n, n)).amax());
                }
                rec.push(Check::new(
                    format!("rce-zero {name} m={mass}"),
                    zero_err <= t.zero_identity,
                    json!({ "max_abs_deviation": zero_err, "fixtures": fixtures.len() }),
                    || format!("rce[0] deviates from the identity by {zero_err:e}"),
                ));

                let u = cfg.data.sample(&m, m.t_ref).to_vector();
                for p in &cfg.perturbations {
                    let pol = polarization(p);
                    let h = Metric::single(*p);
                    let key = format!("{name} m={mass} {pol}");
                    let map = cached_rce(&m, mass, &h, cache, rec, &key)?;
                    let bound = defect_bound(&map, t.symplectic);
                    let moved = rel_distance((&map.matrix * DVector::from_column_slice(&u)).as_slice(), &u);
                    rec.push(Check::new(
                        format!("rce-symplectic {key}"),
                        map.defect <= bound,
                        json!({ "defect": map.defect, "bound": bound, "n_x": m.components[0].n_x, "data_displacement": moved }),
                        || format!("defect {:e} > {bound:e}", map.defect),
                    ));
                    for (di, d) in cfg.locality_data.iter().enumerate() {
                        let label = format!("rce-locality {key} data {di}");
                        if !disjoint_from(&m, d, p) {
                            continue;
                        }
                        let v = d.sample(&m, m.t_ref).to_vector();
                        let w = &map.matrix * DVector::from_column_slice(&v);
                        let disp = rel_distance(w.as_slice(), &v);
                        let tol = t.locality[ri];
                        rec.push(Check::new(
                            label,
                            disp <= tol,
                            json!({ "relative_displacement": disp, "bound": tol, "n_x": m.components[0].n_x }),
                            || format!("far data moved by {disp:e} > {tol:e}"),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceRow {
    spacetime: String,
    mass: f64,
    polarization: String,
    n_x: usize,
    lhs: f64,
    rhs: f64,
    rel_err: f64,
    rel_err_opposite: f64,
    ratio: Option<f64>,
    ratio_opposite: Option<f64>,
    richardson_ratio: f64,
    fd_step: f64,
}

pub fn stress_energy_identity(cfg: &ExperimentConfig, scale: usize, rec: &mut Recorder) -> Result<(), RunError> {
    let t = &cfg.tolerances;
    let factors: Vec<usize> = cfg.resolutions.iter().map(|r| r * scale).collect();
    let mut rows = Vec::new();
    for spec in &cfg.spacetimes {
        let (name, m) = build(spec, scale)?;
        for &mass in &cfg.masses {
            for p in &cfg.perturbations {
                let pol = polarization(p);
                let f = Metric::single(*p);
                let table = rec.timed(format!("identity {name} m={mass} {pol}"), || {
                    identity_convergence(spec, mass, &f, &cfg.data, &factors)
                })?;
                for (i, r) in table.rows.iter().enumerate() {
                    let prev = i.checked_sub(1);
                    rows.push(ConvergenceRow {
                        spacetime: name.clone(),
                        mass,
                        polarization: pol.clone(),
                        n_x: r.n_x[0],
                        lhs: r.lhs,
                        rhs: r.rhs,
                        rel_err: r.rel_err,
                        rel_err_opposite: r.rel_err_opposite,
                        ratio: prev.map(|j| table.ratios[j]),
                        ratio_opposite: prev.map(|j| table.ratios_opposite[j]),
                        richardson_ratio: r.richardson_ratio,
                        fd_step: r.fd_step,
                    });
                }
                let first = &table.rows[0];
                let ratio = table.ratios.first().copied();
                let ok_err = first.rel_err <= t.identity_rel_err;
                let ok_ratio = ratio.is_none_or(|q| q >= t.convergence_ratio);
                rec.push(Check::new(
                    format!("pairing-identity {name} m={mass} {pol}"),
                    ok_err && ok_ratio,
                    json!({
                        "lhs": first.lhs,
                        "rhs": first.rhs,
                        "rel_err": table.rows.iter().map(|r| r.rel_err).collect::<Vec<_>>(),
                        "ratios": table.ratios,
                        "rel_err_opposite": table.rows.iter().map(|r| r.rel_err_opposite).collect::<Vec<_>>(),
                        "ratios_opposite": table.ratios_opposite,
                        "bound": t.identity_rel_err,
                        "ratio_bound": t.convergence_ratio,
                    }),
                    || {
                        format!(
                            "rel_err {:e} (bound {:e}), ratio {:?}; lhs {:e} vs rhs {:e}; see convergence.csv",
                            first.rel_err, t.identity_rel_err, ratio, first.lhs, first.rhs
                        )
                    },
                ));
            }
            if mass == 0.0 {
                let u = DataSpec::Constant { value: 1.0 }.sample(&m, m.t_ref);
                let mut worst: f64 = 0.0;
                for p in &cfg.perturbations {
                    let r = verify_identity(&m, mass, &Metric::single(*p), &u)?;
                    worst = worst.max(r.lhs.abs()).max(r.rhs.abs());
                }
                rec.push(Check::new(
                    format!("pairing-constant {name}"),
                    worst <= t.constant_residual,
                    json!({ "max_abs_side": worst, "bound": t.constant_residual }),
                    || format!("constant data gives |side| = {worst:e}"),
                ));
            }
        }
    }
    rec.write_csv("convergence.csv", &rows)?;
    Ok(())
}
