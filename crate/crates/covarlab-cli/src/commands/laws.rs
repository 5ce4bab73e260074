use nalgebra::DMatrix;
use serde_json::json;

use covarlab::geometry::{validate_embedding, ComponentMap, Embedding, Region, Spacetime};
use covarlab::lct::{
    diagonal_theory, eta, eta_composition_residual, functor_laws_check, induced_isomorphism, kg_theory,
    kinematic_covariance_check, naturality_check, power_theory, time_slice_chain, time_slice_check, zeta_ambient,
    zeta_subtheory, Catalog, DiagonalSpec, Theory, TheoryFunctor,
};
use covarlab::rce::LinearSymplecticMap;
use covarlab::Error;

use super::defect_bound;
use crate::config::ExperimentConfig;
use crate::report::{Check, Recorder};
use crate::RunError;

/// Negative control: scales every morphism out of a diamond by `1 + 1e-6`.
struct Corrupted(Theory);

impl TheoryFunctor for Corrupted {
    fn name(&self) -> String {
        format!("corrupted {}", self.0.name())
    }
    fn dim(&self, m: &Spacetime) -> usize {
        self.0.dim(m)
    }
    fn omega(&self, m: &Spacetime) -> DMatrix<f64> {
        self.0.omega(m)
    }
    fn morphism(&self, psi: &Embedding) -> covarlab::Result<LinearSymplecticMap> {
        let mut map = self.0.morphism(psi)?;
        if psi.domain.components.iter().any(|c| c.is_diamond()) {
            map.matrix *= 1.0 + 1e-6;
        }
        Ok(map)
    }
}

fn slab(m: &Spacetime, t: [f64; 2]) -> covarlab::Result<Embedding> {
    let s = m.restrict(&Region::slab(t[0], t[1]))?;
    validate_embedding(&s, m, &[ComponentMap::new(0, 0, 0.0, 0.0)])
}

pub fn functor_laws(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<(), RunError> {
    let t = &cfg.tolerances;
    let spec = DiagonalSpec { lambda_compact: cfg.lambda_compact };
    let cat = Catalog::standard(cfg.catalog_n_x)?;
    let (d, c) = (&cat.spacetimes[0].1, &cat.spacetimes[1].1);
    let emb = |name: &str| cat.embeddings.iter().find(|(n, _)| n == name).map(|(_, e)| e.clone()).expect("catalog embedding");

    // D → slab → C and slab-in-slab → slab → C.
    let span = |m: &Spacetime, f: f64| {
        let [a, b] = m.components[0].window;
        let h = 0.5 * f * (b - a);
        [m.t_ref - h, m.t_ref + h]
    };
    let outer = slab(c, span(c, 0.6))?;
    let mid = outer.domain.clone();
    let inner_slab = mid.restrict(&Region::slab(span(c, 0.4)[0], span(c, 0.4)[1]))?;
    let inner = validate_embedding(&inner_slab, &mid, &[ComponentMap::new(0, 0, 0.0, 0.0)])?;
    let d_in_mid = validate_embedding(d, &mid, &[ComponentMap::new(0, 0, 1.0, 0.0)])?;
    let chains = vec![
        (Embedding::identity(c)?, Embedding::identity(c)?),
        (d_in_mid, outer.clone()),
        (inner.clone(), outer.clone()),
        (emb("D→C"), emb("C→C⊔D")),
        (emb("D→C⊔D"), emb("C⊔D→C⊔D")),
    ];

    for &mass in &cfg.masses {
        let a = kg_theory(mass)?;
        let theories = vec![a.clone(), power_theory(&a, 2)?, diagonal_theory(&a, spec)?];
        for f in &theories {
            let name = f.name();
            let r = functor_laws_check(f, &chains)?;
            let pass = r.pass && r.max_residual <= t.law;
            rec.push(Check::new(
                format!("functor-laws {name}"),
                pass,
                json!({ "max_residual": r.max_residual, "bound": t.law, "pairs": chains.len() }),
                || format!("first failure at {}", r.first_failure.clone().unwrap_or_else(|| format!("residual {:e}", r.max_residual))),
            ));

            let mut worst = (0.0, String::new());
            for (label, e) in &cat.embeddings {
                let map = f.morphism(e)?;
                let ratio = map.defect / defect_bound(&map, t.symplectic);
                if ratio >= worst.0 {
                    worst = (ratio, label.clone());
                }
            }
            rec.push(Check::new(
                format!("morphism-symplectic {name}"),
                worst.0 <= 1.0,
                json!({ "max_defect_over_bound": worst.0, "worst": worst.1 }),
                || format!("{} has defect {}× the bound", worst.1, worst.0),
            ));

            let ts = time_slice_check(f, &outer)?;
            rec.push(Check::new(
                format!("time-slice {name}"),
                ts.invertible,
                serde_json::to_value(&ts).expect("report serialises"),
                || format!("slab morphism has condition {:e}", ts.condition),
            ));
            let ch = time_slice_chain(f, &[inner.clone(), outer.clone()])?;
            let pass = ch.composite.invertible && ch.steps.iter().all(|s| s.invertible) && ch.composition_residual <= t.law;
            rec.push(Check::new(
                format!("time-slice-chain {name}"),
                pass,
                json!({ "composite_condition": ch.composite.condition, "composition_residual": ch.composition_residual }),
                || format!("chain of Cauchy slabs: residual {:e}, invertible {}", ch.composition_residual, ch.composite.invertible),
            ));
            let rejected = matches!(time_slice_check(f, &emb("D→C")), Err(Error::Precondition(_)));
            rec.push(Check::new(
                format!("non-cauchy-rejected {name}"),
                rejected,
                json!({ "rejected": rejected }),
                || "the diamond embedding was accepted as Cauchy".into(),
            ));
        }

        let mut transforms = vec![zeta_subtheory(&a, spec)?, zeta_ambient(&a, spec)?];
        for (k, l) in [(1, 2), (2, 3), (1, 3)] {
            transforms.push(eta(&a, k, l)?);
        }
        for z in &transforms {
            let r = naturality_check(z, &cat.embeddings)?;
            rec.push(Check::new(
                format!("naturality m={mass} {}", z.name),
                r.pass && r.max_residual <= t.law,
                json!({ "max_residual": r.max_residual, "bound": t.law }),
                || {
                    let bad = r.rows.iter().filter(|x| x.residual > t.law).map(|x| x.label.clone()).collect::<Vec<_>>();
                    format!("naturality square fails on {}", bad.join(", "))
                },
            ));
        }
        let res = eta_composition_residual(&a, 1, 2, 3, c)?;
        rec.push(Check::new(
            format!("eta-composition m={mass}"),
            res <= t.law,
            json!({ "residual": res }),
            || format!("η²³∘η¹² differs from η¹³ by {res:e}"),
        ));

        let cases = [
            ("D→C", emb("D→C"), Region::diamond(0, d.t_ref, [-0.3, 0.2])),
            ("C identity", Embedding::identity(c)?, Region::diamond(0, c.t_ref, [0.3, 1.1])),
        ];
        for f in [&theories[0], &theories[2]] {
            for (label, psi, o) in &cases {
                let r = kinematic_covariance_check(f, psi, o)?;
                let pass = r.pass && r.square_residual <= t.law;
                rec.push(Check::new(
                    format!("kinematic-covariance {} {label}", f.name()),
                    pass,
                    json!({ "square_residual": r.square_residual, "image_angle": r.image_angle, "dim": r.dim_domain_kin }),
                    || format!("square residual {:e}, image angle {:e}", r.square_residual, r.image_angle),
                ));
            }
        }
        let p2 = validate_embedding(d, c, &[ComponentMap::new(0, 0, 0.75, 0.25)])?;
        let iso = induced_isomorphism(&a, &emb("D→C"), &p2)?;
        rec.push(Check::new(
            format!("induced-iso m={mass}"),
            iso.exists,
            serde_json::to_value(&iso).expect("report serialises"),
            || format!("images of D differ: sigma residual {:e}", iso.sigma_residual),
        ));

        let corrupted = Corrupted(a.clone());
        let r = functor_laws_check(&corrupted, &chains)?;
        let located = !r.pass && r.first_failure.is_some();
        rec.push(Check::new(
            format!("negative-control m={mass}"),
            located,
            json!({ "detected": !r.pass, "location": r.first_failure, "max_residual": r.max_residual }),
            || "a corrupted morphism map passed the functor laws".into(),
        ));
    }
    Ok(())
}
