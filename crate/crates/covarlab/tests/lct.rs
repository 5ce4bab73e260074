use covarlab::geometry::{build_spacetime, validate_embedding, ComponentMap, Embedding, Region, Spacetime, SpacetimeSpec};
use covarlab::lct::*;
use covarlab::localization::kinematic_subspace;
use covarlab::rce::LinearSymplecticMap;
use covarlab::solver::{Bump, Metric, MetricPerturbation, Polarization};
use covarlab::{Error, Result};
use nalgebra::DMatrix;

fn cylinder() -> Spacetime {
    build_spacetime(&SpacetimeSpec::cylinder(2.0, 2.0, 40)).unwrap()
}

fn slab(m: &Spacetime, t: [f64; 2]) -> Embedding {
    let s = m.restrict(&Region::slab(t[0], t[1])).unwrap();
    validate_embedding(&s, m, &[ComponentMap::new(0, 0, 0.0, 0.0)]).unwrap()
}

fn bump(c: usize, t: f64, x: f64) -> Metric {
    Metric::single(MetricPerturbation::polarized(c, Polarization::Tt, Bump::new([t, x], [0.3, 0.3]), 0.05))
}

fn one_two() -> (Theory, Theory, Theory) {
    let a = kg_theory(0.5).unwrap();
    let spec = DiagonalSpec::one_field_two_field();
    (a.clone(), diagonal_theory(&a, spec).unwrap(), power_theory(&a, 2).unwrap())
}

#[test]
fn kg_identity_and_cauchy_slab() {
    let a = kg_theory(0.5).unwrap();
    let c = cylinder();
    let id = a.morphism(&Embedding::identity(&c).unwrap()).unwrap();
    assert_eq!(id.matrix, DMatrix::identity(c.phase_dim(), c.phase_dim()));
    let r = time_slice_check(&a, &slab(&c, [0.4, 1.6])).unwrap();
    assert!(r.invertible && r.condition < 1e3, "{r:?}");
    assert!(r.symplectic_defect <= 1e-10);
}

#[test]
fn diamond_into_cylinder_is_injective_not_surjective() {
    let cat = Catalog::standard(40).unwrap();
    let (_, psi) = &cat.embeddings[0];
    let map = kg_theory(0.5).unwrap().morphism(psi).unwrap();
    assert!(map.matrix.nrows() > map.matrix.ncols());
    assert_eq!(covarlab::linalg::rank(&map.matrix, 1e-10), map.matrix.ncols());
    assert!(map.defect <= 1e-10);
    assert!(time_slice_check(&kg_theory(0.5).unwrap(), psi).is_err());
}

#[test]
fn powers_stack_blocks() {
    let a = kg_theory(0.5).unwrap();
    assert_eq!(power_theory(&a, 1).unwrap(), a);
    let c = cylinder();
    assert_eq!(power_theory(&a, 2).unwrap().dim(&c), 2 * a.dim(&c));
    assert!(power_theory(&a, 0).is_err());
    let s1 = slab(&c, [0.4, 1.6]);
    let mid = s1.domain.clone();
    let inner = mid.restrict(&Region::slab(0.6, 1.4)).unwrap();
    let s0 = validate_embedding(&inner, &mid, &[ComponentMap::new(0, 0, 0.0, 0.0)]).unwrap();
    let r = functor_laws_check(&power_theory(&a, 3).unwrap(), &[(s0, s1)]).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn functor_laws_on_diamond_slab_cylinder_chain() {
    let c = cylinder();
    let s = slab(&c, [0.4, 1.6]);
    let d = build_spacetime(&SpacetimeSpec::diamond([0.5, 1.5], c.t_ref, 0.05)).unwrap();
    let d_in_slab = validate_embedding(&d, &s.domain, &[ComponentMap::new(0, 0, 0.0, 0.0)]).unwrap();
    let chains = vec![(Embedding::identity(&c).unwrap(), Embedding::identity(&c).unwrap()), (d_in_slab, s)];
    for f in [kg_theory(0.5).unwrap(), kg_theory(0.0).unwrap(), one_two().1] {
        let r = functor_laws_check(&f, &chains).unwrap();
        assert!(r.pass && r.max_residual <= 1e-10, "{r:?}");
        assert_eq!(r.identity[0].residual, 0.0);
    }
}

/// Scales every morphism map into a circle by a small factor.
struct Corrupted(Theory);

impl TheoryFunctor for Corrupted {
    fn name(&self) -> String {
        "corrupted".into()
    }
    fn dim(&self, m: &Spacetime) -> usize {
        self.0.dim(m)
    }
    fn omega(&self, m: &Spacetime) -> DMatrix<f64> {
        self.0.omega(m)
    }
    fn morphism(&self, psi: &Embedding) -> Result<LinearSymplecticMap> {
        let mut map = self.0.morphism(psi)?;
        if psi.domain.components[0].is_diamond() {
            map.matrix *= 1.0 + 1e-6;
        }
        Ok(map)
    }
}

#[test]
fn corrupted_morphism_is_located() {
    let cat = Catalog::standard(40).unwrap();
    let c = &cat.spacetimes[1].1;
    let chains = vec![
        (Embedding::identity(c).unwrap(), Embedding::identity(c).unwrap()),
        (cat.embeddings[0].1.clone(), Embedding::identity(c).unwrap()),
    ];
    let r = functor_laws_check(&Corrupted(kg_theory(0.5).unwrap()), &chains).unwrap();
    assert!(!r.pass);
    assert_eq!(r.first_failure.as_deref(), Some("pair 1 domain"));
}

#[test]
fn non_composable_chain_is_an_error() {
    let cat = Catalog::standard(40).unwrap();
    let (a, b) = (cat.embeddings[0].1.clone(), cat.embeddings[0].1.clone());
    assert!(matches!(functor_laws_check(&kg_theory(0.5).unwrap(), &[(a, b)]), Err(Error::InvalidEmbedding(_))));
}

#[test]
fn eta_relations_and_naturality() {
    let a = kg_theory(0.5).unwrap();
    let c = cylinder();
    let id = eta(&a, 2, 2).unwrap().component(&c).unwrap();
    assert_eq!(id, DMatrix::identity(2 * c.phase_dim(), 2 * c.phase_dim()));
    assert_eq!(eta_composition_residual(&a, 1, 2, 3, &c).unwrap(), 0.0);
    assert!(eta(&a, 3, 2).is_err());
    let cat = Catalog::standard(40).unwrap();
    for (k, l) in [(1, 2), (2, 3), (1, 3)] {
        let r = naturality_check(&eta(&a, k, l).unwrap(), &cat.embeddings).unwrap();
        assert!(r.pass && r.max_residual <= 1e-10, "{r:?}");
    }
}

#[test]
fn diagonal_theory_structure() {
    let (a, diag, _) = one_two();
    let cat = Catalog::standard(40).unwrap();
    let mus: Vec<usize> = cat.spacetimes.iter().map(|(_, m)| DiagonalSpec::one_field_two_field().mu(m)).collect();
    assert_eq!(mus, vec![1, 2, 2]);
    let psi = &cat.embeddings[0].1;
    let m = diag.morphism(psi).unwrap().matrix;
    let n_c = cat.spacetimes[1].1.phase_dim();
    assert_eq!(m.shape(), (2 * n_c, cat.spacetimes[0].1.phase_dim()));
    let one = a.morphism(psi).unwrap().matrix;
    assert_eq!(m.rows(0, n_c).clone_owned(), one);
    assert!(m.rows(n_c, n_c).iter().all(|&v| v == 0.0));
    let r = time_slice_check(&diag, &slab(&cylinder(), [0.4, 1.6])).unwrap();
    assert!(r.invertible && r.dim_domain == 2 * n_c);
    let es: Vec<Embedding> = cat.embeddings.iter().map(|(_, e)| e.clone()).collect();
    assert!(mu_monotone(DiagonalSpec::one_field_two_field(), &es));
    assert!(diagonal_theory(&a, DiagonalSpec { lambda_compact: 0 }).is_err());
}

#[test]
fn zeta_scans_show_the_two_partial_equivalences() {
    let a = kg_theory(0.5).unwrap();
    let spec = DiagonalSpec::one_field_two_field();
    for n in [40, 80] {
        let cat = Catalog::standard(n).unwrap();
        let z1 = partial_equivalence_scan(&zeta_subtheory(&a, spec).unwrap(), &cat.spacetimes).unwrap();
        let z2 = partial_equivalence_scan(&zeta_ambient(&a, spec).unwrap(), &cat.spacetimes).unwrap();
        assert_eq!(z1.rows.iter().map(|r| r.iso).collect::<Vec<_>>(), vec![true, false, false]);
        assert_eq!(z2.rows.iter().map(|r| r.iso).collect::<Vec<_>>(), vec![false, true, true]);
        assert_eq!(z1.classification, Equivalence::PartialEquivalence);
        assert_eq!(z2.classification, Equivalence::PartialEquivalence);
        let id = partial_equivalence_scan(&NaturalTransformation::identity(&a).unwrap(), &cat.spacetimes).unwrap();
        assert_eq!(id.classification, Equivalence::Equivalence);
        for z in [zeta_subtheory(&a, spec).unwrap(), zeta_ambient(&a, spec).unwrap()] {
            assert!(naturality_check(&z, &cat.embeddings).unwrap().pass);
        }
    }
}

#[test]
fn spass_demo_tables() {
    let cat = Catalog::standard(40).unwrap();
    let r = spass_demo(&cat, 0.5, DiagonalSpec::one_field_two_field()).unwrap();
    assert!(r.failure_exhibited && r.local_class_consistent);
    let d = &r.rows[0];
    assert_eq!((d.mu, 2 * d.dim_diagonal), (1, d.dim_power));
    let cd = &r.rows[2];
    assert_eq!(cd.dim_diagonal, cd.dim_power);
    for s in &r.local_class {
        assert!(s.classification != Equivalence::PartialEquivalence, "{s:?}");
    }
    let partial = Catalog { spacetimes: cat.spacetimes[..2].to_vec(), embeddings: vec![] };
    assert!(spass_demo(&partial, 0.5, DiagonalSpec::one_field_two_field()).is_err());
}

#[test]
fn kinematic_covariance() {
    let a = kg_theory(0.5).unwrap();
    let cat = Catalog::standard(40).unwrap();
    let d = &cat.spacetimes[0].1;
    let o = Region::diamond(0, d.t_ref, [-0.3, 0.2]);
    for f in [a.clone(), one_two().1] {
        let r = kinematic_covariance_check(&f, &cat.embeddings[0].1, &o).unwrap();
        assert!(r.pass, "{r:?}");
    }
    let c = &cat.spacetimes[1].1;
    let o = Region::diamond(0, 1.0, [0.3, 1.1]);
    let r = kinematic_covariance_check(&a, &Embedding::identity(c).unwrap(), &o).unwrap();
    assert!(r.pass && r.square_residual == 0.0);
    // The functorial kinematic range agrees with the direct construction.
    let k = kinematic_subspace(c, &o, 0.5).unwrap();
    let f = kinematic_range(&a, c, &o).unwrap();
    assert_eq!(k.dim(), f.dim());
    assert!(k.is_subset_of(&f) && f.is_subset_of(&k));
}

#[test]
fn rotated_images_are_isomorphic() {
    let cat = Catalog::standard(40).unwrap();
    let (d, c) = (&cat.spacetimes[0].1, &cat.spacetimes[1].1);
    let p1 = validate_embedding(d, c, &[ComponentMap::new(0, 0, 1.0, 0.0)]).unwrap();
    let p2 = validate_embedding(d, c, &[ComponentMap::new(0, 0, 0.75, 0.25)]).unwrap();
    let r = induced_isomorphism(&kg_theory(0.5).unwrap(), &p1, &p2).unwrap();
    assert!(r.exists, "{r:?}");
}

#[test]
fn diagonal_kinematic_sees_one_copy() {
    let (_, diag, _) = one_two();
    let cat = Catalog::standard(40).unwrap();
    let c = &cat.spacetimes[1].1;
    let r = diagonal_kinematic_check(&diag, c, &Region::diamond(0, 1.0, [0.5, 1.5])).unwrap();
    assert!(r.pass && r.mu_ambient == 2, "{r:?}");
    assert_eq!(r.ambient_dim, 2 * c.phase_dim());
    assert_eq!(r.dyn_dim, 2 * r.one_copy_dyn_dim);
    let d = &cat.spacetimes[0].1;
    let r = diagonal_kinematic_check(&diag, d, &Region::diamond(0, d.t_ref, [-0.3, 0.3])).unwrap();
    assert!(r.pass && r.mu_ambient == 1);
    assert!(diagonal_kinematic_check(&diag, c, &Region::slab(0.5, 1.5)).is_err());
}

#[test]
fn rce_factorises_over_copies() {
    let (a, diag, _) = one_two();
    let c = cylinder();
    let r = rce_factorization_check(&diag, &c, &Metric::flat()).unwrap();
    assert!(r.pass && r.residual == 0.0);
    let r = rce_factorization_check(&diag, &c, &bump(0, 1.0, 1.0)).unwrap();
    assert!(r.pass && r.mu == 2, "{r:?}");
    assert!(r.solver_gap <= 1e-10);
    let strip = build_spacetime(&SpacetimeSpec::strip(2.0, 2.0, 41)).unwrap();
    let r = rce_factorization_check(&diag, &strip, &bump(0, 1.0, 0.0)).unwrap();
    assert!(r.mu == 1 && r.residual == 0.0, "{r:?}");
    let via = rce_via_morphisms(&a, &c, &bump(0, 1.0, 1.0)).unwrap();
    assert!(via.is_symplectic());
}
