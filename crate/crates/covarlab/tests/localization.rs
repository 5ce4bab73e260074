use covarlab::geometry::{build_spacetime, CompactSet, Region, Spacetime, SpacetimeSpec};
use covarlab::localization::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn strip(n: usize) -> Spacetime {
    build_spacetime(&SpacetimeSpec::strip(4.0, 2.0, n)).unwrap()
}

fn cylinder() -> Spacetime {
    build_spacetime(&SpacetimeSpec::cylinder(2.0, 2.0, 100)).unwrap()
}

fn two_diamonds() -> Region {
    Region::Union { members: vec![Region::diamond(0, 1.0, [-1.0, -0.3]), Region::diamond(0, 1.0, [0.3, 1.0])] }
}

#[test]
fn kinematic_dimension_counts_interior_points() {
    // dx = 0.05: 39 points strictly inside (-1, 1), each carrying φ and π.
    let m = strip(161);
    let s = kinematic_subspace(&m, &Region::diamond(0, 1.0, [-1.0, 1.0]), 0.5).unwrap();
    assert_eq!(s.dim(), 78);
    let slab = Region::TimeSlab { component: None, t: [0.5, 1.5] };
    assert_eq!(kinematic_subspace(&m, &slab, 0.5).unwrap().dim(), m.phase_dim());
}

#[test]
fn massive_theory_is_dynamically_local() {
    let m = strip(161);
    for o in [Region::diamond(0, 1.0, [-1.0, 1.0]), two_diamonds()] {
        let v = locality_verdict(&m, &o, 0.5).unwrap();
        assert!(v.pass, "{v:?}");
        assert_eq!(v.dim_kin, v.dim_dyn);
        assert!(v.max_angle <= 1e-10);
    }
    let v = locality_verdict(&cylinder(), &Region::diamond(0, 1.0, [0.5, 1.5]), 0.5).unwrap();
    assert!(v.pass && v.max_angle <= 1e-10);
}

#[test]
fn massless_cylinder_gains_the_constant() {
    let m = cylinder();
    let v = locality_verdict(&m, &Region::diamond(0, 1.0, [0.5, 1.5]), 0.0).unwrap();
    assert!(!v.pass);
    assert_eq!(v.dim_dyn, v.dim_kin + 1);
    let w = &v.witnesses[0];
    assert_eq!(w.label, "constant on component 0");
    assert!(w.rce_residual.unwrap() <= 1e-12);
    assert!(w.angle_to_kin > 0.1);
}

#[test]
fn massless_strip_with_connected_complement_is_local() {
    let v = locality_verdict(&strip(161), &Region::diamond(0, 1.0, [-1.0, 1.0]), 0.0).unwrap();
    assert!(v.pass && v.max_angle <= 1e-10, "{v:?}");
}

#[test]
fn massless_strip_gap_between_diamonds_is_constant() {
    let m = strip(161);
    let v = locality_verdict(&m, &two_diamonds(), 0.0).unwrap();
    assert!(!v.pass);
    assert_eq!(v.dim_dyn, v.dim_kin + 1);
    let w = v.witnesses.iter().find(|w| w.label.starts_with("dynamical")).unwrap();
    let comp = &m.components[0];
    let n = comp.n_x;
    let gap: f64 = (0..n).filter(|&i| comp.x(i).abs() < 0.3 + comp.dx).map(|i| w.vector[i].powi(2)).sum();
    assert!(gap > 0.99, "{gap}");
}

#[test]
fn numeric_fixed_space_contains_the_oracle() {
    let m = strip(161);
    let k = CompactSet::diamond(0, 0.6, [-0.5, 0.5]);
    let oracle = bullet_subspace_oracle(&m, &k, 0.5).unwrap();
    let nb = bullet_subspace_numeric(&m, &k, 0.5, &PerturbationSampler::new([0.25, 0.95])).unwrap();
    assert!(!nb.degenerate);
    assert!(nb.subspace.dim() >= oracle.dim());
    let cmp = compare_subspaces(&oracle, &nb.subspace).unwrap();
    assert!(cmp.angles.iter().all(|&a| a <= 5e-2), "{:?}", cmp.angles);
}

#[test]
fn oracle_vectors_are_rce_fixed() {
    let m = strip(101);
    let k = CompactSet::diamond(0, 1.0, [-0.4, 0.4]);
    let oracle = bullet_subspace_oracle(&m, &k, 0.5).unwrap();
    let sampler = PerturbationSampler::new([0.25, 1.75]);
    for j in [0, oracle.dim() / 2, oracle.dim() - 1] {
        let u = oracle.basis.column(j).clone_owned();
        assert!(sampled_rce_residual(&m, &k, 0.5, &sampler, &u).unwrap() <= 5e-2);
    }
}

#[test]
fn net_properties_hold_on_every_case() {
    for m in [strip(81), cylinder()] {
        for mass in [0.0, 0.5] {
            for (name, k1, k2) in net_cases(&m) {
                let r = check_net_properties(&m, &k1, &k2, mass).unwrap();
                assert!(r.pass, "{name} m={mass}: {:?}", r.inclusions);
            }
        }
    }
}

#[test]
fn empty_compact_gives_constants_only_when_massless_on_a_circle() {
    let empty = CompactSet::empty();
    let c = cylinder();
    assert_eq!(bullet_subspace_oracle(&c, &empty, 0.5).unwrap().dim(), 0);
    let s = bullet_subspace_oracle(&c, &empty, 0.0).unwrap();
    assert_eq!(s.dim(), 1);
    assert!(s.residual(&constant_vector(&c, 0)) <= 1e-12);
    assert_eq!(bullet_subspace_oracle(&strip(81), &empty, 0.0).unwrap().dim(), 0);
}

#[test]
fn extended_locality() {
    let m = strip(81);
    let a = Region::diamond(0, 1.0, [-1.0, -0.2]);
    let b = Region::diamond(0, 1.0, [0.2, 1.0]);
    assert!(extended_locality_check(&m, &a, &b, 0.5).unwrap());
    assert!(extended_locality_check(&m, &a, &a, 0.5).is_err());
}

#[test]
fn covering_family_generates_the_circle() {
    let m = cylinder();
    for mass in [0.0, 0.5] {
        let r = additivity_check(&m, mass).unwrap();
        assert!(r.reaches_phase_dim, "{r:?}");
    }
    let r = additivity_check(&strip(81), 0.5).unwrap();
    assert!(r.reaches_covered_dim && r.join_dim < r.phase_dim);
}

/// Cosines of the principal angles as square roots of the eigenvalues of
/// `QaᵀPbQa`, with Gram–Schmidt bases.
fn brute_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let gs = |m: &DMatrix<f64>| {
        let mut q: Vec<DVector<f64>> = Vec::new();
        for j in 0..m.ncols() {
            let mut v = m.column(j).clone_owned();
            for _ in 0..2 {
                for u in &q {
                    v -= u * u.dot(&v);
                }
            }
            if v.norm() > 1e-9 {
                q.push(v.normalize());
            }
        }
        DMatrix::from_columns(&q)
    };
    let (qa, qb) = (gs(a), gs(b));
    let p = &qb * qb.transpose();
    let g = qa.transpose() * p * &qa;
    let mut c: Vec<f64> = g.symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt().min(1.0)).collect();
    c.sort_by(|x, y| y.total_cmp(x));
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn comparison_matches_brute_force(seed in proptest::collection::vec(-1.0f64..1.0, 80), shared in 0usize..=3) {
        let a = DMatrix::from_fn(10, 3, |i, j| seed[i * 3 + j]);
        let mut b = DMatrix::from_fn(10, 5, |i, j| seed[30 + i * 5 + j]);
        for j in 0..shared {
            b.set_column(j, &a.column(j));
        }
        let sa = Subspace::span(&a, Provenance::Full);
        let sb = Subspace::span(&b, Provenance::Full);
        let cmp = compare_subspaces(&sa, &sb).unwrap();
        let cos = brute_cosines(&a, &b);
        for (t, c) in cmp.angles.iter().zip(&cos) {
            prop_assert!((t.cos() - c).abs() <= 1e-10, "{} vs {}", t.cos(), c);
        }
        prop_assert_eq!(cmp.a_subset_b, shared == 3);
        prop_assert_eq!(sa.meet(&sb).dim(), shared);
        let j = sa.join(&sb);
        prop_assert!(sa.is_subset_of(&j) && sb.is_subset_of(&j));
    }

    #[test]
    fn nested_diamonds_are_isotone(c in -1.0f64..1.0, r in 0.1f64..0.5, grow in 0.05f64..0.4) {
        let m = strip(81);
        let small = CompactSet::diamond(0, 1.0, [c - r, c + r]);
        let big = CompactSet::diamond(0, 1.0, [c - r - grow, c + r + grow]);
        for mass in [0.0, 0.5] {
            let a = bullet_subspace_oracle(&m, &small, mass).unwrap();
            let b = bullet_subspace_oracle(&m, &big, mass).unwrap();
            prop_assert!(a.is_subset_of(&b));
        }
    }
}
