use std::collections::VecDeque;

use covarlab::geometry::compact::rasterize;
use covarlab::geometry::region::{in_admissible_family, lattice_maximal_compact};
use covarlab::geometry::*;
use proptest::prelude::*;

fn strip(n: usize) -> Spacetime {
    build_spacetime(&SpacetimeSpec::strip(4.0, 2.0, n)).unwrap()
}

fn cylinder(n: usize) -> Spacetime {
    build_spacetime(&SpacetimeSpec::cylinder(2.0, 2.0, n)).unwrap()
}

/// Cells reachable from the cells of `K` by paths that move one level in
/// time and at most one point in space per step, never reversing time.
fn bfs_hull(m: &Spacetime, k: &CompactSet) -> Vec<Vec<bool>> {
    m.components
        .iter()
        .enumerate()
        .map(|(c, comp)| {
            let (lo, _) = comp.level_range();
            let (nl, nx) = (comp.n_levels(), comp.n_x);
            let inside = |j: usize, i: usize| {
                let t = comp.level_time(lo + j as i64);
                k.on_component(c).any(|p| p.contains(comp, t, comp.x(i)))
            };
            let mut out = vec![false; nl * nx];
            for dir in [1i64, -1] {
                let mut seen = vec![false; nl * nx];
                let mut queue = VecDeque::new();
                for j in 0..nl {
                    for i in 0..nx {
                        if inside(j, i) {
                            seen[j * nx + i] = true;
                            queue.push_back((j, i));
                        }
                    }
                }
                while let Some((j, i)) = queue.pop_front() {
                    let nj = j as i64 + dir;
                    if nj < 0 || nj >= nl as i64 {
                        continue;
                    }
                    for di in [-1i64, 0, 1] {
                        let mut ni = i as i64 + di;
                        if comp.is_periodic() {
                            ni = ni.rem_euclid(nx as i64);
                        } else if ni < 0 || ni >= nx as i64 {
                            continue;
                        }
                        let idx = nj as usize * nx + ni as usize;
                        if !seen[idx] {
                            seen[idx] = true;
                            queue.push_back((nj as usize, ni as usize));
                        }
                    }
                }
                for (o, s) in out.iter_mut().zip(seen) {
                    *o |= s;
                }
            }
            out
        })
        .collect()
}

fn assert_hull_matches_bfs(m: &Spacetime, k: &CompactSet) {
    let hull = causal_hull(m, k).unwrap();
    let bfs = bfs_hull(m, k);
    for (mask, oracle) in hull.masks.iter().zip(&bfs) {
        assert_eq!(&mask.bits, oracle, "{k:?}");
    }
}

fn slice_extent(m: &Spacetime, cells: &LatticeSet, t: f64) -> [f64; 2] {
    let k = m.components[0].level_of(t).unwrap();
    let xs = cells.positions_at(m, 0, k);
    [xs[0], *xs.last().unwrap()]
}

#[test]
fn catalog_resolutions() {
    let s = strip(161);
    assert_eq!(s.n_components(), 1);
    assert!((s.components[0].dx - 0.05).abs() < 1e-12);
    assert!(matches!(s.components[0].topology, Topology::LineSegment { .. }));
    let c = cylinder(100);
    assert!((c.components[0].dx - 0.02).abs() < 1e-12);
    assert!(c.components[0].is_periodic());
    let u = build_spacetime(&SpacetimeSpec::disjoint_union(vec![
        SpacetimeSpec::cylinder(2.0, 2.0, 40),
        SpacetimeSpec::strip(4.0, 2.0, 81),
    ]))
    .unwrap();
    assert!(matches!(u.components[0].topology, Topology::Circle { .. }));
    assert!(matches!(u.components[1].topology, Topology::LineSegment { .. }));
    assert!(build_spacetime(&SpacetimeSpec::strip(-1.0, 2.0, 81)).is_err());
    assert!(build_spacetime(&SpacetimeSpec::strip(4.0, 2.0, 3)).is_err());
}

#[test]
fn cauchy_classes() {
    assert_eq!(cauchy_classification(&strip(81)), vec![CauchyClass::Noncompact]);
    assert_eq!(cauchy_classification(&cylinder(40)), vec![CauchyClass::Compact]);
    let u = build_spacetime(&SpacetimeSpec::disjoint_union(vec![
        SpacetimeSpec::cylinder(2.0, 2.0, 40),
        SpacetimeSpec::diamond([-0.5, 0.5], 1.0, 0.05),
    ]))
    .unwrap();
    assert_eq!(cauchy_classification(&u), vec![CauchyClass::Compact, CauchyClass::Noncompact]);
}

#[test]
fn hull_agrees_with_breadth_first_reachability() {
    let s = strip(161);
    for k in [
        CompactSet::rect(0, [0.9, 1.1], [-0.5, 0.5]),
        CompactSet::point(0, 0.5, 0.0),
        CompactSet::diamond(0, 1.0, [-0.5, 0.5]),
        CompactSet::diamond(0, 1.0, [-1.0, -0.6]).union(&CompactSet::diamond(0, 1.0, [0.6, 1.0])),
        CompactSet::rect(0, [0.3, 0.4], [0.2, 0.35]),
    ] {
        assert_hull_matches_bfs(&s, &k);
    }
    let c = cylinder(100);
    for k in [CompactSet::point(0, 0.0, 0.0), CompactSet::diamond(0, 1.0, [1.7, 2.2]), CompactSet::rect(0, [0.9, 1.0], [0.1, 0.3])] {
        assert_hull_matches_bfs(&c, &k);
    }
}

#[test]
fn hull_slices() {
    let s = strip(161);
    let hull = causal_hull(&s, &CompactSet::point(0, 0.5, 0.0)).unwrap();
    assert_eq!(slice_extent(&s, &hull, 1.0), [-0.5, 0.5]);
    // The bottom edge at t = 0.9 belongs to K, so the cone reaches 0.5 + 1.1.
    let hull = causal_hull(&s, &CompactSet::rect(0, [0.9, 1.1], [-0.5, 0.5])).unwrap();
    let [a, b] = slice_extent(&s, &hull, 2.0);
    assert!((a + 1.6).abs() < 1e-9 && (b - 1.6).abs() < 1e-9, "{a} {b}");
    let c = cylinder(100);
    let hull = causal_hull(&c, &CompactSet::point(0, 0.0, 0.0)).unwrap();
    let mask = &hull.masks[0];
    for k in c.components[0].level_of(1.0).unwrap()..=c.components[0].level_range().1 {
        assert!(mask.level(mask.row(k).unwrap()).iter().all(|b| *b));
    }
}

#[test]
fn hull_touching_the_guard_is_an_error() {
    let s = strip(81);
    assert!(matches!(causal_hull(&s, &CompactSet::point(0, 0.1, 3.6)), Err(covarlab::error::Error::GuardViolation { .. })));
}

#[test]
fn complement_parts() {
    let s = strip(161);
    let p = causal_complement(&s, &CompactSet::diamond(0, 1.0, [-0.5, 0.5])).unwrap();
    assert_eq!(p.parts.len(), 2);
    assert!(p.parts.iter().all(|q| !q.bounded));
    let k = CompactSet::diamond(0, 1.0, [-1.0, -0.6]).union(&CompactSet::diamond(0, 1.0, [0.6, 1.0]));
    let p = causal_complement(&s, &k).unwrap();
    assert_eq!(p.parts.len(), 3);
    assert_eq!(p.parts.iter().filter(|q| q.bounded).count(), 1);
    let c = cylinder(100);
    let p = causal_complement(&c, &CompactSet::rect(0, [0.0, 2.0], [0.0, 0.1])).unwrap();
    assert!(p.is_empty());
}

#[test]
fn diamonds() {
    let s = strip(161);
    let d = make_diamond(&s, 0, [-1.0, 1.0], 1.0).unwrap();
    assert!(is_causally_convex(&d.rasterize(&s)));
    assert!(d.contains(&s, 0, 1.95, 0.0) && !d.contains(&s, 0, 1.5, 0.6));
    let c = cylinder(100);
    let d = make_diamond(&c, 0, [0.0, 0.5], 1.0).unwrap();
    assert!(d.contains(&c, 0, 1.2, 0.25) && !d.contains(&c, 0, 1.3, 0.25));
    assert!(make_diamond(&c, 0, [0.0, 2.5], 1.0).is_err());
    let [lo, _] = s.components[0].admissible_range();
    assert!(make_diamond(&s, 0, [lo - 0.1, 0.0], 1.0).is_err());
}

#[test]
fn admissible_family() {
    let s = strip(161);
    let o = Region::diamond(0, 1.0, [-1.0, 1.0]);
    let ks = admissible_compacts(&s, &o, 3).unwrap();
    let halves: Vec<f64> = ks
        .iter()
        .map(|k| match k.pieces[0] {
            CompactPiece::Diamond { base, .. } => 0.5 * (base[1] - base[0]),
            _ => panic!("diamond expected"),
        })
        .collect();
    assert_eq!(halves, vec![0.5, 0.75, 0.9]);
    for w in ks.windows(2) {
        assert!(w[0].is_subset_of(&s, &w[1]));
    }
    let top = causal_hull(&s, &ks[2]).unwrap();
    let [a, b] = slice_extent(&s, &top, s.t_ref);
    assert!(a > -1.0 && b < 1.0);
    assert!(ks.iter().all(|k| in_admissible_family(&s, k, &o)));
    assert!(in_admissible_family(&s, &CompactSet::diamond(0, 1.0, [-0.9, 0.9]), &o));
    assert!(!in_admissible_family(&s, &CompactSet::diamond(0, 1.0, [-1.0, 1.0]), &o));
    let multi = Region::Union { members: vec![Region::diamond(0, 1.0, [-1.0, -0.3]), Region::diamond(0, 1.0, [0.3, 1.0])] };
    assert!(admissible_compacts(&s, &multi, 3).unwrap().iter().all(|k| k.pieces.len() == 2));
    let kmax = lattice_maximal_compact(&s, &o).unwrap();
    assert!(in_admissible_family(&s, &kmax, &o) && ks[2].is_subset_of(&s, &kmax));
}

#[test]
fn causal_disjointness() {
    let s = strip(81);
    let a = Region::diamond(0, 1.0, [-1.0, -0.2]);
    let b = Region::diamond(0, 1.0, [0.2, 1.0]);
    assert!(causally_disjoint(&s, &a, &b).unwrap());
    assert!(!causally_disjoint(&s, &a, &Region::diamond(0, 1.0, [-0.5, 0.5])).unwrap());
}

#[test]
fn embeddings() {
    let c = cylinder(100);
    let slab = c.restrict(&Region::slab(0.5, 1.5)).unwrap();
    let e = validate_embedding(&slab, &c, &[ComponentMap::new(0, 0, 0.0, 0.0)]).unwrap();
    assert!(e.is_cauchy);
    let d = build_spacetime(&SpacetimeSpec::diamond([0.0, 1.0], 1.0, 0.02)).unwrap();
    let e = validate_embedding(&d, &c, &[ComponentMap::new(0, 0, 0.0, 0.0)]).unwrap();
    assert!(!e.is_cauchy);
    assert!(validate_embedding(&c, &strip(81), &[ComponentMap::new(0, 0, 0.0, 0.0)]).is_err());
    assert!(validate_embedding(&d, &c, &[ComponentMap::new(0, 0, 0.013, 0.0)]).is_err());
    let mut flip = ComponentMap::new(0, 0, 0.0, 0.0);
    flip.reflect = true;
    assert!(validate_embedding(&d, &c, &[flip]).is_err());
    let inner = build_spacetime(&SpacetimeSpec::diamond([0.2, 0.8], 1.0, 0.02)).unwrap();
    let f = validate_embedding(&inner, &d, &[ComponentMap::new(0, 0, 0.0, 0.0)]).unwrap();
    let g = f.then(&e).unwrap();
    assert!(!g.is_cauchy);
    let slab2 = c.restrict(&Region::slab(0.7, 1.3)).unwrap();
    let h = validate_embedding(&slab2, &slab, &[ComponentMap::new(0, 0, 0.0, 0.0)]).unwrap();
    let s = validate_embedding(&slab, &c, &[ComponentMap::new(0, 0, 0.0, 0.0)]).unwrap();
    assert!(h.is_cauchy && h.then(&s).unwrap().is_cauchy);
}

#[test]
fn rotations_of_the_circle_are_embeddings() {
    let c = cylinder(100);
    let e = validate_embedding(&c, &c, &[ComponentMap::new(0, 0, 0.5, 0.0)]).unwrap();
    assert!(e.is_cauchy);
    assert_eq!(e.maps[0].offset, 25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hull_is_extensive_and_monotone(t in 0.6f64..1.4, x in -1.0f64..1.0, h in 0.0f64..0.2, w in 0.0f64..0.4, grow in 0.0f64..0.3) {
        let s = strip(81);
        let k = CompactSet::rect(0, [t - h, t + h], [x - w, x + w]);
        let big = CompactSet::rect(0, [t - h - 0.5 * grow, t + h + 0.5 * grow], [x - w - grow, x + w + grow]);
        let j = causal_hull(&s, &k).unwrap();
        prop_assert!(rasterize(&s, &k).is_subset_of(&j));
        prop_assert!(j.is_subset_of(&causal_hull(&s, &big).unwrap()));
        let fut = causal_future(&s, &k).unwrap();
        let past = causal_past(&s, &k).unwrap();
        prop_assert!(fut.future_sweep() == fut && past.past_sweep() == past);
        prop_assert!(fut.union(&past) == j);
        let perp = causal_complement(&s, &k).unwrap();
        prop_assert!(perp.cells.is_disjoint(&j));
        prop_assert_eq!(perp.cells.count() + j.count(), j.total());
    }

    #[test]
    fn diamonds_are_causally_convex(c in -1.5f64..1.5, r in 0.1f64..1.0, t0 in 0.9f64..1.1) {
        let s = strip(81);
        let d = make_diamond(&s, 0, [c - r, c + r], t0).unwrap();
        prop_assert!(is_causally_convex(&d.rasterize(&s)));
    }
}
