use covarlab::geometry::{build_spacetime, Spacetime, SpacetimeSpec};
use covarlab::rce::{
    default_windows, rce_apply, rce_derivative, rce_map, stress_energy_pairing, verify_identity, PerturbationFamily,
};
use covarlab::solver::{Bump, CauchyData, DataSpec, Metric, MetricPerturbation, Polarization};

fn strip(n: usize) -> Spacetime {
    build_spacetime(&SpacetimeSpec::strip(4.0, 2.0, n)).unwrap()
}

fn cylinder(n: usize) -> Spacetime {
    build_spacetime(&SpacetimeSpec::cylinder(4.0, 2.0, n)).unwrap()
}

fn direction(pol: Polarization, eps: f64) -> Metric {
    Metric::single(MetricPerturbation::polarized(0, pol, Bump::new([0.6, 0.3], [0.25, 0.4]), eps))
}

const GAUSS: DataSpec = DataSpec::Gaussian { center: 0.0, width: 0.25, velocity: 0.5 };

fn rel_displacement(a: &CauchyData, b: &CauchyData) -> f64 {
    let (a, b) = (a.to_vector(), b.to_vector());
    let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

#[test]
fn zero_perturbation_is_identity() {
    let m = strip(81);
    let r = rce_map(&m, 0.5, &Metric::flat()).unwrap();
    let id = nalgebra::DMatrix::<f64>::identity(m.phase_dim(), m.phase_dim());
    assert!((r.matrix - id).amax() <= 1e-12);
    let zero = direction(Polarization::Tt, 0.0);
    let r = rce_map(&m, 0.5, &zero).unwrap();
    assert!((r.matrix - nalgebra::DMatrix::<f64>::identity(m.phase_dim(), m.phase_dim())).amax() <= 1e-12);
}

#[test]
fn windows_sandwich_support_on_lattice_levels() {
    let m = strip(201);
    let w = default_windows(&m, &direction(Polarization::Tx, 0.3));
    assert_eq!(w.len(), 1);
    let dx = m.components[0].dx;
    assert!(w[0].t_minus < 0.35 && w[0].t_plus > 0.85);
    for t in [w[0].t_minus, w[0].t_plus] {
        assert!(((t / dx) - (t / dx).round()).abs() < 1e-9);
    }
}

#[test]
fn rce_is_symplectic() {
    for m in [strip(101), cylinder(100)] {
        for pol in Polarization::ALL {
            let r = rce_map(&m, 0.5, &direction(pol, 0.3)).unwrap();
            assert!(r.is_symplectic(), "{pol:?}: {} > {}", r.defect, r.tolerance);
        }
    }
}

#[test]
fn rce_acts_trivially_on_data_outside_the_perturbation() {
    let data = DataSpec::Bump { center: -2.5, radius: 0.5, amplitude: 1.0 };
    for (n, tol) in [(201, 5e-3), (401, 1.5e-3)] {
        let m = strip(n);
        let u = data.sample(&m, m.t_ref);
        for pol in Polarization::ALL {
            let v = rce_apply(&m, 0.5, &direction(pol, 0.3), &u).unwrap();
            let d = rel_displacement(&v, &u);
            assert!(d <= tol, "n={n} {pol:?}: {d}");
        }
    }
}

#[test]
fn rce_moves_data_through_the_perturbation() {
    let m = strip(201);
    let u = GAUSS.sample(&m, m.t_ref);
    let v = rce_apply(&m, 0.5, &direction(Polarization::Tt, 0.3), &u).unwrap();
    assert!(rel_displacement(&v, &u) > 1e-3);
}

#[test]
fn constants_have_zero_derivative_when_massless() {
    let m = cylinder(100);
    let u = DataSpec::Constant { value: 1.0 }.sample(&m, m.t_ref);
    for pol in Polarization::ALL {
        let fam = PerturbationFamily::new(&m, direction(pol, 1.0)).unwrap();
        let d = rce_derivative(&m, 0.0, &fam, &u, fam.default_step()).unwrap();
        assert!(d.value.norm() <= 1e-8, "{pol:?}: {}", d.value.norm());
    }
}

#[test]
fn derivative_step_halving_is_second_order() {
    let m = strip(201);
    let u = GAUSS.sample(&m, m.t_ref);
    let fam = PerturbationFamily::new(&m, direction(Polarization::Tt, 1.0)).unwrap();
    let d = rce_derivative(&m, 0.5, &fam, &u, 0.2 * fam.s_max).unwrap();
    assert!(d.richardson_ratio > 3.5 && d.richardson_ratio < 4.5, "{}", d.richardson_ratio);
}

#[test]
fn admissibility_bound_is_found() {
    let m = strip(101);
    let fam = PerturbationFamily::new(&m, direction(Polarization::Tt, 1.0)).unwrap();
    assert!(fam.s_max > 0.0 && fam.s_max <= 1.0);
    let fam = PerturbationFamily::new(&m, direction(Polarization::Tt, 10.0)).unwrap();
    assert!(fam.s_max < 0.1);
}

#[test]
fn pairing_magnitudes_agree_up_to_orientation() {
    let m = strip(201);
    let u = GAUSS.sample(&m, m.t_ref);
    for pol in Polarization::ALL {
        let r = verify_identity(&m, 0.5, &direction(pol, 1.0), &u).unwrap();
        assert!(r.rel_err_opposite <= 1e-2, "{pol:?}: {r:?}");
        assert!(r.rhs.abs() > 1e-4);
    }
}

#[test]
fn pairing_is_linear_in_the_direction() {
    let m = strip(101);
    let u = GAUSS.sample(&m, m.t_ref);
    let a = stress_energy_pairing(&m, 0.5, &direction(Polarization::Xx, 1.0), &u).unwrap();
    let b = stress_energy_pairing(&m, 0.5, &direction(Polarization::Xx, 2.5), &u).unwrap();
    assert!((b - 2.5 * a).abs() <= 1e-12 * b.abs());
}
