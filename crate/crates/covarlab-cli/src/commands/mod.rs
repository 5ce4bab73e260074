mod dynloc;
mod laws;
mod rce;
mod spass;

pub use dynloc::dynloc_report;
pub use laws::functor_laws;
pub use rce::{rce_check, stress_energy_identity};
pub use spass::spass_demo;

use covarlab::geometry::{build_spacetime, Spacetime, SpacetimeSpec};
use covarlab::rce::{LinearSymplecticMap, SYMPLECTIC_TOL};
use covarlab::solver::MetricPerturbation;

use crate::config::label;

fn build(spec: &SpacetimeSpec, factor: usize) -> covarlab::Result<(String, Spacetime)> {
    let s = spec.refined(factor);
    Ok((label(&s), build_spacetime(&s)?))
}

/// `tt`, `tx`, `xx` or a `+`-joined mix.
fn polarization(p: &MetricPerturbation) -> String {
    let names = ["tt", "tx", "xx"];
    let parts: Vec<&str> = (0..3).filter(|&i| p.amplitude[i] != 0.0).map(|i| names[i]).collect();
    if parts.is_empty() {
        "zero".into()
    } else {
        parts.join("+")
    }
}

/// Defect bound of `map` scaled from the library default to `tol`.
fn defect_bound(map: &LinearSymplecticMap, tol: f64) -> f64 {
    map.tolerance / SYMPLECTIC_TOL * tol
}

fn rel_distance(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if n == 0.0 {
        d
    } else {
        d / n
    }
}
