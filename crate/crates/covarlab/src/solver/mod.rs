//! Lattice Klein–Gordon evolution, the symplectic form, stress-energy and
//! bump profiles.

pub mod evolve;
pub mod metric;
pub mod stress;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::spacetime::Spacetime;

pub use evolve::{evolve, CauchyData, FineWindow, Propagator};
pub use metric::{bump_profile, Bump, Coefficients, Metric, MetricPerturbation, Polarization};
pub use stress::{stress_energy, stress_tensor, StressEnergyField};

/// `σ(u, v) = Σ_c Σ_i (φ_i π'_i − φ'_i π_i)·Δx_c`.
pub fn symplectic_form(m: &Spacetime, u: &CauchyData, v: &CauchyData) -> Result<f64> {
    if (u.t - v.t).abs() > 1e-9 {
        return Err(Error::SliceMismatch(u.t, v.t));
    }
    if u.dim() != m.phase_dim() || v.dim() != m.phase_dim() {
        return Err(Error::DimensionMismatch { expected: m.phase_dim(), got: u.dim().max(v.dim()) });
    }
    Ok(symplectic_vec(m, &u.to_vector(), &v.to_vector()))
}

/// [`symplectic_form`] on raw phase vectors.
pub fn symplectic_vec(m: &Spacetime, u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut o = 0;
    for comp in &m.components {
        let n = comp.n_x;
        let mut s = 0.0;
        for i in 0..n {
            s += u[o + i] * v[o + n + i] - v[o + i] * u[o + n + i];
        }
        acc += s * comp.dx;
        o += 2 * n;
    }
    acc
}

/// Catalog initial data, sampled on every component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// `φ = exp(−d²/2w²)`, `π = −v ∂_xφ` with `d` the (wrapped) displacement.
    Gaussian { center: f64, width: f64, velocity: f64 },
    Constant { value: f64 },
    /// `φ = amplitude·bump(|x − center|/radius)`, `π = 0`.
    Bump { center: f64, radius: f64, amplitude: f64 },
}

impl DataSpec {
    pub fn sample(&self, m: &Spacetime, t: f64) -> CauchyData {
        let comps = &m.components;
        match *self {
            DataSpec::Gaussian { center, width, velocity } => {
                let g = |c: usize, x: f64| {
                    let d = comps[c].displacement(x, center);
                    (d, (-d * d / (2.0 * width * width)).exp())
                };
                CauchyData::from_fn(
                    m,
                    t,
                    |c, x| g(c, x).1,
                    |c, x| {
                        let (d, v) = g(c, x);
                        velocity * d / (width * width) * v
                    },
                )
            }
            DataSpec::Constant { value } => CauchyData::from_fn(m, t, |_, _| value, |_, _| 0.0),
            DataSpec::Bump { center, radius, amplitude } => CauchyData::from_fn(
                m,
                t,
                |c, x| {
                    let d = comps[c].displacement(x, center) / radius;
                    amplitude * bump_profile(d * d)
                },
                |_, _| 0.0,
            ),
        }
    }
}

/// A scaled bump `amplitude · exp(1 − 1/(1 − ρ²))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpField {
    pub bump: Bump,
    pub amplitude: f64,
}

pub fn bump_field(center: [f64; 2], radii: [f64; 2], amplitude: f64) -> Result<BumpField> {
    if !(radii[0] > 0.0 && radii[1] > 0.0) {
        return Err(Error::Precondition(format!("bump radii must be positive, got {radii:?}")));
    }
    Ok(BumpField { bump: Bump::new(center, radii), amplitude })
}

impl BumpField {
    /// Value at `(t, x)` in the plane.
    pub fn value(&self, t: f64, x: f64) -> f64 {
        let u = (t - self.bump.center[0]) / self.bump.radii[0];
        let v = (x - self.bump.center[1]) / self.bump.radii[1];
        self.amplitude * bump_profile(u * u + v * v)
    }

    /// Samples on the lattice levels × points of component `c`, row-major in time.
    pub fn sample(&self, m: &Spacetime, c: usize) -> Result<Vec<Vec<f64>>> {
        let comp = m.component(c)?;
        let [t0, t1] = self.bump.time_range();
        let [x0, x1] = self.bump.space_range();
        let [lo, hi] = comp.admissible_range();
        let wraps = comp.circumference().is_some_and(|l| x1 - x0 >= l);
        if t0 < comp.window[0] || t1 > comp.window[1] || x0 < lo || x1 > hi || wraps {
            return Err(Error::Precondition("bump support exceeds the domain".into()));
        }
        let (k0, k1) = comp.level_range();
        Ok((k0..=k1)
            .map(|k| {
                let t = comp.level_time(k);
                (0..comp.n_x).map(|i| self.amplitude * self.bump.value(comp, t, comp.x(i))).collect()
            })
            .collect())
    }
}
