use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::compact::CompactSet;
use crate::geometry::spacetime::Spacetime;
use crate::solver::evolve::{CauchyData, Propagator};

/// Lowered `T_ab` sampled on solver grid times × lattice points of one component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressEnergyField {
    pub component: usize,
    pub times: Vec<f64>,
    /// Lattice indices covered.
    pub indices: Vec<usize>,
    pub x: Vec<f64>,
    /// `[T_tt, T_tx, T_xx]` per `(time, point)`, row-major in time.
    pub values: Vec<[f64; 3]>,
}

impl StressEnergyField {
    pub fn at(&self, k: usize, j: usize) -> [f64; 3] {
        self.values[k * self.x.len() + j]
    }

    /// `Σ_t w_t Σ_x Δx · f(t, x, T)` with trapezoid weights in time.
    pub fn integrate(&self, dx: f64, f: impl Fn(f64, f64, [f64; 3]) -> f64) -> f64 {
        let nt = self.times.len();
        let mut total = 0.0;
        for k in 0..nt {
            let w = match nt {
                1 => 0.0,
                _ if k == 0 => 0.5 * (self.times[1] - self.times[0]),
                _ if k == nt - 1 => 0.5 * (self.times[k] - self.times[k - 1]),
                _ => 0.5 * (self.times[k + 1] - self.times[k - 1]),
            };
            if w == 0.0 {
                continue;
            }
            let row: f64 = (0..self.x.len()).map(|j| f(self.times[k], self.x[j], self.at(k, j))).sum();
            total += w.abs() * row * dx;
        }
        total
    }
}

/// `T_ab = ∂_aφ ∂_bφ − ½ g_ab (g^cd ∂_cφ ∂_dφ) + ½ m² g_ab φ²` from lowered `g`.
pub fn stress_tensor(g: [f64; 3], dphi: [f64; 2], phi: f64, mass: f64) -> [f64; 3] {
    let det = g[0] * g[2] - g[1] * g[1];
    let (a, b, c) = (g[2] / det, -g[1] / det, g[0] / det);
    let [pt, px] = dphi;
    let kin = a * pt * pt + 2.0 * b * pt * px + c * px * px;
    let pot = 0.5 * mass * mass * phi * phi;
    [
        pt * pt - 0.5 * g[0] * kin + pot * g[0],
        pt * px - 0.5 * g[1] * kin + pot * g[1],
        px * px - 0.5 * g[2] * kin + pot * g[2],
    ]
}

/// Evolves `data` across the bounding box of `window` on each component and
/// samples `T_ab` there.
pub fn stress_energy(m: &Spacetime, mass: f64, data: &CauchyData, window: &CompactSet) -> Result<Vec<StressEnergyField>> {
    window.validate(m)?;
    let mut out = Vec::new();
    for c in 0..m.n_components() {
        let pieces: Vec<_> = window.on_component(c).collect();
        if pieces.is_empty() {
            continue;
        }
        let comp = &m.components[c];
        let (mut t0, mut t1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &pieces {
            let (t, x) = p.hull_core();
            t0 = t0.min(t[0]);
            t1 = t1.max(t[1]);
            x0 = x0.min(x[0]);
            x1 = x1.max(x[1]);
        }
        let indices: Vec<usize> = (0..comp.n_x)
            .filter(|&i| comp.distance_to_interval(comp.x(i), x0, x1) <= 1e-9 * comp.dx)
            .collect();
        let v = data.to_vector();
        // Reach t0 first, then sweep forward across the window.
        let mut start = v.clone();
        Propagator::new(m, mass, data.t, t0)?.apply(&mut start);
        let sweep = Propagator::new(m, mass, t0, t1)?;
        let mut field = StressEnergyField {
            component: c,
            times: Vec::new(),
            indices: indices.clone(),
            x: indices.iter().map(|&i| comp.x(i)).collect(),
            values: Vec::new(),
        };
        let mut padded = vec![0.0; m.phase_dim()];
        let o = m.offsets()[c];
        padded[o..o + comp.phase_dim()].copy_from_slice(&start[o..o + comp.phase_dim()]);
        sweep.trace(c, &padded, |t, phi, pi| {
            field.times.push(t);
            for &i in &indices {
                let x = comp.x(i);
                let nb = |d: isize| {
                    let j = i as isize + d;
                    if comp.is_periodic() {
                        phi[j.rem_euclid(comp.n_x as isize) as usize]
                    } else if j < 0 || j >= comp.n_x as isize {
                        0.0
                    } else {
                        phi[j as usize]
                    }
                };
                let px = (nb(1) - nb(-1)) / (2.0 * comp.dx);
                let k = m.metric.coefficients(c, comp, t, x);
                let pt = (pi[i] / k.s - k.b * px) / k.a;
                let g = m.metric.g_at(c, comp, t, x);
                field.values.push(stress_tensor(g, [pt, px], phi[i], mass));
            }
        });
        if field.times.is_empty() {
            return Err(Error::Precondition("empty stress-energy window".into()));
        }
        out.push(field);
    }
    Ok(out)
}
