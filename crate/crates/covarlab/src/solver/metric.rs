use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::spacetime::{Component, Spacetime, BASE_SUBSTEPS};

/// Courant factor: `Δt ≤ CFL·Δx/c_max`.
pub const CFL: f64 = 0.4;

const MAX_SUBSTEPS: usize = 64;

/// Standard C^∞ bump `exp(1 − 1/(1 − ρ²))`, normalised to 1 at the centre.
pub fn bump_profile(rho2: f64) -> f64 {
    if rho2 < 1.0 {
        (1.0 - 1.0 / (1.0 - rho2)).exp()
    } else {
        0.0
    }
}

/// Elliptic bump support: centre `(t, x)` and radii `(r_t, r_x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub radii: [f64; 2],
}

impl Bump {
    pub fn new(center: [f64; 2], radii: [f64; 2]) -> Self {
        Bump { center, radii }
    }

    pub fn rho2(&self, comp: &Component, t: f64, x: f64) -> f64 {
        let u = (t - self.center[0]) / self.radii[0];
        let v = comp.displacement(x, self.center[1]) / self.radii[1];
        u * u + v * v
    }

    pub fn value(&self, comp: &Component, t: f64, x: f64) -> f64 {
        bump_profile(self.rho2(comp, t, x))
    }

    pub fn time_range(&self) -> [f64; 2] {
        [self.center[0] - self.radii[0], self.center[0] + self.radii[0]]
    }

    pub fn space_range(&self) -> [f64; 2] {
        [self.center[1] - self.radii[1], self.center[1] + self.radii[1]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Tt,
    Tx,
    Xx,
}

impl Polarization {
    pub const ALL: [Polarization; 3] = [Polarization::Tt, Polarization::Tx, Polarization::Xx];

    pub fn amplitude(self, eps: f64) -> [f64; 3] {
        match self {
            Polarization::Tt => [eps, 0.0, 0.0],
            Polarization::Tx => [0.0, eps, 0.0],
            Polarization::Xx => [0.0, 0.0, eps],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarization::Tt => "tt",
            Polarization::Tx => "tx",
            Polarization::Xx => "xx",
        }
    }
}

/// `h_ab = amplitude_ab · bump` on one component; amplitudes are
/// `(h_tt, h_tx, h_xx)` with lowered indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPerturbation {
    pub component: usize,
    pub bump: Bump,
    pub amplitude: [f64; 3],
}

impl MetricPerturbation {
    pub fn polarized(component: usize, pol: Polarization, bump: Bump, eps: f64) -> Self {
        MetricPerturbation { component, bump, amplitude: pol.amplitude(eps) }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let a = self.amplitude;
        MetricPerturbation { amplitude: [s * a[0], s * a[1], s * a[2]], ..*self }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude.iter().all(|a| *a == 0.0)
    }

    pub fn h(&self, comp: &Component, t: f64, x: f64) -> [f64; 3] {
        let b = self.bump.value(comp, t, x);
        [self.amplitude[0] * b, self.amplitude[1] * b, self.amplitude[2] * b]
    }
}

/// Inverse-metric data entering the Hamiltonian: `s = √|g|`, `a = g^tt`,
/// `b = g^tx`, `c = g^xx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub s: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Coefficients {
    pub const FLAT: Coefficients = Coefficients { s: 1.0, a: 1.0, b: 0.0, c: -1.0 };

    pub fn from_lowered(g: [f64; 3]) -> Self {
        let det = g[0] * g[2] - g[1] * g[1];
        Coefficients { s: (-det).sqrt(), a: g[2] / det, b: -g[1] / det, c: g[0] / det }
    }
}

pub fn is_lorentzian(g: [f64; 3]) -> bool {
    g[0] > 0.0 && g[2] < 0.0 && g[0] * g[2] - g[1] * g[1] < 0.0
}

/// Largest null speed `|dx/dt|` of `g`.
pub fn null_speed(g: [f64; 3]) -> f64 {
    let disc = (g[1] * g[1] - g[0] * g[2]).max(0.0).sqrt();
    let v1 = (-g[1] + disc) / g[2];
    let v2 = (-g[1] - disc) / g[2];
    v1.abs().max(v2.abs())
}

/// `g = η + Σ h` with `η = diag(1, −1)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub perturbations: Vec<MetricPerturbation>,
}

impl Metric {
    pub fn flat() -> Self {
        Metric::default()
    }

    pub fn single(p: MetricPerturbation) -> Self {
        Metric { perturbations: vec![p] }
    }

    pub fn is_flat(&self) -> bool {
        self.perturbations.iter().all(MetricPerturbation::is_zero)
    }

    pub fn scaled(&self, s: f64) -> Metric {
        Metric { perturbations: self.perturbations.iter().map(|p| p.scaled(s)).collect() }
    }

    pub fn on_component(&self, c: usize) -> impl Iterator<Item = &MetricPerturbation> {
        self.perturbations.iter().filter(move |p| p.component == c && !p.is_zero())
    }

    pub fn is_flat_on(&self, c: usize) -> bool {
        self.on_component(c).next().is_none()
    }

    pub fn h_at(&self, c: usize, comp: &Component, t: f64, x: f64) -> [f64; 3] {
        let mut h = [0.0; 3];
        for p in self.on_component(c) {
            let v = p.h(comp, t, x);
            h[0] += v[0];
            h[1] += v[1];
            h[2] += v[2];
        }
        h
    }

    pub fn g_at(&self, c: usize, comp: &Component, t: f64, x: f64) -> [f64; 3] {
        let h = self.h_at(c, comp, t, x);
        [1.0 + h[0], h[1], -1.0 + h[2]]
    }

    pub fn coefficients(&self, c: usize, comp: &Component, t: f64, x: f64) -> Coefficients {
        Coefficients::from_lowered(self.g_at(c, comp, t, x))
    }

    /// Time interval covered by the supports on component `c`.
    pub fn time_support(&self, c: usize) -> Option<[f64; 2]> {
        self.on_component(c).fold(None, |acc, p| {
            let r = p.bump.time_range();
            Some(match acc {
                None => r,
                Some([lo, hi]) => [lo.min(r[0]), hi.max(r[1])],
            })
        })
    }

    fn samples(&self, c: usize, comp: &Component) -> Vec<(f64, f64)> {
        const N: usize = 48;
        let mut pts = Vec::new();
        for p in self.on_component(c) {
            let [t0, t1] = p.bump.time_range();
            let [x0, x1] = p.bump.space_range();
            for i in 0..=N {
                let t = t0 + (t1 - t0) * i as f64 / N as f64;
                for j in 0..=N {
                    pts.push((t, x0 + (x1 - x0) * j as f64 / N as f64));
                }
                let k0 = ((x0 - comp.x0) / comp.dx).floor() as i64;
                let k1 = ((x1 - comp.x0) / comp.dx).ceil() as i64;
                for k in k0..=k1 {
                    pts.push((t, comp.x0 + k as f64 * comp.dx));
                }
            }
        }
        pts
    }

    /// Rejects supports leaving the admissible domain and non-Lorentzian `g`.
    pub fn validate(&self, m: &Spacetime) -> Result<()> {
        for p in &self.perturbations {
            let comp = m.components.get(p.component).ok_or_else(|| {
                Error::InadmissiblePerturbation(format!("no component {}", p.component))
            })?;
            if !(p.bump.radii[0] > 0.0 && p.bump.radii[1] > 0.0) {
                return Err(Error::InadmissiblePerturbation("bump radii must be positive".into()));
            }
            if p.is_zero() {
                continue;
            }
            let [t0, t1] = p.bump.time_range();
            if t0 <= comp.window[0] || t1 >= comp.window[1] {
                return Err(Error::InadmissiblePerturbation(format!(
                    "time support [{t0}, {t1}] not strictly inside {:?}",
                    comp.window
                )));
            }
            if comp.is_diamond() {
                return Err(Error::Unsupported("perturbations of diamond spacetimes".into()));
            }
            match comp.circumference() {
                Some(l) => {
                    if 2.0 * p.bump.radii[1] >= l {
                        return Err(Error::InadmissiblePerturbation("bump wraps the circle".into()));
                    }
                }
                None => {
                    let [lo, hi] = comp.admissible_range();
                    let [x0, x1] = p.bump.space_range();
                    if x0 < lo || x1 > hi {
                        return Err(Error::InadmissiblePerturbation(format!(
                            "space support [{x0}, {x1}] leaves the admissible range [{lo}, {hi}]"
                        )));
                    }
                }
            }
        }
        for (c, comp) in m.components.iter().enumerate() {
            for (t, x) in self.samples(c, comp) {
                if !is_lorentzian(self.g_at(c, comp, t, x)) {
                    return Err(Error::NotLorentzian { component: c, t, x });
                }
            }
        }
        Ok(())
    }

    /// Largest null speed of `η ± h` on component `c`; symmetric in the
    /// sign of `h` so that `±s` perturbations share one time grid.
    pub fn symmetric_speed(&self, c: usize, comp: &Component) -> f64 {
        let neg = self.scaled(-1.0);
        let mut v: f64 = 1.0;
        for (t, x) in self.samples(c, comp) {
            let gp = self.g_at(c, comp, t, x);
            let gm = neg.g_at(c, comp, t, x);
            if is_lorentzian(gp) {
                v = v.max(null_speed(gp));
            }
            if is_lorentzian(gm) {
                v = v.max(null_speed(gm));
            }
        }
        v
    }

    /// Solver substeps per lattice spacing inside the perturbed window.
    pub fn substeps(&self, c: usize, comp: &Component) -> Result<usize> {
        if self.is_flat_on(c) {
            return Ok(BASE_SUBSTEPS);
        }
        let v = self.symmetric_speed(c, comp);
        let q = ((v / CFL) - 1e-9).ceil() as usize;
        let q = q.max(BASE_SUBSTEPS);
        if q > MAX_SUBSTEPS {
            return Err(Error::InadmissiblePerturbation(format!(
                "characteristic speed {v} needs {q} substeps per cell (CFL failure)"
            )));
        }
        Ok(q)
    }
}
