//! Relative Cauchy evolution, its derivative along perturbation families,
//! and the stress-energy pairing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::spacetime::{Spacetime, SpacetimeSpec};
use crate::linalg::{condition_number, omega, symplectic_defect};
use crate::solver::{symplectic_vec, CauchyData, DataSpec, FineWindow, Metric, Propagator, StressEnergyField};

/// Relative symplecticity tolerance: `δ ≤ SYMPLECTIC_TOL · max|Ω|`.
pub const SYMPLECTIC_TOL: f64 = 1e-6;

/// Default finite-difference step as a fraction of the admissibility bound.
pub const FD_FRACTION: f64 = 1e-3;

/// Dense map on phase space at the reference slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSymplecticMap {
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub provenance: String,
    /// `max |RᵀΩR − Ω|`.
    pub defect: f64,
    /// Bound the defect was checked against.
    pub tolerance: f64,
}

impl LinearSymplecticMap {
    /// Wraps `matrix` and records its defect against the given forms.
    pub fn new(matrix: DMatrix<f64>, provenance: impl Into<String>, omega_dom: &DMatrix<f64>, omega_cod: &DMatrix<f64>) -> Self {
        let defect = symplectic_defect(&matrix, omega_dom, omega_cod);
        let tolerance = SYMPLECTIC_TOL * omega_cod.amax().max(omega_dom.amax());
        LinearSymplecticMap { matrix, provenance: provenance.into(), defect, tolerance }
    }

    pub fn is_symplectic(&self) -> bool {
        self.defect <= self.tolerance
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.matrix * nalgebra::DVector::from_column_slice(v)).iter().copied().collect()
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.matrix)
    }

    /// `self ∘ other`.
    pub fn after(&self, other: &LinearSymplecticMap, omega_dom: &DMatrix<f64>, omega_cod: &DMatrix<f64>) -> Self {
        LinearSymplecticMap::new(
            &self.matrix * &other.matrix,
            format!("composite({} ∘ {})", self.provenance, other.provenance),
            omega_dom,
            omega_cod,
        )
    }
}

/// `h(s) = s·f` for a fixed direction `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFamily {
    pub direction: Metric,
    /// `h(s)` is admissible for `|s| ≤ s_max`.
    pub s_max: f64,
}

impl PerturbationFamily {
    /// Finds `s_max ≤ 1` by bisection on admissibility of `±s·f`.
    pub fn new(m: &Spacetime, direction: Metric) -> Result<Self> {
        let ok = |s: f64| {
            let mut both = true;
            for sign in [1.0, -1.0] {
                let g = combined(m, &direction.scaled(sign * s));
                let k = m.with_metric(g.clone());
                both &= g.validate(&k).is_ok()
                    && (0..m.n_components()).all(|c| g.substeps(c, &m.components[c]).is_ok());
            }
            both
        };
        if direction.is_flat() {
            return Ok(PerturbationFamily { direction, s_max: 1.0 });
        }
        // Support checks do not depend on s.
        direction.validate(m).or_else(|e| match e {
            Error::NotLorentzian { .. } => Ok(()),
            e => Err(e),
        })?;
        if ok(1.0) {
            return Ok(PerturbationFamily { direction, s_max: 1.0 });
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo == 0.0 {
            return Err(Error::InadmissiblePerturbation("no admissible step".into()));
        }
        Ok(PerturbationFamily { direction, s_max: lo })
    }

    pub fn at(&self, s: f64) -> Metric {
        self.direction.scaled(s)
    }

    pub fn default_step(&self) -> f64 {
        FD_FRACTION * self.s_max
    }
}

fn combined(m: &Spacetime, h: &Metric) -> Metric {
    let mut g = m.metric.clone();
    g.perturbations.extend(h.perturbations.iter().filter(|p| !p.is_zero()).cloned());
    g
}

/// Slices `(t₋, t₊)` sandwiching the support of `h` on one component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RceWindow {
    pub component: usize,
    pub t_minus: f64,
    pub t_plus: f64,
}

/// Default windows: lattice levels one cell outside the time support of `h`.
pub fn default_windows(m: &Spacetime, h: &Metric) -> Vec<RceWindow> {
    (0..m.n_components())
        .filter_map(|c| {
            let [lo, hi] = h.time_support(c)?;
            let comp = &m.components[c];
            let dx = comp.dx;
            let tm = (((lo / dx - 1e-9).ceil() - 1.0) * dx).max(comp.window[0]);
            let tp = (((hi / dx + 1e-9).floor() + 1.0) * dx).min(comp.window[1]);
            Some(RceWindow { component: c, t_minus: tm, t_plus: tp })
        })
        .collect()
}

fn check_window(m: &Spacetime, h: &Metric, w: &RceWindow) -> Result<()> {
    let comp = m.component(w.component)?;
    let Some([lo, hi]) = h.time_support(w.component) else { return Ok(()) };
    if !(w.t_minus < lo && hi < w.t_plus) {
        return Err(Error::InadmissiblePerturbation(format!(
            "support [{lo}, {hi}] is not sandwiched by ({}, {})",
            w.t_minus, w.t_plus
        )));
    }
    if w.t_minus < comp.window[0] - 1e-12 || w.t_plus > comp.window[1] + 1e-12 {
        return Err(Error::TimeOutOfRange { t: w.t_minus, lo: comp.window[0], hi: comp.window[1] });
    }
    Ok(())
}

/// Per-component pieces of `E_M(t₋→t_ref) · E_{M[h]}(t₊→t₋) · E_M(t_ref→t₊)`.
struct RceParts {
    blocks: Vec<Option<[Propagator; 3]>>,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    dim: usize,
}

fn rce_parts(m: &Spacetime, mass: f64, h: &Metric, windows: &[RceWindow]) -> Result<RceParts> {
    let full = m.with_metric(combined(m, h));
    full.metric.validate(&full)?;
    // One time grid for all legs, shared by ±h, so that the legs cancel
    // away from the perturbation and central differences are symmetric.
    let mut grid = FineWindow::of(m, &full.metric)?;
    if let Ok(neg) = FineWindow::of(m, &combined(m, &h.scaled(-1.0))) {
        for (g, n) in grid.iter_mut().zip(neg) {
            *g = FineWindow::merge(*g, n);
        }
    }
    let mut blocks = Vec::new();
    for c in 0..m.n_components() {
        if h.is_flat_on(c) {
            blocks.push(None);
            continue;
        }
        let w = windows
            .iter()
            .find(|w| w.component == c)
            .ok_or_else(|| Error::Precondition(format!("no window for component {c}")))?;
        check_window(m, h, w)?;
        let bg = m.single(c);
        let pert = full.single(c);
        let g = [grid[c]];
        blocks.push(Some([
            Propagator::with_grid(&bg, mass, m.t_ref, w.t_plus, &g)?,
            Propagator::with_grid(&pert, mass, w.t_plus, w.t_minus, &g)?,
            Propagator::with_grid(&bg, mass, w.t_minus, m.t_ref, &g)?,
        ]));
    }
    Ok(RceParts {
        blocks,
        offsets: m.offsets(),
        sizes: m.components.iter().map(|c| c.phase_dim()).collect(),
        dim: m.phase_dim(),
    })
}

impl RceParts {
    fn apply(&self, v: &mut [f64]) {
        for (c, b) in self.blocks.iter().enumerate() {
            if let Some(ps) = b {
                let block = &mut v[self.offsets[c]..self.offsets[c] + self.sizes[c]];
                for p in ps {
                    p.apply(block);
                }
            }
        }
    }

    fn matrix(&self) -> DMatrix<f64> {
        let mut out = DMatrix::identity(self.dim, self.dim);
        for (c, b) in self.blocks.iter().enumerate() {
            if let Some(ps) = b {
                let n = self.sizes[c];
                let mut blk = DMatrix::identity(n, n);
                for p in ps {
                    p.apply_columns(&mut blk);
                }
                out.view_mut((self.offsets[c], self.offsets[c]), (n, n)).copy_from(&blk);
            }
        }
        out
    }
}

/// `rce_M[h]` assembled column by column, with default windows.
pub fn rce_map(m: &Spacetime, mass: f64, h: &Metric) -> Result<LinearSymplecticMap> {
    rce_map_windows(m, mass, h, &default_windows(m, h))
}

pub fn rce_map_windows(m: &Spacetime, mass: f64, h: &Metric, windows: &[RceWindow]) -> Result<LinearSymplecticMap> {
    let parts = rce_parts(m, mass, h, windows)?;
    let w = omega(m);
    Ok(LinearSymplecticMap::new(parts.matrix(), "rce[h]", &w, &w))
}

/// `rce_M[h] u` without assembling the matrix.
pub fn rce_apply(m: &Spacetime, mass: f64, h: &Metric, u: &CauchyData) -> Result<CauchyData> {
    if (u.t - m.t_ref).abs() > 1e-9 {
        return Err(Error::SliceMismatch(u.t, m.t_ref));
    }
    let parts = rce_parts(m, mass, h, &default_windows(m, h))?;
    let mut v = u.to_vector();
    parts.apply(&mut v);
    CauchyData::from_vector(m, m.t_ref, &v)
}

/// Central-difference estimate of `F_M[f]u` with step-halving metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub value: CauchyData,
    pub step: f64,
    /// Estimate at `step/2`.
    pub half: CauchyData,
    /// `‖D(s) − D(s/2)‖ / ‖D(s/2) − D(s/4)‖`; about 4 for an `O(s²)` error.
    pub richardson_ratio: f64,
}

fn central(m: &Spacetime, mass: f64, fam: &PerturbationFamily, u: &CauchyData, s: f64) -> Result<Vec<f64>> {
    let up = rce_apply(m, mass, &fam.at(s), u)?.to_vector();
    let dn = rce_apply(m, mass, &fam.at(-s), u)?.to_vector();
    Ok(up.iter().zip(&dn).map(|(a, b)| (a - b) / (2.0 * s)).collect())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn rce_derivative(m: &Spacetime, mass: f64, fam: &PerturbationFamily, u: &CauchyData, s: f64) -> Result<DerivativeEstimate> {
    if !(s > 0.0 && s <= fam.s_max) {
        return Err(Error::InadmissiblePerturbation(format!("step {s} outside (0, {}]", fam.s_max)));
    }
    if fam.direction.is_flat() {
        let z = CauchyData::zeros(m, u.t);
        return Ok(DerivativeEstimate { value: z.clone(), step: s, half: z, richardson_ratio: f64::NAN });
    }
    let d1 = central(m, mass, fam, u, s)?;
    let d2 = central(m, mass, fam, u, 0.5 * s)?;
    let d4 = central(m, mass, fam, u, 0.25 * s)?;
    let ratio = dist(&d1, &d2) / dist(&d2, &d4);
    Ok(DerivativeEstimate {
        value: CauchyData::from_vector(m, u.t, &d1)?,
        step: s,
        half: CauchyData::from_vector(m, u.t, &d2)?,
        richardson_ratio: ratio,
    })
}

/// `∫ f_ab T^ab dvol` on the background, indices raised with the background.
pub fn stress_energy_pairing(m: &Spacetime, mass: f64, f: &Metric, u: &CauchyData) -> Result<f64> {
    let mut total = 0.0;
    for c in 0..m.n_components() {
        let perts: Vec<_> = f.on_component(c).cloned().collect();
        if perts.is_empty() {
            continue;
        }
        let comp = &m.components[c];
        let [t0, t1] = f.time_support(c).expect("nonempty");
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &perts {
            let [a, b] = p.bump.space_range();
            x0 = x0.min(a);
            x1 = x1.max(b);
        }
        let window = crate::geometry::compact::CompactSet::rect(c, [t0, t1], [x0, x1]);
        let fields: Vec<StressEnergyField> = crate::solver::stress_energy(m, mass, u, &window)?;
        let field = fields.into_iter().find(|fl| fl.component == c).expect("field on component");
        total += field.integrate(comp.dx, |t, x, tl| {
            let k = m.metric.coefficients(c, comp, t, x);
            let fh = f.h_at(c, comp, t, x);
            // T^ab = g^ac g^bd T_cd with g^tt = a, g^tx = b, g^xx = k.c.
            let (a, b, cc) = (k.a, k.b, k.c);
            let up_tt = a * a * tl[0] + 2.0 * a * b * tl[1] + b * b * tl[2];
            let up_tx = a * b * tl[0] + (a * cc + b * b) * tl[1] + b * cc * tl[2];
            let up_xx = b * b * tl[0] + 2.0 * b * cc * tl[1] + cc * cc * tl[2];
            (fh[0] * up_tt + 2.0 * fh[1] * up_tx + fh[2] * up_xx) * k.s
        });
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `σ(F[f]u, u)` at the default step.
    pub lhs: f64,
    /// `σ(F[f]u, u)` at half the default step.
    pub lhs_half_step: f64,
    /// `∫ f_ab T^ab dvol`.
    pub rhs: f64,
    /// `|lhs − rhs| / |rhs|`.
    pub rel_err: f64,
    /// `|lhs + rhs| / |rhs|`: the same comparison with the opposite sign convention.
    pub rel_err_opposite: f64,
    pub fd_step: f64,
    pub s_max: f64,
    pub richardson_ratio: f64,
    pub n_x: Vec<usize>,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Compares both sides of the pairing identity at one resolution.
pub fn verify_identity(m: &Spacetime, mass: f64, f: &Metric, u: &CauchyData) -> Result<IdentityReport> {
    let fam = PerturbationFamily::new(m, f.clone())?;
    let s = fam.default_step();
    let d = rce_derivative(m, mass, &fam, u, s)?;
    let uv = u.to_vector();
    let lhs = symplectic_vec(m, &d.value.to_vector(), &uv);
    let lhs_half = symplectic_vec(m, &d.half.to_vector(), &uv);
    let rhs = stress_energy_pairing(m, mass, f, u)?;
    Ok(IdentityReport {
        lhs,
        lhs_half_step: lhs_half,
        rhs,
        rel_err: rel(lhs, rhs),
        rel_err_opposite: rel(-lhs, rhs),
        fd_step: s,
        s_max: fam.s_max,
        richardson_ratio: d.richardson_ratio,
        n_x: m.components.iter().map(|c| c.n_x).collect(),
    })
}

/// One row per resolution, plus error ratios between successive rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<IdentityReport>,
    pub ratios: Vec<f64>,
    pub ratios_opposite: Vec<f64>,
}

/// Runs [`verify_identity`] on `spec` refined by each factor.
pub fn identity_convergence(spec: &SpacetimeSpec, mass: f64, f: &Metric, data: &DataSpec, factors: &[usize]) -> Result<ConvergenceTable> {
    let mut rows = Vec::new();
    for &k in factors {
        let m = crate::geometry::spacetime::build_spacetime(&spec.refined(k))?;
        let u = data.sample(&m, m.t_ref);
        rows.push(verify_identity(&m, mass, f, &u)?);
    }
    let ratio = |g: fn(&IdentityReport) -> f64| rows.windows(2).map(|w| g(&w[0]) / g(&w[1])).collect::<Vec<_>>();
    Ok(ConvergenceTable {
        ratios: ratio(|r| r.rel_err),
        ratios_opposite: ratio(|r| r.rel_err_opposite),
        rows,
    })
}
