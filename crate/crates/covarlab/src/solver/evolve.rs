use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::spacetime::{Component, Spacetime, BASE_SUBSTEPS};
use crate::solver::metric::Metric;

/// Yoshida triple-jump weights; `2·G1 + G2 = 1`.
const G1: f64 = 1.351_207_191_959_657_8;
const G2: f64 = -1.702_414_383_919_315_5;

const TIME_TOL: f64 = 1e-9;

/// Relative threshold above which data in a guard cell counts as support.
pub const GUARD_TOL: f64 = 1e-10;

/// Field and momentum samples of every component on one slice.
///
/// Phase vectors are laid out component by component as `[φ_c; π_c]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyData {
    pub t: f64,
    pub phi: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
}

impl CauchyData {
    pub fn zeros(m: &Spacetime, t: f64) -> Self {
        CauchyData {
            t,
            phi: m.components.iter().map(|c| vec![0.0; c.n_x]).collect(),
            pi: m.components.iter().map(|c| vec![0.0; c.n_x]).collect(),
        }
    }

    /// Data built from per-point closures `(component, x) ↦ value`.
    pub fn from_fn(
        m: &Spacetime,
        t: f64,
        phi: impl Fn(usize, f64) -> f64,
        pi: impl Fn(usize, f64) -> f64,
    ) -> Self {
        CauchyData {
            t,
            phi: m.components.iter().enumerate().map(|(c, k)| k.positions().iter().map(|&x| phi(c, x)).collect()).collect(),
            pi: m.components.iter().enumerate().map(|(c, k)| k.positions().iter().map(|&x| pi(c, x)).collect()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.phi.iter().map(|p| 2 * p.len()).sum()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        for (p, q) in self.phi.iter().zip(&self.pi) {
            v.extend_from_slice(p);
            v.extend_from_slice(q);
        }
        v
    }

    pub fn from_vector(m: &Spacetime, t: f64, v: &[f64]) -> Result<Self> {
        if v.len() != m.phase_dim() {
            return Err(Error::DimensionMismatch { expected: m.phase_dim(), got: v.len() });
        }
        let mut out = CauchyData::zeros(m, t);
        let mut o = 0;
        for (c, comp) in m.components.iter().enumerate() {
            let n = comp.n_x;
            out.phi[c].copy_from_slice(&v[o..o + n]);
            out.pi[c].copy_from_slice(&v[o + n..o + 2 * n]);
            o += 2 * n;
        }
        Ok(out)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().chain(&self.pi).flatten().all(|x| x.is_finite())
    }

    fn check_shape(&self, m: &Spacetime) -> Result<()> {
        let ok = self.phi.len() == m.n_components()
            && self.pi.len() == m.n_components()
            && m.components.iter().enumerate().all(|(c, k)| self.phi[c].len() == k.n_x && self.pi[c].len() == k.n_x);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: m.phase_dim(), got: self.dim() })
        }
    }

    /// Errors if, on some line-segment component, the causal reach of the
    /// data's support over a time `elapsed` meets the guard cells.
    ///
    /// Support means entries above `GUARD_TOL` relative to the largest one.
    pub fn check_guard(&self, m: &Spacetime, elapsed: f64) -> Result<()> {
        let scale = self.phi.iter().chain(&self.pi).flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        if scale == 0.0 {
            return Ok(());
        }
        for (c, comp) in m.components.iter().enumerate() {
            if comp.is_periodic() {
                continue;
            }
            let live: Vec<usize> = (0..comp.n_x)
                .filter(|&i| self.phi[c][i].abs().max(self.pi[c][i].abs()) > GUARD_TOL * scale)
                .collect();
            let (Some(&lo), Some(&hi)) = (live.first(), live.last()) else { continue };
            let reach = (elapsed.abs() / comp.dx - 1e-9).ceil().max(0.0) as usize;
            if lo < comp.guard + reach || hi + reach + comp.guard >= comp.n_x {
                return Err(Error::GuardViolation { component: c });
            }
        }
        Ok(())
    }
}

/// Frozen coefficients of one Strang step on a perturbed slice.
#[derive(Debug)]
struct FieldCoeffs {
    /// `√|g|·g^tt` at nodes.
    sa: Vec<f64>,
    /// `√|g|` at nodes.
    s: Vec<f64>,
    /// `g^tx/g^tt` at nodes.
    g: Vec<f64>,
    /// `√|g|·(g^tx)²/g^tt` at nodes.
    w: Vec<f64>,
    /// `−√|g|·g^xx` at links `x_j − Δx/2`, `j = 0..=n`.
    kappa: Vec<f64>,
    shift: bool,
}

#[derive(Debug)]
enum Coeffs {
    Flat,
    Field(Box<FieldCoeffs>),
}

#[derive(Debug)]
struct Strang {
    tau: f64,
    coeffs: std::sync::Arc<Coeffs>,
}

#[derive(Debug)]
struct ComponentPlan {
    n: usize,
    dx: f64,
    periodic: bool,
    /// Grid times visited, in evolution order.
    times: Vec<f64>,
    /// Three Strang steps per interval between consecutive `times`.
    steps: Vec<[Strang; 3]>,
}

/// Where a component's solver grid is refined: `substeps` per cell over
/// `support`, rounded outward to multiples of `Δx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineWindow {
    pub support: [f64; 2],
    pub substeps: usize,
}

impl FineWindow {
    /// The refinement a metric asks for on each component.
    pub fn of(m: &Spacetime, metric: &Metric) -> Result<Vec<Option<FineWindow>>> {
        (0..m.n_components())
            .map(|c| {
                let Some(support) = metric.time_support(c) else { return Ok(None) };
                Ok(Some(FineWindow { support, substeps: metric.substeps(c, &m.components[c])? }))
            })
            .collect()
    }

    /// Smallest refinement covering both.
    pub fn merge(a: Option<FineWindow>, b: Option<FineWindow>) -> Option<FineWindow> {
        match (a, b) {
            (Some(a), Some(b)) => Some(FineWindow {
                support: [a.support[0].min(b.support[0]), a.support[1].max(b.support[1])],
                substeps: a.substeps.max(b.substeps),
            }),
            (a, b) => a.or(b),
        }
    }
}

/// Solver time grid of a component: multiples of `Δx/q`, with a finer
/// `q` inside the fine window.
fn grid_between(comp: &Component, window: Option<FineWindow>, lo: f64, hi: f64) -> Vec<f64> {
    let dx = comp.dx;
    let q_fine = window.map_or(BASE_SUBSTEPS, |w| w.substeps);
    let fine = window.map(|FineWindow { support: [a, b], .. }| {
        let ka = (a / dx + 1e-9).floor() as i64;
        let kb = (b / dx - 1e-9).ceil() as i64;
        (ka, kb)
    });
    let mut pts = vec![lo];
    let k0 = (lo / dx).floor() as i64 - 1;
    let k1 = (hi / dx).ceil() as i64 + 1;
    for k in k0..k1 {
        let q = match fine {
            Some((ka, kb)) if k >= ka && k < kb => q_fine,
            _ => BASE_SUBSTEPS,
        };
        for r in 0..q {
            let t = k as f64 * dx + r as f64 * dx / q as f64;
            if t > lo + TIME_TOL * dx && t < hi - TIME_TOL * dx {
                pts.push(t);
            }
        }
    }
    pts.push(hi);
    pts
}

/// Snaps `t` to a nearby multiple of `Δx/q` so that aligned times coincide
/// bitwise with grid points.
fn snap_time(t: f64, dx: f64) -> f64 {
    let k = t / dx;
    let r = k.round();
    if (k - r).abs() <= TIME_TOL {
        r * dx
    } else {
        t
    }
}

fn field_coeffs(comp: &Component, metric: &Metric, c: usize, t: f64) -> Coeffs {
    let n = comp.n_x;
    let mut fc = FieldCoeffs {
        sa: vec![0.0; n],
        s: vec![0.0; n],
        g: vec![0.0; n],
        w: vec![0.0; n],
        kappa: vec![0.0; n + 1],
        shift: false,
    };
    for i in 0..n {
        let k = metric.coefficients(c, comp, t, comp.x(i));
        fc.sa[i] = k.s * k.a;
        fc.s[i] = k.s;
        fc.g[i] = k.b / k.a;
        fc.w[i] = k.s * k.b * k.b / k.a;
        fc.shift |= k.b != 0.0;
    }
    for j in 0..=n {
        let x = comp.x0 + (j as f64 - 0.5) * comp.dx;
        let k = metric.coefficients(c, comp, t, x);
        fc.kappa[j] = -k.s * k.c;
    }
    if comp.is_periodic() {
        fc.kappa[n] = fc.kappa[0];
    }
    Coeffs::Field(Box::new(fc))
}

fn build_component_plan(
    m: &Spacetime,
    c: usize,
    window: Option<FineWindow>,
    t_from: f64,
    t_to: f64,
) -> Result<ComponentPlan> {
    let comp = &m.components[c];
    let mut plan = ComponentPlan {
        n: comp.n_x,
        dx: comp.dx,
        periodic: comp.is_periodic(),
        times: vec![t_from],
        steps: Vec::new(),
    };
    if (t_from - t_to).abs() <= TIME_TOL * comp.dx {
        return Ok(plan);
    }
    if comp.is_diamond() {
        return Err(Error::Unsupported("evolution off the base slice of a diamond spacetime".into()));
    }
    for t in [t_from, t_to] {
        if t < comp.window[0] - TIME_TOL || t > comp.window[1] + TIME_TOL {
            return Err(Error::TimeOutOfRange { t, lo: comp.window[0], hi: comp.window[1] });
        }
    }
    let (lo, hi) = if t_from < t_to { (t_from, t_to) } else { (t_to, t_from) };
    let grid = grid_between(comp, window, lo, hi);
    let support = m.metric.time_support(c);
    let flat = std::sync::Arc::new(Coeffs::Flat);
    let mut intervals: Vec<[Strang; 3]> = Vec::with_capacity(grid.len());
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        let mut t = w[0];
        let mk = |t: f64, tau: f64| {
            let mid = t + 0.5 * tau;
            let coeffs = match support {
                Some([a, b]) if mid > a && mid < b => std::sync::Arc::new(field_coeffs(comp, &m.metric, c, mid)),
                _ => flat.clone(),
            };
            Strang { tau, coeffs }
        };
        let s1 = mk(t, G1 * h);
        t += G1 * h;
        let s2 = mk(t, G2 * h);
        t += G2 * h;
        let s3 = mk(t, G1 * h);
        intervals.push([s1, s2, s3]);
    }
    if t_from < t_to {
        plan.times = grid;
        plan.steps = intervals;
    } else {
        plan.times = grid.into_iter().rev().collect();
        plan.steps = intervals
            .into_iter()
            .rev()
            .map(|[a, b, c]| {
                let neg = |s: Strang| Strang { tau: -s.tau, coeffs: s.coeffs };
                [neg(c), neg(b), neg(a)]
            })
            .collect();
    }
    Ok(plan)
}

/// Solves `(diag + sub·S⁻ + sup·S⁺) x = rhs` in place, where `S±` shift by
/// one site; on a circle the corners wrap (Sherman–Morrison).
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], periodic: bool) {
    let n = diag.len();
    if !periodic {
        thomas(sub, diag, sup, rhs);
        return;
    }
    // A = T + u vᵀ with u = (γ, 0, …, 0, sup[n-1]), v = (1, 0, …, 0, sub[0]/γ).
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= sup[n - 1] * sub[0] / gamma;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = sup[n - 1];
    thomas(sub, &d, sup, rhs);
    thomas(sub, &d, sup, &mut u);
    let fact = (rhs[0] + sub[0] * rhs[n - 1] / gamma) / (1.0 + u[0] + sub[0] * u[n - 1] / gamma);
    for i in 0..n {
        rhs[i] -= fact * u[i];
    }
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        cp[i - 1] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * cp[i - 1];
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= cp[i] * rhs[i + 1];
    }
}

impl ComponentPlan {
    #[inline]
    fn nb(&self, v: &[f64], i: usize, d: isize) -> f64 {
        let j = i as isize + d;
        if self.periodic {
            v[j.rem_euclid(self.n as isize) as usize]
        } else if j < 0 || j >= self.n as isize {
            0.0
        } else {
            v[j as usize]
        }
    }

    fn drift(&self, phi: &mut [f64], pi: &[f64], tau: f64, k: &Coeffs) {
        match k {
            Coeffs::Flat => phi.iter_mut().zip(pi).for_each(|(p, q)| *p += tau * q),
            Coeffs::Field(f) => {
                for i in 0..self.n {
                    phi[i] += tau * pi[i] / f.sa[i];
                }
            }
        }
    }

    fn kick(&self, phi: &[f64], pi: &mut [f64], tau: f64, k: &Coeffs, m2: f64, scratch: &mut Vec<f64>) {
        let n = self.n;
        let h2 = 1.0 / (self.dx * self.dx);
        match k {
            Coeffs::Flat => {
                for i in 0..n {
                    let lap = (self.nb(phi, i, 1) - 2.0 * phi[i] + self.nb(phi, i, -1)) * h2;
                    pi[i] += tau * (lap - m2 * phi[i]);
                }
            }
            Coeffs::Field(f) => {
                let kap = |j: usize| f.kappa[j];
                if f.shift {
                    scratch.resize(n, 0.0);
                    for i in 0..n {
                        scratch[i] = f.w[i] * (self.nb(phi, i, 1) - self.nb(phi, i, -1)) / (2.0 * self.dx);
                    }
                }
                for i in 0..n {
                    let up = kap(i + 1) * (self.nb(phi, i, 1) - phi[i]);
                    let down = kap(i) * (phi[i] - self.nb(phi, i, -1));
                    let mut r = (up - down) * h2 - f.s[i] * m2 * phi[i];
                    if f.shift {
                        r += (self.nb(scratch, i, 1) - self.nb(scratch, i, -1)) / (2.0 * self.dx);
                    }
                    pi[i] += tau * r;
                }
            }
        }
    }

    /// Cayley step for the shift part `φ_t = −(g^tx/g^tt)∂_xφ`.
    fn shift(&self, phi: &mut [f64], pi: &mut [f64], tau: f64, k: &Coeffs) {
        let f = match k {
            Coeffs::Field(f) if f.shift => f,
            _ => return,
        };
        let n = self.n;
        let e = tau / (4.0 * self.dx);
        let at = |i: isize| f.g[i.rem_euclid(n as isize) as usize];
        // G_{i,i±1} = ±g_i/(2Δx); (I ± τG/2) has off-diagonals ±e·g_i.
        let rhs: Vec<f64> = (0..n).map(|i| phi[i] - e * f.g[i] * (self.nb(phi, i, 1) - self.nb(phi, i, -1))).collect();
        let diag = vec![1.0; n];
        let sup: Vec<f64> = (0..n).map(|i| e * f.g[i]).collect();
        let sub: Vec<f64> = (0..n).map(|i| -e * f.g[i]).collect();
        let mut x = rhs;
        solve_tridiagonal(&sub, &diag, &sup, &mut x, self.periodic);
        phi.copy_from_slice(&x);
        // Gᵀ_{i,i+1} = −g_{i+1}/(2Δx), Gᵀ_{i,i−1} = g_{i−1}/(2Δx); solve (I − τGᵀ/2) z = π.
        let sup_t: Vec<f64> = (0..n).map(|i| e * at(i as isize + 1)).collect();
        let sub_t: Vec<f64> = (0..n).map(|i| -e * at(i as isize - 1)).collect();
        let mut z = pi.to_vec();
        solve_tridiagonal(&sub_t, &diag, &sup_t, &mut z, self.periodic);
        for i in 0..n {
            let gp = if self.periodic || i + 1 < n { at(i as isize + 1) } else { 0.0 };
            let gm = if self.periodic || i > 0 { at(i as isize - 1) } else { 0.0 };
            pi[i] = z[i] - e * gp * self.nb(&z, i, 1) + e * gm * self.nb(&z, i, -1);
        }
    }

    fn strang(&self, phi: &mut [f64], pi: &mut [f64], s: &Strang, m2: f64, scratch: &mut Vec<f64>) {
        let h = 0.5 * s.tau;
        self.drift(phi, pi, h, &s.coeffs);
        self.kick(phi, pi, h, &s.coeffs, m2, scratch);
        self.shift(phi, pi, s.tau, &s.coeffs);
        self.kick(phi, pi, h, &s.coeffs, m2, scratch);
        self.drift(phi, pi, h, &s.coeffs);
    }

    fn run(&self, phi: &mut [f64], pi: &mut [f64], m2: f64, mut visit: impl FnMut(f64, &[f64], &[f64])) {
        let mut scratch = Vec::new();
        visit(self.times[0], phi, pi);
        for (k, st) in self.steps.iter().enumerate() {
            for s in st {
                self.strang(phi, pi, s, m2, &mut scratch);
            }
            visit(self.times[k + 1], phi, pi);
        }
    }
}

/// Linear evolution map between two slices of a spacetime.
#[derive(Debug)]
pub struct Propagator {
    plans: Vec<ComponentPlan>,
    offsets: Vec<usize>,
    dim: usize,
    mass: f64,
    pub t_from: f64,
    pub t_to: f64,
}

impl Propagator {
    pub fn new(m: &Spacetime, mass: f64, t_from: f64, t_to: f64) -> Result<Self> {
        let windows = FineWindow::of(m, &m.metric)?;
        Self::with_grid(m, mass, t_from, t_to, &windows)
    }

    /// Like [`Propagator::new`] with the time grid refined over `windows`
    /// instead of over the support of the metric perturbation.
    pub fn with_grid(m: &Spacetime, mass: f64, t_from: f64, t_to: f64, windows: &[Option<FineWindow>]) -> Result<Self> {
        if windows.len() != m.n_components() {
            return Err(Error::DimensionMismatch { expected: m.n_components(), got: windows.len() });
        }
        for (c, w) in windows.iter().enumerate() {
            if let (Some([a, b]), Some(w)) = (m.metric.time_support(c), w) {
                if a < w.support[0] || b > w.support[1] || w.substeps < m.metric.substeps(c, &m.components[c])? {
                    return Err(Error::Precondition(format!("time grid on component {c} does not cover the metric")));
                }
            } else if m.metric.time_support(c).is_some() {
                return Err(Error::Precondition(format!("time grid on component {c} does not cover the metric")));
            }
        }
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::Precondition(format!("mass must be non-negative, got {mass}")));
        }
        let mut plans = Vec::with_capacity(m.n_components());
        for c in 0..m.n_components() {
            let dx = m.components[c].dx;
            plans.push(build_component_plan(m, c, windows[c], snap_time(t_from, dx), snap_time(t_to, dx))?);
        }
        Ok(Propagator { plans, offsets: m.offsets(), dim: m.phase_dim(), mass, t_from, t_to })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Applies the map to a phase vector in place.
    pub fn apply(&self, v: &mut [f64]) {
        assert_eq!(v.len(), self.dim, "phase vector length");
        let m2 = self.mass * self.mass;
        for (p, &o) in self.plans.iter().zip(&self.offsets) {
            let (phi, pi) = v[o..o + 2 * p.n].split_at_mut(p.n);
            p.run(phi, pi, m2, |_, _, _| {});
        }
    }

    /// Applies the map to every column, in parallel.
    pub fn apply_columns(&self, mat: &mut DMatrix<f64>) {
        assert_eq!(mat.nrows(), self.dim, "phase vector length");
        let rows = self.dim;
        mat.as_mut_slice().par_chunks_mut(rows).for_each(|col| self.apply(col));
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut id = DMatrix::identity(self.dim, self.dim);
        self.apply_columns(&mut id);
        id
    }

    /// Runs component `c` and reports `(t, φ, π)` at every grid time.
    pub fn trace(&self, c: usize, v: &[f64], mut visit: impl FnMut(f64, &[f64], &[f64])) {
        let p = &self.plans[c];
        let o = self.offsets[c];
        let mut phi = v[o..o + p.n].to_vec();
        let mut pi = v[o + p.n..o + 2 * p.n].to_vec();
        p.run(&mut phi, &mut pi, self.mass * self.mass, &mut visit);
    }

    /// Grid times visited on component `c`.
    pub fn times(&self, c: usize) -> &[f64] {
        &self.plans[c].times
    }
}

/// Evolves data from its slice to `t_to` in `m` (with its metric).
pub fn evolve(m: &Spacetime, mass: f64, data: &CauchyData, t_to: f64) -> Result<CauchyData> {
    data.check_shape(m)?;
    if !data.is_finite() {
        return Err(Error::Precondition("non-finite Cauchy data".into()));
    }
    m.metric.validate(m)?;
    data.check_guard(m, t_to - data.t)?;
    let prop = Propagator::new(m, mass, data.t, t_to)?;
    let mut v = data.to_vector();
    prop.apply(&mut v);
    CauchyData::from_vector(m, t_to, &v)
}
