//! Kinematic and dynamical local subspaces of phase space and the
//! dynamical-locality verdict.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::compact::{
    causal_complement, causal_hull, hull_slice, in_cone, CausalComplement, CompactPiece, CompactSet, ComplementPart, Cone,
};
use crate::geometry::region::{admissible_compacts, base_points, causally_disjoint, lattice_maximal_compact, Region};
use crate::geometry::spacetime::{Spacetime, SpacetimeSpec};
use crate::linalg::{containment_angle, hcat, null_space, orthonormal_basis, principal_angles, svd};
use crate::rce::{rce_apply, rce_map};
use crate::solver::{Bump, CauchyData, Metric, MetricPerturbation, Polarization, Propagator};

/// Principal-angle tolerance for equality and containment of subspaces.
pub const ANGLE_TOL: f64 = 1e-10;

/// Relative singular-value cutoff when orthonormalising spanning sets.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Kinematic { region: Region },
    Bullet { compact: CompactSet },
    BulletNumeric { compact: CompactSet, maps: usize },
    Dynamical { region: Region },
    Full,
    Join,
    Meet,
}

/// Orthonormal basis (columns) of a subspace of phase space at `t_ref`.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    pub basis: DMatrix<f64>,
    pub provenance: Provenance,
    pub tolerance: f64,
}

impl Subspace {
    /// Orthonormalises the span of `columns`.
    pub fn span(columns: &DMatrix<f64>, provenance: Provenance) -> Self {
        Subspace { basis: orthonormal_basis(columns, RANK_TOL), provenance, tolerance: RANK_TOL }
    }

    pub fn zero(ambient: usize, provenance: Provenance) -> Self {
        Subspace { basis: DMatrix::zeros(ambient, 0), provenance, tolerance: RANK_TOL }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace { basis: DMatrix::identity(ambient, ambient), provenance: Provenance::Full, tolerance: RANK_TOL }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    /// Largest angle between a vector of `self` and `other`.
    pub fn angle_into(&self, other: &Subspace) -> f64 {
        containment_angle(&self.basis, &other.basis).0
    }

    pub fn is_subset_of(&self, other: &Subspace) -> bool {
        self.angle_into(other) <= ANGLE_TOL
    }

    pub fn join(&self, other: &Subspace) -> Subspace {
        Subspace::span(&hcat(&[&self.basis, &other.basis], self.ambient()), Provenance::Join)
    }

    /// Intersection: principal vectors of `self` at angle `≤ ANGLE_TOL`.
    pub fn meet(&self, other: &Subspace) -> Subspace {
        if self.dim() == 0 || other.dim() == 0 {
            return Subspace::zero(self.ambient(), Provenance::Meet);
        }
        let d = svd(&(self.basis.transpose() * &other.basis));
        let u = d.u;
        let keep: Vec<usize> = (0..d.s.len()).filter(|&i| d.s[i].clamp(0.0, 1.0).acos() <= ANGLE_TOL.max(1e-7)).collect();
        let mut cols = DMatrix::zeros(self.ambient(), keep.len());
        for (j, &i) in keep.iter().enumerate() {
            cols.set_column(j, &(&self.basis * u.column(i)));
        }
        Subspace::span(&cols, Provenance::Meet)
    }

    /// Distance of `v` from the subspace relative to `‖v‖`.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        let r = v - &self.basis * (self.basis.transpose() * v);
        r.norm() / v.norm()
    }
}

/// Unit data on lattice points `pts` of component `c` at `t`, evolved to
/// `t_ref` on the background and placed in the full phase space.
fn evolved_units(m: &Spacetime, mass: f64, c: usize, pts: &[usize], t: f64) -> Result<DMatrix<f64>> {
    let comp = &m.components[c];
    let n = comp.n_x;
    let k = pts.len();
    let mut block = DMatrix::zeros(2 * n, 2 * k);
    for (j, &i) in pts.iter().enumerate() {
        block[(i, j)] = 1.0;
        block[(n + i, k + j)] = 1.0;
    }
    if (t - m.t_ref).abs() > 1e-12 {
        Propagator::new(&m.single(c), mass, t, m.t_ref)?.apply_columns(&mut block);
    }
    let mut out = DMatrix::zeros(m.phase_dim(), 2 * k);
    let o = m.offsets()[c];
    out.view_mut((o, 0), (2 * n, 2 * k)).copy_from(&block);
    Ok(out)
}

/// `A^kin(M;O)`: data strictly inside the bases of `O`, evolved to `t_ref`.
pub fn kinematic_subspace(m: &Spacetime, o: &Region, mass: f64) -> Result<Subspace> {
    o.validate(m)?;
    let prov = Provenance::Kinematic { region: o.clone() };
    let mut cols = Vec::new();
    for r in o.members() {
        match r {
            Region::TimeSlab { component, .. } => {
                for c in 0..m.n_components() {
                    if component.is_none_or(|k| k == c) {
                        let pts: Vec<usize> = (0..m.components[c].n_x).collect();
                        cols.push(evolved_units(m, mass, c, &pts, m.t_ref)?);
                    }
                }
            }
            Region::Diamond { component, t0, base } | Region::Truncated { component, t0, base, .. } => {
                let pts = base_points(&m.components[*component], *base);
                cols.push(evolved_units(m, mass, *component, &pts, *t0)?);
            }
            Region::Union { .. } => unreachable!("members are flattened"),
        }
    }
    let refs: Vec<&DMatrix<f64>> = cols.iter().collect();
    let all = hcat(&refs, m.phase_dim());
    if all.ncols() == 0 {
        return Err(Error::InvalidRegion("region holds no interior lattice point".into()));
    }
    Ok(Subspace::span(&all, prov))
}

/// Lattice points of `c` within half a cell of `[a, b]`.
fn points_near(m: &Spacetime, c: usize, x: [f64; 2]) -> Vec<usize> {
    let comp = &m.components[c];
    (0..comp.n_x)
        .filter(|&i| comp.distance_to_interval(comp.x(i), x[0], x[1]) <= 0.5 * comp.dx + 1e-9)
        .collect()
}

/// Common waist time of the pieces of `K` on component `c`.
fn common_waist(k: &CompactSet, c: usize) -> Option<f64> {
    let mut waists = k.on_component(c).map(|p| p.waist().0);
    let w = waists.next()?;
    waists.all(|v| (v - w).abs() < 1e-9).then_some(w)
}

/// Massless constants on component `c`: `φ ≡ 1` when `K^⊥` is connected
/// there, otherwise one indicator per bounded part, laid on the common
/// waist where null rays from the hull boundary stay on the boundary.
fn massless_constants(m: &Spacetime, k: &CompactSet, c: usize, perp: &CausalComplement, mass: f64) -> Result<Vec<DVector<f64>>> {
    let comp = &m.components[c];
    let parts: Vec<&ComplementPart> = perp.parts.iter().filter(|p| p.component == c).collect();
    let Some(kref) = comp.level_of(m.t_ref) else { return Ok(Vec::new()) };
    let at_ref = perp.trace(m, c, kref);
    let wanted: Vec<usize> = parts
        .iter()
        .filter(|p| p.bounded && at_ref.contains(&Some(p.label)))
        .map(|p| p.label)
        .collect();
    if wanted.is_empty() {
        return Ok(Vec::new());
    }
    if parts.len() == 1 {
        return Ok(vec![constant_vector(m, c)]);
    }
    let waist = common_waist(k, c).ok_or_else(|| {
        Error::Unsupported("massless oracle for a disconnected complement needs a common waist".into())
    })?;
    let in_hull = hull_slice(m, k, c, waist, Cone::Both);
    let levels = [(waist / comp.dx).floor() as i64, (waist / comp.dx).ceil() as i64];
    let traces: Vec<Vec<Option<usize>>> = levels.iter().map(|&l| perp.trace(m, c, l)).collect();
    let n = comp.n_x;
    // Runs of points outside the hull, merged across the seam on circles.
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if in_hull[i] {
            continue;
        }
        match runs.last_mut() {
            Some(r) if *r.last().expect("nonempty run") + 1 == i => r.push(i),
            _ => runs.push(vec![i]),
        }
    }
    if comp.is_periodic() && runs.len() > 1 && runs[0][0] == 0 && *runs.last().unwrap().last().unwrap() == n - 1 {
        let first = runs.remove(0);
        runs.last_mut().unwrap().extend(first);
    }
    let mut out = Vec::new();
    for label in wanted {
        let pts: Vec<usize> = runs
            .iter()
            .filter(|r| r.iter().any(|&i| traces.iter().any(|t| t[i] == Some(label))))
            .flatten()
            .copied()
            .collect();
        if pts.is_empty() {
            continue;
        }
        let units = evolved_units(m, mass, c, &pts, waist)?;
        out.push(units.columns(0, pts.len()).column_sum());
    }
    Ok(out)
}

/// `A•(M;K)` from the support characterisation: data carried by the waist
/// of each piece, plus for `m = 0` the solutions constant on each bounded
/// connected part of `K^⊥` that meets the reference slice.
pub fn bullet_subspace_oracle(m: &Spacetime, k: &CompactSet, mass: f64) -> Result<Subspace> {
    causal_hull(m, k)?;
    let mut cols = Vec::new();
    for p in &k.pieces {
        let c = p.component();
        let (t, x) = p.waist();
        let pts = points_near(m, c, x);
        cols.push(evolved_units(m, mass, c, &pts, t)?);
    }
    if mass == 0.0 {
        let perp = causal_complement(m, k)?;
        for c in 0..m.n_components() {
            for v in massless_constants(m, k, c, &perp, mass)? {
                cols.push(DMatrix::from_column_slice(m.phase_dim(), 1, v.as_slice()));
            }
        }
    }
    let refs: Vec<&DMatrix<f64>> = cols.iter().collect();
    Ok(Subspace::span(&hcat(&refs, m.phase_dim()), Provenance::Bullet { compact: k.clone() }))
}

/// Deterministic grid of bumps tiling `K^⊥` inside a time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSampler {
    /// Bump radius in both `t` and `x`.
    pub radius: f64,
    /// Centre spacing as a fraction of the radius.
    pub spacing: f64,
    pub amplitude: f64,
    pub polarizations: Vec<Polarization>,
    /// Bump supports lie inside `(window[0], window[1])`.
    pub window: [f64; 2],
    /// Extra levels of halved bumps, kept only where the coarser bump at
    /// the same centre would touch `J(K)`.
    pub refinements: usize,
}

impl PerturbationSampler {
    pub fn new(window: [f64; 2]) -> Self {
        PerturbationSampler {
            radius: 0.3,
            spacing: 0.7,
            amplitude: 0.4,
            polarizations: vec![Polarization::Tt],
            window,
            refinements: 0,
        }
    }

    fn centers(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let mut v = Vec::new();
        let mut x = lo;
        while x <= hi + 1e-9 {
            v.push(x);
            x = lo + v.len() as f64 * step;
        }
        v
    }

    /// Perturbations whose closed support misses `J(K)`.
    pub fn sample(&self, m: &Spacetime, k: &CompactSet) -> Result<Vec<Metric>> {
        if !(self.radius > 0.0 && self.spacing > 0.0) {
            return Err(Error::Precondition("sampler radius and spacing must be positive".into()));
        }
        let mut out = Vec::new();
        for (c, comp) in m.components.iter().enumerate() {
            if comp.is_diamond() {
                continue;
            }
            let pieces: Vec<&CompactPiece> = k.on_component(c).collect();
            let hits = |t: f64, x: f64| pieces.iter().any(|p| in_cone(comp, p, Cone::Both, t, x));
            let clear = |tc: f64, xc: f64, r: f64| {
                !hits(tc, xc)
                    && (0..256).all(|j| {
                        let th = j as f64 * std::f64::consts::TAU / 256.0;
                        !hits(tc + r * th.cos(), xc + r * th.sin())
                    })
            };
            for level in 0..=self.refinements {
                let r = self.radius / (1u32 << level) as f64;
                let step = r * self.spacing;
                let t_lo = self.window[0].max(comp.window[0]) + r + 1e-6;
                let t_hi = self.window[1].min(comp.window[1]) - r - 1e-6;
                let (x_lo, x_hi) = match comp.circumference() {
                    Some(l) => (comp.x0, comp.x0 + l - step + 1e-9),
                    None => {
                        let [a, b] = comp.admissible_range();
                        (a + r + 1e-6, b - r - 1e-6)
                    }
                };
                for &tc in &Self::centers(t_lo, t_hi, step) {
                    for &xc in &Self::centers(x_lo, x_hi, step) {
                        if !clear(tc, xc, r) || (level > 0 && clear(tc, xc, 2.0 * r)) {
                            continue;
                        }
                        for &pol in &self.polarizations {
                            let bump = Bump::new([tc, xc], [r, r]);
                            out.push(Metric::single(MetricPerturbation::polarized(c, pol, bump, self.amplitude)));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Fixed space of sampled rce maps, with the threshold calibration.
#[derive(Clone, Debug)]
pub struct NumericBullet {
    pub subspace: Subspace,
    pub maps: usize,
    /// `τ = 10 ×` the largest residual of an oracle basis vector.
    pub tau: f64,
    pub max_oracle_residual: f64,
    /// Ascending singular values of the stacked `R_j − I`.
    pub singular_values: Vec<f64>,
    /// Every sampled map was the identity.
    pub degenerate: bool,
}

/// `A•(M;K)` as the common fixed space of sampled `rce_M[h]`, `h ∈ H(M;K^⊥)`.
pub fn bullet_subspace_numeric(m: &Spacetime, k: &CompactSet, mass: f64, sampler: &PerturbationSampler) -> Result<NumericBullet> {
    let hs = sampler.sample(m, k)?;
    let maps: Vec<DMatrix<f64>> = hs
        .par_iter()
        .map(|h| rce_map(m, mass, h).map(|r| r.matrix))
        .collect::<Result<_>>()?;
    numeric_fixed_space(m, k, mass, &maps)
}

/// Fixed space of the given maps, calibrated against the oracle for `K`.
pub fn numeric_fixed_space(m: &Spacetime, k: &CompactSet, mass: f64, maps: &[DMatrix<f64>]) -> Result<NumericBullet> {
    if maps.is_empty() {
        return Err(Error::Precondition("sampler produced no admissible perturbation".into()));
    }
    let d = m.phase_dim();
    let id = DMatrix::<f64>::identity(d, d);
    let mut stacked = DMatrix::zeros(maps.len() * d, d);
    for (j, r) in maps.iter().enumerate() {
        stacked.view_mut((j * d, 0), (d, d)).copy_from(&(r - &id));
    }
    let degenerate = stacked.amax() <= 1e-12;
    let oracle = bullet_subspace_oracle(m, k, mass)?;
    let res = &stacked * &oracle.basis;
    let max_res = (0..res.ncols()).map(|j| res.column(j).norm()).fold(0.0, f64::max);
    let tau = 10.0 * max_res;
    let (basis, mut sv) = null_space(&stacked, tau);
    sv.sort_by(f64::total_cmp);
    Ok(NumericBullet {
        subspace: Subspace {
            basis,
            provenance: Provenance::BulletNumeric { compact: k.clone(), maps: maps.len() },
            tolerance: tau,
        },
        maps: maps.len(),
        tau,
        max_oracle_residual: max_res,
        singular_values: sv,
        degenerate,
    })
}

/// Largest `‖R u − u‖` over `maps`.
pub fn rce_residual(u: &DVector<f64>, maps: &[DMatrix<f64>]) -> f64 {
    maps.iter().map(|r| (r * u - u).norm()).fold(0.0, f64::max)
}

/// Largest `‖rce[h] u − u‖ / ‖u‖` over the perturbations `sampler` places in `K^⊥`.
pub fn sampled_rce_residual(
    m: &Spacetime,
    k: &CompactSet,
    mass: f64,
    sampler: &PerturbationSampler,
    u: &DVector<f64>,
) -> Result<f64> {
    let hs = sampler.sample(m, k)?;
    if hs.is_empty() {
        return Err(Error::Precondition("sampler produced no admissible perturbation".into()));
    }
    let data = CauchyData::from_vector(m, m.t_ref, u.as_slice())?;
    let res = hs
        .par_iter()
        .map(|h| {
            let v = DVector::from_vec(rce_apply(m, mass, h, &data)?.to_vector());
            Ok((v - u).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(res.into_iter().fold(0.0, f64::max) / u.norm())
}

/// Compacts used to sample `K(M;O)`: the shrink schedule plus the
/// lattice-maximal member.
pub fn compact_family(m: &Spacetime, o: &Region) -> Result<Vec<CompactSet>> {
    let mut ks = admissible_compacts(m, o, 3)?;
    ks.push(lattice_maximal_compact(m, o)?);
    Ok(ks)
}

/// `A^dyn(M;O)`: span of the oracle bullet subspaces over the sampled family.
pub fn dynamical_subspace(m: &Spacetime, o: &Region, mass: f64) -> Result<Subspace> {
    o.validate(m)?;
    let prov = Provenance::Dynamical { region: o.clone() };
    let slabs = o.members().iter().all(|r| matches!(r, Region::TimeSlab { .. }));
    if slabs {
        // A slab holds every compact piece of its components.
        let mut s = kinematic_subspace(m, o, mass)?;
        s.provenance = prov;
        return Ok(s);
    }
    let mut cols = Vec::new();
    for k in compact_family(m, o)? {
        cols.push(bullet_subspace_oracle(m, &k, mass)?.basis);
    }
    let refs: Vec<&DMatrix<f64>> = cols.iter().collect();
    Ok(Subspace::span(&hcat(&refs, m.phase_dim()), prov))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Ascending principal angles.
    pub angles: Vec<f64>,
    pub a_in_b: f64,
    pub b_in_a: f64,
    pub a_subset_b: bool,
    pub b_subset_a: bool,
    /// Unit vector of `A` farthest from `B`, when `A ⊄ B`.
    pub witness_a: Option<Vec<f64>>,
    pub witness_b: Option<Vec<f64>>,
}

pub fn compare_subspaces(a: &Subspace, b: &Subspace) -> Result<Comparison> {
    if a.ambient() != b.ambient() {
        return Err(Error::DimensionMismatch { expected: a.ambient(), got: b.ambient() });
    }
    let (a_in_b, wa) = containment_angle(&a.basis, &b.basis);
    let (b_in_a, wb) = containment_angle(&b.basis, &a.basis);
    let a_subset_b = a_in_b <= ANGLE_TOL;
    let b_subset_a = b_in_a <= ANGLE_TOL;
    Ok(Comparison {
        angles: principal_angles(&a.basis, &b.basis),
        a_in_b,
        b_in_a,
        a_subset_b,
        b_subset_a,
        witness_a: wa.filter(|_| !a_subset_b).map(|v| v.as_slice().to_vec()),
        witness_b: wb.filter(|_| !b_subset_a).map(|v| v.as_slice().to_vec()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    /// Angle between the witness and the kinematic subspace.
    pub angle_to_kin: f64,
    /// Relative rce residual under sampled perturbations in `K^⊥`, for the
    /// lattice-maximal `K` of the region.
    pub rce_residual: Option<f64>,
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalityVerdict {
    pub spacetime: SpacetimeSpec,
    pub region: Region,
    pub mass: f64,
    pub dim_kin: usize,
    pub dim_dyn: usize,
    /// Largest principal angle between the two subspaces, `π/2` when the
    /// dimensions differ.
    pub max_angle: f64,
    pub witnesses: Vec<Witness>,
    pub pass: bool,
}

/// `φ ≡ 1` on component `c`, `π = 0`, normalised.
pub fn constant_vector(m: &Spacetime, c: usize) -> DVector<f64> {
    let mut v = DVector::zeros(m.phase_dim());
    let o = m.offsets()[c];
    let n = m.components[c].n_x;
    for i in 0..n {
        v[o + i] = 1.0;
    }
    v / (n as f64).sqrt()
}

/// Kinematic and dynamical subspaces of `O` coincide.
pub fn locality_verdict(m: &Spacetime, o: &Region, mass: f64) -> Result<LocalityVerdict> {
    let kin = kinematic_subspace(m, o, mass)?;
    let dynm = dynamical_subspace(m, o, mass)?;
    let cmp = compare_subspaces(&kin, &dynm)?;
    let max_angle = if kin.dim() == dynm.dim() {
        cmp.angles.last().copied().unwrap_or(0.0)
    } else {
        std::f64::consts::FRAC_PI_2
    };
    let pass = cmp.a_subset_b && cmp.b_subset_a;
    let mut witnesses = Vec::new();
    if !pass {
        let kmax = lattice_maximal_compact(m, o)?;
        let sampler = PerturbationSampler::new([f64::MIN, f64::MAX]);
        for c in 0..m.n_components() {
            let u = constant_vector(m, c);
            if mass == 0.0 && dynm.residual(&u) <= 1e-8 && kin.residual(&u) > 1e-8 {
                witnesses.push(Witness {
                    label: format!("constant on component {c}"),
                    angle_to_kin: kin.residual(&u).clamp(0.0, 1.0).asin(),
                    rce_residual: Some(sampled_rce_residual(m, &kmax, mass, &sampler, &u)?),
                    vector: u.as_slice().to_vec(),
                });
            }
        }
        if let Some(w) = &cmp.witness_b {
            witnesses.push(Witness {
                label: "dynamical, farthest from kinematic".into(),
                angle_to_kin: cmp.b_in_a,
                rce_residual: None,
                vector: w.clone(),
            });
        }
        if let Some(w) = &cmp.witness_a {
            let v = DVector::from_column_slice(w);
            witnesses.push(Witness {
                label: "kinematic, farthest from dynamical".into(),
                angle_to_kin: kin.residual(&v).clamp(0.0, 1.0).asin(),
                rce_residual: None,
                vector: w.clone(),
            });
        }
    }
    Ok(LocalityVerdict {
        spacetime: m.spec.clone(),
        region: o.clone(),
        mass,
        dim_kin: kin.dim(),
        dim_dyn: dynm.dim(),
        max_angle,
        witnesses,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub name: String,
    /// `None` when the relation does not apply (e.g. `K1 ⊄ K2` for isotony).
    pub angle: Option<f64>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetReport {
    pub k1: CompactSet,
    pub k2: CompactSet,
    pub mass: f64,
    pub dim_k1: usize,
    pub dim_k2: usize,
    pub dim_union: usize,
    pub dim_intersection: Option<usize>,
    pub dim_empty: usize,
    pub inclusions: Vec<Inclusion>,
    pub pass: bool,
}

fn inclusion(name: &str, a: &Subspace, b: &Subspace) -> Inclusion {
    let angle = a.angle_into(b);
    Inclusion { name: name.into(), angle: Some(angle), holds: angle <= ANGLE_TOL }
}

/// Isotony and the inclusion relations of the bullet net for one pair.
pub fn check_net_properties(m: &Spacetime, k1: &CompactSet, k2: &CompactSet, mass: f64) -> Result<NetReport> {
    let a1 = bullet_subspace_oracle(m, k1, mass)?;
    let a2 = bullet_subspace_oracle(m, k2, mass)?;
    let au = bullet_subspace_oracle(m, &k1.union(k2), mass)?;
    let a0 = bullet_subspace_oracle(m, &CompactSet::empty(), mass)?;
    let mut inc = Vec::new();
    for (name, sub, sup, applies) in [
        ("isotony K1 ⊆ K2", &a1, &a2, k1.is_subset_of(m, k2)),
        ("isotony K2 ⊆ K1", &a2, &a1, k2.is_subset_of(m, k1)),
    ] {
        if applies {
            inc.push(inclusion(name, sub, sup));
        } else {
            inc.push(Inclusion { name: name.into(), angle: None, holds: true });
        }
    }
    inc.push(inclusion("join ⊆ union", &a1.join(&a2), &au));
    let dim_intersection = match k1.intersection(k2) {
        Ok(ki) => {
            let ai = bullet_subspace_oracle(m, &ki, mass)?;
            inc.push(inclusion("intersection ⊆ K1", &ai, &a1));
            inc.push(inclusion("intersection ⊆ K2", &ai, &a2));
            Some(ai.dim())
        }
        Err(Error::InvalidCompact(_)) => None,
        Err(e) => return Err(e),
    };
    inc.push(inclusion("empty ⊆ K1", &a0, &a1));
    inc.push(inclusion("empty ⊆ K2", &a0, &a2));
    let pass = inc.iter().all(|i| i.holds);
    Ok(NetReport {
        k1: k1.clone(),
        k2: k2.clone(),
        mass,
        dim_k1: a1.dim(),
        dim_k2: a2.dim(),
        dim_union: au.dim(),
        dim_intersection,
        dim_empty: a0.dim(),
        inclusions: inc,
        pass,
    })
}

/// Twelve `(K1, K2)` pairs on component 0 around the reference slice:
/// nested, overlapping, disjoint, timelike-separated and empty cases.
pub fn net_cases(m: &Spacetime) -> Vec<(String, CompactSet, CompactSet)> {
    let t = m.t_ref;
    let comp = &m.components[0];
    let c = match comp.circumference() {
        Some(_) => comp.x0 + 0.5 * comp.circumference().unwrap_or(0.0),
        None => 0.5 * (comp.admissible_range()[0] + comp.admissible_range()[1]),
    };
    let d = |a: f64, b: f64| CompactSet::diamond(0, t, [c + a, c + b]);
    let r = |t0: f64, t1: f64, a: f64, b: f64| CompactSet::rect(0, [t + t0, t + t1], [c + a, c + b]);
    let e = CompactSet::empty();
    vec![
        ("nested diamonds".into(), d(-0.1, 0.1), d(-0.3, 0.3)),
        ("nested, reversed".into(), d(-0.3, 0.3), d(-0.1, 0.1)),
        ("overlapping diamonds".into(), d(-0.3, 0.1), d(-0.1, 0.3)),
        ("disjoint diamonds".into(), d(-0.4, -0.2), d(0.2, 0.4)),
        ("touching diamonds".into(), d(-0.3, 0.0), d(0.0, 0.3)),
        ("equal diamonds".into(), d(-0.2, 0.2), d(-0.2, 0.2)),
        ("point in diamond".into(), CompactSet::point(0, t, c), d(-0.2, 0.2)),
        ("rect in rect".into(), r(-0.05, 0.05, -0.1, 0.1), r(-0.1, 0.1, -0.2, 0.2)),
        ("overlapping rects".into(), r(-0.1, 0.1, -0.3, 0.0), r(-0.1, 0.1, -0.1, 0.2)),
        ("timelike-separated rects".into(), r(-0.3, -0.2, -0.1, 0.1), r(0.2, 0.3, -0.1, 0.1)),
        ("empty and diamond".into(), e.clone(), d(-0.2, 0.2)),
        ("empty and empty".into(), e.clone(), e),
    ]
}

/// Kinematic subspaces of causally disjoint regions meet only in zero.
pub fn extended_locality_check(m: &Spacetime, o1: &Region, o2: &Region, mass: f64) -> Result<bool> {
    if !causally_disjoint(m, o1, o2)? {
        return Err(Error::Precondition("regions are not causally disjoint".into()));
    }
    let a = kinematic_subspace(m, o1, mass)?;
    let b = kinematic_subspace(m, o2, mass)?;
    Ok(a.meet(&b).dim() == 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditivityReport {
    pub spacetime: SpacetimeSpec,
    pub mass: f64,
    pub regions: Vec<Region>,
    pub join_dim: usize,
    pub phase_dim: usize,
    /// `2 ×` the lattice points strictly inside some base of the family.
    pub covered_dim: usize,
    pub reaches_phase_dim: bool,
    pub reaches_covered_dim: bool,
}

/// Three overlapping truncated diamonds on each evolvable component,
/// centred on the reference slice and as wide as the hull margins allow.
pub fn covering_family(m: &Spacetime) -> Vec<Region> {
    let t0 = m.t_ref;
    let mut out = Vec::new();
    for (c, comp) in m.components.iter().enumerate() {
        if comp.is_diamond() {
            continue;
        }
        let reach = (t0 - comp.window[0]).max(comp.window[1] - t0);
        let (lo, hi) = match comp.circumference() {
            Some(l) => (comp.x0, comp.x0 + l),
            None => {
                let [a, b] = comp.admissible_range();
                (a + reach, b - reach)
            }
        };
        let w = (hi - lo) / 3.0;
        let pad = if comp.is_periodic() { 0.25 * w } else { 0.0 };
        for j in 0..3 {
            let a = lo + j as f64 * w - pad - if j > 0 { 0.1 * w } else { 0.0 };
            let b = lo + (j + 1) as f64 * w + pad + if j < 2 { 0.1 * w } else { 0.0 };
            let h = 0.25 * (b - a);
            out.push(Region::Truncated { component: c, t0, base: [a, b], t: [t0 - h, t0 + h] });
        }
    }
    out
}

/// Whether the dynamical subspaces of a covering family span phase space.
pub fn additivity_check(m: &Spacetime, mass: f64) -> Result<AdditivityReport> {
    additivity_check_with(m, mass, &covering_family(m))
}

pub fn additivity_check_with(m: &Spacetime, mass: f64, regions: &[Region]) -> Result<AdditivityReport> {
    let mut join = Subspace::zero(m.phase_dim(), Provenance::Join);
    let mut covered = vec![Vec::new(); m.n_components()];
    for o in regions {
        join = join.join(&dynamical_subspace(m, o, mass)?);
        for (c, _, base) in o.bases() {
            covered[c].extend(base_points(&m.components[c], base));
        }
    }
    let covered_dim: usize = covered
        .iter_mut()
        .map(|v| {
            v.sort_unstable();
            v.dedup();
            2 * v.len()
        })
        .sum();
    Ok(AdditivityReport {
        spacetime: m.spec.clone(),
        mass,
        regions: regions.to_vec(),
        join_dim: join.dim(),
        phase_dim: m.phase_dim(),
        covered_dim,
        reaches_phase_dim: join.dim() == m.phase_dim(),
        reaches_covered_dim: join.dim() >= covered_dim,
    })
}
