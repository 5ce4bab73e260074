//! Theories as functors on the catalog: Klein–Gordon, its direct-sum powers
//! and diagonal theories, the copower transformations between them, and
//! checks of the functor, naturality and time-slice properties.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::embedding::{validate_embedding, ComponentMap, Embedding};
use crate::geometry::region::Region;
use crate::geometry::spacetime::{build_spacetime, CauchyClass, Spacetime, SpacetimeSpec};
use crate::linalg::{block_diag, condition_number, copower, omega, principal_angles, rank};
use crate::localization::{dynamical_subspace, Provenance, Subspace};
use crate::rce::{rce_map, LinearSymplecticMap};
use crate::solver::{Metric, Propagator};

/// Residual bound for functor laws, naturality and commuting squares.
pub const LAW_TOL: f64 = 1e-10;

/// A square component whose condition number stays below this is an isomorphism.
pub const ISO_COND: f64 = 1e8;

/// Bound on `‖rce^{φ_Δ} − ⊕ rce^A‖` in the factorisation check.
pub const RCE_FACTOR_TOL: f64 = 1e-8;

/// Object and morphism maps of a theory.
pub trait TheoryFunctor {
    fn name(&self) -> String;
    fn dim(&self, m: &Spacetime) -> usize;
    fn omega(&self, m: &Spacetime) -> DMatrix<f64>;
    fn morphism(&self, psi: &Embedding) -> Result<LinearSymplecticMap>;
}

/// Multiplicity rule of a diagonal theory: `λ = 1` on components with a
/// noncompact Cauchy surface and `lambda_compact` on circles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalSpec {
    pub lambda_compact: usize,
}

impl DiagonalSpec {
    /// One copy on `D`, two on anything containing a circle.
    pub fn one_field_two_field() -> Self {
        DiagonalSpec { lambda_compact: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_compact == 0 {
            return Err(Error::Precondition("λ(compact) must be at least λ(noncompact) = 1".into()));
        }
        Ok(())
    }

    pub fn lambda(&self, class: CauchyClass) -> usize {
        match class {
            CauchyClass::Compact => self.lambda_compact,
            CauchyClass::Noncompact => 1,
        }
    }

    /// `μ(M) = max λ` over the components of `M`.
    pub fn mu(&self, m: &Spacetime) -> usize {
        m.cauchy_classification().into_iter().map(|c| self.lambda(c)).max().unwrap_or(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Theory {
    KleinGordon { mass: f64 },
    Power { base: Box<Theory>, k: usize },
    Diagonal { base: Box<Theory>, spec: DiagonalSpec },
}

pub fn kg_theory(mass: f64) -> Result<Theory> {
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(Error::Precondition(format!("mass must be non-negative, got {mass}")));
    }
    Ok(Theory::KleinGordon { mass })
}

/// `A^{⊕k}`; `k = 1` returns `A` itself.
pub fn power_theory(a: &Theory, k: usize) -> Result<Theory> {
    match k {
        0 => Err(Error::Precondition("a power needs k >= 1".into())),
        1 => Ok(a.clone()),
        _ => Ok(Theory::Power { base: Box::new(a.clone()), k }),
    }
}

pub fn diagonal_theory(a: &Theory, spec: DiagonalSpec) -> Result<Theory> {
    spec.validate()?;
    Ok(Theory::Diagonal { base: Box::new(a.clone()), spec })
}

impl Theory {
    /// Number of copies of the innermost theory carried over `m`.
    pub fn copies(&self, m: &Spacetime) -> usize {
        match self {
            Theory::KleinGordon { .. } => 1,
            Theory::Power { base, k } => k * base.copies(m),
            Theory::Diagonal { base, spec } => spec.mu(m) * base.copies(m),
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Theory::KleinGordon { mass } => *mass,
            Theory::Power { base, .. } | Theory::Diagonal { base, .. } => base.mass(),
        }
    }

    /// The theory claims the time-slice axiom; every catalog theory does.
    pub fn claims_time_slice(&self) -> bool {
        true
    }

    /// Claimed dynamical locality: massive Klein–Gordon and its powers.
    pub fn claims_dynamical_locality(&self) -> bool {
        match self {
            Theory::KleinGordon { mass } => *mass > 0.0,
            Theory::Power { base, .. } => base.claims_dynamical_locality(),
            Theory::Diagonal { base, spec } => spec.lambda_compact == 1 && base.claims_dynamical_locality(),
        }
    }

    /// Copies of one Klein–Gordon field laid out consecutively: the shape
    /// copower transformations act on.
    fn is_flat_stack(&self) -> bool {
        match self {
            Theory::KleinGordon { .. } => true,
            Theory::Power { base, .. } | Theory::Diagonal { base, .. } => {
                matches!(**base, Theory::KleinGordon { .. })
            }
        }
    }

    fn matrix(&self, psi: &Embedding) -> Result<DMatrix<f64>> {
        match self {
            Theory::KleinGordon { mass } => kg_morphism(*mass, psi),
            Theory::Power { base, k } => Ok(block_diag(&vec![base.matrix(psi)?; *k])),
            Theory::Diagonal { base, spec } => {
                let (mu_m, mu_n) = (spec.mu(&psi.domain), spec.mu(&psi.codomain));
                if mu_m > mu_n {
                    return Err(Error::Precondition(format!("μ decreases along the embedding ({mu_m} > {mu_n})")));
                }
                let b = base.matrix(psi)?;
                Ok(copower(b.nrows(), mu_m, mu_n) * block_diag(&vec![b; mu_m]))
            }
        }
    }
}

impl TheoryFunctor for Theory {
    fn name(&self) -> String {
        match self {
            Theory::KleinGordon { mass } => format!("KG(m={mass})"),
            Theory::Power { base, k } => format!("{}^⊕{k}", base.name()),
            Theory::Diagonal { base, spec } => format!("{}_Δ(λc={})", base.name(), spec.lambda_compact),
        }
    }

    fn dim(&self, m: &Spacetime) -> usize {
        match self {
            Theory::KleinGordon { .. } => m.phase_dim(),
            Theory::Power { base, k } => k * base.dim(m),
            Theory::Diagonal { base, spec } => spec.mu(m) * base.dim(m),
        }
    }

    fn omega(&self, m: &Spacetime) -> DMatrix<f64> {
        match self {
            Theory::KleinGordon { .. } => omega(m),
            Theory::Power { base, k } => block_diag(&vec![base.omega(m); *k]),
            Theory::Diagonal { base, spec } => block_diag(&vec![base.omega(m); spec.mu(m)]),
        }
    }

    fn morphism(&self, psi: &Embedding) -> Result<LinearSymplecticMap> {
        Ok(LinearSymplecticMap::new(
            self.matrix(psi)?,
            format!("{}(embedding)", self.name()),
            &self.omega(&psi.domain),
            &self.omega(&psi.codomain),
        ))
    }
}

/// Relocates data along each component map at the image slice, extends by
/// zero, and evolves on the codomain background to its reference slice.
fn kg_morphism(mass: f64, psi: &Embedding) -> Result<DMatrix<f64>> {
    let (dom, cod) = (&psi.domain, &psi.codomain);
    let (od, oc) = (dom.offsets(), cod.offsets());
    let mut out = DMatrix::zeros(cod.phase_dim(), dom.phase_dim());
    for rm in &psi.maps {
        let (dc, cc) = (&dom.components[rm.from], &cod.components[rm.to]);
        let (n, nc) = (dc.n_x, cc.n_x);
        let mut block = DMatrix::zeros(2 * nc, 2 * n);
        for i in 0..n {
            let j = rm.target(i, nc, cc.is_periodic());
            block[(j, i)] = 1.0;
            block[(nc + j, n + i)] = 1.0;
        }
        let t = psi.image_slice(rm.from);
        if (t - cod.t_ref).abs() > 1e-12 {
            Propagator::new(&cod.single(rm.to), mass, t, cod.t_ref)?.apply_columns(&mut block);
        }
        out.view_mut((oc[rm.to], od[rm.from]), (2 * nc, 2 * n)).copy_from(&block);
    }
    Ok(out)
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    (a - b).amax()
}

fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    m.clone().lu().try_inverse().ok_or_else(|| Error::Precondition("map is singular".into()))
}

/// `v ↦ (v, 0, …, 0)` between stacks of the same field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaturalTransformation {
    pub name: String,
    pub source: Theory,
    pub target: Theory,
}

impl NaturalTransformation {
    pub fn copower(name: impl Into<String>, source: Theory, target: Theory) -> Result<Self> {
        if !source.is_flat_stack() || !target.is_flat_stack() {
            return Err(Error::Unsupported("copowers between nested stacks".into()));
        }
        if source.mass() != target.mass() {
            return Err(Error::Precondition("source and target stack different fields".into()));
        }
        Ok(NaturalTransformation { name: name.into(), source, target })
    }

    pub fn identity(a: &Theory) -> Result<Self> {
        Self::copower(format!("id({})", a.name()), a.clone(), a.clone())
    }

    pub fn component(&self, m: &Spacetime) -> Result<DMatrix<f64>> {
        let (k, l) = (self.source.copies(m), self.target.copies(m));
        if k > l {
            return Err(Error::Precondition(format!("{}: {k} copies do not fit into {l}", self.name)));
        }
        Ok(copower(m.phase_dim(), k, l))
    }
}

/// `η^{k,l}: A^{⊕k} → A^{⊕l}`.
pub fn eta(a: &Theory, k: usize, l: usize) -> Result<NaturalTransformation> {
    if k > l {
        return Err(Error::Precondition(format!("η needs k <= l, got {k} > {l}")));
    }
    NaturalTransformation::copower(format!("η^{{{k},{l}}}"), power_theory(a, k)?, power_theory(a, l)?)
}

/// `ζ₁: A ↪ φ_Δ`.
pub fn zeta_subtheory(a: &Theory, spec: DiagonalSpec) -> Result<NaturalTransformation> {
    NaturalTransformation::copower("ζ1", a.clone(), diagonal_theory(a, spec)?)
}

/// `ζ₂: φ_Δ ↪ A^{⊕λc}`.
pub fn zeta_ambient(a: &Theory, spec: DiagonalSpec) -> Result<NaturalTransformation> {
    NaturalTransformation::copower("ζ2", diagonal_theory(a, spec)?, power_theory(a, spec.lambda_compact)?)
}

/// `max |η^{k,n} − η^{l,n} η^{k,l}|` on `m`.
pub fn eta_composition_residual(a: &Theory, k: usize, l: usize, n: usize, m: &Spacetime) -> Result<f64> {
    let direct = eta(a, k, n)?.component(m)?;
    let composed = eta(a, l, n)?.component(m)? * eta(a, k, l)?.component(m)?;
    Ok(max_diff(&direct, &composed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawRow {
    pub label: String,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctorLawsReport {
    pub theory: String,
    pub identity: Vec<LawRow>,
    pub composition: Vec<LawRow>,
    pub max_residual: f64,
    pub pass: bool,
    pub first_failure: Option<String>,
}

/// `F(id) = id` on every endpoint and `F(φ∘ψ) = F(φ)∘F(ψ)` on every pair.
pub fn functor_laws_check(f: &dyn TheoryFunctor, chains: &[(Embedding, Embedding)]) -> Result<FunctorLawsReport> {
    let mut seen: Vec<&Spacetime> = Vec::new();
    let mut identity = Vec::new();
    let mut composition = Vec::new();
    for (p, (psi, phi)) in chains.iter().enumerate() {
        let both = psi.then(phi)?;
        for (end, m) in [("domain", &psi.domain), ("middle", &psi.codomain), ("codomain", &phi.codomain)] {
            if seen.contains(&m) {
                continue;
            }
            seen.push(m);
            let id = f.morphism(&Embedding::identity(m)?)?.matrix;
            let r = max_diff(&id, &DMatrix::identity(f.dim(m), f.dim(m)));
            identity.push(LawRow { label: format!("pair {p} {end}"), residual: r });
        }
        let lhs = f.morphism(&both)?.matrix;
        let rhs = f.morphism(phi)?.matrix * f.morphism(psi)?.matrix;
        composition.push(LawRow { label: format!("pair {p}"), residual: max_diff(&lhs, &rhs) });
    }
    let max_residual = identity.iter().chain(&composition).map(|r| r.residual).fold(0.0, f64::max);
    let first_failure = identity
        .iter()
        .chain(&composition)
        .find(|r| !(r.residual <= LAW_TOL))
        .map(|r| r.label.clone());
    Ok(FunctorLawsReport {
        theory: f.name(),
        identity,
        composition,
        max_residual,
        pass: first_failure.is_none(),
        first_failure,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaturalityReport {
    pub transformation: String,
    pub rows: Vec<LawRow>,
    pub max_residual: f64,
    pub pass: bool,
}

/// `ζ_N ∘ A(ψ) = B(ψ) ∘ ζ_M` for each labelled embedding.
pub fn naturality_check(z: &NaturalTransformation, embeddings: &[(String, Embedding)]) -> Result<NaturalityReport> {
    let mut rows = Vec::new();
    for (label, psi) in embeddings {
        let lhs = z.component(&psi.codomain)? * z.source.morphism(psi)?.matrix;
        let rhs = z.target.morphism(psi)?.matrix * z.component(&psi.domain)?;
        rows.push(LawRow { label: label.clone(), residual: max_diff(&lhs, &rhs) });
    }
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(NaturalityReport { transformation: z.name.clone(), rows, max_residual, pass: max_residual <= LAW_TOL })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSliceReport {
    pub dim_domain: usize,
    pub dim_codomain: usize,
    pub condition: f64,
    pub symplectic_defect: f64,
    pub invertible: bool,
}

fn invertibility(map: &DMatrix<f64>) -> (f64, bool) {
    let cond = condition_number(map);
    (cond, map.is_square() && cond < ISO_COND)
}

pub fn time_slice_check(f: &dyn TheoryFunctor, psi: &Embedding) -> Result<TimeSliceReport> {
    if !psi.is_cauchy {
        return Err(Error::Precondition("the embedding is not Cauchy".into()));
    }
    let map = f.morphism(psi)?;
    let (condition, invertible) = invertibility(&map.matrix);
    Ok(TimeSliceReport {
        dim_domain: map.matrix.ncols(),
        dim_codomain: map.matrix.nrows(),
        condition,
        symplectic_defect: map.defect,
        invertible,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub steps: Vec<TimeSliceReport>,
    pub composite: TimeSliceReport,
    /// `max |F(ψ_n ∘ … ∘ ψ_1) − F(ψ_n) ⋯ F(ψ_1)|`.
    pub composition_residual: f64,
}

/// A chain of Cauchy morphisms and its composite.
pub fn time_slice_chain(f: &dyn TheoryFunctor, chain: &[Embedding]) -> Result<ChainReport> {
    let first = chain.first().ok_or_else(|| Error::Precondition("empty chain".into()))?;
    let mut steps = Vec::new();
    let mut composite = first.clone();
    let mut product = f.morphism(first)?.matrix;
    steps.push(time_slice_check(f, first)?);
    for psi in &chain[1..] {
        steps.push(time_slice_check(f, psi)?);
        composite = composite.then(psi)?;
        product = f.morphism(psi)?.matrix * product;
    }
    let composition_residual = max_diff(&f.morphism(&composite)?.matrix, &product);
    Ok(ChainReport { steps, composite: time_slice_check(f, &composite)?, composition_residual })
}

/// Range of `F(ι_{M;O})` in `F(M)`.
pub fn kinematic_range(f: &dyn TheoryFunctor, m: &Spacetime, o: &Region) -> Result<Subspace> {
    let map = f.morphism(&Embedding::inclusion(m, o)?)?;
    Ok(Subspace::span(&map.matrix, Provenance::Kinematic { region: o.clone() }))
}

/// Image of `o` under `psi`; diamond members only.
pub fn image_region(psi: &Embedding, o: &Region) -> Result<Region> {
    let mut members = Vec::new();
    for r in o.members() {
        let Region::Diamond { component, t0, base } = r else {
            return Err(Error::Unsupported("images of regions other than diamonds".into()));
        };
        let rm = psi
            .maps
            .iter()
            .find(|m| m.from == *component)
            .ok_or_else(|| Error::InvalidEmbedding(format!("component {component} is not mapped")))?;
        members.push(Region::diamond(rm.to, t0 + rm.shift_t, [base[0] + rm.shift_x, base[1] + rm.shift_x]));
    }
    Ok(if members.len() == 1 { members.pop().unwrap() } else { Region::Union { members } })
}

/// `ψ̂: M|_O → N|_{ψ(O)}`.
fn restricted_embedding(psi: &Embedding, o: &Region, img: &Region) -> Result<Embedding> {
    let dom = psi.domain.restrict(o)?;
    let cod = psi.codomain.restrict(img)?;
    let mut maps = Vec::new();
    for (k, r) in o.members().iter().enumerate() {
        if let Region::Diamond { component, .. } = r {
            let rm = psi.maps.iter().find(|m| m.from == *component).expect("mapped above");
            maps.push(ComponentMap::new(k, k, rm.shift_x, rm.shift_t));
        }
    }
    validate_embedding(&dom, &cod, &maps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub image: Region,
    /// `max |F(ψ)F(ι_O) − F(ι_{ψ(O)})F(ψ̂)|`.
    pub square_residual: f64,
    /// Largest principal angle between `F(ψ)(kin(M;O))` and `kin(N;ψ(O))`.
    pub image_angle: f64,
    pub dim_domain_kin: usize,
    pub dim_codomain_kin: usize,
    pub pass: bool,
}

pub fn kinematic_covariance_check(f: &dyn TheoryFunctor, psi: &Embedding, o: &Region) -> Result<CovarianceReport> {
    let img = image_region(psi, o)?;
    let iota_o = Embedding::inclusion(&psi.domain, o)?;
    let iota_img = Embedding::inclusion(&psi.codomain, &img)?;
    let hat = restricted_embedding(psi, o, &img)?;
    let lhs = f.morphism(psi)?.matrix * f.morphism(&iota_o)?.matrix;
    let rhs = f.morphism(&iota_img)?.matrix * f.morphism(&hat)?.matrix;
    let square_residual = max_diff(&lhs, &rhs);
    let pushed = Subspace::span(&lhs, Provenance::Kinematic { region: img.clone() });
    let target = kinematic_range(f, &psi.codomain, &img)?;
    let image_angle = if pushed.dim() == target.dim() {
        principal_angles(&pushed.basis, &target.basis).into_iter().fold(0.0, f64::max)
    } else {
        std::f64::consts::FRAC_PI_2
    };
    let pass = square_residual <= LAW_TOL && image_angle <= 1e-8;
    Ok(CovarianceReport {
        image: img,
        square_residual,
        image_angle,
        dim_domain_kin: pushed.dim(),
        dim_codomain_kin: target.dim(),
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducedIsoReport {
    pub rank_first: usize,
    pub rank_second: usize,
    pub dim_domain: usize,
    /// `max |F(ψ₂)ᵀΩF(ψ₂) − F(ψ₁)ᵀΩF(ψ₁)|`.
    pub sigma_residual: f64,
    pub exists: bool,
}

/// `F(ψ₂)∘F(ψ₁)⁻¹` between the images of two embeddings of one spacetime.
pub fn induced_isomorphism(f: &dyn TheoryFunctor, psi1: &Embedding, psi2: &Embedding) -> Result<InducedIsoReport> {
    if psi1.domain != psi2.domain || psi1.codomain != psi2.codomain {
        return Err(Error::Precondition("embeddings must share domain and codomain".into()));
    }
    let (a, b) = (f.morphism(psi1)?.matrix, f.morphism(psi2)?.matrix);
    let w = f.omega(&psi1.codomain);
    let sigma_residual = max_diff(&(b.transpose() * &w * &b), &(a.transpose() * &w * &a));
    let dim_domain = f.dim(&psi1.domain);
    let (rank_first, rank_second) = (rank(&a, 1e-10), rank(&b, 1e-10));
    let exists = rank_first == dim_domain && rank_second == dim_domain && sigma_residual <= LAW_TOL;
    Ok(InducedIsoReport { rank_first, rank_second, dim_domain, sigma_residual, exists })
}

/// Data of a diamond region seen by the diagonal theory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalKinematicReport {
    pub mu_ambient: usize,
    pub ambient_dim: usize,
    pub kin_dim: usize,
    pub one_copy_kin_dim: usize,
    pub dyn_dim: usize,
    pub one_copy_dyn_dim: usize,
    pub pass: bool,
}

pub fn diagonal_kinematic_check(theory: &Theory, m: &Spacetime, o: &Region) -> Result<DiagonalKinematicReport> {
    let Theory::Diagonal { base, spec } = theory else {
        return Err(Error::Precondition("not a diagonal theory".into()));
    };
    if !o.members().iter().all(|r| matches!(r, Region::Diamond { .. })) {
        return Err(Error::Precondition("the region must be a union of diamonds".into()));
    }
    let mu_ambient = spec.mu(m);
    let kin_dim = kinematic_range(theory, m, o)?.dim();
    let one_copy_kin_dim = kinematic_range(base.as_ref(), m, o)?.dim();
    let one_copy_dyn_dim = dynamical_subspace(m, o, base.mass())?.dim() * base.copies(m);
    let dyn_dim = mu_ambient * one_copy_dyn_dim;
    Ok(DiagonalKinematicReport {
        mu_ambient,
        ambient_dim: theory.dim(m),
        kin_dim,
        one_copy_kin_dim,
        dyn_dim,
        one_copy_dyn_dim,
        pass: kin_dim == one_copy_kin_dim,
    })
}

/// Slabs of `m` strictly before and after the time support of `h`.
pub fn rce_slabs(m: &Spacetime, h: &Metric) -> Result<Option<[[f64; 2]; 2]>> {
    let supp = (0..m.n_components()).filter_map(|c| h.time_support(c)).fold(None, |acc: Option<[f64; 2]>, s| {
        Some(acc.map_or(s, |a| [a[0].min(s[0]), a[1].max(s[1])]))
    });
    let Some([a, b]) = supp else { return Ok(None) };
    let dx = m.components.iter().map(|c| c.dx).fold(0.0, f64::max);
    let w = m.components.iter().fold([f64::MIN, f64::MAX], |w, c| [w[0].max(c.window[0]), w[1].min(c.window[1])]);
    let lo = ((a / dx).floor() - 1.0) * dx;
    let hi = ((b / dx).ceil() + 1.0) * dx;
    if lo - w[0] < 2.0 * dx || w[1] - hi < 2.0 * dx {
        return Err(Error::Precondition(format!("no room for slabs outside the support [{a}, {b}]")));
    }
    Ok(Some([[w[0], lo], [hi, w[1]]]))
}

/// `rce[h] = F(ι⁻) F(ι⁻[h])⁻¹ F(ι⁺[h]) F(ι⁺)⁻¹` with `M^±` slabs after and
/// before the support of `h`.
pub fn rce_via_morphisms(f: &dyn TheoryFunctor, m: &Spacetime, h: &Metric) -> Result<LinearSymplecticMap> {
    if !m.is_flat() {
        return Err(Error::Precondition("the background must be flat".into()));
    }
    let w = f.omega(m);
    let Some([before, after]) = rce_slabs(m, h)? else {
        return Ok(LinearSymplecticMap::new(DMatrix::identity(w.nrows(), w.nrows()), "rce via morphisms", &w, &w));
    };
    h.validate(m)?;
    let mh = m.with_metric(h.clone());
    let ids: Vec<_> = (0..m.n_components()).map(|c| ComponentMap::new(c, c, 0.0, 0.0)).collect();
    let legs = |t: [f64; 2]| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let slab = m.restrict(&Region::slab(t[0], t[1]))?;
        let flat = f.morphism(&validate_embedding(&slab, m, &ids)?)?.matrix;
        let pert = f.morphism(&validate_embedding(&slab, &mh, &ids)?)?.matrix;
        Ok((flat, pert))
    };
    let (minus, minus_h) = legs(before)?;
    let (plus, plus_h) = legs(after)?;
    let r = minus * inverse(&minus_h)? * plus_h * inverse(&plus)?;
    Ok(LinearSymplecticMap::new(r, "rce via morphisms", &w, &w))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RceFactorizationReport {
    pub mu: usize,
    pub dim: usize,
    /// `max |rce^{φ_Δ} − ⊕^μ rce^A|`, both through morphisms.
    pub residual: f64,
    /// `max |rce^A via morphisms − rce^A on the shared grid|`, for information.
    pub solver_gap: f64,
    /// The multiplicity rule ignores the metric, so `rce^{(φ)}` is trivial.
    pub assumes_trivial_multiplicity_rce: bool,
    pub pass: bool,
}

pub fn rce_factorization_check(theory: &Theory, m: &Spacetime, h: &Metric) -> Result<RceFactorizationReport> {
    let Theory::Diagonal { base, spec } = theory else {
        return Err(Error::Precondition("not a diagonal theory".into()));
    };
    let mu = spec.mu(m);
    let diag = rce_via_morphisms(theory, m, h)?.matrix;
    let one = rce_via_morphisms(base.as_ref(), m, h)?.matrix;
    let residual = max_diff(&diag, &block_diag(&vec![one.clone(); mu]));
    let solver_gap = match **base {
        Theory::KleinGordon { mass } => max_diff(&one, &rce_map(m, mass, h)?.matrix),
        _ => f64::NAN,
    };
    Ok(RceFactorizationReport {
        mu,
        dim: diag.nrows(),
        residual,
        solver_gap,
        assumes_trivial_multiplicity_rce: true,
        pass: residual <= RCE_FACTOR_TOL,
    })
}

/// `μ(M) ≤ μ(N)` along every embedding.
pub fn mu_monotone(spec: DiagonalSpec, embeddings: &[Embedding]) -> bool {
    embeddings.iter().all(|e| spec.mu(&e.domain) <= spec.mu(&e.codomain))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equivalence {
    Equivalence,
    PartialEquivalence,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoRow {
    pub spacetime: String,
    pub source_dim: usize,
    pub target_dim: usize,
    pub condition: f64,
    pub iso: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub transformation: String,
    pub rows: Vec<IsoRow>,
    pub classification: Equivalence,
}

pub fn partial_equivalence_scan(z: &NaturalTransformation, catalog: &[(String, Spacetime)]) -> Result<ScanReport> {
    let mut rows = Vec::new();
    for (name, m) in catalog {
        let c = z.component(m)?;
        let (condition, iso) = invertibility(&c);
        rows.push(IsoRow { spacetime: name.clone(), source_dim: c.ncols(), target_dim: c.nrows(), condition, iso });
    }
    let classification = if !rows.is_empty() && rows.iter().all(|r| r.iso) {
        Equivalence::Equivalence
    } else if rows.iter().any(|r| r.iso) {
        Equivalence::PartialEquivalence
    } else {
        Equivalence::Neither
    };
    Ok(ScanReport { transformation: z.name.clone(), rows, classification })
}

/// Named spacetimes and embeddings between them.
#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    pub spacetimes: Vec<(String, Spacetime)>,
    pub embeddings: Vec<(String, Embedding)>,
}

impl Catalog {
    /// `D`, `C` and `C⊔D` on a circle of circumference 2 with `n_x` points,
    /// `D` over `[-0.5, 0.5]` at the reference slice, and the embeddings
    /// `D→C`, `D→C⊔D`, `C→C⊔D`, `C⊔D→C⊔D`.
    pub fn standard(n_x: usize) -> Result<Catalog> {
        let circle = SpacetimeSpec::cylinder(2.0, 2.0, n_x);
        let c = build_spacetime(&circle)?;
        let dx = c.components[0].dx;
        let diamond = SpacetimeSpec::diamond([-0.5, 0.5], c.t_ref, dx);
        let d = build_spacetime(&diamond)?;
        let cd = build_spacetime(&SpacetimeSpec::disjoint_union(vec![circle, diamond]))?;
        let embeddings = vec![
            ("D→C".to_string(), validate_embedding(&d, &c, &[ComponentMap::new(0, 0, 1.0, 0.0)])?),
            ("D→C⊔D".to_string(), validate_embedding(&d, &cd, &[ComponentMap::new(0, 1, 0.0, 0.0)])?),
            ("C→C⊔D".to_string(), validate_embedding(&c, &cd, &[ComponentMap::new(0, 0, 0.0, 0.0)])?),
            ("C⊔D→C⊔D".to_string(), Embedding::identity(&cd)?),
        ];
        Ok(Catalog {
            spacetimes: vec![("D".into(), d), ("C".into(), c), ("C⊔D".into(), cd)],
            embeddings,
        })
    }

    fn find(&self, want: impl Fn(&[CauchyClass]) -> bool, what: &str) -> Result<&(String, Spacetime)> {
        self.spacetimes
            .iter()
            .find(|(_, m)| want(&m.cauchy_classification()))
            .ok_or_else(|| Error::Precondition(format!("catalog lacks {what}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpassRow {
    pub spacetime: String,
    pub mu: usize,
    pub dim_a: usize,
    pub dim_diagonal: usize,
    pub dim_power: usize,
    pub zeta1_iso: bool,
    pub zeta2_iso: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpassReport {
    pub theory: String,
    pub spec: DiagonalSpec,
    pub rows: Vec<SpassRow>,
    pub zeta1: ScanReport,
    pub zeta2: ScanReport,
    pub naturality: Vec<NaturalityReport>,
    /// The chain `A → φ_Δ → A^{⊕λc}` shows two partial equivalences
    /// neither of which is an equivalence.
    pub failure_exhibited: bool,
    pub local_class: Vec<ScanReport>,
    /// Every partial equivalence among the dynamically local theories is an
    /// equivalence.
    pub local_class_consistent: bool,
}

/// The chain `A → φ_Δ → A^{⊕2}` on `D`, `C`, `C⊔D`, then the same scan over
/// `η^{k,l}` among massive powers.
pub fn spass_demo(catalog: &Catalog, mass: f64, spec: DiagonalSpec) -> Result<SpassReport> {
    if !(mass > 0.0) {
        return Err(Error::Precondition("the dynamically local class needs m > 0".into()));
    }
    let noncompact = catalog.find(|c| c.iter().all(|&k| k == CauchyClass::Noncompact), "a spacetime with noncompact Cauchy surfaces")?;
    let compact = catalog.find(|c| c.iter().all(|&k| k == CauchyClass::Compact), "a spacetime with compact Cauchy surfaces")?;
    let mixed = catalog.find(
        |c| c.contains(&CauchyClass::Compact) && c.contains(&CauchyClass::Noncompact),
        "a disjoint union of both kinds",
    )?;
    let entries = vec![noncompact.clone(), compact.clone(), mixed.clone()];

    let a = kg_theory(mass)?;
    let diag = diagonal_theory(&a, spec)?;
    let power = power_theory(&a, spec.lambda_compact)?;
    let z1 = zeta_subtheory(&a, spec)?;
    let z2 = zeta_ambient(&a, spec)?;
    let zeta1 = partial_equivalence_scan(&z1, &entries)?;
    let zeta2 = partial_equivalence_scan(&z2, &entries)?;
    let rows = entries
        .iter()
        .zip(zeta1.rows.iter().zip(&zeta2.rows))
        .map(|((name, m), (r1, r2))| SpassRow {
            spacetime: name.clone(),
            mu: spec.mu(m),
            dim_a: a.dim(m),
            dim_diagonal: diag.dim(m),
            dim_power: power.dim(m),
            zeta1_iso: r1.iso,
            zeta2_iso: r2.iso,
        })
        .collect();
    let naturality = vec![naturality_check(&z1, &catalog.embeddings)?, naturality_check(&z2, &catalog.embeddings)?];
    let failure_exhibited = zeta1.classification == Equivalence::PartialEquivalence
        && zeta2.classification == Equivalence::PartialEquivalence;

    let mut local_class = Vec::new();
    for k in 1..=3 {
        for l in k..=3 {
            local_class.push(partial_equivalence_scan(&eta(&a, k, l)?, &entries)?);
        }
    }
    let local_class_consistent = local_class.iter().all(|s| s.classification != Equivalence::PartialEquivalence);
    Ok(SpassReport {
        theory: a.name(),
        spec,
        rows,
        zeta1,
        zeta2,
        naturality,
        failure_exhibited,
        local_class,
        local_class_consistent,
    })
}
