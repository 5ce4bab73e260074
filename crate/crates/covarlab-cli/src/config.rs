//! Experiment configuration: per-command defaults, file overrides,
//! validation and the canonical hash.

use std::path::PathBuf;

use covarlab::geometry::{build_spacetime, CompactSet, Region, SpacetimeSpec};
use covarlab::solver::{Bump, DataSpec, MetricPerturbation, Polarization};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::Command;

pub const SCHEMA: &str = include_str!("../../../schemas/config.schema.json");

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub identity_rel_err: f64,
    pub convergence_ratio: f64,
    /// One bound per entry of `resolutions`.
    pub locality: Vec<f64>,
    pub zero_identity: f64,
    /// Relative to `max|Ω|`.
    pub symplectic: f64,
    pub angle: f64,
    pub numeric_angle: f64,
    pub law: f64,
    pub constant_residual: f64,
    pub rce_factorization: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity_rel_err: 1e-2,
            convergence_ratio: 3.0,
            locality: vec![5e-3, 1.5e-3],
            zero_identity: 1e-12,
            symplectic: 1e-6,
            angle: 1e-10,
            numeric_angle: 5e-2,
            law: 1e-10,
            constant_residual: 1e-12,
            rce_factorization: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub mass: f64,
    pub local: bool,
    /// Expected `dim_dyn − dim_kin` when not local.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionCase {
    pub label: String,
    pub spacetime: usize,
    pub region: Region,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairCase {
    pub spacetime: usize,
    pub a: Region,
    pub b: Region,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericCase {
    pub spacetime: usize,
    pub compact: CompactSet,
    pub mass: f64,
    pub window: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spacetimes: Vec<SpacetimeSpec>,
    pub masses: Vec<f64>,
    #[serde(default)]
    pub regions: Vec<RegionCase>,
    #[serde(default)]
    pub extended: Vec<PairCase>,
    #[serde(default)]
    pub numeric: Vec<NumericCase>,
    #[serde(default)]
    pub perturbations: Vec<MetricPerturbation>,
    pub data: DataSpec,
    /// Data checked for rce locality; entries whose hull meets a
    /// perturbation are skipped.
    #[serde(default)]
    pub locality_data: Vec<DataSpec>,
    /// Refinement factors applied to every spacetime.
    pub resolutions: Vec<usize>,
    /// Points on the circle of the `D`, `C`, `C⊔D` catalog.
    pub catalog_n_x: usize,
    pub lambda_compact: usize,
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Uniform displacement bound for perturbation centres; needs a seed.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub cache: bool,
}

fn bump(t: f64, x: f64, rt: f64, rx: f64) -> Bump {
    Bump::new([t, x], [rt, rx])
}

fn polarized(eps: f64) -> Vec<MetricPerturbation> {
    Polarization::ALL
        .iter()
        .map(|&p| MetricPerturbation::polarized(0, p, bump(0.6, 0.3, 0.25, 0.4), eps))
        .collect()
}

fn base() -> ExperimentConfig {
    ExperimentConfig {
        spacetimes: vec![],
        masses: vec![0.0, 0.5],
        regions: vec![],
        extended: vec![],
        numeric: vec![],
        perturbations: vec![],
        data: DataSpec::Gaussian { center: 0.0, width: 0.25, velocity: 0.5 },
        locality_data: vec![],
        resolutions: vec![1, 2],
        catalog_n_x: 40,
        lambda_compact: 2,
        tolerances: Tolerances::default(),
        seed: None,
        jitter: 0.0,
        out: None,
        cache: true,
    }
}

pub fn default_config(cmd: Command) -> ExperimentConfig {
    let mut c = base();
    match cmd {
        Command::RceCheck => {
            c.spacetimes = vec![SpacetimeSpec::strip(4.0, 2.0, 201), SpacetimeSpec::cylinder(4.0, 2.0, 200)];
            c.perturbations = polarized(0.3);
            c.locality_data = vec![
                DataSpec::Bump { center: -2.5, radius: 0.5, amplitude: 1.0 },
                DataSpec::Bump { center: 2.3, radius: 0.5, amplitude: 1.0 },
            ];
        }
        Command::StressEnergyIdentity => {
            c.spacetimes = vec![SpacetimeSpec::strip(4.0, 2.0, 201), SpacetimeSpec::cylinder(4.0, 2.0, 200)];
            c.perturbations = polarized(1.0);
        }
        Command::DynlocReport => {
            c.spacetimes = vec![SpacetimeSpec::strip(4.0, 2.0, 161), SpacetimeSpec::cylinder(2.0, 2.0, 100)];
            c.resolutions = vec![1];
            let two = Region::Union {
                members: vec![Region::diamond(0, 1.0, [-1.0, -0.3]), Region::diamond(0, 1.0, [0.3, 1.0])],
            };
            let e = |m0: bool| {
                vec![
                    Expectation { mass: 0.0, local: m0, gap: (!m0).then_some(1) },
                    Expectation { mass: 0.5, local: true, gap: None },
                ]
            };
            c.regions = vec![
                RegionCase { label: "strip diamond".into(), spacetime: 0, region: Region::diamond(0, 1.0, [-1.0, 1.0]), expect: e(true) },
                RegionCase { label: "strip two diamonds".into(), spacetime: 0, region: two, expect: e(false) },
                RegionCase { label: "cylinder diamond".into(), spacetime: 1, region: Region::diamond(0, 1.0, [0.5, 1.5]), expect: e(false) },
            ];
            c.extended = vec![PairCase {
                spacetime: 0,
                a: Region::diamond(0, 1.0, [-1.0, -0.2]),
                b: Region::diamond(0, 1.0, [0.2, 1.0]),
            }];
            c.numeric = vec![NumericCase {
                spacetime: 0,
                compact: CompactSet::diamond(0, 0.6, [-0.5, 0.5]),
                mass: 0.5,
                window: [0.25, 0.95],
            }];
        }
        Command::SpassDemo | Command::FunctorLaws => {
            c.masses = vec![0.5];
            c.resolutions = if cmd == Command::SpassDemo { vec![1, 2] } else { vec![1] };
            c.perturbations =
                vec![MetricPerturbation::polarized(0, Polarization::Tt, bump(1.0, 1.0, 0.3, 0.3), 0.05)];
        }
    }
    c
}

/// Top-level keys of `overrides` replace those of the command default.
pub fn load(cmd: Command, overrides: Option<&str>) -> Result<ExperimentConfig, ConfigError> {
    let mut v = serde_json::to_value(default_config(cmd)).expect("config serialises");
    if let Some(text) = overrides {
        let o: Value = serde_json::from_str(text).map_err(|e| ConfigError(format!("config is not JSON: {e}")))?;
        let Value::Object(o) = o else { return bad("config must be a JSON object") };
        let target = v.as_object_mut().expect("object");
        for (k, val) in o {
            target.insert(k, val);
        }
    }
    serde_json::from_value(v).map_err(|e| ConfigError(format!("config does not match the schema: {e}")))
}

impl ExperimentConfig {
    pub fn validate(&self, scale: usize) -> Result<(), ConfigError> {
        let t = &self.tolerances;
        let tols = [
            t.identity_rel_err,
            t.convergence_ratio,
            t.zero_identity,
            t.symplectic,
            t.angle,
            t.numeric_angle,
            t.law,
            t.constant_residual,
            t.rce_factorization,
        ];
        if tols.iter().chain(&t.locality).any(|x| !(x.is_finite() && *x > 0.0)) {
            return bad("tolerances must be positive and finite");
        }
        if self.resolutions.is_empty() || self.resolutions.contains(&0) {
            return bad("resolutions must be non-empty refinement factors >= 1");
        }
        if t.locality.len() < self.resolutions.len() {
            return bad("one locality tolerance is needed per resolution");
        }
        if self.masses.is_empty() || self.masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return bad("masses must be a non-empty list of non-negative numbers");
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return bad("jitter must be non-negative");
        }
        if self.jitter > 0.0 && self.seed.is_none() {
            return bad("a seed is required when jitter is enabled");
        }
        if scale == 0 {
            return bad("resolution scale must be at least 1");
        }
        if self.lambda_compact == 0 {
            return bad("lambda_compact must be at least 1");
        }
        let mut built = Vec::new();
        for s in &self.spacetimes {
            for &r in &self.resolutions {
                build_spacetime(&s.refined(r * scale)).map_err(|e| ConfigError(e.to_string()))?;
            }
            built.push(build_spacetime(&s.refined(scale)).map_err(|e| ConfigError(e.to_string()))?);
        }
        let get = |i: usize| built.get(i).ok_or_else(|| ConfigError(format!("no spacetime {i}")));
        for c in &self.regions {
            c.region.validate(get(c.spacetime)?).map_err(|e| ConfigError(format!("{}: {e}", c.label)))?;
        }
        for p in &self.extended {
            let m = get(p.spacetime)?;
            p.a.validate(m).map_err(|e| ConfigError(e.to_string()))?;
            p.b.validate(m).map_err(|e| ConfigError(e.to_string()))?;
        }
        for n in &self.numeric {
            get(n.spacetime)?;
        }
        Ok(())
    }

    /// `sha256` of the canonical JSON with `out` and `cache` removed.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        let o = v.as_object_mut().expect("object");
        o.remove("out");
        o.remove("cache");
        let text = serde_json::to_string(&v).expect("serialises");
        hex(&Sha256::digest(text.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Short human label for a catalog spacetime.
pub fn label(spec: &SpacetimeSpec) -> String {
    match spec {
        SpacetimeSpec::Strip { half_width, n_x, .. } => format!("strip(L={half_width},n={n_x})"),
        SpacetimeSpec::Cylinder { circumference, n_x, .. } => format!("cylinder(C={circumference},n={n_x})"),
        SpacetimeSpec::Diamond { base, .. } => format!("diamond({},{})", base[0], base[1]),
        SpacetimeSpec::Slab { parent, t1, t2 } => format!("slab({},{t1},{t2})", label(parent)),
        SpacetimeSpec::DisjointUnion { parts } => parts.iter().map(label).collect::<Vec<_>>().join("+"),
    }
}

/// The shipped JSON schema.
pub fn schema() -> Value {
    serde_json::from_str(SCHEMA).unwrap_or_else(|_| json!({}))
}
