use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::metric::Metric;

/// Substeps per lattice spacing on the unperturbed background.
///
/// `Δt = Δx/3` satisfies the `0.4·Δx/c_max` bound and puts every
/// lattice-aligned time on the solver grid.
pub const BASE_SUBSTEPS: usize = 3;

/// Default guard margin on line segments, in cells.
pub const DEFAULT_GUARD_CELLS: usize = 2;

pub const MIN_POINTS: usize = 8;

const ALIGN_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    LineSegment { half_width: f64 },
    Circle { circumference: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauchyClass {
    Compact,
    Noncompact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// The whole rectangle (or cylinder) `window × space`.
    Full,
    /// A diamond spacetime `D(B)`; its data live on `base` at `t0`.
    Diamond { t0: f64, base: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub topology: Topology,
    pub n_x: usize,
    pub dx: f64,
    /// Position of lattice point 0.
    pub x0: f64,
    pub window: [f64; 2],
    pub shape: Shape,
    pub guard: usize,
}

impl Component {
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.topology, Topology::Circle { .. })
    }

    pub fn circumference(&self) -> Option<f64> {
        match self.topology {
            Topology::Circle { circumference } => Some(circumference),
            Topology::LineSegment { .. } => None,
        }
    }

    pub fn cauchy_class(&self) -> CauchyClass {
        match self.topology {
            Topology::Circle { .. } => CauchyClass::Compact,
            Topology::LineSegment { .. } => CauchyClass::Noncompact,
        }
    }

    pub fn is_diamond(&self) -> bool {
        matches!(self.shape, Shape::Diamond { .. })
    }

    /// Signed displacement `x - y`, wrapped to `[-L/2, L/2)` on a circle.
    pub fn displacement(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        match self.circumference() {
            Some(l) => d - l * (d / l + 0.5).floor(),
            None => d,
        }
    }

    /// Distance from `x` to the closed interval `[a, b]`.
    pub fn distance_to_interval(&self, x: f64, a: f64, b: f64) -> f64 {
        match self.circumference() {
            None => {
                if x < a {
                    a - x
                } else if x > b {
                    x - b
                } else {
                    0.0
                }
            }
            Some(l) => {
                if b - a >= l {
                    return 0.0;
                }
                let y = (x - a).rem_euclid(l);
                if y <= b - a {
                    0.0
                } else {
                    (y - (b - a)).min(l - y)
                }
            }
        }
    }

    /// Closed interval of positions that data and causal sets may occupy.
    pub fn admissible_range(&self) -> [f64; 2] {
        match self.topology {
            Topology::Circle { .. } => [f64::NEG_INFINITY, f64::INFINITY],
            Topology::LineSegment { .. } => {
                let g = self.guard as f64 * self.dx;
                [self.x0 + g, self.x(self.n_x - 1) - g]
            }
        }
    }

    pub fn in_guard(&self, i: usize) -> bool {
        !self.is_periodic() && (i < self.guard || i + self.guard >= self.n_x)
    }

    /// Index of the lattice point at `x`, if `x` is a lattice point.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let mut k = (x - self.x0) / self.dx;
        if let Some(l) = self.circumference() {
            k = k.rem_euclid(l / self.dx);
        }
        let r = k.round();
        if (k - r).abs() > ALIGN_TOL || r < 0.0 {
            return None;
        }
        let i = r as usize;
        if self.is_periodic() {
            Some(i % self.n_x)
        } else if i < self.n_x {
            Some(i)
        } else {
            None
        }
    }

    /// Absolute index of the first and last causal level inside the window.
    ///
    /// Causal levels sit at integer multiples of `dx`, so lattice sets of
    /// different spacetimes with the same spacing line up.
    pub fn level_range(&self) -> (i64, i64) {
        let lo = (self.window[0] / self.dx - ALIGN_TOL).ceil() as i64;
        let hi = (self.window[1] / self.dx + ALIGN_TOL).floor() as i64;
        (lo, hi)
    }

    pub fn n_levels(&self) -> usize {
        let (lo, hi) = self.level_range();
        (hi - lo + 1).max(0) as usize
    }

    pub fn level_time(&self, k: i64) -> f64 {
        k as f64 * self.dx
    }

    pub fn level_of(&self, t: f64) -> Option<i64> {
        let k = t / self.dx;
        let r = k.round();
        ((k - r).abs() <= ALIGN_TOL).then_some(r as i64)
    }

    pub fn phase_dim(&self) -> usize {
        2 * self.n_x
    }

    pub fn n_t(&self) -> usize {
        let span = self.window[1] - self.window[0];
        (span / (self.dx / BASE_SUBSTEPS as f64) - ALIGN_TOL).ceil().max(0.0) as usize
    }
}

/// Catalog descriptor from which spacetimes are built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpacetimeSpec {
    Strip {
        half_width: f64,
        duration: f64,
        n_x: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        guard_cells: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_ref: Option<f64>,
    },
    Cylinder {
        circumference: f64,
        duration: f64,
        n_x: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_ref: Option<f64>,
    },
    /// Diamond spacetime over `base` on the slice `t0`; lattice points sit
    /// at `origin + k·dx` strictly inside the base.
    Diamond {
        base: [f64; 2],
        t0: f64,
        dx: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        origin: Option<f64>,
    },
    Slab {
        parent: Box<SpacetimeSpec>,
        t1: f64,
        t2: f64,
    },
    DisjointUnion {
        parts: Vec<SpacetimeSpec>,
    },
}

impl SpacetimeSpec {
    pub fn strip(half_width: f64, duration: f64, n_x: usize) -> Self {
        SpacetimeSpec::Strip { half_width, duration, n_x, guard_cells: None, t_ref: None }
    }

    pub fn cylinder(circumference: f64, duration: f64, n_x: usize) -> Self {
        SpacetimeSpec::Cylinder { circumference, duration, n_x, t_ref: None }
    }

    pub fn diamond(base: [f64; 2], t0: f64, dx: f64) -> Self {
        SpacetimeSpec::Diamond { base, t0, dx, origin: None }
    }

    pub fn slab(parent: SpacetimeSpec, t1: f64, t2: f64) -> Self {
        SpacetimeSpec::Slab { parent: Box::new(parent), t1, t2 }
    }

    pub fn disjoint_union(parts: Vec<SpacetimeSpec>) -> Self {
        SpacetimeSpec::DisjointUnion { parts }
    }

    /// Same shape with every lattice refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let f = factor.max(1);
        match self {
            SpacetimeSpec::Strip { half_width, duration, n_x, guard_cells, t_ref } => {
                SpacetimeSpec::Strip {
                    half_width: *half_width,
                    duration: *duration,
                    n_x: (n_x - 1) * f + 1,
                    guard_cells: *guard_cells,
                    t_ref: *t_ref,
                }
            }
            SpacetimeSpec::Cylinder { circumference, duration, n_x, t_ref } => {
                SpacetimeSpec::Cylinder {
                    circumference: *circumference,
                    duration: *duration,
                    n_x: n_x * f,
                    t_ref: *t_ref,
                }
            }
            SpacetimeSpec::Diamond { base, t0, dx, origin } => SpacetimeSpec::Diamond {
                base: *base,
                t0: *t0,
                dx: dx / f as f64,
                origin: *origin,
            },
            SpacetimeSpec::Slab { parent, t1, t2 } => SpacetimeSpec::Slab {
                parent: Box::new(parent.refined(f)),
                t1: *t1,
                t2: *t2,
            },
            SpacetimeSpec::DisjointUnion { parts } => SpacetimeSpec::DisjointUnion {
                parts: parts.iter().map(|p| p.refined(f)).collect(),
            },
        }
    }
}

/// A catalog spacetime: finitely many lattice components sharing a
/// reference slice, plus a (possibly perturbed) metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spacetime {
    pub spec: SpacetimeSpec,
    pub components: Vec<Component>,
    pub t_ref: f64,
    #[serde(default)]
    pub metric: Metric,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpacetime(format!("{name} must be positive, got {v}")))
    }
}

fn snap(v: f64, dx: f64) -> Option<f64> {
    let k = v / dx;
    let r = k.round();
    ((k - r).abs() <= ALIGN_TOL).then_some(r * dx)
}

fn default_ref(window: [f64; 2], dx: f64) -> f64 {
    ((window[0] + window[1]) / 2.0 / dx).round() * dx
}

fn check_ref(t_ref: f64, comp: &Component) -> Result<()> {
    let inside = t_ref > comp.window[0] - 1e-12 && t_ref < comp.window[1] + 1e-12;
    let open = match comp.shape {
        Shape::Full => t_ref > comp.window[0] && t_ref < comp.window[1],
        Shape::Diamond { t0, .. } => (t0 - t_ref).abs() < 1e-9,
    };
    if inside && open {
        Ok(())
    } else {
        Err(Error::InvalidSpacetime(format!(
            "reference slice {t_ref} is not interior to component window {:?}",
            comp.window
        )))
    }
}

fn build_parts(spec: &SpacetimeSpec) -> Result<(Vec<Component>, f64)> {
    match spec {
        SpacetimeSpec::Strip { half_width, duration, n_x, guard_cells, t_ref } => {
            positive("half_width", *half_width)?;
            positive("duration", *duration)?;
            if *n_x < MIN_POINTS {
                return Err(Error::InvalidSpacetime(format!("n_x = {n_x} below minimum {MIN_POINTS}")));
            }
            let guard = guard_cells.unwrap_or(DEFAULT_GUARD_CELLS);
            if guard < DEFAULT_GUARD_CELLS {
                return Err(Error::InvalidSpacetime(format!("guard margin of {guard} cells is below 2")));
            }
            if 2 * guard + 3 > *n_x {
                return Err(Error::InvalidSpacetime("guard margin leaves no admissible interior".into()));
            }
            let dx = 2.0 * half_width / (*n_x as f64 - 1.0);
            let comp = Component {
                topology: Topology::LineSegment { half_width: *half_width },
                n_x: *n_x,
                dx,
                x0: -half_width,
                window: [0.0, *duration],
                shape: Shape::Full,
                guard,
            };
            let r = match t_ref {
                Some(t) => snap(*t, dx).ok_or_else(|| {
                    Error::InvalidSpacetime(format!("t_ref {t} is not lattice aligned"))
                })?,
                None => default_ref(comp.window, dx),
            };
            Ok((vec![comp], r))
        }
        SpacetimeSpec::Cylinder { circumference, duration, n_x, t_ref } => {
            positive("circumference", *circumference)?;
            positive("duration", *duration)?;
            if *n_x < MIN_POINTS {
                return Err(Error::InvalidSpacetime(format!("n_x = {n_x} below minimum {MIN_POINTS}")));
            }
            let dx = circumference / *n_x as f64;
            let comp = Component {
                topology: Topology::Circle { circumference: *circumference },
                n_x: *n_x,
                dx,
                x0: 0.0,
                window: [0.0, *duration],
                shape: Shape::Full,
                guard: 0,
            };
            let r = match t_ref {
                Some(t) => snap(*t, dx).ok_or_else(|| {
                    Error::InvalidSpacetime(format!("t_ref {t} is not lattice aligned"))
                })?,
                None => default_ref(comp.window, dx),
            };
            Ok((vec![comp], r))
        }
        SpacetimeSpec::Diamond { base, t0, dx, origin } => {
            positive("dx", *dx)?;
            let [a, b] = *base;
            if !(a < b) {
                return Err(Error::InvalidSpacetime(format!("empty diamond base {base:?}")));
            }
            let t0 = snap(*t0, *dx).ok_or_else(|| {
                Error::InvalidSpacetime(format!("diamond slice {t0} is not lattice aligned"))
            })?;
            let origin = origin.unwrap_or(a);
            let first = ((a - origin) / dx + ALIGN_TOL).floor() as i64 + 1;
            let last = ((b - origin) / dx - ALIGN_TOL).ceil() as i64 - 1;
            let n = (last - first + 1).max(0) as usize;
            if n < MIN_POINTS {
                return Err(Error::InvalidSpacetime(format!(
                    "diamond base {base:?} holds {n} lattice points, below minimum {MIN_POINTS}"
                )));
            }
            let r = (b - a) / 2.0;
            let comp = Component {
                topology: Topology::LineSegment { half_width: r },
                n_x: n,
                dx: *dx,
                x0: origin + first as f64 * dx,
                window: [t0 - r, t0 + r],
                shape: Shape::Diamond { t0, base: *base },
                guard: 0,
            };
            Ok((vec![comp], t0))
        }
        SpacetimeSpec::Slab { parent, t1, t2 } => {
            let (mut comps, _) = build_parts(parent)?;
            if !(t1 < t2) {
                return Err(Error::InvalidSpacetime(format!("empty slab ({t1}, {t2})")));
            }
            let mut r = None;
            for c in &mut comps {
                if c.is_diamond() {
                    return Err(Error::Unsupported("slabs of diamond spacetimes".into()));
                }
                if *t1 < c.window[0] - 1e-12 || *t2 > c.window[1] + 1e-12 {
                    return Err(Error::InvalidSpacetime(format!(
                        "slab ({t1}, {t2}) leaves the parent window {:?}",
                        c.window
                    )));
                }
                c.window = [*t1, *t2];
                r.get_or_insert(default_ref(c.window, c.dx));
            }
            Ok((comps, r.unwrap_or(0.5 * (t1 + t2))))
        }
        SpacetimeSpec::DisjointUnion { parts } => {
            if parts.is_empty() {
                return Err(Error::InvalidSpacetime("empty disjoint union".into()));
            }
            let mut comps = Vec::new();
            let mut r: Option<f64> = None;
            for p in parts {
                let (c, pr) = build_parts(p)?;
                if let Some(r0) = r {
                    if (r0 - pr).abs() > 1e-9 {
                        return Err(Error::InvalidSpacetime(format!(
                            "parts disagree on the reference slice ({r0} vs {pr})"
                        )));
                    }
                }
                r.get_or_insert(pr);
                comps.extend(c);
            }
            Ok((comps, r.unwrap_or(0.0)))
        }
    }
}

/// Builds and validates a catalog spacetime on the flat background.
pub fn build_spacetime(spec: &SpacetimeSpec) -> Result<Spacetime> {
    let (components, t_ref) = build_parts(spec)?;
    for c in &components {
        check_ref(t_ref, c)?;
        if c.level_of(t_ref).is_none() {
            return Err(Error::InvalidSpacetime(format!(
                "reference slice {t_ref} is not a lattice level for spacing {}",
                c.dx
            )));
        }
    }
    Ok(Spacetime { spec: spec.clone(), components, t_ref, metric: Metric::flat() })
}

impl Spacetime {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, c: usize) -> Result<&Component> {
        self.components
            .get(c)
            .ok_or_else(|| Error::InvalidSpacetime(format!("no component {c}")))
    }

    pub fn phase_dim(&self) -> usize {
        self.components.iter().map(Component::phase_dim).sum()
    }

    /// Start of each component's `[φ; π]` block in a phase vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.components
            .iter()
            .map(|c| {
                let o = acc;
                acc += c.phase_dim();
                o
            })
            .collect()
    }

    pub fn cauchy_classification(&self) -> Vec<CauchyClass> {
        self.components.iter().map(Component::cauchy_class).collect()
    }

    /// Copy of this spacetime with metric `g = η + h`.
    pub fn with_metric(&self, metric: Metric) -> Spacetime {
        Spacetime { metric, ..self.clone() }
    }

    pub fn is_flat(&self) -> bool {
        self.metric.is_flat()
    }

    /// Component `c` as a spacetime of its own, with its share of the metric.
    pub fn single(&self, c: usize) -> Spacetime {
        let metric = Metric {
            perturbations: self
                .metric
                .on_component(c)
                .map(|p| {
                    let mut q = *p;
                    q.component = 0;
                    q
                })
                .collect(),
        };
        Spacetime { spec: self.spec.clone(), components: vec![self.components[c].clone()], t_ref: self.t_ref, metric }
    }
}

/// Per-component topology class, `compact` for circles.
pub fn cauchy_classification(m: &Spacetime) -> Vec<CauchyClass> {
    m.cauchy_classification()
}
