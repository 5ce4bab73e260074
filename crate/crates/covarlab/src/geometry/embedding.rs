use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::region::{is_causally_convex, Region};
use crate::geometry::spacetime::{Shape, Spacetime, Topology};

const ALIGN_TOL: f64 = 1e-6;

/// Raw per-component map: a translation in space and time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentMap {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub shift_x: f64,
    #[serde(default)]
    pub shift_t: f64,
    /// Spatial reflection; always rejected (orientation reversing).
    #[serde(default)]
    pub reflect: bool,
}

impl ComponentMap {
    pub fn new(from: usize, to: usize, shift_x: f64, shift_t: f64) -> Self {
        ComponentMap { from, to, shift_x, shift_t, reflect: false }
    }
}

/// A validated per-component map; codomain index = domain index + `offset`
/// (modulo `n_x` on circles).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMap {
    pub from: usize,
    pub to: usize,
    pub offset: i64,
    pub shift_x: f64,
    pub shift_t: f64,
}

impl ResolvedMap {
    pub fn target(&self, i: usize, n_cod: usize, periodic: bool) -> usize {
        let j = i as i64 + self.offset;
        if periodic {
            j.rem_euclid(n_cod as i64) as usize
        } else {
            j as usize
        }
    }
}

/// A hyperbolic embedding between catalog spacetimes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub domain: Spacetime,
    pub codomain: Spacetime,
    pub maps: Vec<ResolvedMap>,
    pub is_cauchy: bool,
    pub image: Region,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidEmbedding(msg.into()))
}

fn integer(v: f64) -> Option<i64> {
    let r = v.round();
    ((v - r).abs() <= ALIGN_TOL).then_some(r as i64)
}

/// Checks a raw descriptor and returns the validated embedding.
pub fn validate_embedding(domain: &Spacetime, codomain: &Spacetime, maps: &[ComponentMap]) -> Result<Embedding> {
    let nd = domain.n_components();
    let mut seen = vec![false; nd];
    let mut resolved = Vec::new();
    let mut images = Vec::new();
    for cm in maps {
        if cm.reflect {
            return invalid("reflections reverse the spatial orientation");
        }
        let dc = match domain.components.get(cm.from) {
            Some(c) => c,
            None => return invalid(format!("no domain component {}", cm.from)),
        };
        let cc = match codomain.components.get(cm.to) {
            Some(c) => c,
            None => return invalid(format!("no codomain component {}", cm.to)),
        };
        if std::mem::replace(&mut seen[cm.from], true) {
            return invalid(format!("domain component {} mapped twice", cm.from));
        }
        if (dc.dx - cc.dx).abs() > 1e-12 * dc.dx.max(cc.dx) {
            return invalid(format!("spacing {} is not preserved (codomain {})", dc.dx, cc.dx));
        }
        let offset = match integer((dc.x0 + cm.shift_x - cc.x0) / cc.dx) {
            Some(k) => k,
            None => return invalid("spatial translation is not lattice aligned"),
        };
        if integer(cm.shift_t / cc.dx).is_none() {
            return invalid("time translation is not lattice aligned");
        }
        let w = [dc.window[0] + cm.shift_t, dc.window[1] + cm.shift_t];
        if w[0] < cc.window[0] - 1e-9 || w[1] > cc.window[1] + 1e-9 {
            return invalid(format!("image window {w:?} leaves {:?}", cc.window));
        }
        let image = match (dc.shape, dc.topology, cc.topology) {
            (Shape::Full, Topology::Circle { .. }, Topology::LineSegment { .. }) => {
                return invalid("a circle has no slice-aligned isometric image in a line segment")
            }
            (Shape::Full, Topology::Circle { .. }, Topology::Circle { .. }) => {
                if dc.n_x != cc.n_x {
                    return invalid("circles of different circumference");
                }
                Region::TimeSlab { t: w, component: Some(cm.to) }
            }
            (Shape::Full, Topology::LineSegment { .. }, _) => {
                if cc.is_periodic() || cc.is_diamond() || dc.n_x != cc.n_x || offset != 0 {
                    return invalid("image of a line-segment slab is not causally convex");
                }
                Region::TimeSlab { t: w, component: Some(cm.to) }
            }
            (Shape::Diamond { t0, base }, _, _) => {
                let t0 = t0 + cm.shift_t;
                if let Shape::Diamond { t0: ct0, .. } = cc.shape {
                    if (ct0 - t0).abs() > 1e-9 {
                        return Err(Error::Unsupported(
                            "diamond image off the base slice of a diamond codomain".into(),
                        ));
                    }
                }
                Region::Diamond { component: cm.to, t0, base: [base[0] + cm.shift_x, base[1] + cm.shift_x] }
            }
        };
        if !cc.is_periodic() && (offset < 0 || offset + dc.n_x as i64 > cc.n_x as i64) {
            return invalid("image leaves the codomain lattice");
        }
        if let (Region::Diamond { t0, base, .. }, Shape::Diamond { t0: ct0, base: cb }) = (&image, cc.shape) {
            let c = 0.5 * (base[0] + base[1]);
            let r = 0.5 * (base[1] - base[0]);
            let cbc = 0.5 * (cb[0] + cb[1]);
            let cr = 0.5 * (cb[1] - cb[0]);
            if (c - cbc).abs() + r + (t0 - ct0).abs() > cr + 1e-9 {
                return invalid("diamond image leaves the codomain diamond");
            }
        } else {
            image.validate(codomain).map_err(|e| Error::InvalidEmbedding(e.to_string()))?;
        }
        resolved.push(ResolvedMap {
            from: cm.from,
            to: cm.to,
            offset,
            shift_x: cm.shift_x,
            shift_t: cm.shift_t,
        });
        images.push(image);
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        return invalid(format!("domain component {c} is not mapped"));
    }
    check_metric(domain, codomain, &resolved, &images)?;

    let image = if images.len() == 1 { images[0].clone() } else { Region::Union { members: images.clone() } };
    let cells: Vec<_> = images.iter().map(|r| r.rasterize(codomain)).collect();
    for a in 0..cells.len() {
        for b in a + 1..cells.len() {
            if !cells[a].is_disjoint(&cells[b]) {
                return invalid("images of distinct components overlap");
            }
        }
    }
    if !codomain.components.iter().any(|c| c.is_diamond()) && !is_causally_convex(&image.rasterize(codomain)) {
        return invalid("image is not causally convex");
    }

    let is_cauchy = (0..codomain.n_components()).all(|c| {
        images.iter().any(|r| matches!(r, Region::TimeSlab { component: Some(k), .. } if *k == c))
    });
    Ok(Embedding {
        domain: domain.clone(),
        codomain: codomain.clone(),
        maps: resolved,
        is_cauchy,
        image,
    })
}

fn check_metric(domain: &Spacetime, codomain: &Spacetime, maps: &[ResolvedMap], images: &[Region]) -> Result<()> {
    for (rm, img) in maps.iter().zip(images) {
        let moved: Vec<_> = domain
            .metric
            .on_component(rm.from)
            .map(|p| {
                let mut q = *p;
                q.component = rm.to;
                q.bump.center = [p.bump.center[0] + rm.shift_t, p.bump.center[1] + rm.shift_x];
                q
            })
            .collect();
        for q in &moved {
            if !codomain.metric.on_component(rm.to).any(|p| same_perturbation(p, q)) {
                return invalid("domain metric is not carried to the codomain metric");
            }
        }
        let comp = &codomain.components[rm.to];
        for p in codomain.metric.on_component(rm.to) {
            if moved.iter().any(|q| same_perturbation(p, q)) {
                continue;
            }
            const N: usize = 24;
            let [t0, t1] = p.bump.time_range();
            let [x0, x1] = p.bump.space_range();
            for i in 1..N {
                for j in 1..N {
                    let t = t0 + (t1 - t0) * i as f64 / N as f64;
                    let x = x0 + (x1 - x0) * j as f64 / N as f64;
                    if p.bump.rho2(comp, t, x) < 1.0 && img.contains(codomain, rm.to, t, x) {
                        return invalid("codomain metric perturbation meets the image");
                    }
                }
            }
        }
    }
    Ok(())
}

fn same_perturbation(
    a: &crate::solver::metric::MetricPerturbation,
    b: &crate::solver::metric::MetricPerturbation,
) -> bool {
    a.component == b.component
        && a.amplitude == b.amplitude
        && a.bump.radii == b.bump.radii
        && (a.bump.center[0] - b.bump.center[0]).abs() < 1e-9
        && (a.bump.center[1] - b.bump.center[1]).abs() < 1e-9
}

impl Embedding {
    pub fn identity(m: &Spacetime) -> Result<Embedding> {
        let maps: Vec<_> = (0..m.n_components()).map(|c| ComponentMap::new(c, c, 0.0, 0.0)).collect();
        validate_embedding(m, m, &maps)
    }

    /// Canonical inclusion `M|_O → M`.
    pub fn inclusion(m: &Spacetime, o: &Region) -> Result<Embedding> {
        let sub = m.restrict(o)?;
        let maps: Vec<_> = o
            .members()
            .iter()
            .enumerate()
            .flat_map(|(k, r)| match r {
                Region::Diamond { component, .. } => vec![ComponentMap::new(k, *component, 0.0, 0.0)],
                _ => (0..m.n_components()).map(|c| ComponentMap::new(c, c, 0.0, 0.0)).collect(),
            })
            .collect();
        validate_embedding(&sub, m, &maps)
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &Embedding) -> Result<Embedding> {
        if self.codomain != next.domain {
            return Err(Error::InvalidEmbedding("embeddings are not composable".into()));
        }
        let mut maps = Vec::new();
        for rm in &self.maps {
            let nm = next
                .maps
                .iter()
                .find(|n| n.from == rm.to)
                .ok_or_else(|| Error::InvalidEmbedding("composite drops a component".into()))?;
            maps.push(ComponentMap::new(rm.from, nm.to, rm.shift_x + nm.shift_x, rm.shift_t + nm.shift_t));
        }
        validate_embedding(&self.domain, &next.codomain, &maps)
    }

    /// Image slice time of domain component `from`.
    pub fn image_slice(&self, from: usize) -> f64 {
        let rm = self.maps.iter().find(|m| m.from == from).expect("every component is mapped");
        self.domain.t_ref + rm.shift_t
    }
}
