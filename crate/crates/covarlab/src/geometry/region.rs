use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::compact::{causal_hull, CompactPiece, CompactSet, LatticeSet};
use crate::geometry::spacetime::{Component, Spacetime, SpacetimeSpec};

const EPS: f64 = 1e-9;

/// Shrink factors sampling the directed set of admissible compacts.
pub const DEFAULT_SHRINK_SCHEDULE: [f64; 3] = [0.5, 0.75, 0.9];

/// Open, causally convex region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Interior of the domain of dependence of the open `base` on `t0`.
    Diamond { component: usize, t0: f64, base: [f64; 2] },
    /// `t ∈ (t1, t2)` over the full spatial extent of one or all components.
    TimeSlab {
        t: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        component: Option<usize>,
    },
    /// A diamond cut down to `t ∈ (t1, t2)`; `t0` must lie inside.
    Truncated { component: usize, t0: f64, base: [f64; 2], t: [f64; 2] },
    /// Finite union of causally disjoint members (a multi-diamond).
    Union { members: Vec<Region> },
}

impl Region {
    pub fn diamond(component: usize, t0: f64, base: [f64; 2]) -> Self {
        Region::Diamond { component, t0, base }
    }

    pub fn slab(t1: f64, t2: f64) -> Self {
        Region::TimeSlab { t: [t1, t2], component: None }
    }

    /// Members of a union, or the region itself.
    pub fn members(&self) -> Vec<&Region> {
        match self {
            Region::Union { members } => members.iter().flat_map(Region::members).collect(),
            r => vec![r],
        }
    }

    /// Whether the open region contains the point `(t, x)` of component `c`.
    pub fn contains(&self, m: &Spacetime, c: usize, t: f64, x: f64) -> bool {
        match self {
            Region::Diamond { component, t0, base } => {
                *component == c && in_open_diamond(&m.components[c], *t0, *base, t, x)
            }
            Region::TimeSlab { t: tt, component } => {
                component.map_or(true, |k| k == c) && t > tt[0] + EPS && t < tt[1] - EPS
            }
            Region::Truncated { component, t0, base, t: tt } => {
                *component == c
                    && t > tt[0] + EPS
                    && t < tt[1] - EPS
                    && in_open_diamond(&m.components[c], *t0, *base, t, x)
            }
            Region::Union { members } => members.iter().any(|r| r.contains(m, c, t, x)),
        }
    }

    /// Lattice cells strictly inside the region.
    pub fn rasterize(&self, m: &Spacetime) -> LatticeSet {
        let mut out = LatticeSet::empty(m);
        for (c, comp) in m.components.iter().enumerate() {
            let mask = &mut out.masks[c];
            for j in 0..mask.n_levels {
                let t = comp.level_time(mask.first_level + j as i64);
                for i in 0..comp.n_x {
                    if self.contains(m, c, t, comp.x(i)) {
                        mask.set(j, i, true);
                    }
                }
            }
        }
        out
    }

    /// Checks bases, windows and lattice causal convexity.
    pub fn validate(&self, m: &Spacetime) -> Result<()> {
        for r in self.members() {
            match r {
                Region::Diamond { component, t0, base } => check_diamond(m, *component, *base, *t0)?,
                Region::Truncated { component, t0, base, t } => {
                    check_diamond(m, *component, *base, *t0)?;
                    if !(t[0] < *t0 && *t0 < t[1]) {
                        return Err(Error::InvalidRegion(format!(
                            "truncation {t:?} must contain the base slice {t0}"
                        )));
                    }
                }
                Region::TimeSlab { t, component } => {
                    if !(t[0] < t[1]) {
                        return Err(Error::InvalidRegion(format!("empty slab {t:?}")));
                    }
                    if let Some(c) = component {
                        m.component(*c).map_err(|e| Error::InvalidRegion(e.to_string()))?;
                    }
                }
                Region::Union { .. } => unreachable!("members are flattened"),
            }
        }
        if !is_causally_convex(&self.rasterize(m)) {
            return Err(Error::InvalidRegion("region is not causally convex".into()));
        }
        Ok(())
    }

    /// Base slice and base interval of every diamond-like member.
    pub fn bases(&self) -> Vec<(usize, f64, [f64; 2])> {
        self.members()
            .into_iter()
            .filter_map(|r| match r {
                Region::Diamond { component, t0, base }
                | Region::Truncated { component, t0, base, .. } => Some((*component, *t0, *base)),
                _ => None,
            })
            .collect()
    }
}

fn in_open_diamond(comp: &Component, t0: f64, base: [f64; 2], t: f64, x: f64) -> bool {
    let c = 0.5 * (base[0] + base[1]);
    let r = 0.5 * (base[1] - base[0]);
    comp.displacement(x, c).abs() + (t - t0).abs() < r - EPS
}

fn check_diamond(m: &Spacetime, component: usize, base: [f64; 2], t0: f64) -> Result<()> {
    let comp = m.component(component).map_err(|e| Error::InvalidRegion(e.to_string()))?;
    if !(base[0] < base[1]) {
        return Err(Error::InvalidRegion(format!("empty base {base:?}")));
    }
    if !(t0 > comp.window[0] && t0 < comp.window[1]) {
        return Err(Error::InvalidRegion(format!("base slice {t0} outside {:?}", comp.window)));
    }
    match comp.circumference() {
        Some(l) => {
            if base[1] - base[0] >= l - EPS {
                return Err(Error::InvalidRegion(format!("base {base:?} wraps the circle")));
            }
        }
        None => {
            let [lo, hi] = comp.admissible_range();
            if base[0] < lo - EPS || base[1] > hi + EPS {
                return Err(Error::InvalidRegion(format!(
                    "base {base:?} violates the guard margin [{lo}, {hi}]"
                )));
            }
        }
    }
    Ok(())
}

/// Lattice causal convexity: `J⁺(R) ∩ J⁻(R) ⊆ R` for one-cell-per-level paths.
pub fn is_causally_convex(cells: &LatticeSet) -> bool {
    let fut = cells.future_sweep();
    let past = cells.past_sweep();
    fut.intersection(&past).is_subset_of(cells)
}

/// Diamond `D(B)` over `base` on slice `t0`, clipped to the time window.
pub fn make_diamond(m: &Spacetime, component: usize, base: [f64; 2], t0: f64) -> Result<Region> {
    check_diamond(m, component, base, t0)?;
    let r = Region::diamond(component, t0, base);
    r.validate(m)?;
    Ok(r)
}

fn scaled(base: [f64; 2], s: f64) -> [f64; 2] {
    let c = 0.5 * (base[0] + base[1]);
    let r = 0.5 * (base[1] - base[0]) * s;
    [c - r, c + r]
}

fn compact_for(m: &Spacetime, o: &Region, f: impl Fn(&Component, [f64; 2]) -> Option<[f64; 2]>) -> Result<CompactSet> {
    let mut pieces = Vec::new();
    for r in o.members() {
        let piece = match r {
            Region::Diamond { component, t0, base } => {
                let b = f(&m.components[*component], *base)
                    .ok_or_else(|| Error::InvalidRegion(format!("{r:?} holds no lattice point")))?;
                CompactPiece::Diamond { component: *component, t0: *t0, base: b }
            }
            Region::Truncated { component, t0, base, .. } => {
                let b = f(&m.components[*component], *base)
                    .ok_or_else(|| Error::InvalidRegion(format!("{r:?} holds no lattice point")))?;
                CompactPiece::Rect { component: *component, t: [*t0, *t0], x: b }
            }
            _ => {
                return Err(Error::InvalidRegion(
                    "admissible compacts need a diamond or multi-diamond".into(),
                ))
            }
        };
        pieces.push(piece);
    }
    Ok(CompactSet { pieces })
}

fn interior_points(comp: &Component, base: [f64; 2]) -> Vec<usize> {
    (0..comp.n_x)
        .filter(|&i| {
            let x = comp.x(i);
            let c = 0.5 * (base[0] + base[1]);
            let r = 0.5 * (base[1] - base[0]);
            comp.displacement(x, c).abs() < r - EPS
        })
        .collect()
}

/// Lattice points strictly inside the base of a diamond-like region.
pub fn base_points(comp: &Component, base: [f64; 2]) -> Vec<usize> {
    interior_points(comp, base)
}

/// Nested compacts `K_1 ⊂ K_2 ⊂ … ⊂ O`: closures of concentric shrunken
/// (multi-)diamonds with factors from the default schedule.
pub fn admissible_compacts(m: &Spacetime, o: &Region, n_samples: usize) -> Result<Vec<CompactSet>> {
    if n_samples == 0 || n_samples > DEFAULT_SHRINK_SCHEDULE.len() {
        return Err(Error::InvalidRegion(format!(
            "n_samples must be in 1..={}",
            DEFAULT_SHRINK_SCHEDULE.len()
        )));
    }
    admissible_compacts_with(m, o, &DEFAULT_SHRINK_SCHEDULE[..n_samples])
}

pub fn admissible_compacts_with(m: &Spacetime, o: &Region, schedule: &[f64]) -> Result<Vec<CompactSet>> {
    o.validate(m)?;
    let mut out = Vec::new();
    for &s in schedule {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidRegion(format!("shrink factor {s} outside (0, 1)")));
        }
        let k = compact_for(m, o, |comp, b| {
            let sb = scaled(b, s);
            let hit = (0..comp.n_x).any(|i| comp.distance_to_interval(comp.x(i), sb[0], sb[1]) <= EPS);
            hit.then_some(sb)
        })?;
        causal_hull(m, &k)?;
        out.push(k);
    }
    Ok(out)
}

/// The largest admissible compact the lattice can tell apart from `O`:
/// closed diamonds over the hull of each member's strictly interior points.
pub fn lattice_maximal_compact(m: &Spacetime, o: &Region) -> Result<CompactSet> {
    o.validate(m)?;
    let k = compact_for(m, o, |comp, b| {
        let c = 0.5 * (b[0] + b[1]);
        let d: Vec<f64> = interior_points(comp, b).iter().map(|&i| comp.displacement(comp.x(i), c)).collect();
        let lo = d.iter().copied().reduce(f64::min)?;
        let hi = d.iter().copied().reduce(f64::max)?;
        Some([c + lo, c + hi])
    })?;
    causal_hull(m, &k)?;
    Ok(k)
}

/// Membership in `K(M;O)`: `K ⊂ O` and every piece of `K` is the closure
/// of (or inside) a diamond whose base lies in a base of `O`.
pub fn in_admissible_family(m: &Spacetime, k: &CompactSet, o: &Region) -> bool {
    let bases = o.bases();
    k.pieces.iter().all(|p| {
        let (tt, xx) = p.hull_core();
        let comp = &m.components[p.component()];
        let c = 0.5 * (xx[0] + xx[1]);
        bases.iter().any(|&(bc, t0, b)| {
            let bc_mid = 0.5 * (b[0] + b[1]);
            let r = 0.5 * (b[1] - b[0]);
            let off = comp.displacement(c, bc_mid).abs();
            let half = 0.5 * (xx[1] - xx[0]);
            let slack = r - off - half - 0.5 * (tt[1] - tt[0]) - ((tt[0] + tt[1]) / 2.0 - t0).abs();
            bc == p.component() && slack > EPS
        })
    })
}

/// Whether `J(O1)` and `O2` are disjoint on the lattice.
pub fn causally_disjoint(m: &Spacetime, o1: &Region, o2: &Region) -> Result<bool> {
    let r1 = o1.rasterize(m);
    let r2 = o2.rasterize(m);
    let j1 = r1.future_sweep().union(&r1.past_sweep());
    Ok(j1.is_disjoint(&r2))
}

impl Spacetime {
    /// `M|_O` as a spacetime in its own right.
    pub fn restrict(&self, o: &Region) -> Result<Spacetime> {
        o.validate(self)?;
        let mut parts = Vec::new();
        for r in o.members() {
            let spec = match r {
                Region::Diamond { component, t0, base } => {
                    let comp = &self.components[*component];
                    SpacetimeSpec::Diamond { base: *base, t0: *t0, dx: comp.dx, origin: Some(comp.x0) }
                }
                Region::TimeSlab { t, component } => {
                    if component.is_some() && self.components.len() > 1 {
                        return Err(Error::Unsupported("restriction to a single-component slab".into()));
                    }
                    SpacetimeSpec::slab(self.spec.clone(), t[0], t[1])
                }
                Region::Truncated { .. } => {
                    return Err(Error::Unsupported("restriction to a truncated diamond".into()))
                }
                Region::Union { .. } => unreachable!("members are flattened"),
            };
            parts.push(spec);
        }
        let spec = if parts.len() == 1 { parts.pop().unwrap() } else { SpacetimeSpec::disjoint_union(parts) };
        let slab = matches!(spec, SpacetimeSpec::Slab { .. });
        let mut out = crate::geometry::spacetime::build_spacetime(&spec)?;
        if slab {
            out.metric = self.metric.clone();
        }
        Ok(out)
    }
}
