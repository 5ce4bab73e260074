use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::spacetime::{Component, Spacetime};

const EPS: f64 = 1e-9;

/// Closed piece of a compact set. A closed diamond has the same causal
/// hull as its base, and is kept separate only for containment tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompactPiece {
    Rect { component: usize, t: [f64; 2], x: [f64; 2] },
    Diamond { component: usize, t0: f64, base: [f64; 2] },
}

impl CompactPiece {
    pub fn component(&self) -> usize {
        match *self {
            CompactPiece::Rect { component, .. } | CompactPiece::Diamond { component, .. } => {
                component
            }
        }
    }

    /// The pair `(time interval, space interval)` whose causal hull equals
    /// the hull of this piece.
    pub fn hull_core(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            CompactPiece::Rect { t, x, .. } => (t, x),
            CompactPiece::Diamond { t0, base, .. } => ([t0, t0], base),
        }
    }

    /// Slice on which the hull is narrowest, with the hull's trace there.
    ///
    /// `J([t1,t2]×[a,b]) = J({t_m}×[a−h, b+h])` with `t_m` the midpoint and
    /// `h` the half-height.
    pub fn waist(&self) -> (f64, [f64; 2]) {
        let (t, x) = self.hull_core();
        let h = 0.5 * (t[1] - t[0]);
        (0.5 * (t[0] + t[1]), [x[0] - h, x[1] + h])
    }

    fn time_extent(&self) -> [f64; 2] {
        match *self {
            CompactPiece::Rect { t, .. } => t,
            CompactPiece::Diamond { t0, base, .. } => {
                let r = 0.5 * (base[1] - base[0]);
                [t0 - r, t0 + r]
            }
        }
    }

    /// Whether the lattice-free point `(t, x)` lies in this closed piece.
    pub fn contains(&self, comp: &Component, t: f64, x: f64) -> bool {
        match *self {
            CompactPiece::Rect { t: tt, x: xx, .. } => {
                t >= tt[0] - EPS && t <= tt[1] + EPS && comp.distance_to_interval(x, xx[0], xx[1]) <= EPS
            }
            CompactPiece::Diamond { t0, base, .. } => {
                let c = 0.5 * (base[0] + base[1]);
                let r = 0.5 * (base[1] - base[0]);
                comp.displacement(x, c).abs() + (t - t0).abs() <= r + EPS
            }
        }
    }

    fn corners(&self) -> Vec<(f64, f64)> {
        match *self {
            CompactPiece::Rect { t, x, .. } => {
                vec![(t[0], x[0]), (t[0], x[1]), (t[1], x[0]), (t[1], x[1])]
            }
            CompactPiece::Diamond { t0, base, .. } => {
                let c = 0.5 * (base[0] + base[1]);
                let r = 0.5 * (base[1] - base[0]);
                vec![(t0, base[0]), (t0, base[1]), (t0 - r, c), (t0 + r, c)]
            }
        }
    }

    /// Set containment of closed pieces (both are convex in `(t, x)`).
    pub fn is_subset_of(&self, other: &CompactPiece, comp: &Component) -> bool {
        self.component() == other.component()
            && self.corners().iter().all(|&(t, x)| other.contains(comp, t, x))
    }

    fn intersect(&self, other: &CompactPiece) -> Result<Option<CompactPiece>> {
        if self.component() != other.component() {
            return Ok(None);
        }
        let component = self.component();
        match (*self, *other) {
            (CompactPiece::Rect { t: t1, x: x1, .. }, CompactPiece::Rect { t: t2, x: x2, .. }) => {
                let t = [t1[0].max(t2[0]), t1[1].min(t2[1])];
                let x = [x1[0].max(x2[0]), x1[1].min(x2[1])];
                Ok((t[0] <= t[1] + EPS && x[0] <= x[1] + EPS)
                    .then_some(CompactPiece::Rect { component, t, x }))
            }
            (
                CompactPiece::Diamond { t0: s1, base: b1, .. },
                CompactPiece::Diamond { t0: s2, base: b2, .. },
            ) if (s1 - s2).abs() < EPS => {
                let base = [b1[0].max(b2[0]), b1[1].min(b2[1])];
                Ok((base[0] <= base[1] + EPS).then_some(CompactPiece::Diamond { component, t0: s1, base }))
            }
            _ => Err(Error::InvalidCompact(
                "intersection of these pieces is not lattice representable".into(),
            )),
        }
    }
}

/// Finite union of closed pieces.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompactSet {
    pub pieces: Vec<CompactPiece>,
}

impl CompactSet {
    pub fn empty() -> Self {
        CompactSet::default()
    }

    pub fn rect(component: usize, t: [f64; 2], x: [f64; 2]) -> Self {
        CompactSet { pieces: vec![CompactPiece::Rect { component, t, x }] }
    }

    pub fn point(component: usize, t: f64, x: f64) -> Self {
        CompactSet::rect(component, [t, t], [x, x])
    }

    pub fn diamond(component: usize, t0: f64, base: [f64; 2]) -> Self {
        CompactSet { pieces: vec![CompactPiece::Diamond { component, t0, base }] }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn union(&self, other: &CompactSet) -> CompactSet {
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().copied());
        CompactSet { pieces }
    }

    pub fn intersection(&self, other: &CompactSet) -> Result<CompactSet> {
        let mut pieces = Vec::new();
        for p in &self.pieces {
            for q in &other.pieces {
                if let Some(r) = p.intersect(q)? {
                    pieces.push(r);
                }
            }
        }
        Ok(CompactSet { pieces })
    }

    /// Piecewise containment: every piece sits inside some piece of `other`.
    pub fn is_subset_of(&self, m: &Spacetime, other: &CompactSet) -> bool {
        self.pieces.iter().all(|p| {
            let comp = &m.components[p.component()];
            other.pieces.iter().any(|q| p.is_subset_of(q, comp))
        })
    }

    pub fn on_component(&self, c: usize) -> impl Iterator<Item = &CompactPiece> {
        self.pieces.iter().filter(move |p| p.component() == c)
    }

    pub fn validate(&self, m: &Spacetime) -> Result<()> {
        for p in &self.pieces {
            let comp = m.component(p.component()).map_err(|_| {
                Error::InvalidCompact(format!("no component {}", p.component()))
            })?;
            let [t0, t1] = p.time_extent();
            if t0 > t1 + EPS {
                return Err(Error::InvalidCompact(format!("reversed time interval in {p:?}")));
            }
            if t0 < comp.window[0] - EPS || t1 > comp.window[1] + EPS {
                return Err(Error::InvalidCompact(format!(
                    "{p:?} leaves the time window {:?}",
                    comp.window
                )));
            }
            let (_, x) = p.hull_core();
            if x[0] > x[1] + EPS {
                return Err(Error::InvalidCompact(format!("reversed space interval in {p:?}")));
            }
            if let Some(l) = comp.circumference() {
                if x[1] - x[0] > l + EPS {
                    return Err(Error::InvalidCompact(format!("{p:?} wraps more than once")));
                }
            } else {
                let [lo, hi] = comp.admissible_range();
                if x[0] < lo - EPS || x[1] > hi + EPS {
                    return Err(Error::InvalidCompact(format!(
                        "{p:?} violates the guard margin [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Boolean mask over one component's causal lattice: levels at integer
/// multiples of `dx` inside the time window, times lattice points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeMask {
    pub first_level: i64,
    pub n_levels: usize,
    pub n_x: usize,
    pub periodic: bool,
    pub bits: Vec<bool>,
}

impl LatticeMask {
    pub fn new(comp: &Component) -> Self {
        let (lo, _) = comp.level_range();
        let n_levels = comp.n_levels();
        LatticeMask {
            first_level: lo,
            n_levels,
            n_x: comp.n_x,
            periodic: comp.is_periodic(),
            bits: vec![false; n_levels * comp.n_x],
        }
    }

    pub fn get(&self, j: usize, i: usize) -> bool {
        self.bits[j * self.n_x + i]
    }

    pub fn set(&mut self, j: usize, i: usize, v: bool) {
        self.bits[j * self.n_x + i] = v;
    }

    pub fn level(&self, j: usize) -> &[bool] {
        &self.bits[j * self.n_x..(j + 1) * self.n_x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Row index of absolute level `k`, if inside the window.
    pub fn row(&self, k: i64) -> Option<usize> {
        let j = k - self.first_level;
        (j >= 0 && (j as usize) < self.n_levels).then_some(j as usize)
    }

    fn zip(&self, other: &LatticeMask, f: impl Fn(bool, bool) -> bool) -> LatticeMask {
        LatticeMask {
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| f(*a, *b)).collect(),
            ..self.clone()
        }
    }

    fn dilate_row(&self, row: &[bool]) -> Vec<bool> {
        let n = self.n_x;
        (0..n)
            .map(|i| {
                row[i]
                    || (i > 0 && row[i - 1])
                    || (i + 1 < n && row[i + 1])
                    || (self.periodic && n > 1 && ((i == 0 && row[n - 1]) || (i == n - 1 && row[0])))
            })
            .collect()
    }

    /// Cells reachable from this set by future-directed lattice paths that
    /// move at most one cell per level.
    pub fn future_sweep(&self) -> LatticeMask {
        let mut out = self.clone();
        for j in 1..self.n_levels {
            let prev = out.level(j - 1).to_vec();
            let grown = self.dilate_row(&prev);
            for (i, g) in grown.into_iter().enumerate() {
                if g {
                    out.set(j, i, true);
                }
            }
        }
        out
    }

    pub fn past_sweep(&self) -> LatticeMask {
        let mut out = self.clone();
        for j in (0..self.n_levels.saturating_sub(1)).rev() {
            let next = out.level(j + 1).to_vec();
            let grown = self.dilate_row(&next);
            for (i, g) in grown.into_iter().enumerate() {
                if g {
                    out.set(j, i, true);
                }
            }
        }
        out
    }
}

/// Lattice cell set over a whole spacetime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSet {
    pub masks: Vec<LatticeMask>,
}

impl LatticeSet {
    pub fn empty(m: &Spacetime) -> Self {
        LatticeSet { masks: m.components.iter().map(LatticeMask::new).collect() }
    }

    pub fn count(&self) -> usize {
        self.masks.iter().map(LatticeMask::count).sum()
    }

    pub fn total(&self) -> usize {
        self.masks.iter().map(|m| m.bits.len()).sum()
    }

    pub fn union(&self, other: &LatticeSet) -> LatticeSet {
        LatticeSet { masks: self.masks.iter().zip(&other.masks).map(|(a, b)| a.zip(b, |x, y| x || y)).collect() }
    }

    pub fn intersection(&self, other: &LatticeSet) -> LatticeSet {
        LatticeSet { masks: self.masks.iter().zip(&other.masks).map(|(a, b)| a.zip(b, |x, y| x && y)).collect() }
    }

    pub fn complement(&self) -> LatticeSet {
        LatticeSet {
            masks: self
                .masks
                .iter()
                .map(|a| LatticeMask { bits: a.bits.iter().map(|b| !b).collect(), ..a.clone() })
                .collect(),
        }
    }

    pub fn is_subset_of(&self, other: &LatticeSet) -> bool {
        self.masks
            .iter()
            .zip(&other.masks)
            .all(|(a, b)| a.bits.iter().zip(&b.bits).all(|(x, y)| !*x || *y))
    }

    pub fn is_disjoint(&self, other: &LatticeSet) -> bool {
        self.intersection(other).count() == 0
    }

    pub fn future_sweep(&self) -> LatticeSet {
        LatticeSet { masks: self.masks.iter().map(LatticeMask::future_sweep).collect() }
    }

    pub fn past_sweep(&self) -> LatticeSet {
        LatticeSet { masks: self.masks.iter().map(LatticeMask::past_sweep).collect() }
    }

    /// Lattice positions of component `c` on absolute level `k`.
    pub fn positions_at(&self, m: &Spacetime, c: usize, k: i64) -> Vec<f64> {
        let comp = &m.components[c];
        let mask = &self.masks[c];
        match mask.row(k) {
            None => Vec::new(),
            Some(j) => (0..comp.n_x).filter(|&i| mask.get(j, i)).map(|i| comp.x(i)).collect(),
        }
    }
}

/// Closed lattice cells inside `K` (cells of the causal lattice that the
/// pieces contain).
pub fn rasterize(m: &Spacetime, k: &CompactSet) -> LatticeSet {
    let mut out = LatticeSet::empty(m);
    for (c, comp) in m.components.iter().enumerate() {
        let mask = &mut out.masks[c];
        for j in 0..mask.n_levels {
            let t = comp.level_time(mask.first_level + j as i64);
            for i in 0..comp.n_x {
                if k.on_component(c).any(|p| p.contains(comp, t, comp.x(i))) {
                    mask.set(j, i, true);
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    Future,
    Past,
    Both,
}

/// Whether `(t, x)` lies in the causal cone of piece `p`, with half-cell
/// outward rounding in space.
pub fn in_cone(comp: &Component, p: &CompactPiece, cone: Cone, t: f64, x: f64) -> bool {
    let (tt, xx) = p.hull_core();
    let d = comp.distance_to_interval(x, xx[0], xx[1]);
    let slack = 0.5 * comp.dx + EPS;
    let fut = t >= tt[0] - EPS && d <= (t - tt[0]) + slack;
    let past = t <= tt[1] + EPS && d <= (tt[1] - t) + slack;
    match cone {
        Cone::Future => fut,
        Cone::Past => past,
        Cone::Both => fut || past,
    }
}

/// Trace of `J(K)` (or one of its halves) on component `c` at time `t`.
pub fn hull_slice(m: &Spacetime, k: &CompactSet, c: usize, t: f64, cone: Cone) -> Vec<bool> {
    let comp = &m.components[c];
    (0..comp.n_x)
        .map(|i| k.on_component(c).any(|p| in_cone(comp, p, cone, t, comp.x(i))))
        .collect()
}

fn cone_set(m: &Spacetime, k: &CompactSet, cone: Cone) -> Result<LatticeSet> {
    k.validate(m)?;
    let mut out = LatticeSet::empty(m);
    for (c, comp) in m.components.iter().enumerate() {
        let mask = &mut out.masks[c];
        for j in 0..mask.n_levels {
            let t = comp.level_time(mask.first_level + j as i64);
            let row = hull_slice(m, k, c, t, cone);
            for (i, v) in row.into_iter().enumerate() {
                if v {
                    if comp.in_guard(i) {
                        return Err(Error::GuardViolation { component: c });
                    }
                    mask.set(j, i, true);
                }
            }
        }
    }
    Ok(out)
}

/// `J_M(K) = J⁺(K) ∪ J⁻(K)` on the lattice, clipped to the time window.
pub fn causal_hull(m: &Spacetime, k: &CompactSet) -> Result<LatticeSet> {
    cone_set(m, k, Cone::Both)
}

pub fn causal_future(m: &Spacetime, k: &CompactSet) -> Result<LatticeSet> {
    cone_set(m, k, Cone::Future)
}

pub fn causal_past(m: &Spacetime, k: &CompactSet) -> Result<LatticeSet> {
    cone_set(m, k, Cone::Past)
}

/// One connected component of the causal complement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementPart {
    pub label: usize,
    pub component: usize,
    pub cells: usize,
    /// False when the part reaches the end of a line segment.
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalComplement {
    pub cells: LatticeSet,
    /// Per spacetime component, a part label for every cell (`None` inside
    /// the hull).
    pub labels: Vec<Vec<Option<usize>>>,
    pub parts: Vec<ComplementPart>,
}

impl CausalComplement {
    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Labels present on absolute level `k` of component `c`, one entry
    /// per lattice point.
    pub fn trace(&self, m: &Spacetime, c: usize, k: i64) -> Vec<Option<usize>> {
        let mask = &self.cells.masks[c];
        match mask.row(k) {
            None => vec![None; m.components[c].n_x],
            Some(j) => self.labels[c][j * mask.n_x..(j + 1) * mask.n_x].to_vec(),
        }
    }
}

/// `K^⊥ = M \ J_M(K)` with connected parts labelled by flood fill
/// (4-neighbour connectivity, periodic in space on circles).
pub fn causal_complement(m: &Spacetime, k: &CompactSet) -> Result<CausalComplement> {
    let hull = causal_hull(m, k)?;
    let cells = hull.complement();
    let mut labels = Vec::new();
    let mut parts = Vec::new();
    for (c, comp) in m.components.iter().enumerate() {
        let mask = &cells.masks[c];
        let (nl, nx) = (mask.n_levels, mask.n_x);
        let mut lab: Vec<Option<usize>> = vec![None; nl * nx];
        for start in 0..nl * nx {
            if !mask.bits[start] || lab[start].is_some() {
                continue;
            }
            let label = parts.len();
            let mut stack = vec![start];
            lab[start] = Some(label);
            let mut count = 0;
            let mut bounded = true;
            while let Some(idx) = stack.pop() {
                count += 1;
                let (j, i) = (idx / nx, idx % nx);
                if !comp.is_periodic() && (i == 0 || i == nx - 1) {
                    bounded = false;
                }
                let mut nb = Vec::with_capacity(4);
                if j > 0 {
                    nb.push(idx - nx);
                }
                if j + 1 < nl {
                    nb.push(idx + nx);
                }
                if i > 0 {
                    nb.push(idx - 1);
                } else if comp.is_periodic() {
                    nb.push(idx + nx - 1);
                }
                if i + 1 < nx {
                    nb.push(idx + 1);
                } else if comp.is_periodic() {
                    nb.push(idx + 1 - nx);
                }
                for n in nb {
                    if mask.bits[n] && lab[n].is_none() {
                        lab[n] = Some(label);
                        stack.push(n);
                    }
                }
            }
            parts.push(ComplementPart { label, component: c, cells: count, bounded });
        }
        labels.push(lab);
    }
    Ok(CausalComplement { cells, labels, parts })
}
