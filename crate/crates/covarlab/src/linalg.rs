//! Dense linear algebra on phase space.

use nalgebra::{DMatrix, DVector};

use crate::geometry::spacetime::Spacetime;

/// Matrix of the symplectic form: `σ(u, v) = uᵀ Ω v`.
pub fn omega(m: &Spacetime) -> DMatrix<f64> {
    let d = m.phase_dim();
    let mut w = DMatrix::zeros(d, d);
    let mut o = 0;
    for c in &m.components {
        let n = c.n_x;
        for i in 0..n {
            w[(o + i, o + n + i)] = c.dx;
            w[(o + n + i, o + i)] = -c.dx;
        }
        o += 2 * n;
    }
    w
}

/// `Ω` repeated `copies` times along the diagonal.
pub fn omega_copies(m: &Spacetime, copies: usize) -> DMatrix<f64> {
    let w = omega(m);
    block_diag(&vec![w; copies])
}

/// `max |Rᵀ Ω_cod R − Ω_dom|`.
pub fn symplectic_defect(r: &DMatrix<f64>, omega_dom: &DMatrix<f64>, omega_cod: &DMatrix<f64>) -> f64 {
    let d = r.transpose() * omega_cod * r - omega_dom;
    d.amax()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// `v ↦ (v, 0, …, 0)` from `k` to `l` copies of an `n`-dimensional space.
pub fn copower(n: usize, k: usize, l: usize) -> DMatrix<f64> {
    assert!(k <= l, "copower needs k <= l");
    let mut out = DMatrix::zeros(l * n, k * n);
    for i in 0..k * n {
        out[(i, i)] = 1.0;
    }
    out
}

pub fn hcat(mats: &[&DMatrix<f64>], rows: usize) -> DMatrix<f64> {
    let cols = mats.iter().map(|m| m.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for m in mats {
        assert_eq!(m.nrows(), rows, "row count");
        out.view_mut((0, c), (rows, m.ncols())).copy_from(m);
        c += m.ncols();
    }
    out
}

/// Thin SVD `a = U diag(s) Vᵀ`, singular values descending.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (r, c) = a.shape();
    let k = r.min(c);
    if k == 0 {
        return Svd { u: DMatrix::zeros(r, 0), s: Vec::new(), v: DMatrix::zeros(c, 0) };
    }
    let f = faer::Mat::<f64>::from_fn(r, c, |i, j| a[(i, j)]);
    let d = f.thin_svd().expect("svd converges");
    let (u, v, s) = (d.U(), d.V(), d.S().column_vector());
    Svd {
        u: DMatrix::from_fn(r, k, |i, j| u[(i, j)]),
        s: (0..k).map(|i| s[i]).collect(),
        v: DMatrix::from_fn(c, k, |i, j| v[(i, j)]),
    }
}

/// Orthonormal basis of the column span, dropping singular values below
/// `rel_tol · σ_max`.
pub fn orthonormal_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let rows = a.nrows();
    if a.ncols() == 0 || a.amax() == 0.0 {
        return DMatrix::zeros(rows, 0);
    }
    let d = svd(a);
    let smax = d.s[0];
    let keep: Vec<usize> = (0..d.s.len()).filter(|&i| d.s[i] > rel_tol * smax).collect();
    let mut out = DMatrix::zeros(rows, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let mut col = d.u.column(i).clone_owned();
        canonical_sign(&mut col);
        out.set_column(j, &col);
    }
    out
}

/// Flips `v` so its largest-magnitude entry is positive (deterministic output).
pub fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() + 1e-14 {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        *v *= -1.0;
    }
}

/// Orthonormal basis of the kernel of `a` (right singular vectors with
/// singular value `≤ tau`), plus the singular values.
pub fn null_space(a: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, Vec<f64>) {
    let n = a.ncols();
    // Work with AᵀA-free SVD on the stacked matrix; pad when wide.
    let padded = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let d = svd(&padded);
    let sv = d.s;
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= tau).collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &d.v.column(i));
    }
    (orthonormal_basis(&out, 1e-8), sv)
}

/// `(I − B Bᵀ) A` for orthonormal `B`.
fn residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    if b.ncols() == 0 {
        return a.clone();
    }
    a - b * (b.transpose() * a)
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let f = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    f.singular_values().expect("svd converges")
}

/// Principal angles between the spans of orthonormal `a` and `b`, ascending.
///
/// Small angles come from sines and large ones from cosines, which keeps
/// both ends accurate.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let k = a.ncols().min(b.ncols());
    if k == 0 {
        return Vec::new();
    }
    let mut cos = singular_values(&(a.transpose() * b));
    cos.sort_by(|x, y| y.total_cmp(x));
    let (small, large) = if a.ncols() >= b.ncols() { (a, b) } else { (b, a) };
    let mut sin = singular_values(&residual(large, small));
    sin.resize(large.ncols(), 0.0);
    sin.sort_by(|x, y| x.total_cmp(y));
    (0..k)
        .map(|i| {
            let c = cos[i].clamp(0.0, 1.0);
            if c >= std::f64::consts::FRAC_1_SQRT_2 {
                sin[i].clamp(0.0, 1.0).asin()
            } else {
                c.acos()
            }
        })
        .collect()
}

/// Largest angle between a vector of span(`a`) and span(`b`), with a
/// maximising unit vector of span(`a`).
pub fn containment_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (f64, Option<DVector<f64>>) {
    if a.ncols() == 0 {
        return (0.0, None);
    }
    let r = residual(a, b);
    let d = svd(&r);
    let s = d.s[0];
    let mut w = a * d.v.column(0);
    canonical_sign(&mut w);
    (s.clamp(0.0, 1.0).asin(), Some(w))
}

/// Dimension of span(`a`) ∩ span(`b`): principal angles at most `tol`.
pub fn intersection_dim(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> usize {
    principal_angles(a, b).iter().filter(|t| **t <= tol).count()
}

/// 2-norm condition number; infinite for singular or non-square input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sv = singular_values(m);
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > rel_tol * max).count()
}
