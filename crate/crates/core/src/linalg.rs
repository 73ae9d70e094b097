//! Dense complex helpers on top of nalgebra: determinants, eigenvectors from
//! the Schur form, multiset matching and contour residues.

use nalgebra::linalg::Schur;

use crate::{CMat, C64};

pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn det(m: &CMat) -> C64 {
    if m.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn diag(v: &[C64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigenvalues via the complex Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return vec![];
    }
    Schur::new(m.clone()).unpack().1.diagonal().iter().copied().collect()
}

/// Right eigenvectors (unit columns) and eigenvalues.
///
/// Eigenvectors come from back-substitution on the Schur factor. Inside a
/// cluster of equal eigenvalues a component whose right-hand side vanishes is
/// set to zero, so diagonalizable degenerate blocks give independent vectors;
/// a Jordan coupling instead produces nearly parallel columns, which the
/// caller detects through the conditioning of `V`.
pub fn eig(m: &CMat) -> (Vec<C64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], CMat::zeros(0, 0));
    }
    let (q, t) = Schur::new(m.clone()).unpack();
    let tnorm = frob(&t).max(f64::MIN_POSITIVE);
    let cluster = 1e-10 * tnorm;
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        let lk = t[(k, k)];
        y[(k, k)] = C64::new(1.0, 0.0);
        let mut ymax: f64 = 1.0;
        for i in (0..k).rev() {
            let mut rhs = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                rhs -= t[(i, j)] * y[(j, k)];
            }
            let mut den = t[(i, i)] - lk;
            if den.norm() < cluster {
                if rhs.norm() <= 1e-9 * tnorm * ymax {
                    y[(i, k)] = C64::new(0.0, 0.0);
                    continue;
                }
                den = C64::new(f64::EPSILON * tnorm, 0.0);
            }
            let yi = rhs / den;
            ymax = ymax.max(yi.norm());
            y[(i, k)] = yi;
        }
    }
    let mut v = q * y;
    for mut col in v.column_iter_mut() {
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            col /= C64::new(nrm, 0.0);
        }
    }
    let vals = t.diagonal().iter().copied().collect();
    (vals, v)
}

/// Result of pairing two complex multisets.
#[derive(Debug, Clone, PartialEq)]
pub struct MultisetMatch {
    /// `assignment[i]` is the index in the reference set paired with item `i`.
    pub assignment: Vec<usize>,
    /// Largest absolute deviation over the pairs.
    pub max_dev: f64,
    /// Whether every pair is within `tol·max(1, |ref|)`.
    pub ok: bool,
}

/// Greedy nearest assignment (globally smallest distances first) of `items`
/// into `reference`, followed by a verification pass. `reference` may be
/// larger than `items` (containment test).
pub fn match_multiset(items: &[C64], reference: &[C64], tol: f64) -> MultisetMatch {
    if items.len() > reference.len() {
        return MultisetMatch { assignment: vec![], max_dev: f64::INFINITY, ok: false };
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(items.len() * reference.len());
    for (i, a) in items.iter().enumerate() {
        for (j, b) in reference.iter().enumerate() {
            pairs.push(((a - b).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut assignment = vec![usize::MAX; items.len()];
    let mut used = vec![false; reference.len()];
    let mut left = items.len();
    for (_, i, j) in pairs {
        if left == 0 {
            break;
        }
        if assignment[i] == usize::MAX && !used[j] {
            assignment[i] = j;
            used[j] = true;
            left -= 1;
        }
    }
    let mut max_dev: f64 = 0.0;
    let mut ok = true;
    for (i, &j) in assignment.iter().enumerate() {
        let d = (items[i] - reference[j]).norm();
        max_dev = max_dev.max(d);
        if d > tol * reference[j].norm().max(1.0) {
            ok = false;
        }
    }
    MultisetMatch { assignment, max_dev, ok }
}

/// Same as [`match_multiset`] but for tuples (vectors) compared in max-norm.
pub fn match_tuples(items: &[Vec<C64>], reference: &[Vec<C64>], tol: f64) -> MultisetMatch {
    let dist = |a: &[C64], b: &[C64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    };
    let scale = |b: &[C64]| b.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if items.len() > reference.len() {
        return MultisetMatch { assignment: vec![], max_dev: f64::INFINITY, ok: false };
    }
    let mut pairs = Vec::with_capacity(items.len() * reference.len());
    for (i, a) in items.iter().enumerate() {
        for (j, b) in reference.iter().enumerate() {
            pairs.push((dist(a, b), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut assignment = vec![usize::MAX; items.len()];
    let mut used = vec![false; reference.len()];
    for (_, i, j) in pairs {
        if assignment[i] == usize::MAX && !used[j] {
            assignment[i] = j;
            used[j] = true;
        }
    }
    let mut max_dev: f64 = 0.0;
    let mut ok = true;
    for (i, &j) in assignment.iter().enumerate() {
        let d = dist(&items[i], &reference[j]);
        max_dev = max_dev.max(d);
        if d > tol * scale(&reference[j]) {
            ok = false;
        }
    }
    MultisetMatch { assignment, max_dev, ok }
}

/// Roots of `Σ c_k z^k` (ascending coefficients) via the companion matrix,
/// polished by a few Newton steps.
pub fn poly_roots(c: &[C64]) -> Vec<C64> {
    let mut c = c.to_vec();
    while c.len() > 1 && c.last().map_or(false, |z| z.norm() == 0.0) {
        c.pop();
    }
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return vec![];
    }
    let lead = c[n];
    let mut comp = CMat::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        comp[(i, n - 1)] = -c[i] / lead;
    }
    let mut roots = eigenvalues(&comp);
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (mut p, mut dp) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for &ck in c.iter().rev() {
                dp = dp * *r + p;
                p = p * *r + ck;
            }
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    roots
}

/// Residue of `f` at `center` by trapezoidal averaging on a circle of radius
/// `r` with `n` points: exact up to Laurent terms of order `r^n`.
pub fn circle_residue<F: Fn(C64) -> C64>(f: F, center: C64, r: f64, n: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        let w = C64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
        acc += f(center + w) * w;
    }
    acc / n as f64
}

/// Matrix-valued version of [`circle_residue`].
pub fn circle_residue_mat<F: Fn(C64) -> CMat>(f: F, center: C64, r: f64, n: usize) -> CMat {
    let mut acc: Option<CMat> = None;
    for k in 0..n {
        let w = C64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
        let term = f(center + w) * w;
        acc = Some(match acc {
            None => term,
            Some(a) => a + term,
        });
    }
    acc.unwrap() / C64::new(n as f64, 0.0)
}

pub fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
