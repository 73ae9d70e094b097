//! Z₂-graded linear algebra: parities, Koszul signs, graded embeddings,
//! supertrace/superdeterminant and joint diagonalization of commuting
//! families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::{CMat, C64};

/// Parity assignment `p(a) ∈ {0,1}` for the `K = N + M` letters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grading {
    p: Vec<u8>,
}

impl Grading {
    pub fn new(p: Vec<u8>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidArgument("grading needs K >= 1".into()));
        }
        if p.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("parity bits must be 0 or 1".into()));
        }
        Ok(Grading { p })
    }

    /// Default ordering: `N` even letters followed by `M` odd ones.
    pub fn standard(n: usize, m: usize) -> Self {
        assert!(n + m > 0, "grading needs K >= 1");
        let mut p = vec![0u8; n];
        p.extend(std::iter::repeat(1u8).take(m));
        Grading { p }
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn n(&self) -> usize {
        self.p.iter().filter(|&&b| b == 0).count()
    }

    pub fn m(&self) -> usize {
        self.p.iter().filter(|&&b| b == 1).count()
    }

    pub fn parities(&self) -> &[u8] {
        &self.p
    }

    pub fn p(&self, a: usize) -> u8 {
        self.p[a]
    }

    /// `(-1)^{p(a)}`.
    pub fn sign(&self, a: usize) -> f64 {
        if self.p[a] == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Parity of a basis state: `Σ_j p(a_j) mod 2`.
    pub fn state_parity(&self, letters: &[usize]) -> u8 {
        (letters.iter().map(|&a| self.p[a] as usize).sum::<usize>() % 2) as u8
    }

    /// Same grading with every parity flipped (`gl(N|M) → gl(M|N)` labels).
    pub fn flipped(&self) -> Self {
        Grading { p: self.p.iter().map(|b| 1 - b).collect() }
    }

    /// `K^L`, or `None` on overflow.
    pub fn dim(&self, sites: usize) -> Option<usize> {
        self.k().checked_pow(sites as u32)
    }
}

/// A product state `v_{a_0} ⊗ … ⊗ v_{a_{L-1}}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisState {
    pub letters: Vec<usize>,
}

impl BasisState {
    pub fn index(&self, k: usize) -> usize {
        self.letters.iter().fold(0, |acc, &a| acc * k + a)
    }

    pub fn from_index(mut n: usize, k: usize, sites: usize) -> Self {
        let mut letters = vec![0; sites];
        for j in (0..sites).rev() {
            letters[j] = n % k;
            n /= k;
        }
        BasisState { letters }
    }
}

/// Dense operator on `(C^{N|M})^{⊗L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedOperator {
    pub grading: Grading,
    pub sites: usize,
    pub matrix: CMat,
}

impl GradedOperator {
    pub fn new(grading: Grading, sites: usize, matrix: CMat) -> Result<Self> {
        let dim = grading
            .dim(sites)
            .ok_or(Error::TooLarge { dim: usize::MAX, cap: usize::MAX })?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch(format!(
                "expected {dim}x{dim}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(GradedOperator { grading, sites, matrix })
    }

    pub fn identity(grading: &Grading, sites: usize) -> Self {
        let d = grading.dim(sites).expect("dimension overflow");
        GradedOperator { grading: grading.clone(), sites, matrix: CMat::identity(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Signed permutation of basis vectors: column `n` is sent to row
/// `target[n]` with factor `sign[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedPerm {
    pub target: Vec<usize>,
    pub sign: Vec<f64>,
}

impl SignedPerm {
    /// `out += c · P v`.
    pub fn apply_add(&self, v: &[C64], c: C64, out: &mut [C64]) {
        for (n, &vn) in v.iter().enumerate() {
            if vn.re != 0.0 || vn.im != 0.0 {
                out[self.target[n]] += c * vn * self.sign[n];
            }
        }
    }

    pub fn to_matrix(&self) -> CMat {
        let d = self.target.len();
        let mut m = CMat::zeros(d, d);
        for n in 0..d {
            m[(self.target[n], n)] = C64::new(self.sign[n], 0.0);
        }
        m
    }
}

fn check_site(j: usize, sites: usize) -> Result<()> {
    if j >= sites {
        return Err(Error::IndexOutOfRange(format!("site {j} not in 0..{sites}")));
    }
    Ok(())
}

fn check_letter(a: usize, k: usize) -> Result<()> {
    if a >= k {
        return Err(Error::IndexOutOfRange(format!("letter {a} not in 0..{k}")));
    }
    Ok(())
}

/// `E_ab^{(j)}`: replaces letter `b` at site `j` by `a`, with the Koszul sign
/// `(-1)^{(p(a)+p(b)) Σ_{k<j} p(a_k)}`.
pub fn embed_unit(grading: &Grading, sites: usize, j: usize, a: usize, b: usize) -> Result<GradedOperator> {
    check_site(j, sites)?;
    check_letter(a, grading.k())?;
    check_letter(b, grading.k())?;
    let k = grading.k();
    let d = grading.dim(sites).ok_or(Error::TooLarge { dim: usize::MAX, cap: usize::MAX })?;
    let mut m = CMat::zeros(d, d);
    let pab = (grading.p(a) + grading.p(b)) as usize;
    for n in 0..d {
        let mut st = BasisState::from_index(n, k, sites);
        if st.letters[j] != b {
            continue;
        }
        let before: usize = st.letters[..j].iter().map(|&c| grading.p(c) as usize).sum();
        let s = if (pab * before) % 2 == 0 { 1.0 } else { -1.0 };
        st.letters[j] = a;
        m[(st.index(k), n)] = C64::new(s, 0.0);
    }
    GradedOperator::new(grading.clone(), sites, m)
}

/// Sign picked up by `|…a_i…a_j…⟩` under `P_ij` (`i < j`):
/// `(-1)^{p(a_i) + (p(a_i)+p(a_j)) Σ_{k=i}^{j-1} p(a_k)}`.
pub fn transposition_sign(grading: &Grading, letters: &[usize], i: usize, j: usize) -> f64 {
    let pi = grading.p(letters[i]) as usize;
    let pj = grading.p(letters[j]) as usize;
    let string: usize = letters[i..j].iter().map(|&c| grading.p(c) as usize).sum();
    if (pi + (pi + pj) * string) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Signed-permutation form of the graded transposition `P_ij`, `i < j`.
pub fn graded_permutation_map(grading: &Grading, sites: usize, i: usize, j: usize) -> Result<SignedPerm> {
    if i >= j {
        return Err(Error::InvalidArgument(format!("graded permutation needs i < j, got ({i}, {j})")));
    }
    check_site(j, sites)?;
    let k = grading.k();
    let d = grading.dim(sites).ok_or(Error::TooLarge { dim: usize::MAX, cap: usize::MAX })?;
    let mut target = vec![0; d];
    let mut sign = vec![0.0; d];
    for n in 0..d {
        let mut st = BasisState::from_index(n, k, sites);
        sign[n] = transposition_sign(grading, &st.letters, i, j);
        st.letters.swap(i, j);
        target[n] = st.index(k);
    }
    Ok(SignedPerm { target, sign })
}

/// `P_ij` as a dense operator.
pub fn graded_permutation(grading: &Grading, sites: usize, i: usize, j: usize) -> Result<GradedOperator> {
    let p = graded_permutation_map(grading, sites, i, j)?;
    GradedOperator::new(grading.clone(), sites, p.to_matrix())
}

/// `Σ_n (-1)^{parity(n)} M_nn` where the dimension is `K^L` for some `L`.
pub fn supertrace(m: &CMat, grading: &Grading) -> Result<C64> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch("supertrace of a non-square matrix".into()));
    }
    let k = grading.k();
    let d = m.nrows();
    let mut sites = 0;
    let mut dd = 1usize;
    while dd < d {
        dd *= k;
        sites += 1;
    }
    if dd != d {
        return Err(Error::ShapeMismatch(format!("dimension {d} is not a power of K = {k}")));
    }
    let mut s = C64::new(0.0, 0.0);
    for n in 0..d {
        let st = BasisState::from_index(n, k, sites);
        if grading.state_parity(&st.letters) == 0 {
            s += m[(n, n)];
        } else {
            s -= m[(n, n)];
        }
    }
    Ok(s)
}

/// `str(g^k) = Σ_a (-1)^{p(a)} g_a^k` for a diagonal `g`.
pub fn str_diag_pow(g: &[C64], grading: &Grading, k: i32) -> C64 {
    g.iter()
        .enumerate()
        .map(|(a, &ga)| ga.powi(k) * grading.sign(a))
        .sum()
}

/// `sdet g = Π_a g_a^{1-2p(a)}`.
pub fn sdet_diag(g: &[C64], grading: &Grading) -> Result<C64> {
    if g.len() != grading.k() {
        return Err(Error::ShapeMismatch(format!("{} twists for K = {}", g.len(), grading.k())));
    }
    let mut s = C64::new(1.0, 0.0);
    for (a, &ga) in g.iter().enumerate() {
        if ga.norm() == 0.0 {
            return Err(Error::ZeroEntry(format!("g[{a}] = 0")));
        }
        if grading.p(a) == 0 {
            s *= ga;
        } else {
            s /= ga;
        }
    }
    Ok(s)
}

/// Supertrace over the leading (auxiliary) tensor factor.
pub fn partial_supertrace_aux(m: &CMat, grading: &Grading) -> Result<CMat> {
    let k = grading.k();
    let d = m.nrows();
    if m.ncols() != d || d % k != 0 {
        return Err(Error::ShapeMismatch(format!("dimension {d} not divisible by K = {k}")));
    }
    let inner = d / k;
    let mut out = CMat::zeros(inner, inner);
    for a in 0..k {
        let s = grading.sign(a);
        let block = m.view((a * inner, a * inner), (inner, inner));
        out += block * C64::new(s, 0.0);
    }
    Ok(out)
}

/// Joint eigenbasis of a commuting family.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEigen {
    /// Unit-norm right eigenvectors as columns.
    pub vectors: CMat,
    /// `values[e][i]`: eigenvalue of family member `i` on eigenvector `e`.
    pub values: Vec<Vec<C64>>,
    /// Largest relative off-diagonal norm of `V^{-1} A_i V`, floored by
    /// `cond(V)·ε`.
    pub residual: f64,
}

const JOINT_ATTEMPTS: usize = 5;

/// Diagonalize a commuting family through a random real combination
/// `C = Σ c_i A_i`, retrying with fresh coefficients on failure.
pub fn joint_diagonalize(family: &[CMat], seed: u64, tol: f64) -> Result<JointEigen> {
    let Some(first) = family.first() else {
        return Err(Error::InvalidArgument("empty family".into()));
    };
    let d = first.nrows();
    if family.iter().any(|a| a.nrows() != d || a.ncols() != d) {
        return Err(Error::ShapeMismatch("family members differ in shape".into()));
    }
    let norms: Vec<f64> = family.iter().map(linalg::frob).collect();
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            let c = linalg::frob(&linalg::commutator(&family[i], &family[j]));
            let scale = norms[i] * norms[j];
            if scale > 0.0 && c > tol * scale {
                return Err(Error::NonCommuting(c / scale));
            }
        }
    }
    if d == 0 {
        return Ok(JointEigen { vectors: CMat::zeros(0, 0), values: vec![], residual: 0.0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..JOINT_ATTEMPTS {
        let mut comb = CMat::zeros(d, d);
        for a in family {
            let c: f64 = rng.random_range(-1.0..1.0);
            comb += a * C64::new(c, 0.0);
        }
        let (_, v) = linalg::eig(&comb);
        let Some(vinv) = linalg::inverse(&v) else {
            continue;
        };
        // Forward-error proxy for the basis itself: nearly parallel columns
        // (Jordan structure) show up as a huge condition number.
        let cond = linalg::frob(&v) * linalg::frob(&vinv);
        let mut residual: f64 = cond * f64::EPSILON;
        let mut values = vec![vec![C64::new(0.0, 0.0); family.len()]; d];
        for (i, a) in family.iter().enumerate() {
            let t = &vinv * a * &v;
            let mut off = 0.0;
            for r in 0..d {
                for c in 0..d {
                    if r == c {
                        values[r][i] = t[(r, c)];
                    } else {
                        off += t[(r, c)].norm_sqr();
                    }
                }
            }
            if norms[i] > 0.0 {
                residual = residual.max(off.sqrt() / norms[i]);
            }
        }
        if residual.is_finite() && residual < tol {
            return Ok(JointEigen { vectors: v, values, residual });
        }
        best = best.min(residual);
    }
    Err(Error::NonDiagonalizable { context: String::new(), residual: best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_gradings(kmax: usize) -> Vec<Grading> {
        let mut out = vec![];
        for k in 1..=kmax {
            for bits in 0..(1u32 << k) {
                out.push(Grading::new((0..k).map(|a| ((bits >> a) & 1) as u8).collect()).unwrap());
            }
        }
        out
    }

    #[test]
    fn basis_index_roundtrip() {
        for n in 0..27 {
            assert_eq!(BasisState::from_index(n, 3, 3).index(3), n);
        }
        assert_eq!(BasisState { letters: vec![1, 0, 2] }.index(3), 9 + 2);
    }

    #[test]
    fn embed_unit_single_site() {
        let g = Grading::standard(1, 1);
        let e = embed_unit(&g, 1, 0, 0, 1).unwrap();
        let mut want = CMat::zeros(2, 2);
        want[(0, 1)] = C64::new(1.0, 0.0);
        assert_eq!(e.matrix, want);
    }

    #[test]
    fn embed_unit_koszul_sign_on_second_site() {
        // E_{01} at site 1: |a_0, 1> -> |a_0, 0>, sign (-1)^{p(a_0)}
        let g = Grading::standard(1, 1);
        let e = embed_unit(&g, 2, 1, 0, 1).unwrap().matrix;
        assert_eq!(e[(0, 1)], C64::new(1.0, 0.0)); // |01> -> |00>
        assert_eq!(e[(2, 3)], C64::new(-1.0, 0.0)); // |11> -> |10>
        assert_eq!(e.iter().filter(|z| z.norm() > 0.0).count(), 2);
    }

    #[test]
    fn super_commutation_exhaustive() {
        for g in all_gradings(3) {
            let k = g.k();
            for sites in 2..=3 {
                if k.pow(sites as u32) > 27 {
                    continue;
                }
                for i in 0..sites {
                    for j in 0..sites {
                        if i == j {
                            continue;
                        }
                        for a in 0..k {
                            for b in 0..k {
                                let eab = embed_unit(&g, sites, i, a, b).unwrap().matrix;
                                for c in 0..k {
                                    for d in 0..k {
                                        let ecd = embed_unit(&g, sites, j, c, d).unwrap().matrix;
                                        let par = (g.p(a) + g.p(b)) * (g.p(c) + g.p(d));
                                        let s = if par % 2 == 0 { 1.0 } else { -1.0 };
                                        let lhs = &eab * &ecd;
                                        let rhs = &ecd * &eab * C64::new(s, 0.0);
                                        assert_eq!(lhs, rhs);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_even_grading_is_plain() {
        let g = Grading::standard(3, 0);
        let p = graded_permutation_map(&g, 3, 0, 2).unwrap();
        assert!(p.sign.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn permutation_all_odd_two_sites() {
        let g = Grading::standard(0, 2);
        let p = graded_permutation_map(&g, 2, 0, 1).unwrap();
        assert!(p.sign.iter().all(|&s| s == -1.0));
    }

    #[test]
    fn permutation_matches_unit_sum() {
        for g in all_gradings(3) {
            let k = g.k();
            for sites in 2..=3 {
                for i in 0..sites {
                    for j in i + 1..sites {
                        let d = k.pow(sites as u32);
                        let mut sum = CMat::zeros(d, d);
                        for a in 0..k {
                            for b in 0..k {
                                let e1 = embed_unit(&g, sites, i, a, b).unwrap().matrix;
                                let e2 = embed_unit(&g, sites, j, b, a).unwrap().matrix;
                                sum += &e1 * &e2 * C64::new(g.sign(b), 0.0);
                            }
                        }
                        let p = graded_permutation(&g, sites, i, j).unwrap().matrix;
                        assert_eq!(p, sum, "grading {:?} sites {sites} ({i},{j})", g.parities());
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_is_involution() {
        for g in all_gradings(3) {
            let p = graded_permutation(&g, 3, 0, 2).unwrap().matrix;
            let d = p.nrows();
            assert_eq!(&p * &p, CMat::identity(d, d));
        }
    }

    #[test]
    fn permutation_rejects_bad_order() {
        let g = Grading::standard(1, 1);
        assert!(graded_permutation(&g, 2, 1, 1).is_err());
        assert!(graded_permutation(&g, 2, 1, 0).is_err());
    }

    #[test]
    fn supertrace_examples() {
        let g = Grading::standard(2, 1);
        assert_eq!(supertrace(&CMat::identity(3, 3), &g).unwrap(), C64::new(1.0, 0.0));
        let g11 = Grading::standard(1, 1);
        let tw = linalg::diag(&[C64::new(2.0, 0.0), C64::new(3.0, 0.0)]);
        assert_eq!(supertrace(&tw, &g11).unwrap(), C64::new(-1.0, 0.0));
        let g3 = Grading::standard(3, 0);
        let v = [C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0)];
        assert_eq!(str_diag_pow(&v, &g3, 2), C64::new(14.0, 0.0));
    }

    #[test]
    fn supertrace_graded_cyclicity_on_units() {
        let g = Grading::standard(2, 1);
        let k = g.k();
        let unit = |a: usize, b: usize| {
            let mut m = CMat::zeros(k, k);
            m[(a, b)] = C64::new(1.0, 0.0);
            m
        };
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    for d in 0..k {
                        let (x, y) = (unit(a, b), unit(c, d));
                        let pa = (g.p(a) + g.p(b)) % 2;
                        let pb = (g.p(c) + g.p(d)) % 2;
                        let s = if pa * pb == 1 { -1.0 } else { 1.0 };
                        let lhs = supertrace(&(&x * &y), &g).unwrap();
                        let rhs = supertrace(&(&y * &x), &g).unwrap() * s;
                        assert_eq!(lhs, rhs);
                    }
                }
            }
        }
    }

    #[test]
    fn sdet_examples() {
        let c = |r: f64| C64::new(r, 0.0);
        assert_eq!(sdet_diag(&[c(2.0), c(3.0)], &Grading::standard(2, 0)).unwrap(), c(6.0));
        let s = sdet_diag(&[c(2.0), c(3.0)], &Grading::standard(1, 1)).unwrap();
        assert!((s - c(2.0 / 3.0)).norm() < 1e-15);
        assert!(sdet_diag(&[c(0.0), c(3.0)], &Grading::standard(1, 1)).is_err());
        let z = C64::new(1.7, 0.4);
        let g = [c(0.5), C64::new(0.2, 0.3)];
        let shifted: Vec<C64> = g.iter().map(|&ga| 1.0 - ga / z).collect();
        let s = sdet_diag(&shifted, &Grading::standard(1, 1)).unwrap();
        assert!((s - (1.0 - g[0] / z) / (1.0 - g[1] / z)).norm() < 1e-15);
    }

    #[test]
    fn partial_supertrace_examples() {
        let g = Grading::standard(1, 1);
        let tw = linalg::diag(&[C64::new(2.0, 0.0), C64::new(5.0, 0.0)]);
        let gi = tw.kronecker(&CMat::identity(4, 4));
        let s = partial_supertrace_aux(&gi, &g).unwrap();
        assert_eq!(s, CMat::identity(4, 4) * C64::new(-3.0, 0.0));
        let p = graded_permutation(&g, 2, 0, 1).unwrap().matrix;
        assert_eq!(partial_supertrace_aux(&p, &g).unwrap(), CMat::identity(2, 2));
        assert!(partial_supertrace_aux(&CMat::identity(3, 3), &g).is_err());
    }

    #[test]
    fn joint_diag_diagonal_family() {
        let c = |r: f64| C64::new(r, 0.0);
        let fam = vec![
            linalg::diag(&[c(1.0), c(2.0), c(3.0)]),
            linalg::diag(&[c(4.0), c(4.0), c(-1.0)]),
        ];
        let je = joint_diagonalize(&fam, 7, 1e-9).unwrap();
        let mut got: Vec<(f64, f64)> = je.values.iter().map(|v| (v[0].re, v[1].re)).collect();
        got.sort_by(|a, b| a.0.total_cmp(&b.0));
        let want = [(1.0, 4.0), (2.0, 4.0), (3.0, -1.0)];
        for (g, w) in got.iter().zip(want) {
            assert!((g.0 - w.0).abs() < 1e-12 && (g.1 - w.1).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_diag_jordan_block_fails() {
        let mut j = CMat::identity(2, 2) * C64::new(2.0, 0.0);
        j[(0, 1)] = C64::new(1.0, 0.0);
        let err = joint_diagonalize(&[j], 1, 1e-9).unwrap_err();
        assert!(matches!(err, Error::NonDiagonalizable { .. }), "{err:?}");
    }

    #[test]
    fn joint_diag_detects_noncommuting() {
        let a = linalg::diag(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
        let mut b = CMat::zeros(2, 2);
        b[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(joint_diagonalize(&[a, b], 1, 1e-9), Err(Error::NonCommuting(_))));
    }
}
