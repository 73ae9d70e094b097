//! Inhomogeneous twisted gl(N|M) XXX chain: R-matrices, transfer matrix,
//! non-local Hamiltonians, weight sectors and exact diagonalization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::superlinalg::{self, transposition_sign, BasisState, GradedOperator, Grading, SignedPerm};
use crate::{CMat, C64};

/// Cap on `K^L` for sector construction and diagonalization.
pub const DIAG_CAP: usize = 4096;
/// Cap on `K^{L+1}` for the transfer matrix.
pub const TRANSFER_CAP: usize = 4096;
/// Cap on `K^L` for full dense Hamiltonians.
pub const DENSE_CAP: usize = 1024;
/// Cap on `K^{L+1}` for the residue cross-check.
pub const RESIDUE_CAP: usize = 1024;

/// Full model definition.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub grading: Grading,
    pub x: Vec<C64>,
    pub g: Vec<C64>,
    pub eta: C64,
}

impl ChainSpec {
    pub fn new(grading: Grading, x: Vec<C64>, g: Vec<C64>, eta: C64) -> Result<Self> {
        let s = ChainSpec { grading, x, g, eta };
        s.validate()?;
        Ok(s)
    }

    /// Convenience constructor from real parameters and the standard grading.
    pub fn real(n: usize, m: usize, x: &[f64], g: &[f64], eta: f64) -> Result<Self> {
        ChainSpec::new(
            Grading::standard(n, m),
            x.iter().map(|&v| C64::new(v, 0.0)).collect(),
            g.iter().map(|&v| C64::new(v, 0.0)).collect(),
            C64::new(eta, 0.0),
        )
    }

    pub fn l(&self) -> usize {
        self.x.len()
    }

    pub fn k(&self) -> usize {
        self.grading.k()
    }

    pub fn validate(&self) -> Result<()> {
        if self.g.len() != self.grading.k() {
            return Err(Error::ShapeMismatch(format!(
                "{} twists for K = {}",
                self.g.len(),
                self.grading.k()
            )));
        }
        if self.x.is_empty() {
            return Err(Error::InvalidArgument("chain needs L >= 1".into()));
        }
        if self.eta.norm() == 0.0 {
            return Err(Error::InvalidArgument("eta must be nonzero".into()));
        }
        if let Some(a) = self.g.iter().position(|z| z.norm() == 0.0) {
            return Err(Error::ZeroEntry(format!("g[{a}] = 0")));
        }
        general_position(&self.x, self.eta)
    }
}

/// `x_i ≠ x_j` and `x_i ≠ x_j ± η` for `i ≠ j`.
pub fn general_position(x: &[C64], eta: C64) -> Result<()> {
    let scale = x.iter().map(|z| z.norm()).fold(eta.norm().max(1.0), f64::max);
    let eps = 1e-12 * scale;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i == j {
                continue;
            }
            let d = x[i] - x[j];
            if d.norm() < eps || (d - eta).norm() < eps {
                return Err(Error::GeneralPosition(format!("x[{i}] - x[{j}] in {{0, eta}}")));
            }
        }
    }
    Ok(())
}

/// JSON form of [`ChainSpec`]: `{N, M, p?, L, x[], g[], eta, seed?, tol?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ChainSpecJson {
    pub N: usize,
    pub M: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<u8>>,
    pub L: usize,
    #[serde(with = "crate::io::complex_vec")]
    pub x: Vec<C64>,
    #[serde(with = "crate::io::complex_vec")]
    pub g: Vec<C64>,
    #[serde(with = "crate::io::complex")]
    pub eta: C64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl ChainSpecJson {
    pub fn to_spec(&self) -> Result<ChainSpec> {
        if self.N + self.M == 0 {
            return Err(Error::InvalidArgument("N + M must be positive".into()));
        }
        let grading = match &self.p {
            Some(p) => {
                let g = Grading::new(p.clone())?;
                if g.n() != self.N || g.m() != self.M {
                    return Err(Error::InvalidArgument(format!(
                        "parity vector has {} even / {} odd letters, expected {}|{}",
                        g.n(),
                        g.m(),
                        self.N,
                        self.M
                    )));
                }
                g
            }
            None => Grading::standard(self.N, self.M),
        };
        if self.x.len() != self.L {
            return Err(Error::ShapeMismatch(format!("L = {} but {} inhomogeneities", self.L, self.x.len())));
        }
        ChainSpec::new(grading, self.x.clone(), self.g.clone(), self.eta)
    }

    pub fn from_spec(spec: &ChainSpec) -> Self {
        ChainSpecJson {
            N: spec.grading.n(),
            M: spec.grading.m(),
            p: Some(spec.grading.parities().to_vec()),
            L: spec.l(),
            x: spec.x.clone(),
            g: spec.g.clone(),
            eta: spec.eta,
            seed: None,
            tol: None,
        }
    }
}

/// Letters occupying a weight space: `occupation[a] = M_a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSector {
    pub occupation: Vec<usize>,
    /// Global basis indices, ascending.
    pub basis: Vec<usize>,
}

impl WeightSector {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `Σ_a g_a M_a`.
    pub fn weight(&self, g: &[C64]) -> C64 {
        self.occupation.iter().zip(g).map(|(&m, &ga)| ga * m as f64).sum()
    }

    /// The twist multiset `{g_a^{M_a}}` as a list of length `L`.
    pub fn twist_list(&self, g: &[C64]) -> Vec<C64> {
        let mut out = vec![];
        for (a, &m) in self.occupation.iter().enumerate() {
            out.extend(std::iter::repeat(g[a]).take(m));
        }
        out
    }
}

/// One joint eigenstate of `(H_1, …, H_L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub occupation: Vec<usize>,
    #[serde(rename = "H", with = "crate::io::complex_vec")]
    pub h: Vec<C64>,
    pub residual: f64,
}

fn dim_checked(grading: &Grading, sites: usize, cap: usize) -> Result<usize> {
    match grading.dim(sites) {
        Some(d) if d <= cap => Ok(d),
        Some(d) => Err(Error::TooLarge { dim: d, cap }),
        None => Err(Error::TooLarge { dim: usize::MAX, cap }),
    }
}

/// `R^{0j}(u) = I + (η/u) P_{0j}` on aux ⊗ chain (aux factor first).
pub fn build_r(spec: &ChainSpec, u: C64, j: usize) -> Result<GradedOperator> {
    if j >= spec.l() {
        return Err(Error::IndexOutOfRange(format!("site {j} not in 0..{}", spec.l())));
    }
    if u.norm() == 0.0 {
        return Err(Error::PoleAtX(u));
    }
    dim_checked(&spec.grading, spec.l() + 1, TRANSFER_CAP)?;
    let p = superlinalg::graded_permutation(&spec.grading, spec.l() + 1, 0, j + 1)?;
    let d = p.dim();
    let m = CMat::identity(d, d) + p.matrix * (spec.eta / u);
    GradedOperator::new(spec.grading.clone(), spec.l() + 1, m)
}

/// Two-site R-matrix `I + (η/u) P_{12}` on `C^K ⊗ C^K`.
pub fn r_pair(grading: &Grading, eta: C64, u: C64) -> Result<CMat> {
    if u.norm() == 0.0 {
        return Err(Error::PoleAtX(u));
    }
    let p = superlinalg::graded_permutation(grading, 2, 0, 1)?.matrix;
    let d = p.nrows();
    Ok(CMat::identity(d, d) + p * (eta / u))
}

/// Relative residual of `R12(x1−x2) R13(x1−x3) R23(x2−x3) = R23 R13 R12`
/// built from arbitrary transposition matrices `p12, p13, p23`.
pub fn yangbaxter_residual_with(p12: &CMat, p13: &CMat, p23: &CMat, eta: C64, x: [C64; 3]) -> f64 {
    let d = p12.nrows();
    let id = CMat::identity(d, d);
    let r = |p: &CMat, u: C64| &id + p * (eta / u);
    let r12 = r(p12, x[0] - x[1]);
    let r13 = r(p13, x[0] - x[2]);
    let r23 = r(p23, x[1] - x[2]);
    let lhs = &r12 * &r13 * &r23;
    let rhs = &r23 * &r13 * &r12;
    linalg::frob(&(&lhs - &rhs)) / linalg::frob(&lhs).max(f64::MIN_POSITIVE)
}

/// Graded Yang–Baxter residual on three vector-representation sites.
pub fn yangbaxter_check(grading: &Grading, eta: C64, x1: C64, x2: C64, x3: C64) -> Result<f64> {
    for (a, b) in [(x1, x2), (x1, x3), (x2, x3)] {
        if (a - b).norm() == 0.0 {
            return Err(Error::PoleAtX(a - b));
        }
    }
    let p12 = superlinalg::graded_permutation(grading, 3, 0, 1)?.matrix;
    let p13 = superlinalg::graded_permutation(grading, 3, 0, 2)?.matrix;
    let p23 = superlinalg::graded_permutation(grading, 3, 1, 2)?.matrix;
    Ok(yangbaxter_residual_with(&p12, &p13, &p23, eta, [x1, x2, x3]))
}

/// `T(x) = str_0( R^{0L}(x−x_L) ⋯ R^{01}(x−x_1) (g ⊗ I) )`.
///
/// Built column by column with signed-permutation updates, so memory stays
/// at one `K^{L+1}` vector plus the `K^L × K^L` result.
pub fn transfer_matrix(spec: &ChainSpec, x: C64) -> Result<GradedOperator> {
    let l = spec.l();
    let big = dim_checked(&spec.grading, l + 1, TRANSFER_CAP)?;
    if let Some(&xj) = spec.x.iter().find(|&&xj| (x - xj).norm() == 0.0) {
        return Err(Error::PoleAtX(xj));
    }
    let k = spec.k();
    let d = big / k;
    let perms: Vec<SignedPerm> = (0..l)
        .map(|j| superlinalg::graded_permutation_map(&spec.grading, l + 1, 0, j + 1))
        .collect::<Result<_>>()?;
    let coef: Vec<C64> = spec.x.iter().map(|&xj| spec.eta / (x - xj)).collect();
    let columns: Vec<Vec<C64>> = (0..d)
        .into_par_iter()
        .map(|n| {
            let mut col = vec![C64::new(0.0, 0.0); d];
            let mut v = vec![C64::new(0.0, 0.0); big];
            for a in 0..k {
                v.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                v[a * d + n] = spec.g[a];
                for j in 0..l {
                    let mut w = v.clone();
                    perms[j].apply_add(&v, coef[j], &mut w);
                    v = w;
                }
                let s = spec.grading.sign(a);
                for m in 0..d {
                    col[m] += v[a * d + m] * s;
                }
            }
            col
        })
        .collect();
    let mut t = CMat::zeros(d, d);
    for (n, col) in columns.into_iter().enumerate() {
        for (m, z) in col.into_iter().enumerate() {
            t[(m, n)] = z;
        }
    }
    GradedOperator::new(spec.grading.clone(), l, t)
}

/// A set of basis states closed under every `P_ij`, with the transpositions
/// restricted to it.
struct Subspace {
    letters: Vec<Vec<usize>>,
    /// `perms[pair_index(i, j)]` for `i < j`.
    perms: Vec<SignedPerm>,
    sites: usize,
}

fn pair_index(sites: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    i * sites - i * (i + 1) / 2 + (j - i - 1)
}

impl Subspace {
    fn new(grading: &Grading, sites: usize, basis: &[usize]) -> Self {
        let k = grading.k();
        let letters: Vec<Vec<usize>> = basis
            .iter()
            .map(|&n| BasisState::from_index(n, k, sites).letters)
            .collect();
        let mut perms = Vec::with_capacity(sites * sites.saturating_sub(1) / 2);
        for i in 0..sites {
            for j in i + 1..sites {
                let mut target = Vec::with_capacity(basis.len());
                let mut sign = Vec::with_capacity(basis.len());
                for st in &letters {
                    sign.push(transposition_sign(grading, st, i, j));
                    let mut sw = st.clone();
                    sw.swap(i, j);
                    let idx = BasisState { letters: sw }.index(k);
                    target.push(basis.binary_search(&idx).expect("subspace not closed under P_ij"));
                }
                perms.push(SignedPerm { target, sign });
            }
        }
        Subspace { letters, perms, sites }
    }

    fn perm(&self, i: usize, j: usize) -> &SignedPerm {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        &self.perms[pair_index(self.sites, a, b)]
    }

    /// `H_j v` from the ordered product formula.
    fn apply_h(&self, spec: &ChainSpec, j: usize, v: &[C64]) -> Vec<C64> {
        let mut v = v.to_vec();
        let step = |v: Vec<C64>, k: usize| -> Vec<C64> {
            let c = spec.eta / (spec.x[j] - spec.x[k]);
            let mut w = v.clone();
            self.perm(j, k).apply_add(&v, c, &mut w);
            w
        };
        for k in j + 1..self.sites {
            v = step(v, k);
        }
        for (n, z) in v.iter_mut().enumerate() {
            *z *= spec.g[self.letters[n][j]];
        }
        for k in 0..j {
            v = step(v, k);
        }
        v
    }

    fn h_matrix(&self, spec: &ChainSpec, j: usize) -> CMat {
        let d = self.letters.len();
        let mut m = CMat::zeros(d, d);
        let mut e = vec![C64::new(0.0, 0.0); d];
        for n in 0..d {
            e[n] = C64::new(1.0, 0.0);
            let col = self.apply_h(spec, j, &e);
            e[n] = C64::new(0.0, 0.0);
            for (r, z) in col.into_iter().enumerate() {
                m[(r, n)] = z;
            }
        }
        m
    }
}

/// Dense `H_1 … H_L` on the full space (`K^L ≤ DENSE_CAP`).
pub fn hamiltonians(spec: &ChainSpec) -> Result<Vec<GradedOperator>> {
    let d = dim_checked(&spec.grading, spec.l(), DENSE_CAP)?;
    let basis: Vec<usize> = (0..d).collect();
    let sub = Subspace::new(&spec.grading, spec.l(), &basis);
    (0..spec.l())
        .map(|j| GradedOperator::new(spec.grading.clone(), spec.l(), sub.h_matrix(spec, j)))
        .collect()
}

/// `H_1 … H_L` restricted to a weight sector (in the sector's basis order).
pub fn sector_hamiltonians(spec: &ChainSpec, sector: &WeightSector) -> Result<Vec<CMat>> {
    if sector.occupation.len() != spec.k() || sector.occupation.iter().sum::<usize>() != spec.l() {
        return Err(Error::InvalidArgument("occupation does not match the chain".into()));
    }
    let sub = Subspace::new(&spec.grading, spec.l(), &sector.basis);
    Ok((0..spec.l()).map(|j| sub.h_matrix(spec, j)).collect())
}

/// `η^{-1} Res_{x=x_j} T(x)` by 4-point circle averaging with radius
/// `1e-3 · (distance to the nearest other pole)`.
pub fn residue_hamiltonians(spec: &ChainSpec) -> Result<Vec<GradedOperator>> {
    dim_checked(&spec.grading, spec.l() + 1, RESIDUE_CAP)?;
    let l = spec.l();
    let mut out = Vec::with_capacity(l);
    for j in 0..l {
        let gap = (0..l)
            .filter(|&k| k != j)
            .map(|k| (spec.x[j] - spec.x[k]).norm())
            .fold(f64::INFINITY, f64::min);
        let gap = if gap.is_finite() { gap } else { spec.x[j].norm().max(1.0) };
        let r = 1e-3 * gap;
        let mut acc: Option<CMat> = None;
        for q in 0..4 {
            let w = C64::from_polar(r, std::f64::consts::FRAC_PI_2 * q as f64);
            let t = transfer_matrix(spec, spec.x[j] + w)?.matrix * w;
            acc = Some(match acc {
                None => t,
                Some(a) => a + t,
            });
        }
        let m = acc.unwrap() / (spec.eta * 4.0);
        out.push(GradedOperator::new(spec.grading.clone(), l, m)?);
    }
    Ok(out)
}

/// `M_a = Σ_j E_aa^{(j)}` (diagonal).
pub fn weight_operators(spec: &ChainSpec) -> Result<Vec<GradedOperator>> {
    let d = dim_checked(&spec.grading, spec.l(), DENSE_CAP)?;
    let k = spec.k();
    let mut ops = vec![CMat::zeros(d, d); k];
    for n in 0..d {
        for a in BasisState::from_index(n, k, spec.l()).letters {
            ops[a][(n, n)] += C64::new(1.0, 0.0);
        }
    }
    ops.into_iter()
        .map(|m| GradedOperator::new(spec.grading.clone(), spec.l(), m))
        .collect()
}

/// Number of basis states with the given occupation: `L! / Π M_a!`.
pub fn sector_dim(occupation: &[usize]) -> usize {
    let l: usize = occupation.iter().sum();
    let mut num: u128 = 1;
    let mut placed = 0u128;
    for &m in occupation {
        for i in 1..=m as u128 {
            placed += 1;
            num = num * placed / i;
        }
    }
    debug_assert_eq!(placed, l as u128);
    num as usize
}

/// The weight sector with a given occupation.
pub fn sector(spec: &ChainSpec, occupation: &[usize]) -> Result<WeightSector> {
    if occupation.len() != spec.k() || occupation.iter().sum::<usize>() != spec.l() {
        return Err(Error::InvalidArgument(format!(
            "occupation {occupation:?} does not sum to L = {} over K = {} letters",
            spec.l(),
            spec.k()
        )));
    }
    if sector_dim(occupation) > DIAG_CAP {
        return Err(Error::TooLarge { dim: sector_dim(occupation), cap: DIAG_CAP });
    }
    let k = spec.k();
    let mut word: Vec<usize> = vec![];
    for (a, &m) in occupation.iter().enumerate() {
        word.extend(std::iter::repeat(a).take(m));
    }
    let mut basis = vec![];
    loop {
        basis.push(BasisState { letters: word.clone() }.index(k));
        if !next_permutation(&mut word) {
            break;
        }
    }
    Ok(WeightSector { occupation: occupation.to_vec(), basis })
}

fn next_permutation(w: &mut [usize]) -> bool {
    if w.len() < 2 {
        return false;
    }
    let mut i = w.len() - 1;
    while i > 0 && w[i - 1] >= w[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = w.len() - 1;
    while w[j] <= w[i - 1] {
        j -= 1;
    }
    w.swap(i - 1, j);
    w[i..].reverse();
    true
}

/// All occupations `(M_1…M_K)` with `Σ M_a = L`, in descending lexicographic
/// order (`(L,0,…,0)` first).
pub fn occupations(k: usize, l: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for m in (0..=left).rev() {
            cur.push(m);
            rec(k, left - m, cur, out);
            cur.pop();
        }
    }
    let mut out = vec![];
    rec(k, l, &mut Vec::with_capacity(k), &mut out);
    out
}

/// All weight sectors, in the order of [`occupations`].
pub fn sector_decompose(spec: &ChainSpec) -> Result<Vec<WeightSector>> {
    dim_checked(&spec.grading, spec.l(), DIAG_CAP)?;
    occupations(spec.k(), spec.l())
        .iter()
        .map(|occ| sector(spec, occ))
        .collect()
}

/// Eigenvalues of `H_j` on `(v_{a0})^{⊗L}`:
/// `g_{a0} Π_{k≠j} (1 + (-1)^{p(a0)} η/(x_j − x_k))`.
pub fn reference_eigenvalues(spec: &ChainSpec, a0: usize) -> Vec<C64> {
    let s = spec.grading.sign(a0);
    (0..spec.l())
        .map(|j| {
            let mut h = spec.g[a0];
            for k in 0..spec.l() {
                if k != j {
                    h *= 1.0 + spec.eta * s / (spec.x[j] - spec.x[k]);
                }
            }
            h
        })
        .collect()
}

/// Eigenvalue of `T(x)` given the Hamiltonian eigenvalues of a state.
pub fn transfer_eigenvalue(spec: &ChainSpec, h: &[C64], x: C64) -> C64 {
    let strg = superlinalg::str_diag_pow(&spec.g, &spec.grading, 1);
    strg + h
        .iter()
        .zip(&spec.x)
        .map(|(&hj, &xj)| spec.eta * hj / (x - xj))
        .sum::<C64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagOptions {
    pub seed: u64,
    pub tol: f64,
}

impl Default for DiagOptions {
    fn default() -> Self {
        DiagOptions { seed: 0, tol: 1e-9 }
    }
}

fn sector_seed(seed: u64, idx: usize) -> u64 {
    seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Joint spectrum of one sector.
pub fn diagonalize_sector(spec: &ChainSpec, sector: &WeightSector, seed: u64, tol: f64) -> Result<Vec<SpectrumRecord>> {
    let fam = sector_hamiltonians(spec, sector)?;
    let je = superlinalg::joint_diagonalize(&fam, seed, tol).map_err(|e| match e {
        Error::NonDiagonalizable { residual, .. } => Error::NonDiagonalizable {
            context: format!(" in sector {:?}", sector.occupation),
            residual,
        },
        other => other,
    })?;
    let w = sector.weight(&spec.g);
    let scale = linalg::max_abs(&spec.g).max(1.0) * spec.l() as f64;
    Ok(je
        .values
        .into_iter()
        .map(|h| {
            let sum_dev = (h.iter().sum::<C64>() - w).norm() / scale;
            SpectrumRecord { occupation: sector.occupation.clone(), h, residual: je.residual.max(sum_dev) }
        })
        .collect())
}

/// Joint spectra of `(H_1…H_L)` over every weight sector; `K^L` records.
pub fn diagonalize(spec: &ChainSpec, opts: DiagOptions) -> Result<Vec<SpectrumRecord>> {
    let sectors = sector_decompose(spec)?;
    let per: Vec<Result<Vec<SpectrumRecord>>> = sectors
        .par_iter()
        .enumerate()
        .map(|(i, s)| diagonalize_sector(spec, s, sector_seed(opts.seed, i), opts.tol))
        .collect();
    let mut out = Vec::with_capacity(spec.grading.dim(spec.l()).unwrap_or(0));
    for r in per {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMode {
    EtaZero,
    EtaInfty,
}

/// Closed-form spectra in the `η → 0` and `η → ∞` limits.
///
/// `EtaZero` gives `H_j = g_{a_j}` for every basis state. `EtaInfty` gives the
/// values of `lim η^{1−L} H_j`: the leading term is
/// `S / Π_{k≠j}(x_j − x_k)` with one signed, twisted cyclic shift `S` common
/// to all `j`. Its eigenvalues are computed orbit by orbit; for an orbit of
/// period `L` (all letters distinct) they are the `L`-th roots of `Π g_{a_k}`.
pub fn limit_spectra(spec: &ChainSpec, mode: LimitMode) -> Result<Vec<SpectrumRecord>> {
    let k = spec.k();
    let l = spec.l();
    let mut out = vec![];
    for sector in sector_decompose(spec)? {
        match mode {
            LimitMode::EtaZero => {
                for &n in &sector.basis {
                    let st = BasisState::from_index(n, k, l);
                    out.push(SpectrumRecord {
                        occupation: sector.occupation.clone(),
                        h: st.letters.iter().map(|&a| spec.g[a]).collect(),
                        residual: 0.0,
                    });
                }
            }
            LimitMode::EtaInfty => {
                for s in shift_eigenvalues(spec, &sector) {
                    let h = (0..l)
                        .map(|j| {
                            let den: C64 = (0..l)
                                .filter(|&q| q != j)
                                .map(|q| spec.x[j] - spec.x[q])
                                .product();
                            s / den
                        })
                        .collect();
                    out.push(SpectrumRecord { occupation: sector.occupation.clone(), h, residual: 0.0 });
                }
            }
        }
    }
    Ok(out)
}

/// Eigenvalues of `S = P_{0,1}… g^{(0)}`-type leading operator of `H_0`
/// restricted to a sector; `S` maps each basis state to one basis state.
fn shift_eigenvalues(spec: &ChainSpec, sector: &WeightSector) -> Vec<C64> {
    let l = spec.l();
    let d = sector.dim();
    let sub = Subspace::new(&spec.grading, l, &sector.basis);
    // Leading η-power of H_0: g^{(0)} P_{0,L-1} ⋯ P_{0,1} (right factors only).
    let mut image = vec![(0usize, C64::new(0.0, 0.0)); d];
    for n in 0..d {
        let mut v = vec![C64::new(0.0, 0.0); d];
        v[n] = C64::new(1.0, 0.0);
        for q in 1..l {
            let mut w = vec![C64::new(0.0, 0.0); d];
            sub.perm(0, q).apply_add(&v, C64::new(1.0, 0.0), &mut w);
            v = w;
        }
        let (m, z) = v
            .iter()
            .enumerate()
            .find(|(_, z)| z.norm() > 0.0)
            .map(|(m, z)| (m, *z))
            .expect("monomial image");
        image[n] = (m, z * spec.g[sub.letters[m][0]]);
    }
    let mut seen = vec![false; d];
    let mut vals = Vec::with_capacity(d);
    for start in 0..d {
        if seen[start] {
            continue;
        }
        let mut period = 0;
        let mut prod = C64::new(1.0, 0.0);
        let mut n = start;
        loop {
            seen[n] = true;
            prod *= image[n].1;
            n = image[n].0;
            period += 1;
            if n == start {
                break;
            }
        }
        let root = prod.powf(1.0 / period as f64);
        for b in 0..period {
            vals.push(root * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * b as f64 / period as f64));
        }
    }
    vals
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn spec_11_l3() -> ChainSpec {
        ChainSpec::real(1, 1, &[0.0, 1.0, 2.5], &[1.0, 2.0], 0.3).unwrap()
    }

    #[test]
    fn general_position_rejects_coincident_points() {
        let e = ChainSpec::real(1, 1, &[0.0, 0.0], &[1.0, 2.0], 0.3).unwrap_err();
        assert!(e.to_string().contains("general position violated"));
        assert!(ChainSpec::real(1, 1, &[0.0, 0.3], &[1.0, 2.0], 0.3).is_err());
    }

    #[test]
    fn r_matrix_identity_limit_and_unitarity() {
        let spec = ChainSpec::real(1, 1, &[0.0], &[1.0, 2.0], 0.3).unwrap();
        let r = build_r(&spec, c(1e12, 0.0), 0).unwrap().matrix;
        assert!(linalg::frob(&(r - CMat::identity(4, 4))) < 1e-11);
        let rp = build_r(&spec, c(1.7, 0.0), 0).unwrap().matrix;
        let rm = build_r(&spec, c(-1.7, 0.0), 0).unwrap().matrix;
        let f = 1.0 - 0.09 / (1.7 * 1.7);
        assert!(linalg::frob(&(&rp * &rm - CMat::identity(4, 4) * c(f, 0.0))) < 1e-14);
        assert!(matches!(build_r(&spec, c(0.0, 0.0), 0), Err(Error::PoleAtX(_))));
    }

    #[test]
    fn r_matrix_block_form_gl11() {
        // aux index first: blocks R_{ab} = δ_ab I + (η/x) (-1)^{p(b)} e_{ba}
        let spec = ChainSpec::real(1, 1, &[0.0], &[1.0, 2.0], 0.3).unwrap();
        let x = 1.3;
        let r = build_r(&spec, c(x, 0.0), 0).unwrap().matrix;
        let e = 0.3 / x;
        let want = [
            [1.0 + e, 0.0, 0.0, 0.0],
            [0.0, 1.0, e, 0.0],
            [0.0, e, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0 - e],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((r[(i, j)] - c(want[i][j], 0.0)).norm() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn transfer_matrix_single_site() {
        let spec = ChainSpec::new(
            Grading::standard(2, 1),
            vec![c(0.4, 0.1)],
            vec![c(1.0, 0.0), c(2.0, 0.5), c(-0.7, 0.0)],
            c(0.3, 0.0),
        )
        .unwrap();
        let x = c(1.1, -0.2);
        let t = transfer_matrix(&spec, x).unwrap().matrix;
        let strg = spec.g[0] + spec.g[1] - spec.g[2];
        for a in 0..3 {
            let want = strg + spec.eta / (x - spec.x[0]) * spec.g[a];
            assert!((t[(a, a)] - want).norm() < 1e-14);
        }
        assert!(t.iter().enumerate().all(|(i, z)| i % 4 == 0 || z.norm() == 0.0));
    }

    #[test]
    fn transfer_matrices_commute() {
        let spec = ChainSpec::new(
            Grading::new(vec![0, 1, 0]).unwrap(),
            vec![c(0.0, 0.0), c(1.0, 0.2), c(-0.7, 0.5)],
            vec![c(1.0, 0.0), c(2.0, -0.3), c(0.6, 0.0)],
            c(0.3, 0.1),
        )
        .unwrap();
        let t1 = transfer_matrix(&spec, c(0.37, 0.2)).unwrap().matrix;
        let t2 = transfer_matrix(&spec, c(-1.3, 0.9)).unwrap().matrix;
        let com = linalg::frob(&linalg::commutator(&t1, &t2));
        assert!(com < 1e-11 * linalg::frob(&t1) * linalg::frob(&t2));
    }

    #[test]
    fn transfer_matrix_expansion_in_hamiltonians() {
        let spec = spec_11_l3();
        let hs = hamiltonians(&spec).unwrap();
        let x = c(0.77, 0.31);
        let t = transfer_matrix(&spec, x).unwrap().matrix;
        let mut want = CMat::identity(8, 8) * c(-1.0, 0.0);
        for (j, h) in hs.iter().enumerate() {
            want += &h.matrix * (spec.eta / (x - spec.x[j]));
        }
        assert!(linalg::frob(&(t - want)) < 1e-13);
    }

    #[test]
    fn residue_route_matches_product_formula() {
        let spec = ChainSpec::new(
            Grading::standard(1, 2),
            vec![c(0.0, 0.0), c(1.0, 0.0), c(2.5, 0.3)],
            vec![c(1.0, 0.0), c(2.0, 0.0), c(0.5, 0.5)],
            c(0.3, 0.0),
        )
        .unwrap();
        let direct = hamiltonians(&spec).unwrap();
        let res = residue_hamiltonians(&spec).unwrap();
        for (a, b) in direct.iter().zip(&res) {
            let rel = linalg::frob(&(&a.matrix - &b.matrix)) / linalg::frob(&a.matrix);
            assert!(rel < 1e-10, "{rel}");
        }
    }

    #[test]
    fn sum_rule_and_weight_commutation() {
        let spec = spec_11_l3();
        let hs = hamiltonians(&spec).unwrap();
        let ms = weight_operators(&spec).unwrap();
        let mut sum = CMat::zeros(8, 8);
        for h in &hs {
            sum += &h.matrix;
        }
        let mut want = CMat::zeros(8, 8);
        for (a, m) in ms.iter().enumerate() {
            want += &m.matrix * spec.g[a];
        }
        assert!(linalg::frob(&(sum - want)) < 1e-12);
        let mut total = CMat::zeros(8, 8);
        for m in &ms {
            total += &m.matrix;
            for h in &hs {
                assert!(linalg::frob(&linalg::commutator(&h.matrix, &m.matrix)) < 1e-13);
            }
        }
        assert_eq!(total, CMat::identity(8, 8) * c(3.0, 0.0));
    }

    #[test]
    fn sectors_have_multinomial_dimensions() {
        let spec = ChainSpec::real(2, 1, &[0.0, 1.0, 2.5], &[1.0, 2.0, 3.0], 0.3).unwrap();
        let secs = sector_decompose(&spec).unwrap();
        assert_eq!(secs.iter().map(|s| s.dim()).sum::<usize>(), 27);
        for s in &secs {
            assert_eq!(s.dim(), sector_dim(&s.occupation));
        }
        assert_eq!(sector_dim(&[2, 1]), 3);
        assert_eq!(sector(&spec, &[3, 0, 0]).unwrap().dim(), 1);
        assert_eq!(sector(&spec, &[2, 1, 0]).unwrap().basis, vec![1, 3, 9]);
    }

    #[test]
    fn reference_state_eigenvalues() {
        for grading in [Grading::standard(2, 0), Grading::standard(1, 1), Grading::new(vec![1, 0]).unwrap()] {
            let spec = ChainSpec::new(
                grading,
                vec![c(0.0, 0.0), c(1.0, 0.0), c(2.5, 0.3)],
                vec![c(1.2, 0.0), c(2.0, 0.1)],
                c(0.3, 0.0),
            )
            .unwrap();
            for a0 in 0..2 {
                let mut occ = vec![0; 2];
                occ[a0] = 3;
                let s = sector(&spec, &occ).unwrap();
                let hs = sector_hamiltonians(&spec, &s).unwrap();
                let want = reference_eigenvalues(&spec, a0);
                for (h, w) in hs.iter().zip(&want) {
                    assert!((h[(0, 0)] - w).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn reference_eigenvalue_eta_flip_is_grading_flip() {
        let spec = ChainSpec::real(2, 0, &[0.0, 1.0, 2.5], &[1.2, 2.0], 0.3).unwrap();
        let mut flipped = spec.clone();
        flipped.eta = -spec.eta;
        flipped.grading = spec.grading.flipped();
        for a in 0..2 {
            let h1 = reference_eigenvalues(&spec, a);
            let h2 = reference_eigenvalues(&flipped, a);
            for (x, y) in h1.iter().zip(&h2) {
                assert!((x - y).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn diagonalize_counts_and_sum_rule() {
        let spec = ChainSpec::real(2, 1, &[0.0, 1.0, 2.5], &[1.0, 2.0, 3.3], 0.3).unwrap();
        let recs = diagonalize(&spec, DiagOptions::default()).unwrap();
        assert_eq!(recs.len(), 27);
        assert!(recs.iter().all(|r| r.residual < 1e-9));
    }

    #[test]
    fn diagonalize_is_seed_independent() {
        let spec = spec_11_l3();
        let a = diagonalize(&spec, DiagOptions { seed: 1, tol: 1e-9 }).unwrap();
        let b = diagonalize(&spec, DiagOptions { seed: 99, tol: 1e-9 }).unwrap();
        let ta: Vec<Vec<C64>> = a.iter().map(|r| r.h.clone()).collect();
        let tb: Vec<Vec<C64>> = b.iter().map(|r| r.h.clone()).collect();
        assert!(linalg::match_tuples(&ta, &tb, 1e-9).ok);
    }

    #[test]
    fn diagonalize_propagates_jordan_blocks() {
        // gl(1|1), L=2, sector (1,1) has R = 0 when (g1-g2)^2 = -4η²g1g2/x12²
        let eta = 0.5f64;
        let g1 = 1.0;
        // choose g2 with (1-g2)^2 + 4 eta^2 g2 = 0 -> g2 = 1 - 2η² ± 2iη sqrt(1-η²)
        let s = (1.0 - eta * eta).sqrt();
        let g2 = c(1.0 - 2.0 * eta * eta, 2.0 * eta * s);
        let spec = ChainSpec::new(
            Grading::standard(1, 1),
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(g1, 0.0), g2],
            c(eta, 0.0),
        )
        .unwrap();
        let sec = sector(&spec, &[1, 1]).unwrap();
        let err = diagonalize_sector(&spec, &sec, 3, 1e-9).unwrap_err();
        assert!(matches!(err, Error::NonDiagonalizable { .. }), "{err:?}");
        assert!(err.to_string().contains("[1, 1]"));
    }

    #[test]
    fn eta_zero_limit_values() {
        let spec = ChainSpec::real(1, 1, &[0.0, 1.0], &[1.0, 2.0], 0.3).unwrap();
        let lim = limit_spectra(&spec, LimitMode::EtaZero).unwrap();
        assert_eq!(lim.len(), 4);
        assert_eq!(lim[1].h, vec![c(1.0, 0.0), c(2.0, 0.0)]);
    }

    #[test]
    fn eta_infty_two_sites() {
        let spec = ChainSpec::real(2, 0, &[0.0, 1.7], &[1.0, 2.0], 0.3).unwrap();
        let lim = limit_spectra(&spec, LimitMode::EtaInfty).unwrap();
        let mixed: Vec<Vec<C64>> = lim.iter().filter(|r| r.occupation == vec![1, 1]).map(|r| r.h.clone()).collect();
        let r = (2.0f64).sqrt() / (0.0 - 1.7);
        let want = vec![vec![c(r, 0.0), c(-r, 0.0)], vec![c(-r, 0.0), c(r, 0.0)]];
        assert!(linalg::match_tuples(&mixed, &want, 1e-14).ok);
    }

    #[test]
    fn occupation_order() {
        assert_eq!(occupations(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(occupations(3, 2).len(), 6);
    }
}
