//! Tau-function calculus on eigenvalues of the master T-operator: Schur
//! polynomials, supercharacters, the determinant formula in (X₀, Z₀), time
//! shifts, Baker–Akhiezer functions and the Hirota / CBR / linear-problem
//! checks.
//!
//! Times are 1-based in formulas (`t_1, t_2, …`) and stored 0-based.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rs::{self, EvolveOptions, RSState};
use crate::superlinalg::{str_diag_pow, Grading};
use crate::{CMat, C64};

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Default truncation depth of time vectors.
pub const DEFAULT_DEPTH: usize = 6;

/// Young diagram given by its rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    rows: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;
    fn try_from(rows: Vec<usize>) -> Result<Self> {
        Partition::new(rows)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Vec<usize> {
        p.rows
    }
}

impl Partition {
    /// Trailing zeros are dropped; rows must be weakly decreasing.
    pub fn new(mut rows: Vec<usize>) -> Result<Self> {
        while rows.last() == Some(&0) {
            rows.pop();
        }
        if rows.windows(2).any(|w| w[0] < w[1]) || rows.contains(&0) {
            return Err(Error::InvalidArgument(format!("{rows:?} is not a partition")));
        }
        Ok(Partition { rows })
    }

    pub fn empty() -> Self {
        Partition { rows: vec![] }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Number of rows `ℓ(λ) = λ′_1`.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn size(&self) -> usize {
        self.rows.iter().sum()
    }

    /// Row `i` (0-based), zero past the end.
    pub fn row(&self, i: usize) -> usize {
        self.rows.get(i).copied().unwrap_or(0)
    }

    pub fn transpose(&self) -> Partition {
        let w = self.row(0);
        let rows = (0..w).map(|j| self.rows.iter().filter(|&&r| r > j).count()).collect();
        Partition { rows }
    }

    /// All partitions of `n`, in reverse lexicographic order.
    pub fn all_of_size(n: usize) -> Vec<Partition> {
        fn rec(n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
            if n == 0 {
                out.push(Partition { rows: cur.clone() });
                return;
            }
            for part in (1..=n.min(max)).rev() {
                cur.push(part);
                rec(n - part, part, cur, out);
                cur.pop();
            }
        }
        let mut out = vec![];
        rec(n, n, &mut vec![], &mut out);
        out
    }
}

/// Truncated time vector `(t_1, …, t_D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeVector {
    #[serde(with = "crate::io::complex_vec")]
    pub t: Vec<C64>,
}

impl TimeVector {
    pub fn zeros(depth: usize) -> Self {
        TimeVector { t: vec![ZERO; depth] }
    }

    pub fn new(t: Vec<C64>) -> Self {
        TimeVector { t }
    }

    pub fn depth(&self) -> usize {
        self.t.len()
    }

    /// `t_k` (1-based).
    pub fn get(&self, k: usize) -> C64 {
        self.t[k - 1]
    }

    fn require(&self, need: usize) -> Result<()> {
        if self.depth() < need {
            return Err(Error::DepthTooSmall { need, have: self.depth() });
        }
        Ok(())
    }

    /// `t + s·[z^{-1}]`, truncated at the current depth.
    pub fn shifted(&self, z: C64, s: f64) -> TimeVector {
        let w = z.inv();
        let t = (1..=self.depth()).map(|k| self.get(k) + w.powi(k as i32) * (s / k as f64)).collect();
        TimeVector { t }
    }
}

/// Normalization of the time kernel in the determinant formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `η Σ k t_k Z₀^k` (consistent with the first-order expansion of T).
    EtaScaled,
    /// `Σ k t_k Z₀^k` exactly as printed; kept as a negative control.
    Printed,
}

/// Data entering the determinant formula for one eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct TauData {
    pub x0: Vec<C64>,
    pub z0: CMat,
    pub g: Vec<C64>,
    pub grading: Grading,
    pub eta: C64,
    pub kernel: Kernel,
}

impl TauData {
    pub fn new(x0: Vec<C64>, z0: CMat, g: Vec<C64>, grading: Grading, eta: C64, kernel: Kernel) -> Result<Self> {
        if z0.nrows() != x0.len() || z0.ncols() != x0.len() {
            return Err(Error::ShapeMismatch(format!(
                "Z0 is {}x{} for L = {}",
                z0.nrows(),
                z0.ncols(),
                x0.len()
            )));
        }
        if g.len() != grading.k() {
            return Err(Error::ShapeMismatch(format!("{} twists for K = {}", g.len(), grading.k())));
        }
        Ok(TauData { x0, z0, g, grading, eta, kernel })
    }

    /// Tau data of one joint eigenvalue `H` of the chain.
    pub fn from_chain(spec: &ChainSpec, h: &[C64], kernel: Kernel) -> Result<Self> {
        let z0 = rs::lax_from_spectrum(&spec.x, h, spec.eta)?.z;
        TauData::new(spec.x.clone(), z0, spec.g.clone(), spec.grading.clone(), spec.eta, kernel)
    }

    pub fn l(&self) -> usize {
        self.x0.len()
    }

    /// Coefficient in front of the time kernel.
    pub fn kappa(&self) -> C64 {
        match self.kernel {
            Kernel::EtaScaled => self.eta,
            Kernel::Printed => ONE,
        }
    }

    fn str_g(&self, k: usize) -> C64 {
        str_diag_pow(&self.g, &self.grading, k as i32)
    }

    fn a_matrix(&self, x: C64) -> CMat {
        linalg::diag(&self.x0.iter().map(|xi| x - xi).collect::<Vec<_>>())
    }

    /// `Σ k t_k Z₀^k`.
    fn time_kernel(&self, t: &TimeVector) -> CMat {
        let n = self.l();
        let mut acc = CMat::zeros(n, n);
        let mut p = linalg::identity(n);
        for k in 1..=t.depth() {
            p = &p * &self.z0;
            if t.get(k) != ZERO {
                acc += &p * (t.get(k) * k as f64);
            }
        }
        acc
    }

    /// `sdet(1 − g/z)`.
    fn sdet_shift(&self, z: C64) -> C64 {
        self.g
            .iter()
            .enumerate()
            .map(|(a, &ga)| {
                let f = ONE - ga / z;
                if self.grading.p(a) == 0 { f } else { f.inv() }
            })
            .product()
    }

    /// `Z₀(z − Z₀)^{-1}`, or `SpectrumHit` when `z` is (numerically) an
    /// eigenvalue of `Z₀` or zero.
    fn resolvent_term(&self, z: C64) -> Result<CMat> {
        let n = self.l();
        let scale = linalg::frob(&self.z0).max(1.0);
        if z.norm() < 1e-14 * scale {
            return Err(Error::SpectrumHit(z));
        }
        let m = linalg::identity(n) * z - &self.z0;
        let lu = m.lu();
        let d = lu.determinant();
        let smin = linalg::eigenvalues(&(linalg::identity(n) * z - &self.z0))
            .iter()
            .map(|e| e.norm())
            .fold(f64::INFINITY, f64::min);
        if d == ZERO || smin < 1e-12 * scale {
            return Err(Error::SpectrumHit(z));
        }
        let inv = lu.try_inverse().ok_or(Error::SpectrumHit(z))?;
        Ok(&self.z0 * inv)
    }
}

/// `h_0..=h_n` from `e^{ξ(t,z)} = Σ h_k z^k`.
pub fn h_sequence(t: &TimeVector, n: usize) -> Result<Vec<C64>> {
    t.require(n)?;
    let mut h = vec![ZERO; n + 1];
    h[0] = ONE;
    for k in 1..=n {
        let mut s = ZERO;
        for j in 1..=k {
            s += t.get(j) * (j as f64) * h[k - j];
        }
        h[k] = s / k as f64;
    }
    Ok(h)
}

pub fn elementary_h(k: i64, t: &TimeVector) -> Result<C64> {
    if k < 0 {
        return Ok(ZERO);
    }
    Ok(h_sequence(t, k as usize)?[k as usize])
}

/// Jacobi–Trudi: `s_λ(t) = det h_{λ_i − i + j}`.
pub fn schur(lambda: &Partition, t: &TimeVector) -> Result<C64> {
    let n = lambda.size();
    let h = h_sequence(t, n)?;
    let l = lambda.len();
    let m = CMat::from_fn(l, l, |i, j| {
        let k = lambda.row(i) as i64 - i as i64 + j as i64;
        if k < 0 { ZERO } else { h[k as usize] }
    });
    Ok(linalg::det(&m))
}

/// Miwa times `y_k = str(g^k)/k`, `k = 1..=depth`.
pub fn miwa_times(g: &[C64], grading: &Grading, depth: usize) -> TimeVector {
    TimeVector::new((1..=depth).map(|k| str_diag_pow(g, grading, k as i32) / k as f64).collect())
}

/// `χ_λ(g) = s_λ(y)` with Miwa times of `g`.
pub fn supercharacter(lambda: &Partition, g: &[C64], grading: &Grading) -> Result<C64> {
    schur(lambda, &miwa_times(g, grading, lambda.size()))
}

/// Largest deviation, over degrees `n ≤ max_deg`, between
/// `Σ_{|λ|=n} χ_λ(g) s_λ(t)` and the degree-`n` part of `exp Σ t_k str g^k`.
pub fn cauchy_littlewood_residual(g: &[C64], grading: &Grading, t: &TimeVector, max_deg: usize) -> Result<f64> {
    t.require(max_deg)?;
    // Degree-n part of exp(Σ t_k p_k u^k) is h_n at times t_k p_k.
    let scaled = TimeVector::new((1..=max_deg).map(|k| t.get(k) * str_diag_pow(g, grading, k as i32)).collect());
    let exp_part = h_sequence(&scaled, max_deg)?;
    let mut worst: f64 = 0.0;
    for n in 0..=max_deg {
        let mut s = ZERO;
        for lam in Partition::all_of_size(n) {
            s += supercharacter(&lam, g, grading)? * schur(&lam, t)?;
        }
        worst = worst.max((s - exp_part[n]).norm() / exp_part[n].norm().max(1.0));
    }
    Ok(worst)
}

/// `T(x, t) = e^{Σ t_k str g^k} det(x − X₀ + κ Σ k t_k Z₀^k)`.
pub fn master_tau(td: &TauData, x: C64, t: &TimeVector) -> C64 {
    let pre: C64 = (1..=t.depth()).map(|k| t.get(k) * td.str_g(k)).sum();
    let m = td.a_matrix(x) + td.time_kernel(t) * td.kappa();
    pre.exp() * linalg::det(&m)
}

/// `T(x, t + Σ_j s_j [z_j^{-1}])` in closed form, `s_j = ±1`.
pub fn tau_at(td: &TauData, x: C64, t: &TimeVector, shifts: &[(C64, i8)]) -> Result<C64> {
    let pre: C64 = (1..=t.depth()).map(|k| t.get(k) * td.str_g(k)).sum();
    let mut m = td.a_matrix(x) + td.time_kernel(t) * td.kappa();
    let mut factor = pre.exp();
    for &(z, s) in shifts {
        let r = td.resolvent_term(z)?;
        let sd = td.sdet_shift(z);
        if s >= 0 {
            m += r * td.kappa();
            factor /= sd;
        } else {
            m -= r * td.kappa();
            factor *= sd;
        }
    }
    Ok(factor * linalg::det(&m))
}

/// `T(x, t ∓ [z^{-1}])`: `sign = -1` for the minus shift, `+1` for the plus.
pub fn tau_shift(td: &TauData, x: C64, t: &TimeVector, z: C64, sign: i8) -> Result<C64> {
    tau_at(td, x, t, &[(z, sign)])
}

/// Relative residual of the three-term Hirota equation.
pub fn hirota_check(td: &TauData, x: C64, t: &TimeVector, z1: C64, z2: C64) -> Result<f64> {
    let xe = x + td.eta;
    let a = z2 * tau_at(td, xe, t, &[(z2, -1)])? * tau_at(td, x, t, &[(z1, -1)])?;
    let b = z1 * tau_at(td, xe, t, &[(z1, -1)])? * tau_at(td, x, t, &[(z2, -1)])?;
    let c = (z1 - z2) * master_tau(td, xe, t) * tau_at(td, x, t, &[(z1, -1), (z2, -1)])?;
    let scale = a.norm().max(b.norm()).max(c.norm());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((a - b + c).norm() / scale)
}

/// Worst Hirota residual over `samples` random points `(x, t, z₁, z₂)`.
pub fn hirota_suite(td: &TauData, samples: usize, depth: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let xs = td.x0.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let zs = linalg::eigenvalues(&td.z0).iter().map(|v| v.norm()).fold(1.0, f64::max);
    let mut worst: f64 = 0.0;
    let cplx = |r: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        C64::new(rng.random_range(-r..r), rng.random_range(-r..r))
    };
    for _ in 0..samples {
        let x = cplx(xs, &mut rng);
        let t = TimeVector::new((0..depth).map(|_| cplx(0.5, &mut rng)).collect());
        let z1 = cplx(2.0 * zs, &mut rng);
        let z2 = cplx(2.0 * zs, &mut rng);
        worst = worst.max(hirota_check(td, x, &t, z1, z2)?);
    }
    Ok(worst)
}

// ---- truncated power series in w = 1/z ----

fn series_mul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; n + 1];
    for (i, &ai) in a.iter().enumerate().take(n + 1) {
        if ai == ZERO {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn series_inv(a: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; n + 1];
    out[0] = a[0].inv();
    for k in 1..=n {
        let mut s = ZERO;
        for j in 1..=k.min(a.len() - 1) {
            s += a[j] * out[k - j];
        }
        out[k] = -s * out[0];
    }
    out
}

/// Coefficients of the polynomial `det(A − wB)` by interpolation on roots of unity.
fn pencil_det_coeffs(a: &CMat, b: &CMat) -> Vec<C64> {
    let n = a.nrows();
    let pts = n + 1;
    let vals: Vec<C64> = (0..pts)
        .map(|j| {
            let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / pts as f64);
            linalg::det(&(a - b * w))
        })
        .collect();
    (0..pts)
        .map(|k| {
            let mut s = ZERO;
            for (j, v) in vals.iter().enumerate() {
                s += v * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k) as f64 / pts as f64);
            }
            s / pts as f64
        })
        .collect()
}

/// Series of `T(x, s[w])` at `t = 0` through order `w^order`.
fn shifted_series(td: &TauData, x: C64, sign: i8, order: usize) -> Vec<C64> {
    let n = td.l();
    let a = td.a_matrix(x);
    let kz = &td.z0 * td.kappa();
    // det(A ± κZ(z−Z)^{-1}) = det(A − w(AZ ∓ κZ)) / det(1 − wZ)
    let b = if sign >= 0 { &a * &td.z0 - &kz } else { &a * &td.z0 + &kz };
    let num = pencil_det_coeffs(&a, &b);
    let den = pencil_det_coeffs(&linalg::identity(n), &td.z0);
    let mut s = series_mul(&num, &series_inv(&den, order), order);
    // sdet(1 − gw)^{∓1}: even letters give (1 − g w)^{∓1}, odd letters the inverse power.
    for (a_idx, &ga) in td.g.iter().enumerate() {
        let inverse = (td.grading.p(a_idx) == 0) == (sign >= 0);
        let f: Vec<C64> = if inverse {
            (0..=order).map(|k| ga.powi(k as i32)).collect()
        } else {
            vec![ONE, -ga]
        };
        s = series_mul(&s, &f, order);
    }
    s
}

/// `T_0(x) … T_{s_max}(x)` from `T(x, [z^{-1}]) = Σ z^{-s} T_s(x)`.
pub fn one_row_t(td: &TauData, x: C64, s_max: usize) -> Vec<C64> {
    shifted_series(td, x, 1, s_max)
}

/// `T^0(x) … T^{a_max}(x)` from `T(x, −[z^{-1}]) = Σ (−z)^{-a} T^a(x)`.
pub fn one_col_t(td: &TauData, x: C64, a_max: usize) -> Vec<C64> {
    shifted_series(td, x, -1, a_max)
        .into_iter()
        .enumerate()
        .map(|(a, c)| if a % 2 == 1 { -c } else { c })
        .collect()
}

fn t_empty(td: &TauData, x: C64) -> C64 {
    td.x0.iter().map(|xi| x - xi).product()
}

/// Row determinant formula:
/// `T_λ(x) = det T_{λ_i−i+j}(x − (j−1)η) / Π_{k=1}^{ℓ−1} T_∅(x − kη)`.
pub fn t_lambda_row(td: &TauData, x: C64, lambda: &Partition) -> C64 {
    let l = lambda.len();
    if l == 0 {
        return t_empty(td, x);
    }
    let smax = lambda.row(0) + l;
    let cols: Vec<Vec<C64>> = (0..l).map(|j| one_row_t(td, x - td.eta * j as f64, smax)).collect();
    let m = CMat::from_fn(l, l, |i, j| {
        let s = lambda.row(i) as i64 - i as i64 + j as i64;
        if s < 0 { ZERO } else { cols[j][s as usize] }
    });
    let den: C64 = (1..l).map(|k| t_empty(td, x - td.eta * k as f64)).product();
    linalg::det(&m) / den
}

/// Column determinant formula:
/// `T_λ(x) = det T^{λ′_i−i+j}(x + (j−1)η) / Π_{k=1}^{λ_1−1} T_∅(x + kη)`.
///
/// The divisor is taken at `x + kη`, matching the shifted arguments of the
/// columns; with `x − kη` the two determinant formulas disagree.
pub fn t_lambda_col(td: &TauData, x: C64, lambda: &Partition) -> C64 {
    t_lambda_col_with(td, x, lambda, 1.0)
}

/// [`t_lambda_col`] with the divisor evaluated at `x + sign·kη`.
pub fn t_lambda_col_with(td: &TauData, x: C64, lambda: &Partition, sign: f64) -> C64 {
    let lt = lambda.transpose();
    let l = lt.len();
    if l == 0 {
        return t_empty(td, x);
    }
    let amax = lt.row(0) + l;
    let cols: Vec<Vec<C64>> = (0..l).map(|j| one_col_t(td, x + td.eta * j as f64, amax)).collect();
    let m = CMat::from_fn(l, l, |i, j| {
        let a = lt.row(i) as i64 - i as i64 + j as i64;
        if a < 0 { ZERO } else { cols[j][a as usize] }
    });
    let den: C64 = (1..l).map(|k| t_empty(td, x + td.eta * (sign * k as f64))).product();
    linalg::det(&m) / den
}

// ---- weighted multivariate polynomials in t_1..t_n ----

/// Polynomial in `t_1..t_n` truncated at weighted degree `n`
/// (`t_k` has weight `k`).
#[derive(Debug, Clone)]
struct WPoly {
    n: usize,
    terms: BTreeMap<Vec<u8>, C64>,
}

impl WPoly {
    fn zero(n: usize) -> Self {
        WPoly { n, terms: BTreeMap::new() }
    }

    fn constant(n: usize, c: C64) -> Self {
        let mut p = WPoly::zero(n);
        if c != ZERO {
            p.terms.insert(vec![0; n], c);
        }
        p
    }

    fn weight(e: &[u8]) -> usize {
        e.iter().enumerate().map(|(k, &m)| (k + 1) * m as usize).sum()
    }

    fn add_term(&mut self, e: Vec<u8>, c: C64) {
        if WPoly::weight(&e) > self.n {
            return;
        }
        *self.terms.entry(e).or_insert(ZERO) += c;
    }

    fn add(&mut self, other: &WPoly, c: C64) {
        for (e, v) in &other.terms {
            self.add_term(e.clone(), v * c);
        }
    }

    fn mul(&self, other: &WPoly) -> WPoly {
        let mut out = WPoly::zero(self.n);
        for (e1, v1) in &self.terms {
            let w1 = WPoly::weight(e1);
            for (e2, v2) in &other.terms {
                if w1 + WPoly::weight(e2) > self.n {
                    continue;
                }
                let e: Vec<u8> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, v1 * v2);
            }
        }
        out
    }

    /// `exp(p)` for `p` without constant term.
    fn exp(&self) -> WPoly {
        let mut out = WPoly::constant(self.n, ONE);
        let mut power = WPoly::constant(self.n, ONE);
        let mut fact = 1.0;
        for j in 1..=self.n {
            power = power.mul(self);
            fact *= j as f64;
            out.add(&power, C64::new(1.0 / fact, 0.0));
        }
        out
    }

    /// Coefficient-wise pairing `Σ_e a_e b_e Π e_k!/k^{e_k}`, the action of
    /// `a(∂̃)` on `b` at `t = 0`.
    fn pair(&self, other: &WPoly) -> C64 {
        let mut s = ZERO;
        for (e, a) in &self.terms {
            if let Some(b) = other.terms.get(e) {
                let mut w = 1.0;
                for (k, &m) in e.iter().enumerate() {
                    for i in 1..=m as usize {
                        w *= i as f64 / (k + 1) as f64;
                    }
                }
                s += a * b * w;
            }
        }
        s
    }
}

/// Multiplicity vectors of the partitions of `k` (length `n`).
fn weighted_monomials(k: usize, n: usize) -> Vec<Vec<u8>> {
    Partition::all_of_size(k)
        .into_iter()
        .map(|p| {
            let mut e = vec![0u8; n];
            for &r in p.rows() {
                e[r - 1] += 1;
            }
            e
        })
        .collect()
}

fn h_poly(k: i64, n: usize) -> WPoly {
    let mut p = WPoly::zero(n);
    if k < 0 {
        return p;
    }
    for e in weighted_monomials(k as usize, n) {
        let mut c = 1.0;
        for &m in &e {
            for i in 1..=m as usize {
                c /= i as f64;
            }
        }
        p.add_term(e, C64::new(c, 0.0));
    }
    p
}

fn schur_poly(lambda: &Partition, n: usize) -> WPoly {
    let l = lambda.len();
    if l == 0 {
        return WPoly::constant(n, ONE);
    }
    let entry = |i: usize, j: usize| h_poly(lambda.row(i) as i64 - i as i64 + j as i64, n);
    let mut out = WPoly::zero(n);
    let mut perm: Vec<usize> = (0..l).collect();
    loop {
        let mut term = WPoly::constant(n, ONE);
        for (i, &j) in perm.iter().enumerate() {
            term = term.mul(&entry(i, j));
            if term.terms.is_empty() {
                break;
            }
        }
        let inversions = (0..l).flat_map(|i| (i + 1..l).map(move |j| (i, j))).filter(|&(i, j)| perm[i] > perm[j]).count();
        out.add(&term, if inversions % 2 == 0 { ONE } else { -ONE });
        if !next_permutation(&mut perm) {
            break;
        }
    }
    out
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// `T(x, t)` as a polynomial in `t` up to weighted degree `n`, via
/// `log det(A + κΣ k t_k Z^k) = log det A + Σ_m (−1)^{m+1} tr(C^m)/m`.
fn master_tau_poly(td: &TauData, x: C64, n: usize) -> Result<WPoly> {
    if let Some(xi) = td.x0.iter().find(|xi| (x - **xi).norm() == 0.0) {
        return Err(Error::PoleAtX(*xi));
    }
    let l = td.l();
    let ainv = linalg::diag(&td.x0.iter().map(|xi| (x - xi).inv()).collect::<Vec<_>>());
    let mut mk = vec![CMat::zeros(l, l)];
    let mut zp = linalg::identity(l);
    for k in 1..=n {
        zp = &zp * &td.z0;
        mk.push(&ainv * &zp * (td.kappa() * k as f64));
    }
    let mut log = WPoly::zero(n);
    for k in 1..=n {
        let mut e = vec![0u8; n];
        e[k - 1] = 1;
        log.add_term(e, td.str_g(k));
    }
    // Words k_1…k_m with Σ k ≤ n contribute (−1)^{m+1}/m · tr(M_{k_1}⋯M_{k_m}).
    fn words(
        prod: &CMat,
        weight: usize,
        m: usize,
        e: &mut Vec<u8>,
        mk: &[CMat],
        n: usize,
        out: &mut WPoly,
    ) {
        for k in 1..=n - weight {
            let p = prod * &mk[k];
            e[k - 1] += 1;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            out.add_term(e.clone(), linalg::trace(&p) * (sign / (m + 1) as f64));
            if weight + k < n {
                words(&p, weight + k, m + 1, e, mk, n, out);
            }
            e[k - 1] -= 1;
        }
    }
    words(&linalg::identity(l), 0, 0, &mut vec![0u8; n], &mk, n, &mut log);
    let mut t = log.exp();
    let d = t_empty(td, x);
    for v in t.terms.values_mut() {
        *v *= d;
    }
    Ok(t)
}

/// `T_λ(x) = s_λ(∂̃) T(x, t)|_{t=0}` with `∂̃ = (∂_1, ∂_2/2, …)`.
pub fn t_lambda_schur(td: &TauData, x: C64, lambda: &Partition) -> Result<C64> {
    let n = lambda.size();
    if n == 0 {
        return Ok(t_empty(td, x));
    }
    let tp = master_tau_poly(td, x, n)?;
    Ok(schur_poly(lambda, n).pair(&tp))
}

/// Values and mutual disagreement of the three routes to `T_λ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbrReport {
    pub lambda: Partition,
    #[serde(with = "crate::io::complex")]
    pub row: C64,
    #[serde(with = "crate::io::complex")]
    pub column: C64,
    #[serde(with = "crate::io::complex")]
    pub schur: C64,
    pub row_vs_schur: f64,
    pub row_vs_column: f64,
}

pub fn cbr_check(td: &TauData, x: C64, lambda: &Partition) -> Result<CbrReport> {
    let row = t_lambda_row(td, x, lambda);
    let column = t_lambda_col(td, x, lambda);
    let schur = t_lambda_schur(td, x, lambda)?;
    let rel = |a: C64, b: C64| (a - b).norm() / a.norm().max(b.norm()).max(t_empty(td, x).norm()).max(1e-300);
    Ok(CbrReport {
        lambda: lambda.clone(),
        row,
        column,
        schur,
        row_vs_schur: rel(row, schur),
        row_vs_column: rel(row, column),
    })
}

// ---- Baker–Akhiezer functions ----

/// `z^{x/η}` on the principal branch.
fn z_pow(z: C64, x: C64, eta: C64) -> C64 {
    (x / eta * z.ln()).exp()
}

/// Rational part of ψ (or ψ*): the determinant ratio without the
/// `sdet`, `z^{±x/η}` and `e^{±ξ}` factors.
fn ba_rational(xs: &[C64], z0: &CMat, kappa: C64, x: C64, z: C64, adjoint: bool) -> Result<C64> {
    let n = xs.len();
    if let Some(xi) = xs.iter().find(|xi| (x - **xi).norm() == 0.0) {
        return Err(Error::PoleAtX(*xi));
    }
    let a = linalg::diag(&xs.iter().map(|xi| x - xi).collect::<Vec<_>>());
    let zz = linalg::identity(n) * z - z0;
    let dz = linalg::det(&zz);
    if dz.norm() == 0.0 {
        return Err(Error::SpectrumHit(z));
    }
    let num = if adjoint { linalg::det(&(&zz * &a + z0 * kappa)) } else { linalg::det(&(&a * &zz - z0 * kappa)) };
    Ok(num / (linalg::det(&a) * dz))
}

/// Stationary BA function ψ(x, z), or ψ*(x, z) when `adjoint`.
pub fn baker_akhiezer(td: &TauData, x: C64, z: C64, adjoint: bool) -> Result<C64> {
    if z.norm() == 0.0 {
        return Err(Error::SpectrumHit(z));
    }
    let r = ba_rational(&td.x0, &td.z0, td.kappa(), x, z, adjoint)?;
    let sd = td.sdet_shift(z);
    Ok(if adjoint {
        r / sd * z_pow(z, -x, td.eta)
    } else {
        r * sd * z_pow(z, x, td.eta)
    })
}

/// Residuals of the linear problems along the RS flow started from `td`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProblemReport {
    pub dt: f64,
    pub dif1: f64,
    pub dif2: f64,
    /// `dif3[m-1]` for `m = 1, 2`.
    pub dif3: Vec<f64>,
}

/// Checks `∂ψ = ψ(x+η) + Vψ`, `−∂ψ* = ψ*(x−η) + V(x−η)ψ*` by central
/// differences of step `dt` in `t_1`, and the residue relation for `m = 1, 2`
/// at `t = 0`.
pub fn linear_problem_check(td: &TauData, x: C64, z: C64, dt: f64) -> Result<LinearProblemReport> {
    let eta = td.eta;
    let v0: Vec<C64> = (0..td.l()).map(|i| -eta * td.z0[(i, i)]).collect();
    let state = RSState::new(td.x0.clone(), v0, eta)?;
    let opts = EvolveOptions { drift_tol: 1e-9, ..Default::default() };
    let fwd = rs::evolve_t1(&state, dt, 4, opts)?;
    let bwd = rs::evolve_t1(&state, -dt, 4, opts)?;
    let at = |p: &rs::TrajectoryPoint| RSState { x: p.x.clone(), v: p.v.clone(), eta };
    let (sp, sm) = (at(fwd.last().unwrap()), at(bwd.last().unwrap()));
    let sd = td.sdet_shift(z);
    let kappa = td.kappa();
    let psi = |s: &RSState, t1: f64, x: C64, adjoint: bool| -> Result<C64> {
        let z_t = rs::lax(s)?.z;
        let r = ba_rational(&s.x, &z_t, kappa, x, z, adjoint)?;
        Ok(if adjoint {
            r / sd * z_pow(z, -x, eta) * (-z * t1).exp()
        } else {
            r * sd * z_pow(z, x, eta) * (z * t1).exp()
        })
    };
    let pot = |s: &RSState, x: C64| -> C64 {
        (0..s.l()).map(|k| s.v[k] / (x - s.x[k]) - s.v[k] / (x - s.x[k] + eta)).sum()
    };
    let rel3 = |a: C64, b: C64, c: C64| (a - b - c).norm() / a.norm().max(b.norm()).max(c.norm()).max(1e-300);

    let d_psi = (psi(&sp, dt, x, false)? - psi(&sm, -dt, x, false)?) / (2.0 * dt);
    let dif1 = rel3(d_psi, psi(&state, 0.0, x + eta, false)?, pot(&state, x) * psi(&state, 0.0, x, false)?);
    let d_psis = (psi(&sp, dt, x, true)? - psi(&sm, -dt, x, true)?) / (2.0 * dt);
    let dif2 = rel3(-d_psis, psi(&state, 0.0, x - eta, true)?, pot(&state, x - eta) * psi(&state, 0.0, x, true)?);

    // R(z) = z ψ(x) ψ*(x+η) is rational with R(∞) = 1; its z^{-m} coefficient
    // comes from a trapezoid rule on a circle enclosing Spec Z₀.
    let rho = linalg::eigenvalues(&td.z0).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let radius = 4.0 * rho + 1.0;
    let npts = 64;
    let mut dif3 = vec![];
    let l = td.l();
    let inv_a = |x: C64| linalg::diag(&td.x0.iter().map(|xi| (x - xi).inv()).collect::<Vec<_>>());
    let diff = inv_a(x + eta) - inv_a(x);
    let mut zp = linalg::identity(l);
    for m in 1..=2usize {
        zp = &zp * &td.z0;
        let lhs = linalg::trace(&(&diff * &zp)) * kappa * m as f64;
        let mut acc = ZERO;
        for j in 0..npts {
            let w = C64::from_polar(radius, 2.0 * std::f64::consts::PI * j as f64 / npts as f64);
            let r = ba_rational(&td.x0, &td.z0, kappa, x, w, false)?
                * ba_rational(&td.x0, &td.z0, kappa, x + eta, w, true)?;
            acc += r * w.powi(m as i32);
        }
        let rhs = acc / npts as f64;
        dif3.push((lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-300));
    }
    Ok(LinearProblemReport { dt, dif1, dif2, dif3 })
}
