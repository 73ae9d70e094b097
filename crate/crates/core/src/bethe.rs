//! Nested Bethe ansatz for vector-representation sites: Bethe equations,
//! eigenvalue formulas, solvers for the rank-one cases, and the determinant
//! identity behind the spectrum of the Lax matrix on Bethe solutions.

use serde::{Deserialize, Serialize};

use crate::chain::{self, ChainSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, match_multiset};
use crate::rs;
use crate::spectral::twist_spectrum_deviation;
use crate::{CMat, C64};

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Bethe roots on top of a chain: `roots[b]` holds the `L_{b+1}` roots of
/// nesting level `b + 1` (0-based storage, `K − 1` levels).
#[derive(Debug, Clone, PartialEq)]
pub struct BetheConfig {
    pub spec: ChainSpec,
    pub roots: Vec<Vec<C64>>,
}

/// JSON view of the roots of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetheRoots {
    pub levels: Vec<usize>,
    #[serde(with = "crate::io::complex_vec_vec")]
    pub roots: Vec<Vec<C64>>,
}

impl BetheConfig {
    pub fn new(spec: ChainSpec, roots: Vec<Vec<C64>>) -> Result<Self> {
        let cfg = BetheConfig { spec, roots };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.spec.k();
        if self.roots.len() + 1 != k {
            return Err(Error::ShapeMismatch(format!("{} root levels for K = {k}", self.roots.len())));
        }
        let mut prev = self.spec.l();
        for (b, level) in self.roots.iter().enumerate() {
            if level.len() > prev {
                return Err(Error::InvalidArgument(format!("level {} has {} roots, above {prev}", b + 1, level.len())));
            }
            prev = level.len();
            for i in 0..level.len() {
                for j in 0..i {
                    if level[i] == level[j] {
                        return Err(Error::DegenerateConfiguration(format!("coinciding roots at level {}", b + 1)));
                    }
                }
            }
        }
        Ok(())
    }

    /// `L_1 ≥ … ≥ L_{K−1}`.
    pub fn levels(&self) -> Vec<usize> {
        self.roots.iter().map(Vec::len).collect()
    }

    /// Weight-sector occupation `(L − L_1, L_1 − L_2, …, L_{K−1})`.
    pub fn occupation(&self) -> Vec<usize> {
        let mut lv = vec![self.spec.l()];
        lv.extend(self.levels());
        lv.push(0);
        lv.windows(2).map(|w| w[0] - w[1]).collect()
    }

    pub fn to_json(&self) -> BetheRoots {
        BetheRoots { levels: self.levels(), roots: self.roots.clone() }
    }

    /// Level below `b` (0-based): the inhomogeneities for `b = 0`.
    fn lower(&self, b: usize) -> &[C64] {
        if b == 0 {
            &self.spec.x
        } else {
            &self.roots[b - 1]
        }
    }

    fn own(&self, b: usize) -> &[C64] {
        self.roots.get(b).map_or(&[], Vec::as_slice)
    }
}

fn ratio_prod(z: C64, nodes: &[C64], shift: C64) -> C64 {
    nodes.iter().map(|&n| (z - n + shift) / (z - n)).product()
}

fn collision(what: &str, a: C64, b: C64) -> Result<()> {
    let tol = 1e-13 * (1.0 + a.norm().max(b.norm()));
    if (a - b).norm() <= tol {
        return Err(Error::DenominatorCollision(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

/// `LHS − RHS` of the Bethe equations, level by level, root by root.
pub fn bethe_residual(cfg: &BetheConfig) -> Result<Vec<C64>> {
    let (eta, g, gr) = (cfg.spec.eta, &cfg.spec.g, &cfg.spec.grading);
    let mut out = vec![];
    for (b, level) in cfg.roots.iter().enumerate() {
        let (sb, sb1) = (gr.sign(b), gr.sign(b + 1));
        let upper = cfg.own(b + 1);
        for (beta, &mu) in level.iter().enumerate() {
            for &v in cfg.lower(b).iter().chain(upper) {
                collision("root on a lower/upper node", mu, v)?;
            }
            let lhs = g[b] * ratio_prod(mu, cfg.lower(b), eta * sb);
            let mut rhs = g[b + 1] * ratio_prod(mu, upper, -eta * sb1);
            for (gamma, &nu) in level.iter().enumerate() {
                if gamma != beta {
                    collision("same-level denominator", mu - nu, eta * sb)?;
                    rhs *= (mu - nu + eta * sb1) / (mu - nu - eta * sb);
                }
            }
            out.push(lhs - rhs);
        }
    }
    Ok(out)
}

/// Eigenvalue of `T(x)` on the Bethe state.
pub fn t_eigenvalue(cfg: &BetheConfig, x: C64) -> Result<C64> {
    let (eta, g, gr) = (cfg.spec.eta, &cfg.spec.g, &cfg.spec.grading);
    for &p in cfg.spec.x.iter().chain(cfg.roots.iter().flatten()) {
        if (x - p).norm() <= 1e-14 * (1.0 + p.norm()) {
            return Err(Error::PoleAtX(x));
        }
    }
    let mut t = ZERO;
    for b in 0..cfg.spec.k() {
        let s = gr.sign(b);
        t += g[b] * s * ratio_prod(x, cfg.lower(b), eta * s) * ratio_prod(x, cfg.own(b), -eta * s);
    }
    Ok(t)
}

/// Hamiltonian eigenvalues; only the first level of roots enters.
pub fn h_eigenvalues(cfg: &BetheConfig) -> Result<Vec<C64>> {
    let (eta, x) = (cfg.spec.eta, &cfg.spec.x);
    let s = cfg.spec.grading.sign(0);
    let first = cfg.own(0);
    (0..x.len())
        .map(|i| {
            let mut h = cfg.spec.g[0];
            for (k, &xk) in x.iter().enumerate() {
                if k != i {
                    h *= (x[i] - xk + eta * s) / (x[i] - xk);
                }
            }
            for &mu in first {
                collision("root on a site", x[i], mu)?;
                h *= (x[i] - mu - eta * s) / (x[i] - mu);
            }
            Ok(h)
        })
        .collect()
}

/// `|Res_{x=μ} T(x)|` at every root, by contour averaging.
pub fn regularity_residues(cfg: &BetheConfig) -> Result<Vec<f64>> {
    let poles: Vec<C64> = cfg.spec.x.iter().chain(cfg.roots.iter().flatten()).copied().collect();
    let mut out = vec![];
    for &mu in cfg.roots.iter().flatten() {
        let gap = poles
            .iter()
            .filter(|&&p| p != mu)
            .map(|p| (p - mu).norm())
            .fold(f64::INFINITY, f64::min);
        let r = (gap / 4.0).min(1e-2 * (1.0 + mu.norm()));
        // the contour stays a quarter gap away from every other pole
        let res = linalg::circle_residue(|z| t_eigenvalue(cfg, z).unwrap_or(C64::new(f64::NAN, 0.0)), mu, r, 64);
        if !res.re.is_finite() {
            return Err(Error::PoleAtX(mu));
        }
        out.push(res.norm());
    }
    Ok(out)
}

/// Solutions of one sector, with the count the sector dimension asks for.
#[derive(Debug, Clone, PartialEq)]
pub struct BetheSolveReport {
    pub configs: Vec<BetheConfig>,
    pub expected: usize,
}

impl BetheSolveReport {
    pub fn complete(&self) -> bool {
        self.configs.len() >= self.expected
    }

    pub fn require_complete(self) -> Result<Vec<BetheConfig>> {
        if self.complete() {
            Ok(self.configs)
        } else {
            Err(Error::IncompleteSolutionSet { found: self.configs.len(), expected: self.expected })
        }
    }
}

/// `Σ_k c_k μ^k = g_0 Π(μ − x_k + s η) − g_1 Π(μ − x_k)`.
fn level_one_poly(spec: &ChainSpec) -> Vec<C64> {
    let s = spec.grading.sign(0);
    let lin = |shift: C64| {
        spec.x.iter().fold(vec![ONE], |p, &xk| {
            let mut q = vec![ZERO; p.len() + 1];
            for (i, &c) in p.iter().enumerate() {
                q[i + 1] += c;
                q[i] += c * (shift - xk);
            }
            q
        })
    };
    let a = lin(spec.eta * s);
    let b = lin(ZERO);
    a.iter().zip(&b).map(|(p, q)| spec.g[0] * p - spec.g[1] * q).collect()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur = vec![];
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Denominator-free form of the level-one equations of a `K = 2` chain.
fn cleared(spec: &ChainSpec, mu: &[C64]) -> Vec<C64> {
    let (eta, gr) = (spec.eta, &spec.grading);
    let (s0, s1) = (gr.sign(0), gr.sign(1));
    (0..mu.len())
        .map(|b| {
            let mut lhs = spec.g[0];
            let mut rhs = spec.g[1];
            for &xk in &spec.x {
                lhs *= mu[b] - xk + eta * s0;
                rhs *= mu[b] - xk;
            }
            for (c, &nu) in mu.iter().enumerate() {
                if c != b {
                    lhs *= mu[b] - nu - eta * s0;
                    rhs *= mu[b] - nu + eta * s1;
                }
            }
            lhs - rhs
        })
        .collect()
}

fn newton_cleared(spec: &ChainSpec, start: Vec<C64>) -> Option<Vec<C64>> {
    let n = start.len();
    let mut mu = start;
    for _ in 0..80 {
        let f = cleared(spec, &mu);
        let scale = mu.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let h = 1e-7 * scale;
        let mut jac = CMat::zeros(n, n);
        for j in 0..n {
            let mut p = mu.clone();
            p[j] += h;
            let mut m = mu.clone();
            m[j] -= h;
            let (fp, fm) = (cleared(spec, &p), cleared(spec, &m));
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let step = jac.lu().solve(&nalgebra::DVector::from_column_slice(&f))?;
        let size = step.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !size.is_finite() {
            return None;
        }
        for (m, d) in mu.iter_mut().zip(step.iter()) {
            *m -= d;
        }
        if size < 1e-14 * scale {
            return Some(mu);
        }
    }
    let f = cleared(spec, &mu);
    (f.iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-11).then_some(mu)
}

fn admissible(spec: &ChainSpec, mu: &[C64]) -> bool {
    let scale = 1.0 + mu.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let eta = spec.eta;
    mu.iter().enumerate().all(|(i, &a)| {
        spec.x.iter().all(|&xk| (a - xk).norm() > 1e-8 * scale)
            && mu[..i].iter().all(|&b| {
                (a - b).norm() > 1e-6 * scale && (a - b - eta).norm() > 1e-8 * scale && (a - b + eta).norm() > 1e-8 * scale
            })
    })
}

fn same_roots(a: &[C64], b: &[C64], tol: f64) -> bool {
    a.len() == b.len() && match_multiset(a, b, tol).ok
}

/// Solve the Bethe equations of a `K = 2` weight sector `(L − L_1, L_1)`.
///
/// `gl(1|1)`: every root solves the same degree-`L` polynomial, and a
/// configuration is an `L_1`-subset of its distinct roots. Equal parities:
/// `L_1 ≤ 1` is again a polynomial, larger `L_1` uses Newton on the
/// denominator-free equations from combinations of those roots and a fixed
/// ring of extra points.
pub fn solve_small(spec: &ChainSpec, occupation: &[usize]) -> Result<BetheSolveReport> {
    spec.validate()?;
    let l = spec.l();
    if spec.k() != 2 || occupation.len() != 2 {
        return Err(Error::Unsupported("Bethe solver covers K = 2 only".into()));
    }
    if occupation[0] + occupation[1] != l {
        return Err(Error::InvalidArgument(format!("occupation {:?} does not sum to L = {l}", occupation)));
    }
    let l1 = occupation[1];
    let fermionic = spec.grading.p(0) != spec.grading.p(1);
    if (fermionic && l > 6) || (!fermionic && (l > 4 || l1 > 2)) {
        return Err(Error::Unsupported(format!("L = {l}, L_1 = {l1} outside the small-case range")));
    }
    let expected = chain::sector_dim(occupation);
    let make = |mu: Vec<C64>| BetheConfig { spec: spec.clone(), roots: vec![mu] };
    if l1 == 0 {
        return Ok(BetheSolveReport { configs: vec![make(vec![])], expected });
    }
    let single = linalg::poly_roots(&level_one_poly(spec));
    let single: Vec<C64> = single.into_iter().filter(|&m| admissible(spec, &[m])).collect();
    let mut configs: Vec<BetheConfig> = vec![];
    let push = |mu: Vec<C64>, configs: &mut Vec<BetheConfig>| {
        if !admissible(spec, &mu) || configs.iter().any(|c| same_roots(&c.roots[0], &mu, 1e-8)) {
            return;
        }
        let cfg = make(mu);
        if let Ok(r) = bethe_residual(&cfg) {
            if r.iter().all(|v| v.norm() < 1e-10) {
                configs.push(cfg);
            }
        }
    };
    if fermionic || l1 == 1 {
        if fermionic {
            for subset in subsets(single.len(), l1) {
                push(subset.iter().map(|&i| single[i]).collect(), &mut configs);
            }
        } else {
            for &m in &single {
                push(vec![m], &mut configs);
            }
        }
    } else {
        let scale = spec.x.iter().map(|v| v.norm()).fold(1.0, f64::max) + spec.eta.norm();
        let mut cand = single.clone();
        for &xk in &spec.x {
            for sh in [0.5, -0.5] {
                cand.push(xk + spec.eta * sh);
            }
        }
        for j in 0..8 {
            cand.push(C64::from_polar(1.5 * scale, std::f64::consts::TAU * (j as f64 + 0.25) / 8.0));
        }
        for subset in subsets(cand.len(), l1) {
            let start: Vec<C64> = subset.iter().map(|&i| cand[i]).collect();
            if let Some(mu) = newton_cleared(spec, start) {
                push(mu, &mut configs);
            }
            if configs.len() >= expected {
                break;
            }
        }
    }
    Ok(BetheSolveReport { configs, expected })
}

/// Spectrum of the Lax matrix built from a Bethe state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub occupation: Vec<usize>,
    #[serde(rename = "H", with = "crate::io::complex_vec")]
    pub h: Vec<C64>,
    #[serde(rename = "specZ", with = "crate::io::complex_vec")]
    pub spec_z: Vec<C64>,
    pub bethe_residual: f64,
    /// Cluster-mean deviation from the predicted twist multiset.
    pub spec_dev: f64,
    pub spec_dev_raw: f64,
    pub pass: bool,
}

/// Build `Z₀` from the Bethe energies and compare its spectrum with
/// `(g_1^{L−L_1}, g_2^{L_1−L_2}, …, g_K^{L_{K−1}})`.
pub fn theorem_qc_check(cfg: &BetheConfig, tol: f64) -> Result<TheoremReport> {
    let res = bethe_residual(cfg)?.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let h = h_eigenvalues(cfg)?;
    let z = rs::lax_from_spectrum(&cfg.spec.x, &h, cfg.spec.eta)?.z;
    let spec_z = linalg::eigenvalues(&z);
    let occupation = cfg.occupation();
    let (spec_dev, spec_dev_raw) = twist_spectrum_deviation(&spec_z, &cfg.spec.g, &occupation);
    Ok(TheoremReport { occupation, h, spec_z, bethe_residual: res, spec_dev, spec_dev_raw, pass: res < 1e-10 && spec_dev < tol })
}

/// The `L × L` matrix with one block of "holes" `y`.
pub fn z_matrix(x: &[C64], y: &[C64], g: C64, eta: C64) -> CMat {
    let l = x.len();
    CMat::from_fn(l, l, |i, j| {
        let mut v = g * eta / (x[i] - x[j] + eta);
        for (k, &xk) in x.iter().enumerate() {
            if k != j {
                v *= (x[j] - xk + eta) / (x[j] - xk);
            }
        }
        for &yg in y {
            v *= (x[j] - yg) / (x[j] - yg + eta);
        }
        v
    })
}

/// The dual `L̃ × L̃` matrix.
pub fn z_tilde_matrix(y: &[C64], x: &[C64], g: C64, eta: C64) -> CMat {
    let n = y.len();
    CMat::from_fn(n, n, |a, b| {
        let mut v = g * eta / (y[a] - y[b] + eta);
        for (c, &yc) in y.iter().enumerate() {
            if c != b {
                v *= (y[b] - yc - eta) / (y[b] - yc);
            }
        }
        for &xk in x {
            v *= (y[b] - xk) / (y[b] - xk - eta);
        }
        v
    })
}

/// Check `det(𝒵 − λ) = (g − λ)^{L−L̃} det(𝒵̃ − λ)` at every sample `λ`.
/// For empty `y` both `det(𝒵⁰ − λ)` and `det(𝒵̃⁰ − λ)` are compared with
/// `(g − λ)^L`. Returns the worst relative deviation.
pub fn identity_s23_check(x: &[C64], y: &[C64], g: C64, eta: C64, lambdas: &[C64]) -> Result<f64> {
    let (l, lt) = (x.len(), y.len());
    if lt > l {
        return Err(Error::InvalidArgument(format!("{lt} holes for {l} sites")));
    }
    let z = z_matrix(x, y, g, eta);
    let zt = z_tilde_matrix(y, x, g, eta);
    let z0t = z_tilde_matrix(x, &[], g, eta);
    let charpoly = |m: &CMat, lam: C64| linalg::det(&(m - linalg::identity(m.nrows()) * lam));
    let rel = |a: C64, b: C64| (a - b).norm() / a.norm().max(b.norm()).max(1.0);
    let mut worst: f64 = 0.0;
    for &lam in lambdas {
        let lhs = charpoly(&z, lam);
        let rhs = (g - lam).powi((l - lt) as i32) * charpoly(&zt, lam);
        worst = worst.max(rel(lhs, rhs));
        if lt == 0 {
            worst = worst.max(rel(charpoly(&z0t, lam), (g - lam).powi(l as i32)));
        }
    }
    if !worst.is_finite() {
        return Err(Error::DenominatorCollision("singular entries in the identity matrices".into()));
    }
    Ok(worst)
}
