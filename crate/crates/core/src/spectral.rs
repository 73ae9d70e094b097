//! The universal spectral system for `(H_1, …, H_L)`, its homotopy solver,
//! small-L closed forms, and the check that exact-diagonalization spectra
//! give Lax matrices with the twist spectrum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{self, ChainSpec, DiagOptions, SpectrumRecord};
use crate::error::{Error, Result};
use crate::linalg::{self, match_multiset, match_tuples};
use crate::rs;
use crate::{CMat, C64};

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest `L` handled by the subset-sum evaluations.
pub const SUBSET_CAP: usize = 16;

/// The system `Σ_{|I|=n} Π_{i∈I} H_i Π_{α<β∈I}(1 − η²/x_{αβ}²)^{-1} = C_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSystem {
    #[serde(with = "crate::io::complex_vec")]
    pub x: Vec<C64>,
    #[serde(with = "crate::io::complex")]
    pub eta: C64,
    /// `C_1 … C_L`.
    #[serde(with = "crate::io::complex_vec")]
    pub rhs: Vec<C64>,
    /// The twist multiset (length `L`) the right-hand side comes from.
    #[serde(with = "crate::io::complex_vec")]
    pub g_list: Vec<C64>,
}

/// One solution of the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSolution {
    #[serde(rename = "H", with = "crate::io::complex_vec")]
    pub h: Vec<C64>,
    pub residual: f64,
    /// Permutation of `g_list` whose path reached this point first.
    pub start_perm: Vec<usize>,
    pub multiplicity: usize,
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `C_n = Σ_{Σn_a = n} Π_a binom(M_a, n_a) g_a^{n_a}`, `n = 1..=L`.
pub fn rhs_coeffs(g: &[C64], occupation: &[usize]) -> Result<Vec<C64>> {
    if g.len() != occupation.len() {
        return Err(Error::ShapeMismatch(format!("{} twists, {} occupation numbers", g.len(), occupation.len())));
    }
    let l: usize = occupation.iter().sum();
    // Multiply the polynomials Σ_k binom(M_a, k) g_a^k u^k.
    let mut poly = vec![ONE];
    for (a, &m) in occupation.iter().enumerate() {
        let f: Vec<C64> = (0..=m).map(|k| g[a].powi(k as i32) * binom(m, k)).collect();
        let mut out = vec![ZERO; poly.len() + m];
        for (i, p) in poly.iter().enumerate() {
            for (j, q) in f.iter().enumerate() {
                out[i + j] += p * q;
            }
        }
        poly = out;
    }
    Ok(poly[1..=l].to_vec())
}

/// Elementary symmetric polynomials `e_0..=e_n` of `v`.
pub fn elementary_symmetric(v: &[C64]) -> Vec<C64> {
    let mut e = vec![ZERO; v.len() + 1];
    e[0] = ONE;
    for (i, &vi) in v.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] = e[k] + e[k - 1] * vi;
        }
    }
    e
}

impl SpectralSystem {
    pub fn from_g_list(x: Vec<C64>, eta: C64, g_list: Vec<C64>) -> Result<Self> {
        if x.len() != g_list.len() {
            return Err(Error::ShapeMismatch(format!("{} sites, {} twists", x.len(), g_list.len())));
        }
        if x.is_empty() {
            return Err(Error::InvalidArgument("empty system".into()));
        }
        if x.len() > SUBSET_CAP {
            return Err(Error::TooLarge { dim: x.len(), cap: SUBSET_CAP });
        }
        chain::general_position(&x, eta)?;
        let rhs = elementary_symmetric(&g_list)[1..].to_vec();
        Ok(SpectralSystem { x, eta, rhs, g_list })
    }

    /// System of the weight sector with occupation `M`.
    pub fn from_occupation(x: Vec<C64>, eta: C64, g: &[C64], occupation: &[usize]) -> Result<Self> {
        let l: usize = occupation.iter().sum();
        if l != x.len() {
            return Err(Error::InvalidArgument(format!("occupation sums to {l}, chain has L = {}", x.len())));
        }
        let g_list: Vec<C64> = occupation.iter().enumerate().flat_map(|(a, &m)| std::iter::repeat_n(g[a], m)).collect();
        let mut sys = SpectralSystem::from_g_list(x, eta, g_list)?;
        sys.rhs = rhs_coeffs(g, occupation)?;
        Ok(sys)
    }

    pub fn l(&self) -> usize {
        self.x.len()
    }

    fn with_eta(&self, eta: C64) -> SpectralSystem {
        SpectralSystem { eta, ..self.clone() }
    }
}

/// Pair weights `w_{ab} = (1 − η²/x_{ab}²)^{-1}` and their log-derivatives in η.
fn pair_weights(x: &[C64], eta: C64) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let n = x.len();
    let mut w = vec![vec![ONE; n]; n];
    let mut dw = vec![vec![ZERO; n]; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let d2 = (x[a] - x[b]) * (x[a] - x[b]);
                let den = ONE - eta * eta / d2;
                w[a][b] = den.inv();
                dw[a][b] = eta * 2.0 / d2 / den;
            }
        }
    }
    (w, dw)
}

/// Subset sums `S_n(H) = Σ_{|I|=n} Π H_I w_I`, their H-Jacobian and
/// η-derivative.
struct SubsetEval {
    s: Vec<C64>,
    jac: CMat,
    d_eta: Vec<C64>,
}

fn subset_eval(x: &[C64], eta: C64, h: &[C64]) -> SubsetEval {
    let n = x.len();
    let (w, dw) = pair_weights(x, eta);
    let size = 1usize << n;
    // pair weight product and its log-derivative per subset
    let mut wp = vec![ONE; size];
    let mut dl = vec![ZERO; size];
    for mask in 1..size {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let (mut p, mut d) = (wp[rest], dl[rest]);
        let mut r = rest;
        while r != 0 {
            let k = r.trailing_zeros() as usize;
            p *= w[i][k];
            d += dw[i][k];
            r &= r - 1;
        }
        wp[mask] = p;
        dl[mask] = d;
    }
    let mut s = vec![ZERO; n];
    let mut d_eta = vec![ZERO; n];
    let mut jac = CMat::zeros(n, n);
    for mask in 1..size {
        let k = mask.count_ones() as usize - 1;
        let mut prod = wp[mask];
        let mut r = mask;
        while r != 0 {
            prod *= h[r.trailing_zeros() as usize];
            r &= r - 1;
        }
        s[k] += prod;
        d_eta[k] += prod * dl[mask];
        let mut r = mask;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            let mut q = wp[mask];
            let mut r2 = mask & !(1 << j);
            while r2 != 0 {
                q *= h[r2.trailing_zeros() as usize];
                r2 &= r2 - 1;
            }
            jac[(k, j)] += q;
            r &= r - 1;
        }
    }
    SubsetEval { s, jac, d_eta }
}

/// `F_n = (−1)^n J_n(Z₀(H)) − C_n` through the Lax characteristic polynomial.
pub fn residual(sys: &SpectralSystem, h: &[C64]) -> Result<Vec<C64>> {
    if h.len() != sys.l() {
        return Err(Error::ShapeMismatch(format!("{} energies for L = {}", h.len(), sys.l())));
    }
    if sys.eta.norm() == 0.0 {
        return Ok(residual_subset(sys, h));
    }
    let z = rs::lax_from_spectrum(&sys.x, h, sys.eta)?.z;
    let j = rs::charpoly_coeffs(&z);
    Ok((1..=sys.l())
        .map(|n| if n % 2 == 1 { -j[n] } else { j[n] } - sys.rhs[n - 1])
        .collect())
}

/// Same residual from the explicit subset sums.
pub fn residual_subset(sys: &SpectralSystem, h: &[C64]) -> Vec<C64> {
    let ev = subset_eval(&sys.x, sys.eta, h);
    ev.s.iter().zip(&sys.rhs).map(|(a, b)| a - b).collect()
}

fn residual_norm(sys: &SpectralSystem, h: &[C64]) -> f64 {
    let r = residual_subset(sys, h);
    r.iter()
        .zip(&sys.rhs)
        .map(|(ri, ci)| ri.norm() / ci.norm().max(1.0))
        .fold(0.0, f64::max)
}

/// Options of [`solve_homotopy`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HomotopyOptions {
    pub seed: u64,
    /// Newton convergence tolerance (relative step size).
    pub newton_tol: f64,
    /// Endpoints closer than this are the same solution.
    pub dedup_tol: f64,
    /// Wider merge radius used for endpoints at a singular Jacobian.
    pub cluster_tol: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Extra Newton runs from random points, reported separately.
    pub extra_restarts: usize,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        HomotopyOptions {
            seed: 0,
            newton_tol: 1e-12,
            dedup_tol: 1e-8,
            cluster_tol: 1e-6,
            min_step: 1e-12,
            max_step: 0.05,
            extra_restarts: 0,
        }
    }
}

/// A path that did not reach `s = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFailureInfo {
    pub path: usize,
    pub s: f64,
    pub start_perm: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyReport {
    pub paths: usize,
    pub solutions: Vec<SpectralSolution>,
    pub failures: Vec<PathFailureInfo>,
    /// Solutions found only by random restarts (not connected to η = 0).
    pub extra: Vec<SpectralSolution>,
}

impl HomotopyReport {
    /// Total multiplicity of the path-connected solutions.
    pub fn total_multiplicity(&self) -> usize {
        self.solutions.iter().map(|s| s.multiplicity).sum()
    }
}

/// η(s) and g-list(s) along the homotopy.
struct Path<'a> {
    sys: &'a SpectralSystem,
    delta: Vec<C64>,
    gamma: f64,
}

impl Path<'_> {
    fn eta(&self, s: f64) -> (C64, C64) {
        let e = self.sys.eta;
        let i = C64::new(0.0, self.gamma);
        (e * s * (ONE + i * (1.0 - s)), e * (ONE + i * (1.0 - 2.0 * s)))
    }

    fn g_list(&self, s: f64) -> Vec<C64> {
        self.sys.g_list.iter().zip(&self.delta).map(|(g, d)| g + d * (1.0 - s)).collect()
    }

    /// Residual, Jacobian and ∂F/∂s at `(H, s)`.
    fn eval(&self, h: &[C64], s: f64) -> (Vec<C64>, CMat, Vec<C64>) {
        let (eta, deta) = self.eta(s);
        let ev = subset_eval(&self.sys.x, eta, h);
        let gl = self.g_list(s);
        let e = elementary_symmetric(&gl);
        let n = h.len();
        let mut dc = vec![ZERO; n];
        if self.delta.iter().any(|d| d.norm() > 0.0) {
            for i in 0..n {
                let mut rest = gl.clone();
                rest.remove(i);
                let er = elementary_symmetric(&rest);
                for k in 1..=n {
                    dc[k - 1] -= er[k - 1] * self.delta[i];
                }
            }
        }
        let f = (0..n).map(|k| ev.s[k] - e[k + 1]).collect();
        let fs = (0..n).map(|k| ev.d_eta[k] * deta - dc[k]).collect();
        (f, ev.jac, fs)
    }

    fn newton(&self, h: &mut Vec<C64>, s: f64, tol: f64, iters: usize) -> bool {
        for _ in 0..iters {
            let (f, jac, _) = self.eval(h, s);
            let Some(step) = solve(&jac, &f) else { return false };
            let scale = h.iter().map(|v| v.norm()).fold(1.0, f64::max);
            let size = step.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if !size.is_finite() {
                return false;
            }
            for (hi, di) in h.iter_mut().zip(&step) {
                *hi -= di;
            }
            if size < tol * scale {
                return true;
            }
        }
        false
    }

    fn track(&self, start: Vec<C64>, opts: &HomotopyOptions) -> std::result::Result<Vec<C64>, f64> {
        let mut h = start;
        let mut s = 0.0;
        let mut ds = opts.max_step.min(0.01);
        while s < 1.0 {
            let step = ds.min(1.0 - s);
            let (_, jac, fs) = self.eval(&h, s);
            let Some(dh) = solve(&jac, &fs) else { return Err(s) };
            let mut trial: Vec<C64> = h.iter().zip(&dh).map(|(a, b)| a - b * step).collect();
            let s1 = if 1.0 - s - step < 1e-15 { 1.0 } else { s + step };
            if self.newton(&mut trial, s1, 1e-10, 6) && close(&trial, &h, 0.25 + 10.0 * step) {
                h = trial;
                s = s1;
                ds = (ds * 1.5).min(opts.max_step);
            } else {
                ds /= 2.0;
                if ds < opts.min_step {
                    // Singular endpoints (multiple roots) stall Newton right at s = 1.
                    if 1.0 - s < 1e-6 {
                        break;
                    }
                    return Err(s);
                }
            }
        }
        let mut end = h;
        let mut polished = end.clone();
        if self.newton(&mut polished, 1.0, opts.newton_tol, 50) || residual_norm(self.sys, &polished) <= residual_norm(self.sys, &end) {
            end = polished;
        }
        Ok(end)
    }
}

fn close(a: &[C64], b: &[C64], rel: f64) -> bool {
    let scale = b.iter().map(|v| v.norm()).fold(1.0, f64::max);
    a.iter().zip(b).all(|(p, q)| (p - q).norm() <= rel * scale)
}

fn solve(a: &CMat, b: &[C64]) -> Option<Vec<C64>> {
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = a.clone().lu().solve(&rhs)?;
    if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let mut i = n;
        while i > 1 && p[i - 2] >= p[i - 1] {
            i -= 1;
        }
        if i <= 1 {
            break;
        }
        let mut j = n - 1;
        while p[j] <= p[i - 2] {
            j -= 1;
        }
        p.swap(i - 2, j);
        p[i - 1..].reverse();
    }
    out
}

fn jacobian_singular(sys: &SpectralSystem, h: &[C64]) -> bool {
    let jac = subset_eval(&sys.x, sys.eta, h).jac;
    let sv = jac.svd(false, false).singular_values;
    let (mx, mn) = (sv.max(), sv.min());
    mn <= 1e-6 * mx
}

/// Group endpoints into solutions with multiplicities.
fn cluster(sys: &SpectralSystem, ends: Vec<(usize, Vec<usize>, Vec<C64>)>, opts: &HomotopyOptions) -> Vec<SpectralSolution> {
    let mut sols: Vec<(SpectralSolution, bool)> = vec![];
    for (_, perm, h) in ends {
        let singular = jacobian_singular(sys, &h);
        let found = sols.iter_mut().find(|(s, sing)| {
            let tol = if singular || *sing { opts.cluster_tol } else { opts.dedup_tol };
            close(&h, &s.h, tol)
        });
        match found {
            Some((s, sing)) => {
                s.multiplicity += 1;
                *sing |= singular;
            }
            None => sols.push((
                SpectralSolution { residual: residual_norm(sys, &h), h, start_perm: perm, multiplicity: 1 },
                singular,
            )),
        }
    }
    sols.into_iter().map(|(s, _)| s).collect()
}

/// Continue all `L!` permutations of the η = 0 solution to the target η.
///
/// Coincident twists are pulled apart by a random complex offset that
/// shrinks to zero together with the homotopy parameter, so every start is
/// a regular point; endpoints that then coincide are counted as one solution
/// with multiplicity.
pub fn solve_homotopy(sys: &SpectralSystem, opts: HomotopyOptions) -> Result<HomotopyReport> {
    let n = sys.l();
    if n > 8 {
        return Err(Error::TooLarge { dim: n, cap: 8 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let gscale = sys.g_list.iter().map(|g| g.norm()).fold(1.0, f64::max);
    let has_dup = (0..n).any(|i| (0..i).any(|j| (sys.g_list[i] - sys.g_list[j]).norm() <= 1e-12 * gscale));
    let delta: Vec<C64> = if has_dup {
        (0..n)
            .map(|_| C64::from_polar(0.3 * gscale * rng.random_range(0.5..1.0), rng.random_range(0.0..std::f64::consts::TAU)))
            .collect()
    } else {
        vec![ZERO; n]
    };
    let gammas: Vec<f64> = (0..n.max(1) * 8).map(|_| rng.random_range(0.5..2.0)).collect();
    let perms = permutations(n);
    let outcomes: Vec<(usize, Vec<usize>, std::result::Result<Vec<C64>, f64>)> = perms
        .par_iter()
        .enumerate()
        .map(|(idx, perm)| {
            let mut last = 0.0;
            for attempt in 0..4 {
                let gamma = if attempt == 0 { 0.0 } else { gammas[(idx + attempt) % gammas.len()] * if attempt % 2 == 0 { -1.0 } else { 1.0 } };
                let path = Path { sys, delta: delta.clone(), gamma };
                let start: Vec<C64> = perm.iter().map(|&i| sys.g_list[i] + delta[i]).collect();
                match path.track(start, &opts) {
                    Ok(h) => return (idx, perm.clone(), Ok(h)),
                    Err(s) => last = s,
                }
            }
            (idx, perm.clone(), Err(last))
        })
        .collect();
    let mut ends = vec![];
    let mut failures = vec![];
    for (idx, perm, out) in outcomes {
        match out {
            Ok(h) => ends.push((idx, perm, h)),
            Err(s) => failures.push(PathFailureInfo { path: idx, s, start_perm: perm }),
        }
    }
    let solutions = cluster(sys, ends, &opts);

    let mut extra = vec![];
    if opts.extra_restarts > 0 {
        let path = Path { sys, delta: vec![ZERO; n], gamma: 0.0 };
        for _ in 0..opts.extra_restarts {
            let mut h: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)) * gscale)
                .collect();
            if path.newton(&mut h, 1.0, opts.newton_tol, 100) && residual_norm(sys, &h) < 1e-9 {
                let known = solutions.iter().chain(&extra).any(|s: &SpectralSolution| close(&h, &s.h, opts.cluster_tol));
                if !known {
                    extra.push(SpectralSolution { residual: residual_norm(sys, &h), h, start_perm: vec![], multiplicity: 1 });
                }
            }
        }
    }
    Ok(HomotopyReport { paths: perms_len(n), solutions, failures, extra })
}

fn perms_len(n: usize) -> usize {
    (1..=n).product()
}

/// A closed-form solution with its multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormSolution {
    #[serde(rename = "H", with = "crate::io::complex_vec")]
    pub h: Vec<C64>,
    pub multiplicity: usize,
}

/// Explicit solutions for `L = 1`, `L = 2`, and `L = 3` with all twists equal.
pub fn closed_form(sys: &SpectralSystem) -> Result<Vec<ClosedFormSolution>> {
    let (x, eta, g) = (&sys.x, sys.eta, &sys.g_list);
    let one = |h: Vec<C64>| ClosedFormSolution { h, multiplicity: 1 };
    match sys.l() {
        1 => Ok(vec![one(vec![g[0]])]),
        2 => {
            let x12 = x[0] - x[1];
            let r = (g[0] - g[1]) * (g[0] - g[1]) + eta * eta * g[0] * g[1] * 4.0 / (x12 * x12);
            let sq = r.sqrt();
            let s = g[0] + g[1];
            Ok(vec![one(vec![(s + sq) / 2.0, (s - sq) / 2.0]), one(vec![(s - sq) / 2.0, (s + sq) / 2.0])])
        }
        3 => {
            let scale = g.iter().map(|v| v.norm()).fold(1.0, f64::max);
            if (g[1] - g[0]).norm() > 1e-12 * scale || (g[2] - g[0]).norm() > 1e-12 * scale {
                return Err(Error::Unsupported("L = 3 closed form needs equal twists".into()));
            }
            let g0 = g[0];
            let xd = |i: usize, j: usize| x[i] - x[j];
            let mut out = vec![];
            for sign in [1.0, -1.0] {
                let h = (0..3)
                    .map(|j| g0 * (0..3).filter(|&k| k != j).map(|k| ONE + eta * sign / xd(j, k)).product::<C64>())
                    .collect();
                out.push(one(h));
            }
            let q = (xd(0, 1) * xd(0, 1) + xd(0, 2) * xd(0, 2) + xd(1, 2) * xd(1, 2)) * 2.0 - eta * eta * 3.0;
            let sq = q.sqrt();
            for sign in [1.0, -1.0] {
                // (α, β, γ) cyclic
                let h = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
                    .iter()
                    .map(|&(a, b, c)| g0 * (ONE + (eta * eta + eta * sq * sign) / (xd(a, b) * xd(c, a) * 2.0)))
                    .collect();
                out.push(ClosedFormSolution { h, multiplicity: 2 });
            }
            Ok(out)
        }
        l => Err(Error::Unsupported(format!("no closed form for L = {l}"))),
    }
}

/// One record of the QC check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcRecord {
    pub occupation: Vec<usize>,
    #[serde(rename = "H", with = "crate::io::complex_vec")]
    pub h: Vec<C64>,
    #[serde(rename = "specZ", with = "crate::io::complex_vec")]
    pub spec_z: Vec<C64>,
    /// Deviation of `Spec Z₀` from the twist multiset, after averaging the
    /// eigenvalues assigned to each twist.
    pub spec_dev: f64,
    /// Raw eigenvalue deviation (repeated eigenvalues split like `ε^{1/m}`).
    pub spec_dev_raw: f64,
    /// Residual of the sector's spectral system at `H`.
    pub system_residual: f64,
    /// `|tr Z₀(z−Z₀)^{-1} − Σ M_a g_a/(z−g_a)|` at a test point.
    pub resolvent_dev: f64,
    pub ok: bool,
}

/// Homotopy solutions of one sector and which of them the chain realizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcSector {
    pub occupation: Vec<usize>,
    pub solutions: Vec<SpectralSolution>,
    pub realized: Vec<bool>,
    /// Every record of the sector was found among the solutions.
    pub contained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcReport {
    pub records: Vec<QcRecord>,
    pub sectors: Vec<QcSector>,
    pub max_spec_dev: f64,
    pub max_system_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct QcOptions {
    pub diag: DiagOptions,
    pub spec_tol: f64,
    pub system_tol: f64,
    /// Also solve each sector's system and test containment.
    pub homotopy: bool,
}

impl Default for QcOptions {
    fn default() -> Self {
        QcOptions { diag: DiagOptions::default(), spec_tol: 1e-8, system_tol: 1e-9, homotopy: false }
    }
}

/// Distance of an eigenvalue list from the multiset `{g_a^{M_a}}`.
///
/// Returns `(cluster, raw)`: `raw` is the largest pairwise deviation after
/// optimal matching, `cluster` compares the mean of the eigenvalues assigned
/// to each twist instead. Repeated eigenvalues of a non-normal matrix split
/// like `ε^{1/m}`, while the cluster mean stays well conditioned.
pub fn twist_spectrum_deviation(spec_z: &[C64], g: &[C64], occupation: &[usize]) -> (f64, f64) {
    let expected: Vec<C64> = occupation.iter().enumerate().flat_map(|(a, &m)| std::iter::repeat_n(g[a], m)).collect();
    if expected.len() != spec_z.len() {
        return (f64::INFINITY, f64::INFINITY);
    }
    let owner: Vec<usize> = occupation.iter().enumerate().flat_map(|(a, &k)| std::iter::repeat_n(a, k)).collect();
    let m = match_multiset(spec_z, &expected, 1.0);
    let mut sums = vec![(ZERO, 0usize); g.len()];
    for (i, &j) in m.assignment.iter().enumerate() {
        sums[owner[j]].0 += spec_z[i];
        sums[owner[j]].1 += 1;
    }
    let cluster = sums
        .iter()
        .enumerate()
        .filter(|(_, (_, k))| *k > 0)
        .map(|(a, (s, k))| (s / *k as f64 - g[a]).norm() / g[a].norm().max(1.0))
        .fold(0.0, f64::max);
    (cluster, m.max_dev)
}

fn qc_record(spec: &ChainSpec, rec: &SpectrumRecord, opts: &QcOptions) -> Result<QcRecord> {
    let z = rs::lax_from_spectrum(&spec.x, &rec.h, spec.eta)?.z;
    let spec_z = linalg::eigenvalues(&z);
    let (spec_dev, spec_dev_raw) = twist_spectrum_deviation(&spec_z, &spec.g, &rec.occupation);
    let sys = SpectralSystem::from_occupation(spec.x.clone(), spec.eta, &spec.g, &rec.occupation)?;
    let r = residual(&sys, &rec.h)?;
    let system_residual = r.iter().zip(&sys.rhs).map(|(a, c)| a.norm() / c.norm().max(1.0)).fold(0.0, f64::max);
    let zt = C64::new(0.37, 2.9) * spec.g.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let lhs = linalg::trace(&(&z * linalg::inverse(&(linalg::identity(z.nrows()) * zt - &z)).ok_or(Error::SpectrumHit(zt))?));
    let rhs: C64 = rec.occupation.iter().enumerate().map(|(a, &ma)| spec.g[a] * ma as f64 / (zt - spec.g[a])).sum();
    let resolvent_dev = (lhs - rhs).norm() / rhs.norm().max(1.0);
    let ok = spec_dev < opts.spec_tol && system_residual < opts.system_tol && resolvent_dev < opts.spec_tol;
    Ok(QcRecord {
        occupation: rec.occupation.clone(),
        h: rec.h.clone(),
        spec_z,
        spec_dev,
        spec_dev_raw,
        system_residual,
        resolvent_dev,
        ok,
    })
}

/// Diagonalize the chain and check every record against the twist spectrum.
pub fn qc_verify(spec: &ChainSpec, opts: QcOptions) -> Result<QcReport> {
    let recs = chain::diagonalize(spec, opts.diag)?;
    let records = recs.par_iter().map(|r| qc_record(spec, r, &opts)).collect::<Result<Vec<_>>>()?;
    let mut sectors = vec![];
    if opts.homotopy {
        let mut occs: Vec<Vec<usize>> = recs.iter().map(|r| r.occupation.clone()).collect();
        occs.dedup();
        for occ in occs {
            let sys = SpectralSystem::from_occupation(spec.x.clone(), spec.eta, &spec.g, &occ)?;
            let rep = solve_homotopy(&sys, HomotopyOptions { seed: opts.diag.seed, ..Default::default() })?;
            let hs: Vec<Vec<C64>> = recs.iter().filter(|r| r.occupation == occ).map(|r| r.h.clone()).collect();
            let sol_h: Vec<Vec<C64>> = rep.solutions.iter().map(|s| s.h.clone()).collect();
            let realized = sol_h
                .iter()
                .map(|s| hs.iter().any(|h| h.iter().zip(s).all(|(a, b)| (a - b).norm() <= 1e-6 * b.norm().max(1.0))))
                .collect();
            let contained = hs.iter().all(|h| {
                sol_h.iter().any(|s| h.iter().zip(s).all(|(a, b)| (a - b).norm() <= opts.spec_tol * b.norm().max(1.0)))
            });
            sectors.push(QcSector { occupation: occ, solutions: rep.solutions, realized, contained });
        }
    }
    let max_spec_dev = records.iter().map(|r| r.spec_dev).fold(0.0, f64::max);
    let max_system_residual = records.iter().map(|r| r.system_residual).fold(0.0, f64::max);
    let pass = records.iter().all(|r| r.ok) && sectors.iter().all(|s| s.contained);
    Ok(QcReport { records, sectors, max_spec_dev, max_system_residual, pass })
}

/// Whether every tuple of `items` appears in `solutions` within `tol`.
pub fn contains_all(items: &[Vec<C64>], solutions: &[SpectralSolution], tol: f64) -> bool {
    let refs: Vec<Vec<C64>> = solutions.iter().map(|s| s.h.clone()).collect();
    items.iter().all(|h| match_tuples(std::slice::from_ref(h), &refs, tol).ok)
}

/// `|Σ_{|I|=n} 1/Π_{α∈I,β∉I}(x_α − x_β)|` relative to the largest term.
pub fn sum_residue_check(x: &[C64], n: usize) -> Result<f64> {
    let l = x.len();
    if l > SUBSET_CAP {
        return Err(Error::TooLarge { dim: l, cap: SUBSET_CAP });
    }
    if n == 0 || n > l {
        return Err(Error::InvalidArgument(format!("n = {n} outside 1..={l}")));
    }
    let mut sum = ZERO;
    let mut big: f64 = 0.0;
    for mask in 0usize..(1 << l) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let mut p = ONE;
        for a in (0..l).filter(|a| mask >> a & 1 == 1) {
            for b in (0..l).filter(|b| mask >> b & 1 == 0) {
                p *= x[a] - x[b];
            }
        }
        let term = p.inv();
        big = big.max(term.norm());
        sum += term;
    }
    Ok(sum.norm() / big)
}

/// Check that `H^∞_j = ω^α (Π g)^{1/L} / Π_{k≠j}(x_j − x_k)` solves the
/// large-η system `Σ_{|I|=n} Π H^∞_I Π_{α≠β∈I}(x_α − x_β) = δ_{nL} C_L`
/// for every `α`. Returns the worst relative residual.
pub fn eta_infty_system_check(x: &[C64], g: &[C64]) -> Result<f64> {
    let l = x.len();
    if g.len() != l {
        return Err(Error::ShapeMismatch(format!("need L = K, got L = {l}, K = {}", g.len())));
    }
    if l > SUBSET_CAP {
        return Err(Error::TooLarge { dim: l, cap: SUBSET_CAP });
    }
    let cl: C64 = g.iter().product();
    let root = (cl.ln() / l as f64).exp();
    let mut worst: f64 = 0.0;
    for alpha in 0..l {
        let w = C64::from_polar(1.0, std::f64::consts::TAU * alpha as f64 / l as f64);
        let h: Vec<C64> = (0..l)
            .map(|j| w * root / (0..l).filter(|&k| k != j).map(|k| x[j] - x[k]).product::<C64>())
            .collect();
        for n in 1..=l {
            let mut sum = ZERO;
            let mut big: f64 = 0.0;
            for mask in 0usize..(1 << l) {
                if mask.count_ones() as usize != n {
                    continue;
                }
                let idx: Vec<usize> = (0..l).filter(|a| mask >> a & 1 == 1).collect();
                let mut p = ONE;
                for &a in &idx {
                    p *= h[a];
                    for &b in &idx {
                        if a != b {
                            p *= x[a] - x[b];
                        }
                    }
                }
                big = big.max(p.norm());
                sum += p;
            }
            let target = if n == l { cl } else { ZERO };
            worst = worst.max((sum - target).norm() / big.max(target.norm()));
        }
    }
    Ok(worst)
}

/// The same system with `η → −η` (used by symmetry checks).
pub fn flipped_eta(sys: &SpectralSystem) -> SpectralSystem {
    sys.with_eta(-sys.eta)
}
