//! Classical rational Ruijsenaars–Schneider model: Lax pair, the t₁ flow,
//! conserved quantities and characteristic-polynomial coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::{CMat, C64};

/// Positions, velocities and the coupling η.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RSState {
    #[serde(with = "crate::io::complex_vec")]
    pub x: Vec<C64>,
    #[serde(with = "crate::io::complex_vec")]
    pub v: Vec<C64>,
    #[serde(with = "crate::io::complex")]
    pub eta: C64,
}

/// `Z`, the diagonal position matrix `X` and the companion matrix `G` of the
/// Lax pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxData {
    pub z: CMat,
    pub x: CMat,
    pub g: CMat,
}

const COLLISION: f64 = 1e-8;

impl RSState {
    pub fn new(x: Vec<C64>, v: Vec<C64>, eta: C64) -> Result<Self> {
        let s = RSState { x, v, eta };
        s.validate()?;
        Ok(s)
    }

    pub fn l(&self) -> usize {
        self.x.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.v.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} positions, {} velocities",
                self.x.len(),
                self.v.len()
            )));
        }
        if self.eta.norm() == 0.0 {
            return Err(Error::InvalidArgument("eta must be nonzero".into()));
        }
        if let Some((i, j)) = self.near_collision(1e-14) {
            return Err(Error::DegenerateConfiguration(format!(
                "particles {i} and {j} coincide up to 0 or ±eta"
            )));
        }
        Ok(())
    }

    /// First pair with `|x_i − x_j| < eps` or `|x_i − x_j ± η| < eps`.
    fn near_collision(&self, eps: f64) -> Option<(usize, usize)> {
        let n = self.l();
        for i in 0..n {
            for j in i + 1..n {
                let d = self.x[i] - self.x[j];
                if d.norm() < eps || (d - self.eta).norm() < eps || (d + self.eta).norm() < eps {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

pub fn lax(state: &RSState) -> Result<LaxData> {
    state.validate()?;
    let n = state.l();
    let (x, v, eta) = (&state.x, &state.v, state.eta);
    let z = CMat::from_fn(n, n, |i, j| v[i] / (x[i] - x[j] - eta));
    let mut g = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                let mut s = C64::new(0.0, 0.0);
                for k in (0..n).filter(|&k| k != i) {
                    let d = x[i] - x[k];
                    s += v[k] / d - v[k] / (d + eta);
                }
                g[(i, i)] = s;
            } else {
                let d = x[i] - x[j];
                g[(i, j)] = v[i] / d - v[i] / (d - eta);
            }
        }
    }
    Ok(LaxData { z, x: linalg::diag(x), g })
}

/// Lax matrix built from chain data: velocities `ẋ_i = −ηH_i`.
pub fn lax_from_spectrum(x: &[C64], h: &[C64], eta: C64) -> Result<LaxData> {
    if x.len() != h.len() {
        return Err(Error::ShapeMismatch(format!("{} positions, {} energies", x.len(), h.len())));
    }
    let v: Vec<C64> = h.iter().map(|hi| -eta * hi).collect();
    let state = RSState::new(x.to_vec(), v, eta)?;
    let mut data = lax(&state)?;
    // Same matrix, written directly in terms of H to avoid the −η/−η round trip.
    let n = x.len();
    data.z = CMat::from_fn(n, n, |i, j| eta * h[i] / (x[j] - x[i] + eta));
    Ok(data)
}

/// `ẍ_i` from the equations of motion.
pub fn acceleration(x: &[C64], v: &[C64], eta: C64) -> Vec<C64> {
    let n = x.len();
    let e2 = eta * eta;
    (0..n)
        .map(|i| {
            let mut a = C64::new(0.0, 0.0);
            for k in (0..n).filter(|&k| k != i) {
                let d = x[i] - x[k];
                a -= 2.0 * e2 * v[i] * v[k] / (d * (d * d - e2));
            }
            a
        })
        .collect()
}

/// Values of `tr Z^k`, `k = 1..=kmax`.
pub fn higher_integrals(state: &RSState, kmax: usize) -> Result<Vec<C64>> {
    let z = lax(state)?.z;
    Ok(power_traces(&z, kmax))
}

fn power_traces(z: &CMat, kmax: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(kmax);
    let mut p = z.clone();
    for k in 1..=kmax {
        if k > 1 {
            p = &p * z;
        }
        out.push(linalg::trace(&p));
    }
    out
}

/// `H₁ = Σ e^{−ηp_i} Π_{k≠i}(x_i−x_k+η)/(x_i−x_k)`, which on shell is `−Σẋ_i/η`.
pub fn hamiltonian(state: &RSState) -> Result<C64> {
    let p = momentum_map(state)?;
    let eta = state.eta;
    let mut h = C64::new(0.0, 0.0);
    for i in 0..state.l() {
        h += (-eta * p[i]).exp() * pair_product(&state.x, i, eta);
    }
    Ok(h)
}

fn pair_product(x: &[C64], i: usize, eta: C64) -> C64 {
    (0..x.len())
        .filter(|&k| k != i)
        .map(|k| (x[i] - x[k] + eta) / (x[i] - x[k]))
        .product()
}

/// Momenta with `ẋ_i = −η e^{−ηp_i} Π_{k≠i}(x_i−x_k+η)/(x_i−x_k)`, on the
/// branch `Im(ηp) ∈ (−π, π]`.
pub fn momentum_map(state: &RSState) -> Result<Vec<C64>> {
    state.validate()?;
    let eta = state.eta;
    let mut out = Vec::with_capacity(state.l());
    for i in 0..state.l() {
        let w = -state.v[i] / (eta * pair_product(&state.x, i, eta));
        if w.norm() == 0.0 || !w.re.is_finite() || !w.im.is_finite() {
            return Err(Error::LogBranch(i));
        }
        let mut ep = -w.ln();
        // ln gives Im ∈ (−π, π]; negation maps the upper edge to −π.
        if ep.im <= -std::f64::consts::PI {
            ep.im += 2.0 * std::f64::consts::PI;
        }
        out.push(ep / eta);
    }
    Ok(out)
}

/// One sample of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    #[serde(with = "crate::io::complex_vec")]
    pub x: Vec<C64>,
    #[serde(with = "crate::io::complex_vec")]
    pub v: Vec<C64>,
    #[serde(rename = "specZ", with = "crate::io::complex_vec")]
    pub spec_z: Vec<C64>,
}

/// Options for [`evolve_t1`].
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Relative per-step drift allowed in `tr Z^k` before the step is halved.
    pub drift_tol: f64,
    /// Maximum number of halvings of one step.
    pub max_halvings: u32,
    /// Keep every `sample_every`-th step (the last step is always kept).
    pub sample_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { drift_tol: 1e-10, max_halvings: 12, sample_every: 1 }
    }
}

fn rk4(x: &[C64], v: &[C64], eta: C64, h: f64) -> (Vec<C64>, Vec<C64>) {
    let n = x.len();
    let add = |a: &[C64], b: &[C64], s: f64| -> Vec<C64> { (0..n).map(|i| a[i] + b[i] * s).collect() };
    let k1x = v.to_vec();
    let k1v = acceleration(x, v, eta);
    let (x2, v2) = (add(x, &k1x, h / 2.0), add(v, &k1v, h / 2.0));
    let k2x = v2.clone();
    let k2v = acceleration(&x2, &v2, eta);
    let (x3, v3) = (add(x, &k2x, h / 2.0), add(v, &k2v, h / 2.0));
    let k3x = v3.clone();
    let k3v = acceleration(&x3, &v3, eta);
    let (x4, v4) = (add(x, &k3x, h), add(v, &k3v, h));
    let k4v = acceleration(&x4, &v4, eta);
    let k4x = v4;
    let xn = (0..n).map(|i| x[i] + (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]) * (h / 6.0)).collect();
    let vn = (0..n).map(|i| v[i] + (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]) * (h / 6.0)).collect();
    (xn, vn)
}

fn drift(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm() / p.norm().max(1.0))
        .fold(0.0, f64::max)
}

/// Fourth-order Runge–Kutta integration of the t₁ flow over `[0, t_final]`
/// with `steps` nominal steps. A step whose conserved quantities drift by more
/// than `drift_tol` is redone with halved substeps.
pub fn evolve_t1(state: &RSState, t_final: f64, steps: usize, opts: EvolveOptions) -> Result<Vec<TrajectoryPoint>> {
    state.validate()?;
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be positive".into()));
    }
    let n = state.l();
    let eta = state.eta;
    let h = t_final / steps as f64;
    let sample = |t: f64, x: &[C64], v: &[C64]| -> Result<TrajectoryPoint> {
        let st = RSState { x: x.to_vec(), v: v.to_vec(), eta };
        let z = lax(&st)?.z;
        Ok(TrajectoryPoint { t, x: x.to_vec(), v: v.to_vec(), spec_z: linalg::eigenvalues(&z) })
    };
    let mut x = state.x.clone();
    let mut v = state.v.clone();
    let mut out = vec![sample(0.0, &x, &v)?];
    let invariants = |x: &[C64], v: &[C64]| -> Vec<C64> {
        let st = RSState { x: x.to_vec(), v: v.to_vec(), eta };
        lax(&st).map(|d| power_traces(&d.z, n)).unwrap_or_default()
    };
    let every = opts.sample_every.max(1);
    for s in 0..steps {
        let t0 = s as f64 * h;
        let before = invariants(&x, &v);
        let mut accepted = None;
        let mut worst = 0.0;
        for halving in 0..=opts.max_halvings {
            let sub = 1usize << halving;
            let hs = h / sub as f64;
            let (mut xs, mut vs) = (x.clone(), v.clone());
            let mut collided = None;
            for q in 0..sub {
                let (xn, vn) = rk4(&xs, &vs, eta, hs);
                xs = xn;
                vs = vn;
                let probe = RSState { x: xs.clone(), v: vs.clone(), eta };
                if let Some((i, j)) = probe.near_collision(COLLISION) {
                    collided = Some((t0 + (q + 1) as f64 * hs, i, j));
                    break;
                }
            }
            if let Some((t, i, j)) = collided {
                return Err(Error::CollisionDetected { t, i, j });
            }
            let after = invariants(&xs, &vs);
            let d = if after.len() == before.len() { drift(&before, &after) } else { f64::INFINITY };
            if d <= opts.drift_tol {
                accepted = Some((xs, vs));
                break;
            }
            worst = d;
        }
        match accepted {
            Some((xn, vn)) => {
                x = xn;
                v = vn;
            }
            None => return Err(Error::StepTooLarge { t: t0, drift: worst }),
        }
        if (s + 1) % every == 0 || s + 1 == steps {
            out.push(sample((s + 1) as f64 * h, &x, &v)?);
        }
    }
    Ok(out)
}

/// Trajectory as JSON lines `{t, x[], v[], specZ[]}`.
pub fn trajectory_json_lines(traj: &[TrajectoryPoint]) -> String {
    let mut s = String::new();
    for p in traj {
        s.push_str(&serde_json::to_string(p).expect("trajectory point serializes"));
        s.push('\n');
    }
    s
}

/// `J_0..J_L` with `det(λ − Z) = Σ_k J_k λ^{L−k}`, by Faddeev–LeVerrier.
pub fn charpoly_coeffs(z: &CMat) -> Vec<C64> {
    let n = z.nrows();
    let mut j = vec![C64::new(1.0, 0.0); n + 1];
    if n == 0 {
        return j;
    }
    let mut m = linalg::identity(n);
    for k in 1..=n {
        if k > 1 {
            m = z * &m + linalg::identity(n) * j[k - 1];
        }
        j[k] = -linalg::trace(&(z * &m)) / k as f64;
    }
    j
}

/// Same coefficients from the subset-sum formula
/// `J_n = (−1)^n Σ_{|I|=n} Π_{i∈I} H_i Π_{α<β∈I} (1 − η²/x_{αβ}²)^{−1}`.
pub fn charpoly_cauchy(x: &[C64], h: &[C64], eta: C64) -> Result<Vec<C64>> {
    let n = x.len();
    if h.len() != n {
        return Err(Error::ShapeMismatch(format!("{} positions, {} energies", n, h.len())));
    }
    if n > 24 {
        return Err(Error::TooLarge { dim: n, cap: 24 });
    }
    let e2 = eta * eta;
    let mut w = vec![vec![C64::new(1.0, 0.0); n]; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let d = x[a] - x[b];
                let den = C64::new(1.0, 0.0) - e2 / (d * d);
                if den.norm() < 1e-300 {
                    return Err(Error::DenominatorCollision(format!("x[{a}] - x[{b}] = ±eta")));
                }
                w[a][b] = den.inv();
            }
        }
    }
    let mut weight = vec![C64::new(1.0, 0.0); 1 << n];
    let mut j = vec![C64::new(0.0, 0.0); n + 1];
    j[0] = C64::new(1.0, 0.0);
    for mask in 1usize..(1 << n) {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let mut val = weight[rest] * h[i];
        let mut r = rest;
        while r != 0 {
            let k = r.trailing_zeros() as usize;
            val *= w[i][k];
            r &= r - 1;
        }
        weight[mask] = val;
        j[mask.count_ones() as usize] += val;
    }
    for (k, jk) in j.iter_mut().enumerate() {
        if k % 2 == 1 {
            *jk = -*jk;
        }
    }
    Ok(j)
}
