#![allow(dead_code)]
//! Hand-transcribed small-L Hamiltonian matrices used as fixtures.

use susychain_core::chain::{hamiltonians, ChainSpec};
use susychain_core::superlinalg::{BasisState, Grading};
use susychain_core::{CMat, C64};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Parity sign `(-1)^p` and the pair sign `(-1)^{p p'}`.
fn s1(p: u8) -> f64 {
    if p == 1 { -1.0 } else { 1.0 }
}

fn s2(p: u8, q: u8) -> f64 {
    if p * q == 1 { -1.0 } else { 1.0 }
}

/// 3-dim sector spanned by a1a1a2, a1a2a1, a2a1a1 (in that order).
pub fn fixture_3(ga1: C64, ga2: C64, pa1: u8, pa2: u8, x: [C64; 3], eta: C64) -> [CMat; 3] {
    let p1 = s1(pa1);
    let p12 = s2(pa1, pa2);
    let (x12, x13, x23) = (x[0] - x[1], x[0] - x[2], x[1] - x[2]);
    let e = eta;
    let one = c(1.0, 0.0);
    let h1 = CMat::from_row_slice(3, 3, &[
        ga1 * (e * p1 / x12 + one),
        e * e * ga1 * p1 * p12 / (x12 * x13),
        e * ga1 * p1 / x13,
        c(0.0, 0.0),
        ga1 * (e * p1 / x13 + one),
        e * ga1 * p12 * (x13 + e * p1) / (x12 * x13),
        e * ga2 * (x12 * p1 + e) / (x12 * x13),
        e * ga2 * p12 / x12,
        ga2,
    ]);
    let h2 = CMat::from_row_slice(3, 3, &[
        ga1 * (-e * p1 / x12 + one),
        e * ga1 * p12 * (x12 - e * p1) / (x12 * x23),
        c(0.0, 0.0),
        e * ga2 * p12 / x23,
        ga2,
        -e * ga1 * p12 * (x23 + e * p1) / (x12 * x23),
        -e * e * ga2 / (x12 * x23),
        -e * ga2 * p12 / x12,
        ga1 * (e * p1 / x23 + one),
    ]);
    let h3 = CMat::from_row_slice(3, 3, &[
        ga2,
        -e * ga1 * p12 * (x13 - e * p1) / (x23 * x13),
        -e * ga1 * p1 / x13,
        -e * ga2 * p12 / x23,
        ga1 * (-e * p1 / x13 + one),
        e * e * ga1 * p1 * p12 / (x13 * x23),
        -e * ga2 * (x23 * p1 - e) / (x13 * x23),
        c(0.0, 0.0),
        ga1 * (-e * p1 / x23 + one),
    ]);
    [h1, h2, h3]
}

/// 6-dim sector spanned by a_{τ(1)}a_{τ(2)}a_{τ(3)}, τ in lexicographic order.
pub fn fixture_6(g: [C64; 3], p: [u8; 3], x: [C64; 3], eta: C64) -> [CMat; 3] {
    let (p12, p13, p23) = (s2(p[0], p[1]), s2(p[0], p[2]), s2(p[1], p[2]));
    let ppp = p12 * p13 * p23;
    let (x12, x13, x23) = (x[0] - x[1], x[0] - x[2], x[1] - x[2]);
    let (x21, x31, x32) = (-x12, -x13, -x23);
    let e = eta;
    let e2 = eta * eta;
    let z = c(0.0, 0.0);
    let [g1, g2, g3] = g;
    let h1 = CMat::from_row_slice(6, 6, &[
        g1, z, e * g1 * p12 / x12, e2 * g1 * p12 * p13 / (x12 * x13), z, e * g1 * ppp / x13,
        z, g1, z, e * g1 * ppp / x13, e * g1 * p13 / x12, e2 * g1 * p12 * p13 / (x12 * x13),
        e * g2 * p12 / x12, e2 * g2 * p12 * p23 / (x12 * x13), g2, z, e * g2 * ppp / x13, z,
        z, e * g2 * ppp / x13, z, g2, e2 * g2 * p12 * p23 / (x12 * x13), e * g2 * p23 / x12,
        e2 * g3 * p13 * p23 / (x12 * x13), e * g3 * p13 / x12, e * g3 * ppp / x13, z, g3, z,
        e * g3 * ppp / x13, z, e2 * g3 * p13 * p23 / (x12 * x13), e * g3 * p23 / x12, z, g3,
    ]);
    let h2 = CMat::from_row_slice(6, 6, &[
        g2, e * g2 * p23 / x23, e * g1 * p12 / x21, -e2 * g1 * p12 * p13 / (x12 * x23), z, z,
        e * g3 * p23 / x23, g3, z, z, e * g1 * p13 / x21, -e2 * g1 * p12 * p13 / (x12 * x23),
        e * g2 * p12 / x21, -e2 * g2 * p12 * p23 / (x12 * x23), g1, e * g1 * p13 / x23, z, z,
        z, z, e * g3 * p13 / x23, g3, -e2 * g2 * p12 * p23 / (x12 * x23), e * g2 * p23 / x21,
        -e2 * g3 * p13 * p23 / (x12 * x23), e * g3 * p13 / x21, z, z, g1, e * g1 * p12 / x23,
        z, z, -e2 * g3 * p13 * p23 / (x12 * x23), e * g3 * p23 / x21, e * g2 * p12 / x23, g2,
    ]);
    let h3 = CMat::from_row_slice(6, 6, &[
        g3, e * g2 * p23 / x32, z, -e2 * g1 * p12 * p13 / (x13 * x32), z, e * g1 * ppp / x31,
        e * g3 * p23 / x32, g2, z, e * g1 * ppp / x31, z, -e2 * g1 * p12 * p13 / (x13 * x32),
        z, -e2 * g2 * p12 * p23 / (x13 * x32), g3, e * g1 * p13 / x32, e * g2 * ppp / x31, z,
        z, e * g2 * ppp / x31, e * g3 * p13 / x32, g1, -e2 * g2 * p12 * p23 / (x13 * x32), z,
        -e2 * g3 * p13 * p23 / (x13 * x32), z, e * g3 * ppp / x31, z, g2, e * g1 * p12 / x32,
        e * g3 * ppp / x31, z, -e2 * g3 * p13 * p23 / (x13 * x32), z, e * g2 * p12 / x32, g1,
    ]);
    [h1, h2, h3]
}

/// Restrict the dense Hamiltonians of `spec` to the listed basis words.
pub fn restricted(spec: &ChainSpec, words: &[Vec<usize>]) -> Vec<CMat> {
    let k = spec.k();
    let idx: Vec<usize> = words
        .iter()
        .map(|w| BasisState { letters: w.clone() }.index(k))
        .collect();
    hamiltonians(spec)
        .unwrap()
        .into_iter()
        .map(|h| CMat::from_fn(idx.len(), idx.len(), |r, s| h.matrix[(idx[r], idx[s])]))
        .collect()
}

pub fn max_entry_dev(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub struct FixtureReport {
    pub max_dev: f64,
    pub cases: usize,
}

/// Compare every 3-dim and 6-dim fixture for all parity assignments of the
/// involved letters.
pub fn appendix_l3_report() -> FixtureReport {
    let x = [c(0.37, 0.11), c(-0.52, 0.23), c(1.14, -0.31)];
    let eta = c(0.41, -0.07);
    let gk = [c(1.3, 0.2), c(-0.7, 0.5), c(0.9, -0.4)];
    let mut max_dev: f64 = 0.0;
    let mut cases = 0;
    for bits in 0..4u8 {
        let p = vec![bits & 1, (bits >> 1) & 1];
        let grading = Grading::new(p.clone()).unwrap();
        let spec = ChainSpec::new(grading, x.to_vec(), gk[..2].to_vec(), eta).unwrap();
        for (a1, a2) in [(0usize, 1usize), (1, 0)] {
            let words = vec![vec![a1, a1, a2], vec![a1, a2, a1], vec![a2, a1, a1]];
            let ours = restricted(&spec, &words);
            let fx = fixture_3(gk[a1], gk[a2], p[a1], p[a2], x, eta);
            for j in 0..3 {
                max_dev = max_dev.max(max_entry_dev(&ours[j], &fx[j]));
            }
            cases += 1;
        }
    }
    for bits in 0..8u8 {
        let p = vec![bits & 1, (bits >> 1) & 1, (bits >> 2) & 1];
        let grading = Grading::new(p.clone()).unwrap();
        let spec = ChainSpec::new(grading, x.to_vec(), gk.to_vec(), eta).unwrap();
        let a = [0usize, 1, 2];
        let mut words = vec![];
        for t in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            words.push(t.iter().map(|&i| a[i]).collect::<Vec<_>>());
        }
        let ours = restricted(&spec, &words);
        let fx = fixture_6(gk, [p[0], p[1], p[2]], x, eta);
        for j in 0..3 {
            max_dev = max_dev.max(max_entry_dev(&ours[j], &fx[j]));
        }
        cases += 1;
    }
    FixtureReport { max_dev, cases }
}
