use susychain_core::chain::{self, DiagOptions, LimitMode};
use susychain_core::linalg::match_tuples;
use susychain_core::spectral;
use susychain_core::{ChainSpec, Grading, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn spec(p: &[u8], l: usize, eta: f64) -> ChainSpec {
    let x = [c(0.37, 0.11), c(-0.52, 0.23), c(1.14, -0.31), c(-1.3, -0.8)];
    let g = [c(1.3, 0.2), c(-0.7, 0.5), c(0.9, -0.4)];
    ChainSpec::new(Grading::new(p.to_vec()).unwrap(), x[..l].to_vec(), g[..p.len()].to_vec(), c(eta, 0.0)).unwrap()
}

/// Worst sector-wise tuple distance between ED (scaled) and the limit records.
fn limit_gap(spec: &ChainSpec, mode: LimitMode, scale: f64) -> f64 {
    let ed = chain::diagonalize(spec, DiagOptions::default()).unwrap();
    let lim = chain::limit_spectra(spec, mode).unwrap();
    let mut worst: f64 = 0.0;
    for occ in chain::occupations(spec.k(), spec.l()) {
        let a: Vec<Vec<C64>> =
            ed.iter().filter(|r| r.occupation == occ).map(|r| r.h.iter().map(|h| h * scale).collect()).collect();
        let b: Vec<Vec<C64>> = lim.iter().filter(|r| r.occupation == occ).map(|r| r.h.clone()).collect();
        assert_eq!(a.len(), b.len());
        worst = worst.max(match_tuples(&a, &b, 1.0).max_dev);
    }
    worst
}

#[test]
fn small_eta_spectra_are_twists() {
    for p in [&[0u8, 0][..], &[0, 1], &[1, 1], &[0, 0, 1]] {
        for l in 2..=3 {
            let gap = limit_gap(&spec(p, l, 1e-6), LimitMode::EtaZero, 1.0);
            assert!(gap < 1e-4, "{p:?} L={l}: {gap}");
        }
    }
}

#[test]
fn large_eta_scaled_spectra() {
    let eta: f64 = 1e6;
    for p in [&[0u8, 0][..], &[0, 1], &[1, 1], &[0, 0, 1], &[0, 1, 0]] {
        for l in 2..=3 {
            let scale = eta.powi(1 - l as i32);
            let gap = limit_gap(&spec(p, l, eta), LimitMode::EtaInfty, scale);
            assert!(gap < 1e-4, "{p:?} L={l}: {gap}");
        }
    }
}

#[test]
fn sum_residue_up_to_six() {
    let x = [c(0.37, 0.11), c(-0.52, 0.23), c(1.14, -0.31), c(-1.3, -0.8), c(0.2, 1.4), c(1.9, 0.6)];
    for l in 2..=6 {
        for n in 1..l {
            assert!(spectral::sum_residue_check(&x[..l], n).unwrap() < 1e-12);
        }
    }
}
