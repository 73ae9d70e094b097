//! Shared fixtures for the criterion benches.

use susychain_core::{ChainSpec, Grading, RSState, C64};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Sites in general position, reused by every fixture.
pub fn sites(l: usize) -> Vec<C64> {
    (0..l).map(|i| c(1.3 * i as f64 - 0.4, 0.17 * (i * i) as f64 - 0.3)).collect()
}

pub fn chain(p: &[u8], l: usize) -> ChainSpec {
    let g = [c(1.3, 0.2), c(-0.7, 0.5), c(0.9, -0.4), c(0.4, 1.1)];
    ChainSpec::new(Grading::new(p.to_vec()).unwrap(), sites(l), g[..p.len()].to_vec(), c(0.3, 0.05)).unwrap()
}

pub fn rs_state(l: usize) -> RSState {
    let v = (0..l).map(|i| c(0.2 - 0.1 * i as f64, 0.05 * i as f64)).collect();
    RSState::new(sites(l), v, c(0.3, 0.0)).unwrap()
}
