use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use susychain_bench::{c, chain, rs_state, sites};
use susychain_core::chain::{self as ch, DiagOptions};
use susychain_core::rs::{self, EvolveOptions};
use susychain_core::spectral::{self, HomotopyOptions, QcOptions, SpectralSystem};
use susychain_core::tau::{self, Kernel, TauData};

fn diagonalize(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("diagonalize");
    for l in [2, 4, 6] {
        let spec = chain(&[0, 1], l);
        g.bench_with_input(BenchmarkId::from_parameter(l), &spec, |b, s| {
            b.iter(|| ch::diagonalize(s, DiagOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn qc_verify(cr: &mut Criterion) {
    let spec = chain(&[0, 0, 1], 3);
    cr.bench_function("qc_verify/gl(2|1) L=3", |b| b.iter(|| spectral::qc_verify(&spec, QcOptions::default()).unwrap()));
}

fn solve_homotopy(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("solve_homotopy");
    g.sample_size(10);
    for l in [3, 4, 5] {
        let twists = (0..l).map(|i| c(1.0 + 0.7 * i as f64, 0.1 * i as f64)).collect();
        let sys = SpectralSystem::from_g_list(sites(l), c(0.3, 0.0), twists).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(l), &sys, |b, s| {
            b.iter(|| spectral::solve_homotopy(s, HomotopyOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn hirota(cr: &mut Criterion) {
    let spec = chain(&[0, 1], 3);
    let rec = &ch::diagonalize(&spec, DiagOptions::default()).unwrap()[3];
    let td = TauData::from_chain(&spec, &rec.h, Kernel::EtaScaled).unwrap();
    cr.bench_function("hirota/20 samples", |b| b.iter(|| tau::hirota_suite(&td, 20, 4, 1).unwrap()));
}

fn evolve(cr: &mut Criterion) {
    let st = rs_state(6);
    cr.bench_function("evolve/L=6 1000 steps", |b| {
        b.iter(|| rs::evolve_t1(&st, 1.0, 1000, EvolveOptions { sample_every: 1000, ..Default::default() }).unwrap())
    });
}

criterion_group!(benches, diagonalize, qc_verify, solve_homotopy, hirota, evolve);
criterion_main!(benches);
