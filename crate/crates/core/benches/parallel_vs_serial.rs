//! Rayon vs sequential throughput on the data-parallel hot paths: pinning
//! sweeps, chain ensembles, subset Monte Carlo, and the variance-ratio
//! maximization.
//!
//! Run with `cargo bench -p glauber-lab`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use glauber_lab::exact::enumerate;
use glauber_lab::glauber::{estimate_marginal, McmcParams};
use glauber_lab::graph::{component_size_frequencies, generate, GraphFamily};
use glauber_lab::spectral::{si_profile_with, tensorization_rayleigh};
use glauber_lab::spin::SpinSystem;
use glauber_lab::Parallelism;

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("rayon", Parallelism::Rayon),
];

fn bench_si_profile(c: &mut Criterion) {
    let g = generate(&GraphFamily::Path { n: 9 }, 0).unwrap();
    let sys = SpinSystem::hardcore(g, 1.0).unwrap();
    let space = enumerate(&sys).unwrap();
    let mut group = c.benchmark_group("si_profile_hardcore_p9");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| si_profile_with(&space, mode, 10).unwrap());
        });
    }
    group.finish();
}

fn bench_chain_ensemble(c: &mut Criterion) {
    let g = generate(&GraphFamily::Cycle { n: 8 }, 0).unwrap();
    let sys = SpinSystem::hardcore(g, 1.0).unwrap();
    let params = McmcParams { steps: 50_000, burnin: 1_000, chains: 8, lag: 1, seed: 1 };
    let mut group = c.benchmark_group("marginal_8_chains_c8");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| estimate_marginal(&sys, None, 0, 1, &params, mode).unwrap());
        });
    }
    group.finish();
}

fn bench_component_tail(c: &mut Criterion) {
    let g = generate(&GraphFamily::Cycle { n: 30 }, 0).unwrap();
    let mut group = c.benchmark_group("component_tail_c30");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| component_size_frequencies(&g, 0, 9, 100_000, 5, mode));
        });
    }
    group.finish();
}

fn bench_rayleigh(c: &mut Criterion) {
    let g = generate(&GraphFamily::Cycle { n: 6 }, 0).unwrap();
    let sys = SpinSystem::hardcore(g, 1.0).unwrap();
    let space = enumerate(&sys).unwrap();
    let mut group = c.benchmark_group("rayleigh_quotient_c6");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| tensorization_rayleigh(&sys, &space, 1_000, 8, 2_000, 3, mode).unwrap());
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_si_profile,
    bench_chain_ensemble,
    bench_component_tail,
    bench_rayleigh
);
criterion_main!(benches);
