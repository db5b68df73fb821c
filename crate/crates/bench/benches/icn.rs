use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spatial_csma::fixtures::{eight_link, heterogeneous_demands, EIGHT_LINK_TARGETS};
use spatial_csma::stackelberg::PricingConfig;
use spatial_csma::subgame::SubgameConfig;
use spatial_csma::{membership, run_stackelberg, run_subgame, simulate, throughput, AccessProfile};
use spatial_csma_bench::ring;

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumerate_states");
    for n in [8, 16, 24] {
        let g = ring(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| g.enumerate_states().unwrap())
        });
    }
    group.finish();
}

fn exact_throughput(c: &mut Criterion) {
    let mut group = c.benchmark_group("throughput");
    for n in [8, 16, 24] {
        let g = ring(n);
        let space = g.enumerate_states().unwrap();
        let r = AccessProfile::uniform(n, 0.5);
        group.bench_with_input(BenchmarkId::from_parameter(n), &space, |b, space| {
            b.iter(|| throughput(space, black_box(&r)).unwrap())
        });
    }
    group.finish();
}

fn region(c: &mut Criterion) {
    let space = eight_link().enumerate_states().unwrap();
    c.bench_function("membership/eight_link", |b| {
        b.iter(|| membership(&space, black_box(&EIGHT_LINK_TARGETS)).unwrap())
    });
}

fn simulator(c: &mut Criterion) {
    let g = eight_link();
    let r = AccessProfile::uniform(8, 0.0);
    c.bench_function("simulate/eight_link_10s", |b| {
        b.iter(|| simulate(&g, &r, 10_000.0, black_box(1)).unwrap())
    });
}

fn games(c: &mut Criterion) {
    let g = eight_link();
    let space = g.enumerate_states().unwrap();
    let cfg = SubgameConfig {
        tolerance: 1e-3,
        max_iterations: 20_000,
        record_trace: false,
        ..SubgameConfig::default()
    };
    c.bench_function("subgame/eight_link_exact", |b| {
        b.iter(|| run_subgame(&g, &space, black_box(&EIGHT_LINK_TARGETS), &cfg).unwrap())
    });
    let demands = heterogeneous_demands();
    let pricing = PricingConfig::default();
    c.bench_function("stackelberg/eight_link_exact", |b| {
        b.iter(|| run_stackelberg(&g, &space, black_box(&demands), &cfg, &pricing).unwrap())
    });
}

criterion_group!(
    benches,
    enumeration,
    exact_throughput,
    region,
    simulator,
    games
);
criterion_main!(benches);
