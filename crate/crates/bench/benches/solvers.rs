use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sparse_game_bench::{chain_game, cycle, lattices};
use sparse_game_core::decay::{gamma_sequence, theta_star};
use sparse_game_core::graph::nkh_table;
use sparse_game_core::lq::riccati_solve;

fn bench_nkh(c: &mut Criterion) {
    let mut group = c.benchmark_group("nkh_table");
    for radius in [8u32, 20] {
        let (undirected, outward) = lattices(radius).unwrap();
        group.bench_with_input(BenchmarkId::new("undirected_lattice", radius), &undirected, |b, g| {
            b.iter(|| nkh_table(black_box(g), 0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("outward_lattice", radius), &outward, |b, g| {
            b.iter(|| nkh_table(black_box(g), 0).unwrap())
        });
    }
    group.finish();
}

fn bench_gamma(c: &mut Criterion) {
    let mut group = c.benchmark_group("decay");
    let (lattice, _) = lattices(20).unwrap();
    let table = nkh_table(&lattice, 0).unwrap();
    let theta = 0.5 * theta_star(&table, 20).unwrap();
    group.bench_function("gamma_sequence/lattice_r20", |b| {
        b.iter(|| gamma_sequence(black_box(&table), theta, 20).unwrap())
    });
    let chain = nkh_table(&cycle(201).unwrap(), 0).unwrap();
    group.bench_function("theta_star/cycle_r100", |b| b.iter(|| theta_star(black_box(&chain), 100).unwrap()));
    group.finish();
}

fn bench_riccati(c: &mut Criterion) {
    let mut group = c.benchmark_group("riccati_solve");
    group.sample_size(10);
    for n in [9usize, 21, 41] {
        let spec = chain_game(n).unwrap();
        let all = spec.all_players();
        group.bench_with_input(BenchmarkId::new("chain_2000_steps", n), &spec, |b, s| {
            b.iter(|| riccati_solve(black_box(s), &all, None, 2000).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_nkh, bench_gamma, bench_riccati);
criterion_main!(benches);
