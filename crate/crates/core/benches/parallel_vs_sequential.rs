use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use meyerstop::commands::{run_command, Command, Options};
use meyerstop::enumerate::{enumerate_stopping_times, ENUMERATION_LIMIT};
use meyerstop::generate::{generate_instance, RandomInstanceParams, Regime};
use meyerstop::par::with_sequential;
use meyerstop::representation::solve_representation;
use meyerstop::snell::{check_optimality, snell_brute_force};
use meyerstop::FieldKind;
use std::hint::black_box;

fn instance(seed: u64) -> meyerstop::scenario::Scenario {
    generate_instance(&RandomInstanceParams {
        seed,
        epochs: 4,
        max_paths: 12,
        regime: Regime::RandomBetween,
        budget: 200_000,
        ..RandomInstanceParams::default()
    })
}

fn modes(c: &mut Criterion, name: &str, f: impl Fn()) {
    let mut g = c.benchmark_group(name);
    g.sample_size(10);
    g.bench_function(BenchmarkId::from_parameter("parallel"), |b| b.iter(&f));
    g.bench_function(BenchmarkId::from_parameter("sequential"), |b| b.iter(|| with_sequential(&f)));
    g.finish();
}

fn benches(c: &mut Criterion) {
    let sc = instance(7);
    let space = sc.space().unwrap();
    let z = sc.process("Z").unwrap();
    let x = sc.process("X").unwrap();
    let problem = sc.representation(&space).unwrap().unwrap();
    let times = enumerate_stopping_times(&space, FieldKind::Lambda, None, ENUMERATION_LIMIT).unwrap();

    modes(c, "snell_brute_force", || {
        black_box(snell_brute_force(&space, &z, ENUMERATION_LIMIT).unwrap());
    });
    modes(c, "certificates", || {
        let n = meyerstop::par::map(&times, |t| check_optimality(&space, &z, t).unwrap().optimal).len();
        black_box(n);
    });
    modes(c, "solve_representation", || {
        black_box(solve_representation(&space, &problem.g, &problem.mu, &x, ENUMERATION_LIMIT).unwrap());
    });
    modes(c, "suite", || {
        black_box(run_command(&sc, Command::Suite, &Options::default()).unwrap());
    });
}

criterion_group!(parallel_vs_sequential, benches);
criterion_main!(parallel_vs_sequential);
