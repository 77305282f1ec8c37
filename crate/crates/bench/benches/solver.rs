use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;
use scenario_game::admm::{self, AdmmConfig};
use scenario_game::certificates::binomial_tail;
use scenario_game::inner::{solve_subgame, InnerOptions, ScenarioSubproblem};
use scenario_game::oracle::solve_centralized;
use scenario_game::JointDecision;
use scenario_game_bench::rendezvous_instance;

fn tails(c: &mut Criterion) {
    c.bench_function("binomial_tail S=1000 k=19", |b| {
        b.iter(|| binomial_tail(black_box(1000), black_box(0.05), black_box(19)).unwrap())
    });
}

fn subgame(c: &mut Criterion) {
    let (spec, set) = rendezvous_instance(1, 7);
    let x = JointDecision::zeros(spec.dims());
    let lambda = DVector::zeros(spec.dims().joint_dim());
    let p = ScenarioSubproblem::new(&spec, set.get(0), &x, &lambda, 5.0, 10).unwrap();
    c.bench_function("rendezvous subgame cold start", |b| {
        b.iter(|| solve_subgame(black_box(&p), None, &InnerOptions::default()).unwrap())
    });
}

fn outer_loop(c: &mut Criterion) {
    let mut group = c.benchmark_group("admm rendezvous");
    group.sample_size(10);
    for s in [10usize, 50] {
        let (spec, set) = rendezvous_instance(s, 7);
        for workers in [1usize, 4] {
            let cfg = AdmmConfig {
                workers: Some(workers),
                ..Default::default()
            };
            group.bench_with_input(
                BenchmarkId::new(format!("S={s}"), workers),
                &cfg,
                |b, cfg| b.iter(|| admm::run(&spec, &set, cfg, None, None).unwrap()),
            );
        }
    }
    group.finish();
}

fn centralized(c: &mut Criterion) {
    let (spec, set) = rendezvous_instance(10, 7);
    let mut group = c.benchmark_group("centralized");
    group.sample_size(10);
    group.bench_function("rendezvous S=10", |b| {
        b.iter(|| solve_centralized(&spec, &set, &InnerOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, tails, subgame, outer_loop, centralized);
criterion_main!(benches);
