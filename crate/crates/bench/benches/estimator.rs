use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use taskrisk::predict::{cost_matrix, PerceivedSource};
use taskrisk::{dkw_epsilon, rsr_bounds, CostConfig, Ecdf, PredictorConfig, Stream};
use taskrisk_bench::{ego_plan, highway_scene, uniform_samples};

fn bounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("rsr_bounds");
    for n in [100, 1000, 10_000] {
        let a = uniform_samples(n, 1);
        let b = uniform_samples(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| rsr_bounds(black_box(&a), black_box(&b), 0.99, 0.1).unwrap())
        });
    }
    group.finish();

    let a = Ecdf::new(&uniform_samples(1000, 3)).unwrap();
    c.bench_function("ecdf_quantile", |bench| bench.iter(|| a.quantile(black_box(0.9387))));
    c.bench_function("dkw_epsilon", |bench| bench.iter(|| dkw_epsilon(black_box(0.1), black_box(1000))));
}

fn rollouts(c: &mut Criterion) {
    let mut group = c.benchmark_group("cost_matrix");
    group.sample_size(10);
    let predictor = PredictorConfig::default();
    for agents in [2, 8] {
        let scene = highway_scene(agents);
        let plan = ego_plan(&scene, predictor.horizon);
        let origin = scene.ego.pose();
        let source = PerceivedSource { scene: &scene };
        group.bench_with_input(BenchmarkId::new("n1000", agents), &agents, |bench, _| {
            bench.iter(|| {
                cost_matrix(&source, &plan, &origin, &predictor, &CostConfig::default(), 1000, Stream::new(7)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bounds, rollouts);
criterion_main!(benches);
