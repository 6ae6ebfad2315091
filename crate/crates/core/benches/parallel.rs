use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ors_core::par::Threads;
use ors_core::predict::models::{BoostedSpec, ForestSpec};
use ors_core::predict::{fit, FeatureMatrix, ModelSpec};
use ors_core::solve::{random_instance, solve_heuristic, ObjectiveMode, RandomInstanceConfig, SolveLimits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn data(n: usize) -> (FeatureMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..8).map(|_| rng.random_range(0.0..10.0)).collect())
        .collect();
    let y = rows.iter().map(|r| 30.0 + 5.0 * r[0] + r[1] * r[2] + rng.random_range(-2.0..2.0)).collect();
    let names = (0..8).map(|i| format!("f{i}")).collect();
    (FeatureMatrix::from_rows(names, &rows).unwrap(), y)
}

fn modes() -> [(&'static str, Threads); 2] {
    [("sequential", Threads::SEQUENTIAL), ("parallel", Threads::ALL)]
}

fn forest(c: &mut Criterion) {
    let (x, y) = data(2000);
    let spec = ModelSpec::Forest(ForestSpec {
        n_estimators: 32,
        max_depth: Some(10),
        min_samples_split: 2,
        max_features: None,
    });
    let mut g = c.benchmark_group("forest_fit");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit(black_box(&spec), &x, &y, 1, threads).unwrap())
        });
    }
    g.finish();
}

fn boosted(c: &mut Criterion) {
    let (x, y) = data(2000);
    let spec = ModelSpec::BoostedTrees(BoostedSpec {
        n_estimators: 50,
        learning_rate: 0.1,
        max_depth: Some(4),
        min_samples_split: 2,
    });
    let mut g = c.benchmark_group("boosted_fit");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit(black_box(&spec), &x, &y, 1, threads).unwrap())
        });
    }
    g.finish();
}

fn heuristic(c: &mut Criterion) {
    let cfg = RandomInstanceConfig {
        max_registrations: 120,
        max_cells: 9,
        specialties: 3,
        p1_probability: 0.02,
        ..RandomInstanceConfig::default()
    };
    let inst = random_instance(&cfg, 11);
    let mut g = c.benchmark_group("heuristic_restarts");
    g.sample_size(10);
    for (name, threads) in modes() {
        let limits = SolveLimits {
            time_budget_s: 60.0,
            max_restarts: 64,
            threads: threads.0,
            ..SolveLimits::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve_heuristic(black_box(&inst), ObjectiveMode::WithConfidence, &limits))
        });
    }
    g.finish();
}

criterion_group!(benches, forest, boosted, heuristic);
criterion_main!(benches);
