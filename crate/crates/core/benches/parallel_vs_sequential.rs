//! Grid solve and full verification on a one-thread pool versus the default
//! pool. Build with `--no-default-features` to time the sequential fallback.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spbe_core::backward::{solve, BackwardOptions, Mode};
use spbe_core::forward::EquilibriumPolicy;
use spbe_core::game_model::{numeric_labels, RewardSchedule};
use spbe_core::verifier::{verify_pbe, DEFAULT_HISTORY_LIMIT};
use spbe_core::{GameSpec, SolverConfig};

fn game(seed: u64, horizon: usize) -> Arc<GameSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rewards = (0..2)
        .map(|_| {
            (0..16)
                .map(|_| f64::from(rng.gen_range(-4i32..=4)) / 2.0)
                .collect()
        })
        .collect();
    Arc::new(
        GameSpec::new(
            horizon,
            vec![numeric_labels(2), numeric_labels(2)],
            vec![numeric_labels(2), numeric_labels(2)],
            vec![0.4, 0.1, 0.1, 0.4],
            RewardSchedule::Stationary(rewards),
            1.0,
        )
        .unwrap(),
    )
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let default = rayon::ThreadPoolBuilder::new().build().unwrap();
    let label = format!("default-pool-{}", default.current_num_threads());
    vec![
        (
            "1-thread".into(),
            rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .unwrap(),
        ),
        (label, default),
    ]
}

fn grid_solve(c: &mut Criterion) {
    let spec = game(41, 2);
    let config = SolverConfig::default();
    let options = BackwardOptions {
        mode: Mode::Grid { resolution: 6 },
        ..BackwardOptions::default()
    };
    let mut group = c.benchmark_group("grid_solve_G6");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| solve(Arc::clone(&spec), &config, &options)))
        });
    }
    group.finish();
}

fn verification(c: &mut Criterion) {
    let spec = game(12, 3);
    let out = solve(
        Arc::clone(&spec),
        &SolverConfig::default(),
        &BackwardOptions::default(),
    );
    let policy = EquilibriumPolicy::new(&out.generator);
    let mut group = c.benchmark_group("verify_pbe_T3");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| verify_pbe(&policy, 1e-8, DEFAULT_HISTORY_LIMIT).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, grid_solve, verification);
criterion_main!(benches);
