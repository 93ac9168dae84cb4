//! The same workloads on a single worker and on one worker per core.

use causaltune::bench::{
    generate_observational, run_comparison, ComparisonConfig, Method, SyntheticEnv,
    TransferScenario,
};
use causaltune::causal::{learn_causal_model, LearnConfig, StructuralConstraints};
use causaltune::effects::{AceTable, EffectConfig};
use causaltune::par;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, usize); 2] = [("sequential", 1), ("parallel", 0)];

fn learning(c: &mut Criterion) {
    let env = SyntheticEnv::default();
    let ds = generate_observational(&env, 2000, 0).unwrap();
    let constraints = StructuralConstraints::from_roles(&ds);
    let model = learn_causal_model(&ds, &constraints, &LearnConfig::default()).unwrap();
    let targets = ["energy", "pose_error", "obstacle_distance"].map(String::from);
    let mut g = c.benchmark_group("causal");
    for (mode, threads) in MODES {
        g.bench_function(BenchmarkId::new("learn_2000_rows", mode), |b| {
            b.iter(|| {
                par::with_threads(threads, || {
                    learn_causal_model(&ds, &constraints, &LearnConfig::default())
                })
            })
        });
        g.bench_function(BenchmarkId::new("ace_table", mode), |b| {
            b.iter(|| {
                par::with_threads(threads, || {
                    AceTable::compute(
                        &ds,
                        &model.admg,
                        env.space(),
                        &targets,
                        &EffectConfig::default(),
                    )
                })
            })
        });
    }
    g.finish();
}

fn optimization(c: &mut Criterion) {
    let scenario = TransferScenario::new(1, 0).unwrap();
    let cfg = ComparisonConfig {
        budget: 25,
        n_init: 10,
        n_obs: 500,
        ..ComparisonConfig::default()
    };
    let mut g = c.benchmark_group("comparison");
    g.sample_size(10);
    for (mode, threads) in MODES {
        g.bench_function(BenchmarkId::new("three_methods_two_seeds", mode), |b| {
            b.iter(|| {
                par::with_threads(threads, || {
                    run_comparison(
                        &scenario,
                        &[Method::Cure, Method::Mobo, Method::Ridge],
                        &[0, 1],
                        &cfg,
                    )
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, learning, optimization);
criterion_main!(benches);
