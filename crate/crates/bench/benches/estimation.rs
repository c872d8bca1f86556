//! Benchmarks for the hot paths of the estimation pipeline.
//!
//! Run: `cargo bench -p rpmixl-bench`

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use rpmixl::{
    choice_probabilities, estimate, generate_draw_block, AlternativeSet, CovariateGenConfig,
    Dataset, DrawBlock, DrawConfig, ModelContext, ModelSpec, OptimizerConfig, ParameterVector,
    UtilityEntry,
};

fn mixed_spec() -> ModelSpec {
    let alts = AlternativeSet::new(vec!["a".into(), "b".into(), "c".into()], 0).unwrap();
    ModelSpec::new(
        alts,
        vec![
            UtilityEntry::fixed("b", "constant"),
            UtilityEntry::fixed("c", "constant"),
            UtilityEntry::fixed("b", "x1"),
            UtilityEntry::random("c", "x2").with_mean_shifters(&["z"]),
            UtilityEntry::random("b", "x3"),
        ],
        "outcome",
    )
    .unwrap()
}

fn synthetic_inputs(n_obs: usize, n_draws: usize) -> (ModelSpec, Dataset, DrawBlock) {
    let spec = mixed_spec();
    let layout = spec.parameter_layout();
    let mut theta = vec![0.0; layout.len()];
    theta[layout.position("b:constant").unwrap()] = 0.4;
    theta[layout.position("c:constant").unwrap()] = -0.3;
    theta[layout.position("b:x1").unwrap()] = 0.7;
    theta[layout.position("c:x2").unwrap()] = 0.3;
    theta[layout.position("c:x2:sd").unwrap()] = 1.0;
    theta[layout.position("c:x2:mean(z)").unwrap()] = 0.8;
    theta[layout.position("b:x3").unwrap()] = -0.4;
    theta[layout.position("b:x3:sd").unwrap()] = 0.6;
    let theta = ParameterVector::new(theta, &layout).unwrap();
    let gen = CovariateGenConfig {
        columns: vec![
            ("x1".into(), 0.5),
            ("x2".into(), 0.5),
            ("z".into(), 0.4),
            ("x3".into(), 0.5),
        ],
        n_observations: n_obs,
        seed: 5,
    };
    let dataset = rpmixl::simulate_dataset(&spec, &theta, &gen).unwrap();
    let block = generate_draw_block(n_obs, 2, &DrawConfig::with_draws(n_draws)).unwrap();
    (spec, dataset, block)
}

fn bench_halton_block(c: &mut Criterion) {
    let mut group = c.benchmark_group("draws/generate_block");
    for n_draws in [100usize, 500, 1000] {
        group.throughput(Throughput::Elements((500 * n_draws * 2) as u64));
        group.bench_with_input(
            BenchmarkId::from_parameter(n_draws),
            &n_draws,
            |b, &n_draws| {
                let config = DrawConfig::with_draws(n_draws);
                b.iter(|| generate_draw_block(500, 2, &config).unwrap());
            },
        );
    }
    group.finish();
}

fn bench_softmax(c: &mut Criterion) {
    let utilities = [0.4, -0.7, 1.3];
    c.bench_function("likelihood/choice_probabilities", |b| {
        b.iter(|| choice_probabilities(std::hint::black_box(&utilities)));
    });
}

fn bench_simulated_loglik(c: &mut Criterion) {
    let mut group = c.benchmark_group("likelihood/simulated_loglik");
    for (n_obs, n_draws) in [(500usize, 100usize), (1000, 500)] {
        let (spec, dataset, block) = synthetic_inputs(n_obs, n_draws);
        let ctx = ModelContext::new(&spec, &dataset).unwrap();
        let theta = ParameterVector::zeros(ctx.layout());
        group.throughput(Throughput::Elements((n_obs * n_draws) as u64));
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{n_obs}x{n_draws}")),
            &(),
            |b, _| {
                b.iter(|| ctx.simulated_loglik(&theta, &block).unwrap());
            },
        );
    }
    group.finish();
}

fn bench_gradient(c: &mut Criterion) {
    let (spec, dataset, block) = synthetic_inputs(500, 100);
    let ctx = ModelContext::new(&spec, &dataset).unwrap();
    let theta = ParameterVector::zeros(ctx.layout());
    c.bench_function("likelihood/loglik_with_scores_500x100", |b| {
        b.iter(|| ctx.simulated_loglik_with_scores(&theta, &block).unwrap());
    });
}

fn bench_full_estimate(c: &mut Criterion) {
    let (spec, dataset, _) = synthetic_inputs(300, 50);
    let mut group = c.benchmark_group("estimate/full_pipeline");
    group.sample_size(10);
    group.bench_function("300x50", |b| {
        b.iter(|| {
            estimate(
                &dataset,
                &spec,
                &DrawConfig::with_draws(50),
                &OptimizerConfig::default(),
            )
            .unwrap()
        });
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_halton_block,
    bench_softmax,
    bench_simulated_loglik,
    bench_gradient,
    bench_full_estimate
);
criterion_main!(benches);
