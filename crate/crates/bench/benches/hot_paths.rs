use careerpath::agents::GreedyHighestExpectedReward;
use careerpath::approx::{Activation, Loss, Mlp, OutputActivation};
use careerpath::eval::permutation_test;
use careerpath::forest::ForestClassifier;
use careerpath::rng::rng_from_seed;
use careerpath::{Policy, StateRepresentation};
use careerpath_bench::{forest_params, table_env, training_rows};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use std::hint::black_box;

fn forest(c: &mut Criterion) {
    let set = training_rows(1_000, StateRepresentation::FullHistory);
    let mut group = c.benchmark_group("forest");
    group.sample_size(10);
    group.bench_function("fit 20 trees", |b| {
        b.iter(|| ForestClassifier::fit(&set.rows, &set.labels, &forest_params(20)).unwrap())
    });
    let model = ForestClassifier::fit(&set.rows, &set.labels, &forest_params(100)).unwrap();
    group.bench_function("predict 100 trees", |b| {
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % set.rows.len();
            model.predict_unchecked(black_box(&set.rows[i]))
        })
    });
    group.finish();
}

fn env_step(c: &mut Criterion) {
    let env = table_env(142);
    let policy = GreedyHighestExpectedReward::new();
    c.bench_function("env step, greedy policy, 142 jobs", |b| {
        let mut rng = rng_from_seed(1);
        let mut state = env.reset(env.job(0)).unwrap();
        b.iter(|| {
            if state.t >= env.horizon() {
                state = env.reset(env.job(0)).unwrap();
            }
            let a = policy.act(&env, &state, &mut rng);
            env.step_mut(&mut state, a, &mut rng).unwrap()
        })
    });
}

fn permutation(c: &mut Criterion) {
    let mut group = c.benchmark_group("permutation test");
    group.sample_size(10);
    for n in [100, 1_000] {
        let mut rng = rng_from_seed(2);
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        group.bench_with_input(BenchmarkId::new("10k resamples", n), &n, |bench, _| {
            bench.iter(|| {
                let mut rng = rng_from_seed(3);
                permutation_test(&a, &b, 10_000, &mut rng)
            })
        });
    }
    group.finish();
}

fn mlp(c: &mut Criterion) {
    let net = Mlp::new(&[173, 64, 64, 142], Activation::Tanh, OutputActivation::Linear, 4).unwrap();
    let mut rng = rng_from_seed(4);
    let x: Vec<f64> = (0..173).map(|_| rng.random::<f64>()).collect();
    c.bench_function("mlp forward 173-64-64-142", |b| b.iter(|| net.forward(black_box(&x)).unwrap()));
    let loss = Loss::SelectedSquaredError {
        index: 7,
        target: 0.3,
        weight: 1.0,
    };
    c.bench_function("mlp gradient 173-64-64-142", |b| b.iter(|| net.grad(black_box(&x), loss).unwrap()));
}

criterion_group!(benches, forest, env_step, permutation, mlp);
criterion_main!(benches);
