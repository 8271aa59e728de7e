use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssci_core::plant::{run_episode, GainAction, PlantScenario};
use ssci_core::policy::{
    forward, grad_weighted_logprob, PolicyConfig, PolicyParameters, WeightedSample,
};
use ssci_core::sigproc::{bandpass, BandpassSpec, Observation, Pipeline, SignalTrace};
use ssci_core::trainer::{train, SurrogateEnv, TrainConfig};

fn noisy_trace(n: usize) -> SignalTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / 5000.0;
            1.0 + 0.02 * (2.0 * std::f64::consts::PI * 48.0 * t).sin() + 1e-3 * rng.random::<f64>()
        })
        .collect();
    SignalTrace::new(samples, 5000.0, 0.0).unwrap()
}

fn signal(c: &mut Criterion) {
    let raw = noisy_trace(50_000);
    let spec = BandpassSpec::default();
    c.bench_function("bandpass_50k", |b| b.iter(|| bandpass(black_box(&raw), &spec).unwrap()));
    let pipeline = Pipeline::default();
    c.bench_function("pipeline_50k", |b| b.iter(|| pipeline.process(black_box(&raw)).unwrap()));
}

fn plant(c: &mut Criterion) {
    let s = PlantScenario::default();
    c.bench_function("run_episode_10s", |b| {
        b.iter(|| run_episode(&s, GainAction::new(black_box(2.0)), 7).unwrap())
    });
}

fn policy(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = PolicyParameters::init(PolicyConfig::default(), &mut rng);
    let obs: Vec<Observation> = (0..8)
        .map(|_| Observation {
            values: (0..30).map(|_| rng.random_range(-0.05..0.05)).collect(),
            window_start: 4.6,
        })
        .collect();
    c.bench_function("policy_forward", |b| b.iter(|| forward(&params, black_box(&obs[0])).unwrap()));
    let batch: Vec<WeightedSample<'_>> = obs
        .iter()
        .enumerate()
        .map(|(i, o)| WeightedSample { obs: o, action: 1.0 + 0.1 * i as f64, weight: -1.0 })
        .collect();
    c.bench_function("policy_grad_batch8", |b| {
        b.iter(|| grad_weighted_logprob(&params, black_box(&batch)).unwrap())
    });
}

fn epoch(c: &mut Criterion) {
    let s = PlantScenario::default();
    let cfg = TrainConfig { n_epoch: 1, ..TrainConfig::default() };
    let mut group = c.benchmark_group("trainer");
    group.sample_size(10);
    group.bench_function("first_epoch_cold_cache", |b| {
        b.iter(|| train(SurrogateEnv, &s, &cfg, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, signal, plant, policy, epoch);
criterion_main!(benches);
