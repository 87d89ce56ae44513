use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use hyre_core::active::bald_scores;
use hyre_core::analysis::{function_pca, PredictionMatrix};
use hyre_core::ensemble::{build_ensemble, sigmoid, Architecture, EnsembleConfig, LossKind, TrainConfig};
use hyre_core::hyre::BeliefState;
use hyre_core::tasks::{gen_hypercube_task_sized, uniform_box};
use hyre_core::Matrix;
use hyre_core::rng;

fn model(arch: Architecture) -> hyre_core::ensemble::EnsembleModel {
    let mut c = EnsembleConfig::new(arch, 100, 5);
    c.hidden = vec![128];
    build_ensemble(&c).unwrap()
}

fn forward(c: &mut Criterion) {
    let x = uniform_box(256, 5, -1.0, 1.0, &mut rng::seeded(0));
    let mut g = c.benchmark_group("forward_100_heads_256_inputs");
    for arch in [Architecture::Vanilla, Architecture::SharedBase, Architecture::Epinet] {
        let m = model(arch);
        g.bench_function(format!("{arch:?}"), |b| b.iter(|| m.forward(&x).unwrap()));
    }
    g.finish();
}

fn train_step(c: &mut Criterion) {
    let task = gen_hypercube_task_sized(512, 16, 0).unwrap();
    let mut tc = TrainConfig::new(LossKind::BinaryCrossEntropy, 1);
    tc.batch_size = 64;
    let m = model(Architecture::SharedBase);
    c.bench_function("train_step_shared_base", |b| {
        b.iter_batched(|| m.clone(), |mut m| m.train(&task.train, &tc).unwrap(), BatchSize::LargeInput)
    });
}

fn reweight(c: &mut Criterion) {
    let mut belief = BeliefState::uniform(100).unwrap();
    belief.accumulate(&(0..100).map(|k| (k % 7) as f64).collect::<Vec<_>>()).unwrap();
    c.bench_function("weights_100_heads", |b| b.iter(|| belief.weights()));
}

fn bald(c: &mut Criterion) {
    let logits = model(Architecture::SharedBase)
        .forward(&uniform_box(1000, 5, -1.0, 1.0, &mut rng::seeded(1)))
        .unwrap();
    let probs = logits.map(sigmoid);
    let w = vec![0.01; 100];
    c.bench_function("bald_100_heads_1000_inputs", |b| b.iter(|| bald_scores(&probs, &w).unwrap()));
}

fn pca(c: &mut Criterion) {
    let out: Matrix = model(Architecture::SharedBase)
        .forward(&uniform_box(200, 5, -1.0, 1.0, &mut rng::seeded(2)))
        .unwrap();
    let preds = PredictionMatrix::new(out).unwrap();
    c.bench_function("pca_100_heads_200_inputs", |b| b.iter(|| function_pca(&preds, 3).unwrap()));
}

criterion_group!(benches, forward, train_step, reweight, bald, pca);
criterion_main!(benches);
