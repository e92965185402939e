use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;
use tip_core::{
    auprc, auroc, evaluate, split_train_test, synth_graph, train, train::loss_on_tape, DrugPair,
    GraphContext, GraphShape, ModelConfig, SplitGraph, SynthConfig, Tape, TipModel, TrainConfig,
    Triple, Variant,
};

fn split() -> SplitGraph {
    let synth = synth_graph(&SynthConfig::default(), 0).unwrap();
    split_train_test(&synth.graph, 0.8, 1, 2).unwrap()
}

fn triples(pairs: &[Vec<DrugPair>]) -> Vec<Triple> {
    pairs
        .iter()
        .enumerate()
        .flat_map(|(r, ps)| ps.iter().map(move |&(a, b)| Triple::new(a, r, b)))
        .collect()
}

fn step(c: &mut Criterion) {
    let split = split();
    let ctx = GraphContext::new(&split.train).unwrap();
    let pos = triples(split.train.dd_edges_all());
    // Test negatives stand in for a training sample of the same size class.
    let neg = triples(&split.test_negatives);
    let mut group = c.benchmark_group("forward_backward");
    for variant in [
        Variant::TipCat,
        Variant::TipSum,
        Variant::DdmNn,
        Variant::PpmGgmNn,
    ] {
        let model =
            TipModel::new(ModelConfig::for_variant(variant), GraphShape::from(&ctx), 0).unwrap();
        group.bench_function(variant.name(), |b| {
            b.iter_batched(
                || model.clone(),
                |mut m| {
                    let mut tape = Tape::new();
                    let loss = loss_on_tape(&m, &ctx, &mut tape, &pos, &neg).unwrap();
                    tape.backward(loss, m.params_mut()).unwrap();
                    black_box(m)
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let split = split();
    let mut config = TrainConfig::new(ModelConfig::for_variant(Variant::TipSum));
    config.epochs = 20;
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("tip-sum/20", |b| {
        b.iter(|| train(black_box(&split), &config).unwrap())
    });
    let outcome = train(&split, &config).unwrap();
    group.bench_function("evaluate", |b| {
        b.iter(|| evaluate(&outcome.model, black_box(&split)).unwrap())
    });
    group.finish();
}

fn ranking(c: &mut Criterion) {
    // Deterministic scores on a coarse grid, so ties are common.
    let score = |i: usize| ((i * 7919) % 1000) as f64 / 1000.0;
    let pos: Vec<f64> = (0..5_000).map(|i| (score(i) + 0.2).min(1.0)).collect();
    let neg: Vec<f64> = (5_000..10_000).map(score).collect();
    let mut group = c.benchmark_group("metrics");
    group.bench_function("auroc/10k", |b| {
        b.iter(|| auroc(black_box(&pos), &neg).unwrap())
    });
    group.bench_function("auprc/10k", |b| {
        b.iter(|| auprc(black_box(&pos), &neg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, step, training, ranking);
criterion_main!(benches);
