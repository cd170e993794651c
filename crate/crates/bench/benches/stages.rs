use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use icmen_core::calibration::{fit_calibration, temporal_degrees, select_reference_nodes};
use icmen_core::combiner::{combine_generalized, AlphaVector};
use icmen_core::evaluation::compute_auc;
use icmen_core::graph::{NodeId, Snapshot};
use icmen_core::skipgram::{build_training_pairs, build_unigram_table, train_sgns, TrainConfig, TrainMode};
use icmen_core::synth::{temporal_sbm, SbmConfig};
use icmen_core::walks::{generate_static_walks, generate_temporal_walks, WalkConfig};
use icmen_core::EmbeddingMatrix;

fn snapshot(nodes: usize, events: usize, seed: u64) -> Snapshot {
    let g = temporal_sbm(&SbmConfig { nodes, events, seed, ..Default::default() });
    Snapshot::from_edges(0, g.edges.edges().to_vec(), false)
}

fn walk_cfg() -> WalkConfig {
    WalkConfig { walks_per_node: 10, walk_length: 40, min_length: 5, ..Default::default() }
}

fn walks(c: &mut Criterion) {
    let snap = snapshot(200, 5000, 1);
    let cfg = walk_cfg();
    c.bench_function("static_walks_200", |b| b.iter(|| generate_static_walks(black_box(&snap), &cfg).unwrap()));
    c.bench_function("temporal_walks_200", |b| b.iter(|| generate_temporal_walks(black_box(&snap), &cfg).unwrap()));
}

fn sgns(c: &mut Criterion) {
    let snap = snapshot(200, 5000, 2);
    let corpus = generate_static_walks(&snap, &walk_cfg()).unwrap();
    let train = TrainConfig { dim: 32, window: 5, ..Default::default() };
    let pairs = build_training_pairs(&corpus, train.window);
    let table = build_unigram_table(&corpus, &[], 10, 0.75).unwrap();
    let init = EmbeddingMatrix::random(train.dim, snap.nodes(), 3);
    let mut group = c.benchmark_group("sgns");
    group.sample_size(10);
    group.bench_function("epoch_200_nodes_d32", |b| {
        b.iter(|| train_sgns(&pairs, init.clone(), &table, &train, TrainMode::Deterministic).unwrap())
    });
    group.finish();
}

fn calibration(c: &mut Criterion) {
    let prev = snapshot(500, 8000, 4);
    let curr = snapshot(500, 8000, 5);
    let refs = select_reference_nodes(&temporal_degrees(&prev), &temporal_degrees(&curr), 200).unwrap();
    let nodes: Vec<NodeId> = (0..500).map(NodeId).collect();
    let source = EmbeddingMatrix::random(64, &nodes, 6);
    let target = EmbeddingMatrix::random(64, &nodes, 7);
    c.bench_function("ridge_fit_d64_200_refs", |b| {
        b.iter(|| fit_calibration(&source, &target, black_box(&refs.nodes), 1e-3, true).unwrap())
    });
}

fn combine(c: &mut Criterion) {
    let mut group = c.benchmark_group("combine_generalized");
    for k in [2usize, 3, 5] {
        let seq: Vec<EmbeddingMatrix> = (0..k)
            .map(|i| {
                let nodes: Vec<NodeId> = (0..2000).map(NodeId).collect();
                EmbeddingMatrix::random(128, &nodes, i as u64)
            })
            .collect();
        let alpha = AlphaVector::uniform(k);
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| combine_generalized(black_box(&seq), &alpha).unwrap())
        });
    }
    group.finish();
}

fn auc(c: &mut Criterion) {
    let scores: Vec<f64> = (0..20_000).map(|i| ((i * 7919) % 10_007) as f64).collect();
    let labels: Vec<bool> = (0..20_000).map(|i| i % 3 == 0).collect();
    c.bench_function("auc_20k", |b| b.iter(|| compute_auc(black_box(&scores), &labels).unwrap()));
}

criterion_group!(benches, walks, sgns, calibration, combine, auc);
criterion_main!(benches);
