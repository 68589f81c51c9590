use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use had_core::model::backward;
use had_core::{auroc, forward, generate_synthetic, Label, ModelConfig, SyntheticConfig};
use ndarray::Array2;

fn dataset(scale: usize) -> had_core::LabeledHypergraphDataset {
    generate_synthetic(&SyntheticConfig {
        nodes_per_cluster: 20 * scale,
        num_inlier_edges: 60 * scale,
        num_anomaly_edges: 20 * scale,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

fn aggregation(c: &mut Criterion) {
    let mut group = c.benchmark_group("aggregation");
    for scale in [1, 10, 50] {
        let h = dataset(scale).hypergraph;
        let z = Array2::from_shape_fn((h.num_nodes(), 64), |(i, j)| ((i + j) as f64).sin());
        group.bench_with_input(
            BenchmarkId::new("node_to_edge_to_node", h.num_edges()),
            &h,
            |b, h| {
                b.iter(|| {
                    let e = h.edge_sum_aggregate(z.view()).unwrap();
                    black_box(h.node_sum_aggregate(e.view()).unwrap())
                })
            },
        );
    }
    group.finish();
}

fn training_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_backward");
    for scale in [1, 10] {
        let h = dataset(scale).hypergraph;
        let cfg = ModelConfig::default();
        let mut params = cfg.init_parameters(h.feature_dim(), 0).unwrap();
        group.bench_function(BenchmarkId::from_parameter(h.num_edges()), |b| {
            b.iter(|| {
                let trace = forward(&h, &params, &cfg, None).unwrap();
                params.zero_grads();
                backward(&h, &mut params, &cfg, &trace).unwrap();
                black_box(trace.loss())
            })
        });
    }
    group.finish();
}

fn auroc_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("auroc");
    for n in [1_000usize, 100_000] {
        let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1013) as f64).collect();
        let labels: Vec<Label> = (0..n)
            .map(|i| {
                if i % 5 == 0 {
                    Label::Anomaly
                } else {
                    Label::Inlier
                }
            })
            .collect();
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| black_box(auroc(&scores, &labels).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, aggregation, training_step, auroc_bench);
criterion_main!(benches);
