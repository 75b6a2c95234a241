//! One-thread pool against the global rayon pool on the data-parallel kernels.
//! Build with `--no-default-features` to bench the plain sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;

use clusterpolicy::graph::{generate_lfr, normalize_adjacency, svd_features, LfrParams, SvdOptions};
use clusterpolicy::nn::DenseMatrix;
use clusterpolicy::partition::partition;
use clusterpolicy::policy::{build_edge_states, EdgeHistory};
use clusterpolicy::trainer::{train_clustergcn, Init, TrainerConfig};

fn pools() -> Vec<(&'static str, Option<ThreadPool>)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("one_thread", Some(single)), ("global", None)]
}

fn run_in<R: Send>(pool: &Option<ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn kernels(c: &mut Criterion) {
    let lfr = LfrParams {
        n: 2000,
        seed: 3,
        ..LfrParams::default()
    };
    let g = generate_lfr(&lfr).unwrap();
    let feats = svd_features(&g, 16, SvdOptions::default()).unwrap();
    let g = g.with_features(feats).unwrap();
    let adj = normalize_adjacency(&g);
    let wide = DenseMatrix::from_fn(g.n(), 128, |r, c| ((r * 13 + c) % 17) as f64 / 17.0);
    let weights = DenseMatrix::from_fn(128, 128, |r, c| ((r + 3 * c) % 11) as f64 / 11.0 - 0.5);
    let history = EdgeHistory::new(g.num_edges(), 5, 3);
    let clusters = partition(&g, 8, 1).unwrap();
    let tcfg = TrainerConfig {
        iters: 2,
        ..TrainerConfig::default()
    };
    let labeled = vec![true; g.n()];

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("matmul_2000x128", name), &pool, |b, p| {
            b.iter(|| run_in(p, || wide.matmul(&weights).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("spmm", name), &pool, |b, p| {
            b.iter(|| run_in(p, || adj.spmm(&wide).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("edge_states", name), &pool, |b, p| {
            b.iter(|| run_in(p, || build_edge_states(&g, g.features(), g.features(), &history).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("clustergcn_2_epochs", name), &pool, |b, p| {
            b.iter(|| run_in(p, || train_clustergcn(&g, &clusters, &labeled, &tcfg, 0, Init::Fresh).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
