//! Sequential vs. data-parallel execution of the hot loops.
//!
//! Build with `--no-default-features` to see both arms fall back to the
//! sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

use milroot::learners::{forest_train, smo_train, ForestParams, Kernel, SvmParams};
use milroot::pipeline::{preprocess, PreprocessParams, ProcessedImage};
use milroot::synth::{generate_set, SynthParams};
use milroot::{seed, Parallelism};

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn data(n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = seed::rng(5);
    let y: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let x = y
        .iter()
        .map(|&l| {
            (0..dim)
                .map(|d| rng.random_range(0.0..1.0) + if l && d < 3 { 0.4 } else { 0.0 })
                .collect()
        })
        .collect();
    (x, y)
}

fn images() -> Vec<milroot::synth::SynthImage> {
    let p = SynthParams {
        height: 96,
        width: 96,
        root_length: [50.0, 80.0],
        ..SynthParams::default()
    };
    generate_set(&p, 4, 4, 1).unwrap()
}

fn batch(mode: Parallelism, set: &[milroot::synth::SynthImage]) -> Vec<ProcessedImage> {
    let jobs: Vec<(usize, &milroot::synth::SynthImage)> = set.iter().enumerate().collect();
    mode.map(&jobs, |&(k, s)| {
        preprocess(format!("i{k}"), k, &s.image, s.label, None, &PreprocessParams::default()).unwrap()
    })
}

fn forest(c: &mut Criterion) {
    let (x, y) = data(2000, 18);
    let mut g = c.benchmark_group("forest_train");
    g.sample_size(10);
    for (name, mode) in MODES {
        let params = ForestParams {
            parallelism: mode,
            ..ForestParams::new(100, 4)
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| forest_train(&x, &y, &params, 1).unwrap())
        });
    }
    g.finish();
}

fn svm(c: &mut Criterion) {
    let (x, y) = data(600, 18);
    let mut g = c.benchmark_group("svm_train");
    g.sample_size(10);
    for (name, mode) in MODES {
        let params = SvmParams {
            kernel: Kernel::Rbf { gamma: 1.0 },
            parallelism: mode,
            ..SvmParams::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| smo_train(&x, &y, &params, 1).unwrap())
        });
    }
    g.finish();
}

fn preprocess_batch(c: &mut Criterion) {
    let set = images();
    let mut g = c.benchmark_group("preprocess_batch");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| batch(mode, &set)));
    }
    g.finish();
}

fn predict(c: &mut Criterion) {
    let (x, y) = data(1000, 18);
    let model = forest_train(&x, &y, &ForestParams::new(100, 4), 1).unwrap();
    let (queries, _) = data(20_000, 18);
    let mut g = c.benchmark_group("forest_predict");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mode.map(&queries, |q| model.predict(q).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, forest, svm, preprocess_batch, predict);
criterion_main!(benches);
