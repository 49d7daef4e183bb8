//! Sequential vs. rayon execution of repeated training runs.
//!
//! Run with `cargo bench -p mindiff`. The parallel group only exists when
//! the `parallel` feature is on (it is by default).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mindiff::data::{DataSplit, Dataset};
use mindiff::nn::Group;
use mindiff::penalties::{KernelSpec, PenaltyConfig};
use mindiff::training::{run_repeated, TrainConfig};
use mindiff::Execution;

/// Synthetic two-feature split with a planted group skew, big enough that a
/// training run does real work but small enough to iterate quickly.
fn bench_split(n: usize) -> DataSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut make = |rows: usize| {
        let mut x = Array2::zeros((rows, 2));
        let mut y = Array1::zeros(rows);
        let mut groups = Vec::with_capacity(rows);
        for i in 0..rows {
            let label = rng.random_bool(0.5);
            let group = if rng.random_bool(0.4) {
                Group::Group1
            } else {
                Group::Group0
            };
            let center = if label { 1.0 } else { -1.0 };
            let skew = if group == Group::Group1 { 0.4 } else { 0.0 };
            x[[i, 0]] = center + 0.3 * rng.random_range(-1.0..1.0) + skew;
            x[[i, 1]] = center + 0.3 * rng.random_range(-1.0..1.0);
            y[i] = f64::from(label);
            groups.push(group);
        }
        Dataset { x, y, groups }
    };
    let train = make(n);
    let test = make(n / 2);
    DataSplit { train, test }
}

fn config() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        batch_size: 64,
        hidden_units: 16,
        learning_rate: 0.01,
        penalty: PenaltyConfig::mmd(KernelSpec::gaussian(0.1).unwrap(), 1.0),
        ..TrainConfig::default()
    }
}

fn repeated_runs(c: &mut Criterion) {
    let data = bench_split(2000);
    let config = config();
    let mut group = c.benchmark_group("run_repeated");
    group.sample_size(10);

    for n_runs in [4, 8] {
        group.bench_with_input(
            BenchmarkId::new("sequential", n_runs),
            &n_runs,
            |b, &n| {
                b.iter(|| run_repeated(&data, &config, n, Execution::Sequential).unwrap())
            },
        );
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", n_runs), &n_runs, |b, &n| {
            b.iter(|| run_repeated(&data, &config, n, Execution::Parallel).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, repeated_runs);
criterion_main!(benches);
