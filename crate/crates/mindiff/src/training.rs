//! Minibatch training of the classifier and repeated-run aggregation.

use ndarray::{Array1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::exec::{par_map, Execution};
use crate::metrics::{evaluate, threshold_for_recall, EvalReport};
use crate::nn::{
    backward, bce_loss, forward, forward_trace, optimizer_step, Batch, ModelParams, OptimizerState,
};
use crate::penalties::{mindiff_penalty, PenaltyConfig};

/// How the decision threshold is chosen after training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Use this threshold as-is.
    Fixed(f64),
    /// Pick the threshold reaching the given recall on the training split,
    /// then apply it to both splits.
    ForRecall(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Fixed(0.5)
    }
}

impl ThresholdPolicy {
    fn validate(&self) -> Result<()> {
        match self {
            ThresholdPolicy::Fixed(t) if !t.is_finite() => Err(Error::Config(format!(
                "fixed threshold must be finite, got {t}"
            ))),
            ThresholdPolicy::ForRecall(r) if !(r.is_finite() && *r > 0.0 && *r <= 1.0) => Err(
                Error::Config(format!("target recall must lie in (0, 1], got {r}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_units: usize,
    pub penalty: PenaltyConfig,
    pub threshold: ThresholdPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 17,
            epochs: 15,
            batch_size: 256,
            learning_rate: 1e-3,
            hidden_units: 64,
            penalty: PenaltyConfig::off(),
            threshold: ThresholdPolicy::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.hidden_units == 0 {
            return Err(Error::Config("hidden units must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        self.penalty.validate()?;
        self.threshold.validate()
    }
}

/// Mean losses for one epoch. `total` is the float sum of the two parts, so
/// the bookkeeping identity `total = primary + penalty` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    /// Mean cross-entropy over the epoch's batches.
    pub primary: f64,
    /// Mean weighted penalty over the epoch's batches.
    pub penalty: f64,
    pub total: f64,
}

/// Output of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub params: ModelParams,
    /// Decision threshold actually used (resolved from the policy).
    pub threshold: f64,
    pub train_report: EvalReport,
    pub test_report: EvalReport,
    pub epoch_losses: Vec<EpochLoss>,
    /// Batches whose penalty was skipped for lack of per-group negatives.
    pub skipped_batches: usize,
}

/// Train one model. Fully deterministic given the config: initialization and
/// shuffling both derive from `config.seed`.
pub fn train(data: &DataSplit, config: &TrainConfig) -> Result<TrainResult> {
    config.validate()?;
    data.train.validate()?;
    data.test.validate()?;
    if data.train.n_features() != data.test.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "train has {} features but test has {}",
            data.train.n_features(),
            data.test.n_features()
        )));
    }

    let n = data.train.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::glorot(data.train.n_features(), config.hidden_units, &mut rng)?;
    let mut opt = OptimizerState::new(&params, config.learning_rate)?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut skipped_batches = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut primary_sum = 0.0;
        let mut penalty_sum = 0.0;
        let mut batches = 0usize;

        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let bx = data.train.x.select(Axis(0), chunk);
            let by = Array1::from_iter(chunk.iter().map(|&i| data.train.y[i]));
            let bg = chunk.iter().map(|&i| data.train.groups[i]).collect();
            let batch = Batch::new(bx, by, bg)?;

            let trace = forward_trace(&params, batch.x())?;
            let (primary, bce_grad) = bce_loss(&trace.probs, batch.y())?;
            let term = mindiff_penalty(&trace.probs, &batch, &config.penalty)?;
            if term.skipped {
                skipped_batches += 1;
            }

            let loss = primary + term.value;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: bi,
                    loss,
                });
            }

            let upstream = bce_grad + term.grad;
            let grads = backward(&params, batch.x(), &trace, &upstream)?;
            optimizer_step(&mut params, &grads, &mut opt)?;

            primary_sum += primary;
            penalty_sum += term.value;
            batches += 1;
        }

        let primary = primary_sum / batches as f64;
        let penalty = penalty_sum / batches as f64;
        epoch_losses.push(EpochLoss {
            primary,
            penalty,
            total: primary + penalty,
        });
    }

    let train_probs = forward(&params, &data.train.x)?;
    let threshold = match config.threshold {
        ThresholdPolicy::Fixed(t) => t,
        ThresholdPolicy::ForRecall(r) => threshold_for_recall(&train_probs, &data.train.y, r)?,
    };
    let train_report = evaluate(&train_probs, &data.train.y, &data.train.groups, threshold)?;
    let test_probs = forward(&params, &data.test.x)?;
    let test_report = evaluate(&test_probs, &data.test.y, &data.test.groups, threshold)?;

    Ok(TrainResult {
        params,
        threshold,
        train_report,
        test_report,
        epoch_losses,
        skipped_batches,
    })
}

/// Mean and standard error of one metric across runs. `defined_runs` counts
/// the runs where the metric existed (per-group rates can be undefined).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation over sqrt(n); 0 for a single run.
    pub stderr: f64,
    pub defined_runs: usize,
}

pub(crate) fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len();
    if n == 0 {
        return MetricSummary {
            mean: f64::NAN,
            stderr: f64::NAN,
            defined_runs: 0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n == 1 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    MetricSummary {
        mean,
        stderr,
        defined_runs: n,
    }
}

/// Per-run record kept by [`run_repeated`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub seed: u64,
    pub train: EvalReport,
    pub test: EvalReport,
    pub skipped_batches: usize,
}

/// A run that returned an error instead of a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_index: usize,
    pub seed: u64,
    pub message: String,
}

/// Aggregate of `n_runs` independent runs differing only in seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedRuns {
    pub runs: Vec<RunStats>,
    pub failures: Vec<RunFailure>,
    /// True when only one run was requested, so stderr columns are zero by
    /// construction rather than estimated.
    pub single_run: bool,
    pub test_accuracy: MetricSummary,
    pub test_fpr_gap: MetricSummary,
    pub test_fpr_group0: MetricSummary,
    pub test_fpr_group1: MetricSummary,
    pub train_accuracy: MetricSummary,
}

impl RepeatedRuns {
    pub(crate) fn from_outcomes(outcomes: Vec<(u64, Result<TrainResult>)>, n_runs: usize) -> RepeatedRuns {
        let mut runs = Vec::new();
        let mut failures = Vec::new();
        for (i, (seed, outcome)) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(r) => runs.push(RunStats {
                    seed,
                    train: r.train_report,
                    test: r.test_report,
                    skipped_batches: r.skipped_batches,
                }),
                Err(e) => failures.push(RunFailure {
                    run_index: i,
                    seed,
                    message: e.to_string(),
                }),
            }
        }
        let collect = |f: &dyn Fn(&RunStats) -> Option<f64>| -> Vec<f64> {
            runs.iter().filter_map(f).collect()
        };
        RepeatedRuns {
            single_run: n_runs == 1,
            test_accuracy: summarize(&collect(&|r| Some(r.test.accuracy))),
            test_fpr_gap: summarize(&collect(&|r| r.test.fpr_gap)),
            test_fpr_group0: summarize(&collect(&|r| r.test.fpr_group0)),
            test_fpr_group1: summarize(&collect(&|r| r.test.fpr_group1)),
            train_accuracy: summarize(&collect(&|r| Some(r.train.accuracy))),
            runs,
            failures,
        }
    }
}

/// Train `n_runs` models with seeds `config.seed + i` and aggregate their
/// metrics. Failures are recorded per run; successful runs still aggregate.
pub fn run_repeated(
    data: &DataSplit,
    config: &TrainConfig,
    n_runs: usize,
    exec: Execution,
) -> Result<RepeatedRuns> {
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    config.validate()?;

    let tasks: Vec<TrainConfig> = (0..n_runs)
        .map(|i| TrainConfig {
            seed: config.seed + i as u64,
            ..config.clone()
        })
        .collect();
    let outcomes = par_map(exec, tasks, |cfg| (cfg.seed, train(data, &cfg)));
    Ok(RepeatedRuns::from_outcomes(outcomes, n_runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Group;
    use crate::penalties::KernelSpec;
    use crate::test_support::toy_split;
    use ndarray::Array2;

    fn quick_config() -> TrainConfig {
        TrainConfig {
            epochs: 5,
            batch_size: 32,
            hidden_units: 8,
            learning_rate: 0.01,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_separable_toy_problem() {
        let data = toy_split(200, 1);
        let config = TrainConfig {
            epochs: 80, // 7 batches per epoch -> 560 optimizer steps
            ..quick_config()
        };
        let result = train(&data, &config).unwrap();
        assert!(
            result.train_report.accuracy >= 0.99,
            "train accuracy {}",
            result.train_report.accuracy
        );
    }

    #[test]
    fn training_is_bit_deterministic() {
        let data = toy_split(120, 2);
        let config = quick_config();
        let a = serde_json::to_string(&train(&data, &config).unwrap()).unwrap();
        let b = serde_json::to_string(&train(&data, &config).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn penalty_kind_is_irrelevant_at_zero_weight() {
        let data = toy_split(120, 3);
        let base = quick_config();
        let corr = TrainConfig {
            penalty: PenaltyConfig {
                weight: 0.0,
                ..PenaltyConfig::correlation(0.0)
            },
            ..base.clone()
        };
        let mmd = TrainConfig {
            penalty: PenaltyConfig {
                weight: 0.0,
                ..PenaltyConfig::mmd(KernelSpec::gaussian(0.1).unwrap(), 0.0)
            },
            ..base.clone()
        };
        let none = train(&data, &base).unwrap();
        let a = train(&data, &corr).unwrap();
        let b = train(&data, &mmd).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.params, none.params);
    }

    #[test]
    fn epoch_loss_bookkeeping_is_exact() {
        let data = toy_split(150, 4);
        let config = TrainConfig {
            penalty: PenaltyConfig::correlation(0.5),
            ..quick_config()
        };
        let result = train(&data, &config).unwrap();
        assert_eq!(result.epoch_losses.len(), config.epochs);
        for e in &result.epoch_losses {
            assert!((e.total - (e.primary + e.penalty)).abs() <= 1e-12);
            assert!(e.primary.is_finite() && e.penalty >= 0.0);
        }
    }

    #[test]
    fn penalty_pressure_shows_up_in_loss_trace() {
        let data = toy_split(200, 5);
        let plain = train(&data, &quick_config()).unwrap();
        let penalized = train(
            &data,
            &TrainConfig {
                penalty: PenaltyConfig::correlation(2.0),
                ..quick_config()
            },
        )
        .unwrap();
        let last = penalized.epoch_losses.last().unwrap();
        assert!(last.penalty > 0.0, "penalty never engaged");
        assert_eq!(plain.epoch_losses.last().unwrap().penalty, 0.0);
    }

    #[test]
    fn threshold_policy_for_recall_is_applied_to_both_splits() {
        let data = toy_split(200, 6);
        let config = TrainConfig {
            threshold: ThresholdPolicy::ForRecall(0.95),
            ..quick_config()
        };
        let result = train(&data, &config).unwrap();
        assert_eq!(result.train_report.threshold, result.threshold);
        assert_eq!(result.test_report.threshold, result.threshold);
        // Recall on train must reach the target.
        let tp = result.train_report.counts.cells.iter().map(|g| g[1][1]).sum::<u64>();
        let pos = tp + result.train_report.counts.cells.iter().map(|g| g[1][0]).sum::<u64>();
        assert!(tp as f64 / pos as f64 >= 0.95);
    }

    #[test]
    fn train_rejects_mismatched_splits() {
        let mut data = toy_split(60, 7);
        data.test.x = Array2::zeros((10, 3));
        data.test.y = Array1::zeros(10);
        data.test.groups = vec![Group::Group0; 10];
        assert!(matches!(
            train(&data, &quick_config()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn run_repeated_single_run_has_zero_stderr() {
        let data = toy_split(100, 8);
        let runs = run_repeated(&data, &quick_config(), 1, Execution::Sequential).unwrap();
        assert!(runs.single_run);
        assert_eq!(runs.runs.len(), 1);
        assert_eq!(runs.test_accuracy.stderr, 0.0);
        assert_eq!(runs.runs[0].seed, quick_config().seed);
    }

    #[test]
    fn run_repeated_uses_consecutive_seeds_and_aggregates() {
        let data = toy_split(100, 9);
        let runs = run_repeated(&data, &quick_config(), 3, Execution::Sequential).unwrap();
        assert_eq!(runs.runs.len(), 3);
        let base = quick_config().seed;
        assert_eq!(
            runs.runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
            vec![base, base + 1, base + 2]
        );
        assert!(!runs.single_run);
        assert!(runs.test_accuracy.mean > 0.5);
        assert!(runs.test_accuracy.stderr >= 0.0);

        // Mean equals the hand-computed mean of the per-run accuracies.
        let hand: f64 =
            runs.runs.iter().map(|r| r.test.accuracy).sum::<f64>() / runs.runs.len() as f64;
        assert!((runs.test_accuracy.mean - hand).abs() < 1e-15);
    }

    #[test]
    fn run_repeated_constant_metric_has_zero_stderr() {
        // The toy problem is cleanly separable, so every seed reaches
        // perfect train accuracy and the stderr collapses to exactly zero.
        let mut data = toy_split(80, 10);
        // Strip the noise: place the classes far apart.
        for i in 0..data.train.len() {
            let s = if data.train.y[i] == 1.0 { 10.0 } else { -10.0 };
            data.train.x[[i, 0]] = s;
            data.train.x[[i, 1]] = s;
        }
        let config = TrainConfig {
            epochs: 30,
            ..quick_config()
        };
        let runs = run_repeated(&data, &config, 2, Execution::Sequential).unwrap();
        assert_eq!(runs.train_accuracy.mean, 1.0);
        assert_eq!(runs.train_accuracy.stderr, 0.0);
    }

    #[test]
    fn run_repeated_parallel_matches_sequential() {
        let data = toy_split(100, 11);
        let seq = run_repeated(&data, &quick_config(), 3, Execution::Sequential).unwrap();
        let par = run_repeated(&data, &quick_config(), 3, Execution::ParallelWith(3)).unwrap();
        assert_eq!(
            serde_json::to_string(&seq).unwrap(),
            serde_json::to_string(&par).unwrap()
        );
    }

    #[test]
    fn run_repeated_rejects_zero_runs() {
        let data = toy_split(50, 12);
        assert!(matches!(
            run_repeated(&data, &quick_config(), 0, Execution::Sequential),
            Err(Error::Config(_))
        ));
    }
}
