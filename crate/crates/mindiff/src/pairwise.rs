//! Pairwise ranking variant of MinDiff.
//!
//! A pair contributes a score difference `alpha = f(clicked) - f(unclicked)`
//! (the model should make it positive) and a group difference
//! `beta = group(clicked) - group(unclicked)` in `{-1, 0, +1}`. The fairness
//! penalties act on the relationship between `alpha` and `beta`:
//!
//! * correlation kind: |Pearson(alpha, beta)| over *all* pairs, beta = 0
//!   included — same-group pairs anchor the regression;
//! * mmd kind: squared MMD between `{alpha : beta = +1}` and
//!   `{alpha : beta = -1}` — same-group pairs are excluded since they say
//!   nothing about group asymmetry.
//!
//! Scores are the model's sigmoid outputs, so `alpha` lives in (-1, 1).

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::pairs::PairExample;
use crate::error::{Error, Result};
use crate::nn::{
    backward, forward, forward_trace, optimizer_step, sigmoid, ModelParams, OptimizerState,
};
use crate::penalties::{abs_correlation, mmd_squared, PenaltyConfig, PenaltyKind, PenaltyTerm};
use crate::training::EpochLoss;

/// Hyperparameters for ranker training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_units: usize,
    pub penalty: PenaltyConfig,
}

impl Default for PairTrainConfig {
    fn default() -> Self {
        PairTrainConfig {
            seed: 17,
            epochs: 10,
            batch_size: 128,
            learning_rate: 5e-3,
            hidden_units: 16,
            penalty: PenaltyConfig::off(),
        }
    }
}

impl PairTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden_units == 0 {
            return Err(Error::Config(
                "epochs, batch size, and hidden units must be at least 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        self.penalty.validate()
    }
}

/// Stack clicked rows on top of unclicked rows: `[2b, d]`.
fn stack_features(pairs: &[&PairExample]) -> Result<Array2<f64>> {
    let b = pairs.len();
    let d = pairs[0].clicked.len();
    for p in pairs {
        if p.clicked.len() != d || p.unclicked.len() != d {
            return Err(Error::DimensionMismatch(
                "pair feature lengths disagree".into(),
            ));
        }
    }
    let mut x = Array2::zeros((2 * b, d));
    for (i, p) in pairs.iter().enumerate() {
        for (j, &v) in p.clicked.iter().enumerate() {
            x[[i, j]] = v;
        }
        for (j, &v) in p.unclicked.iter().enumerate() {
            x[[b + i, j]] = v;
        }
    }
    Ok(x)
}

fn betas_of(pairs: &[&PairExample]) -> Vec<i8> {
    pairs
        .iter()
        .map(|p| p.clicked_group as i8 - p.unclicked_group as i8)
        .collect()
}

/// Score difference and group difference for a single pair.
pub fn alpha_beta(params: &ModelParams, pair: &PairExample) -> Result<(f64, i8)> {
    let x = stack_features(&[pair])?;
    let probs = forward(params, &x)?;
    Ok((probs[0] - probs[1], pair.clicked_group as i8 - pair.unclicked_group as i8))
}

/// Per-bucket pairwise accuracy split by the clicked item's group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: usize,
    /// Pairs whose clicked item is in the subgroup.
    pub in_count: usize,
    pub in_accuracy: Option<f64>,
    /// Pairs whose clicked item is outside the subgroup.
    pub out_count: usize,
    pub out_accuracy: Option<f64>,
    /// `out_accuracy - in_accuracy` (signed); `None` if either side is empty.
    pub gap: Option<f64>,
}

/// Ranking quality summary over a pair corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    /// Fraction of pairs ranked correctly; ties (`alpha == 0`) count 0.5.
    pub overall_accuracy: f64,
    pub buckets: Vec<BucketRow>,
    /// Sum of the defined per-bucket gaps (signed).
    pub total_gap: f64,
    /// Buckets whose gap is undefined (one side empty).
    pub undefined_buckets: usize,
}

/// Column order of [`PairwiseReport::bucket_csv`].
pub const PAIRWISE_CSV_HEADER: &str =
    "bucket,in_count,in_accuracy,out_count,out_accuracy,gap";

impl PairwiseReport {
    /// Bucket table as CSV (header + one row per bucket); undefined cells
    /// are empty fields.
    pub fn bucket_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(PAIRWISE_CSV_HEADER);
        out.push('\n');
        for row in &self.buckets {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.bucket,
                row.in_count,
                opt(row.in_accuracy),
                row.out_count,
                opt(row.out_accuracy),
                opt(row.gap),
            ));
        }
        out
    }
}

fn pair_score(alpha: f64) -> f64 {
    if alpha > 0.0 {
        1.0
    } else if alpha == 0.0 {
        0.5
    } else {
        0.0
    }
}

/// Evaluate a ranker on a pair corpus.
pub fn pairwise_metric(pairs: &[PairExample], params: &ModelParams) -> Result<PairwiseReport> {
    if pairs.is_empty() {
        return Err(Error::Metric("pairwise metrics over an empty corpus".into()));
    }
    let refs: Vec<&PairExample> = pairs.iter().collect();
    let x = stack_features(&refs)?;
    let probs = forward(params, &x)?;
    let b = pairs.len();

    let n_buckets = pairs.iter().map(|p| p.bucket).max().unwrap() + 1;
    // [bucket][in/out] -> (score sum, count)
    let mut cells = vec![[(0.0f64, 0usize); 2]; n_buckets];
    let mut overall = 0.0;
    for (i, p) in pairs.iter().enumerate() {
        let score = pair_score(probs[i] - probs[b + i]);
        overall += score;
        let side = usize::from(p.clicked_group == 0); // 0 = in-subgroup, 1 = out
        cells[p.bucket][side].0 += score;
        cells[p.bucket][side].1 += 1;
    }

    let mut buckets = Vec::with_capacity(n_buckets);
    let mut total_gap = 0.0;
    let mut undefined = 0usize;
    for (bucket, cell) in cells.iter().enumerate() {
        let acc = |c: (f64, usize)| if c.1 == 0 { None } else { Some(c.0 / c.1 as f64) };
        let in_accuracy = acc(cell[0]);
        let out_accuracy = acc(cell[1]);
        let gap = match (out_accuracy, in_accuracy) {
            (Some(o), Some(i)) => Some(o - i),
            _ => None,
        };
        match gap {
            Some(g) => total_gap += g,
            None => undefined += 1,
        }
        buckets.push(BucketRow {
            bucket,
            in_count: cell[0].1,
            in_accuracy,
            out_count: cell[1].1,
            out_accuracy,
            gap,
        });
    }

    Ok(PairwiseReport {
        overall_accuracy: overall / b as f64,
        buckets,
        total_gap,
        undefined_buckets: undefined,
    })
}

/// MinDiff penalty on score differences. Gradient entries line up with
/// `alphas`; pairs with `beta = 0` get zero gradient under the mmd kind.
pub fn pair_mindiff_penalty(
    alphas: &[f64],
    betas: &[i8],
    config: &PenaltyConfig,
) -> Result<PenaltyTerm> {
    config.validate()?;
    if alphas.len() != betas.len() {
        return Err(Error::DimensionMismatch(format!(
            "alphas has {} entries but betas has {}",
            alphas.len(),
            betas.len()
        )));
    }
    let n = alphas.len();
    let zero = |skipped| PenaltyTerm {
        value: 0.0,
        grad: Array1::zeros(n),
        skipped,
    };
    if config.kind == PenaltyKind::None || config.weight == 0.0 {
        return Ok(zero(false));
    }

    let plus = betas.iter().filter(|&&b| b == 1).count();
    let minus = betas.iter().filter(|&&b| b == -1).count();
    if plus < config.min_side || minus < config.min_side {
        return Ok(zero(true));
    }

    let mut grad = Array1::zeros(n);
    let value = match config.kind {
        PenaltyKind::None => unreachable!("handled above"),
        PenaltyKind::Correlation => {
            let beta_f: Vec<f64> = betas.iter().map(|&b| f64::from(b)).collect();
            let term = abs_correlation(alphas, &beta_f)?;
            for (g, t) in grad.iter_mut().zip(&term.grad) {
                *g = config.weight * t;
            }
            config.weight * term.value
        }
        PenaltyKind::Mmd => {
            let kernel = config.kernel.as_ref().expect("validated");
            let mut s_plus = Vec::with_capacity(plus);
            let mut i_plus = Vec::with_capacity(plus);
            let mut s_minus = Vec::with_capacity(minus);
            let mut i_minus = Vec::with_capacity(minus);
            for (i, (&a, &b)) in alphas.iter().zip(betas).enumerate() {
                if b == 1 {
                    s_plus.push(a);
                    i_plus.push(i);
                } else if b == -1 {
                    s_minus.push(a);
                    i_minus.push(i);
                }
            }
            let term = mmd_squared(&s_plus, &s_minus, kernel)?;
            for (&i, g) in i_plus.iter().zip(&term.grad0) {
                grad[i] = config.weight * g;
            }
            for (&i, g) in i_minus.iter().zip(&term.grad1) {
                grad[i] = config.weight * g;
            }
            config.weight * term.value
        }
    };

    Ok(PenaltyTerm {
        value,
        grad,
        skipped: false,
    })
}

/// Result of [`train_pairs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrainResult {
    pub params: ModelParams,
    pub epoch_losses: Vec<EpochLoss>,
    pub skipped_batches: usize,
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Train a ranker on clicked/unclicked pairs.
///
/// Primary loss per pair is the logistic ranking loss
/// `softplus(-alpha) = -ln sigmoid(alpha)`; the configured penalty acts on
/// the batch's `(alpha, beta)` sample.
pub fn train_pairs(pairs: &[PairExample], config: &PairTrainConfig) -> Result<PairTrainResult> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Config("cannot train on an empty pair corpus".into()));
    }
    let d = pairs[0].clicked.len();

    let n = pairs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::glorot(d, config.hidden_units, &mut rng)?;
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
            let refs: Vec<&PairExample> = chunk.iter().map(|&i| &pairs[i]).collect();
            let b = refs.len();
            let x = stack_features(&refs)?;
            let betas = betas_of(&refs);

            let trace = forward_trace(&params, &x)?;
            let alphas: Vec<f64> = (0..b).map(|i| trace.probs[i] - trace.probs[b + i]).collect();

            let primary = alphas.iter().map(|&a| softplus(-a)).sum::<f64>() / b as f64;
            let term = pair_mindiff_penalty(&alphas, &betas, &config.penalty)?;
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

            // d softplus(-a)/da = -sigmoid(-a); distribute dL/dalpha onto the
            // clicked (+) and unclicked (-) score entries.
            let mut upstream = Array1::zeros(2 * b);
            for (i, &a) in alphas.iter().enumerate() {
                let dalpha = -sigmoid(-a) / b as f64 + term.grad[i];
                upstream[i] = dalpha;
                upstream[b + i] = -dalpha;
            }

            let grads = backward(&params, &x, &trace, &upstream)?;
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

    Ok(PairTrainResult {
        params,
        epoch_losses,
        skipped_batches,
    })
}
