//! Synthetic click-pair corpus with a controllable group-dependent bias.
//!
//! Each pair holds two candidate items; exactly one of them was clicked. An
//! item has a latent relevance `r ~ N(0, 1)`, a subgroup flag
//! `a ~ Bernoulli(subgroup_rate)`, and three observed features:
//!
//! ```text
//! [ r + 0.3 e1,  a + 0.3 e2,  e3 ]      e* ~ N(0, 1)
//! ```
//!
//! — a noisy relevance signal, a noisy subgroup proxy, and a distractor. The
//! click process is where the bias lives: item 1 beats item 2 with
//! probability `sigmoid(s1 - s2)` where
//!
//! ```text
//! s = 2 r - 1.5 * bias_strength * a
//! ```
//!
//! so clicks systematically under-credit subgroup items. At
//! `bias_strength = 0` clicks depend on relevance alone and which group wins
//! a mixed pair is a coin flip. A ranker trained on the biased clicks can
//! express the bias through the subgroup proxy feature, which is exactly the
//! behaviour the pairwise MinDiff penalties are meant to remove.
//!
//! Every pair also carries an opaque bucket id (uniform over `n_buckets`)
//! used for per-bucket gap reporting.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::sigmoid;

/// Observed feature count per item.
pub const PAIR_FEATURE_DIM: usize = 3;

/// Feature noise scale.
const FEATURE_NOISE: f64 = 0.3;
/// Relevance weight in the click signal.
const CLICK_RELEVANCE_GAIN: f64 = 2.0;
/// Bias weight in the click signal, multiplied by `bias_strength`.
const CLICK_BIAS_GAIN: f64 = 1.5;

/// Generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorpusConfig {
    pub n_pairs: usize,
    /// Probability that an item belongs to the protected subgroup.
    pub subgroup_rate: f64,
    /// 0 disables the click bias entirely.
    pub bias_strength: f64,
    /// Number of query buckets pairs are spread over.
    pub n_buckets: usize,
    pub seed: u64,
}

impl Default for PairCorpusConfig {
    fn default() -> Self {
        PairCorpusConfig {
            n_pairs: 20_000,
            subgroup_rate: 0.2,
            bias_strength: 1.0,
            n_buckets: 4,
            seed: 7,
        }
    }
}

impl PairCorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::Config("n_pairs must be at least 1".into()));
        }
        if !(self.subgroup_rate.is_finite() && (0.0..=1.0).contains(&self.subgroup_rate)) {
            return Err(Error::Config(format!(
                "subgroup rate must lie in [0, 1], got {}",
                self.subgroup_rate
            )));
        }
        if !(self.bias_strength.is_finite() && self.bias_strength >= 0.0) {
            return Err(Error::Config(format!(
                "bias strength must be non-negative, got {}",
                self.bias_strength
            )));
        }
        if self.n_buckets == 0 {
            return Err(Error::Config("n_buckets must be at least 1".into()));
        }
        Ok(())
    }
}

/// One clicked/unclicked item pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairExample {
    pub clicked: Vec<f64>,
    pub unclicked: Vec<f64>,
    /// 1 if the clicked item is in the subgroup.
    pub clicked_group: u8,
    pub unclicked_group: u8,
    /// Opaque query-bucket id in `0..n_buckets`.
    pub bucket: usize,
}

struct Item {
    features: Vec<f64>,
    group: u8,
    signal: f64,
}

fn draw_item<R: Rng>(config: &PairCorpusConfig, rng: &mut R) -> Item {
    let group = u8::from(rng.random_bool(config.subgroup_rate));
    let relevance: f64 = StandardNormal.sample(rng);
    let e1: f64 = StandardNormal.sample(rng);
    let e2: f64 = StandardNormal.sample(rng);
    let e3: f64 = StandardNormal.sample(rng);
    let features = vec![
        relevance + FEATURE_NOISE * e1,
        f64::from(group) + FEATURE_NOISE * e2,
        e3,
    ];
    let signal =
        CLICK_RELEVANCE_GAIN * relevance - CLICK_BIAS_GAIN * config.bias_strength * f64::from(group);
    Item {
        features,
        group,
        signal,
    }
}

/// Generate a corpus. Fully determined by the config (including its seed).
pub fn generate_pair_corpus(config: &PairCorpusConfig) -> Result<Vec<PairExample>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pairs = Vec::with_capacity(config.n_pairs);
    for _ in 0..config.n_pairs {
        let first = draw_item(config, &mut rng);
        let second = draw_item(config, &mut rng);
        let first_wins = rng.random_bool(sigmoid(first.signal - second.signal));
        let bucket = rng.random_range(0..config.n_buckets);
        let (winner, loser) = if first_wins { (first, second) } else { (second, first) };
        pairs.push(PairExample {
            clicked: winner.features,
            unclicked: loser.features,
            clicked_group: winner.group,
            unclicked_group: loser.group,
            bucket,
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let config = PairCorpusConfig {
            n_pairs: 500,
            ..PairCorpusConfig::default()
        };
        assert_eq!(
            generate_pair_corpus(&config).unwrap(),
            generate_pair_corpus(&config).unwrap()
        );
        let reseeded = PairCorpusConfig { seed: 8, ..config.clone() };
        assert_ne!(
            generate_pair_corpus(&config).unwrap(),
            generate_pair_corpus(&reseeded).unwrap()
        );
    }

    #[test]
    fn shapes_and_ranges_hold() {
        let config = PairCorpusConfig {
            n_pairs: 300,
            n_buckets: 5,
            ..PairCorpusConfig::default()
        };
        let pairs = generate_pair_corpus(&config).unwrap();
        assert_eq!(pairs.len(), 300);
        for p in &pairs {
            assert_eq!(p.clicked.len(), PAIR_FEATURE_DIM);
            assert_eq!(p.unclicked.len(), PAIR_FEATURE_DIM);
            assert!(p.bucket < 5);
            assert!(p.clicked_group <= 1 && p.unclicked_group <= 1);
        }
        // Every bucket should be hit with 300 draws over 5 buckets.
        for b in 0..5 {
            assert!(pairs.iter().any(|p| p.bucket == b), "bucket {b} empty");
        }
    }

    /// In mixed pairs the subgroup item wins half the time when the bias is
    /// off, and much less than half when it is on.
    #[test]
    fn bias_strength_controls_click_skew() {
        let win_rate = |bias: f64| {
            let config = PairCorpusConfig {
                n_pairs: 10_000,
                subgroup_rate: 0.3,
                bias_strength: bias,
                n_buckets: 2,
                seed: 123,
            };
            let pairs = generate_pair_corpus(&config).unwrap();
            let mixed: Vec<_> = pairs
                .iter()
                .filter(|p| p.clicked_group != p.unclicked_group)
                .collect();
            assert!(mixed.len() > 2000, "too few mixed pairs: {}", mixed.len());
            mixed.iter().filter(|p| p.clicked_group == 1).count() as f64 / mixed.len() as f64
        };

        let unbiased = win_rate(0.0);
        assert!((unbiased - 0.5).abs() < 0.04, "unbiased win rate {unbiased}");

        let biased = win_rate(1.0);
        assert!(biased < 0.42, "biased win rate {biased} not skewed");
    }

    #[test]
    fn config_validation() {
        let ok = PairCorpusConfig::default();
        assert!(ok.validate().is_ok());
        for (f, v) in [
            ("n_pairs", 0.0),
            ("subgroup_rate", -0.1),
            ("subgroup_rate", 1.1),
            ("bias_strength", -1.0),
            ("n_buckets", 0.0),
        ] {
            let mut bad = ok.clone();
            match f {
                "n_pairs" => bad.n_pairs = v as usize,
                "subgroup_rate" => bad.subgroup_rate = v,
                "bias_strength" => bad.bias_strength = v,
                "n_buckets" => bad.n_buckets = v as usize,
                _ => unreachable!(),
            }
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{f}={v}");
        }
    }
}
