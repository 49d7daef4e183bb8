//! Fairness-regularized training for binary classifiers and rankers.
//!
//! MinDiff adds a differentiable penalty to the primary loss that pushes the
//! model's score distributions for two protected groups together, measured
//! over the examples where over-firing matters (negatives for a classifier,
//! cross-group pairs for a ranker). Two penalty families are implemented:
//!
//! * absolute Pearson correlation between scores and group membership,
//! * squared maximum mean discrepancy (MMD) between per-group score
//!   samples, with Gaussian or Laplace kernels.
//!
//! The crate provides the model ([`nn`]), the penalties ([`penalties`]),
//! fairness metrics ([`metrics`]), data loading for the UCI Adult benchmark
//! and a synthetic pair corpus ([`data`]), single-model training
//! ([`training`]), the ranking variant ([`pairwise`]), and sweep/Pareto
//! orchestration ([`experiments`]). Everything is deterministic given a
//! seed — parallel and sequential execution produce bit-identical results.

pub mod data;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod metrics;
pub mod nn;
pub mod pairwise;
pub mod penalties;
pub mod training;

pub use error::{Error, Result};
pub use exec::Execution;
pub use metrics::{evaluate, EvalReport};
pub use nn::{Group, ModelParams};
pub use penalties::{KernelFamily, KernelSpec, PenaltyConfig, PenaltyKind};
pub use training::{train, run_repeated, TrainConfig};
