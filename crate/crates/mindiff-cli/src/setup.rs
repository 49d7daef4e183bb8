//! Shared plumbing for the commands that train on the census data:
//! common flags, flag/config resolution, and dataset loading.

use std::path::{Path, PathBuf};

use clap::Args;
use mindiff::data::adult::{load_adult_dir, AdultConfig, AdultSchema};
use mindiff::data::{mask_group_labels, DataSplit};
use mindiff::experiments::derive_seed;
use mindiff::training::ThresholdPolicy;
use mindiff::{Execution, TrainConfig};

use crate::config::{resolve, FileConfig};
use crate::failure::{CliResult, Failure};
use crate::manifest::{dataset_manifest, DatasetManifest};

/// Tag mixed into the master seed to derive the group-label masking seed,
/// keeping the mask independent of the training RNG streams.
const MASK_SEED_TAG: u64 = 0x6d61_736b; // "mask"

/// Flags shared by every command that trains on the census files.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Directory containing adult.data and adult.test
    #[arg(long)]
    pub data_dir: Option<PathBuf>,

    /// Flat key-value config file (flags take precedence)
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Directory for artifacts (created if missing)
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Master RNG seed [default: 17]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Training epochs [default: 15]
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Minibatch size [default: 256]
    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub learning_rate: Option<f64>,

    /// Hidden layer width [default: 64]
    #[arg(long)]
    pub hidden_units: Option<usize>,

    /// Fixed decision threshold [default: 0.5]
    #[arg(long, conflicts_with = "recall")]
    pub threshold: Option<f64>,

    /// Pick the threshold reaching this recall on the training split
    /// instead of fixing it
    #[arg(long)]
    pub recall: Option<f64>,

    /// Fraction of training rows keeping their group label; the rest are
    /// masked and skipped by the penalty [default: 1]
    #[arg(long)]
    pub group_labels: Option<f64>,

    /// Worker threads for independent runs (1 = sequential) [default: 1]
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Effective settings after flag > config > default resolution.
#[derive(Debug)]
pub struct Session {
    /// Checked when data is actually loaded — `pareto --from` for example
    /// never touches the raw files.
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub base: TrainConfig,
    /// Keep fraction for training-split group labels; 1 leaves them intact.
    pub group_labels: f64,
    pub jobs: usize,
}

impl Session {
    pub fn resolve(args: &CommonArgs, file: &FileConfig) -> CliResult<Session> {
        let defaults = TrainConfig::default();

        let threshold = resolve_threshold(args, file)?;
        let base = TrainConfig {
            seed: resolve(args.seed, file.get_u64("seed")?, defaults.seed),
            epochs: resolve(args.epochs, file.get_usize("epochs")?, defaults.epochs),
            batch_size: resolve(
                args.batch_size,
                file.get_usize("batch_size")?,
                defaults.batch_size,
            ),
            learning_rate: resolve(
                args.learning_rate,
                file.get_f64("learning_rate")?,
                defaults.learning_rate,
            ),
            hidden_units: resolve(
                args.hidden_units,
                file.get_usize("hidden_units")?,
                defaults.hidden_units,
            ),
            penalty: defaults.penalty,
            threshold,
        };

        let data_dir = args
            .data_dir
            .clone()
            .or(file.get_string("data_dir")?.map(PathBuf::from));

        let group_labels = resolve(args.group_labels, file.get_f64("group_labels")?, 1.0);
        if !(group_labels.is_finite() && group_labels > 0.0 && group_labels <= 1.0) {
            return Err(Failure::config(format!(
                "group label fraction must lie in (0, 1], got {group_labels}"
            )));
        }

        Ok(Session {
            data_dir,
            out_dir: args.out.clone(),
            base,
            group_labels,
            jobs: resolve(args.jobs, file.get_usize("jobs")?, 1),
        })
    }

    pub fn execution(&self) -> Execution {
        Execution::with_jobs(self.jobs)
    }

    /// Load the census files and apply group-label masking to the training
    /// split if requested. Evaluation groups are never masked.
    pub fn load_data(&self) -> CliResult<(DataSplit, AdultSchema, DatasetManifest)> {
        let dir = self.data_dir.as_deref().ok_or_else(|| {
            Failure::config("no data directory: pass --data-dir or set data_dir")
        })?;
        let train_path = dir.join("adult.data");
        let test_path = dir.join("adult.test");
        let (mut data, schema) = load_adult_dir(dir, &AdultConfig::default())?;
        if self.group_labels < 1.0 {
            let mask_seed = derive_seed(self.base.seed, &[MASK_SEED_TAG]);
            data.train = mask_group_labels(&data.train, self.group_labels, mask_seed)?;
        }
        let dataset = dataset_manifest(&train_path, &test_path, &schema)?;
        Ok((data, schema, dataset))
    }

    pub fn create_out_dir(&self) -> CliResult<()> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| Failure::data(format!("cannot create {}: {e}", self.out_dir.display())))
    }
}

fn resolve_threshold(args: &CommonArgs, file: &FileConfig) -> CliResult<ThresholdPolicy> {
    // Either flag pins the policy outright; the config file is consulted
    // only when neither is given.
    if let Some(t) = args.threshold {
        return Ok(ThresholdPolicy::Fixed(t));
    }
    if let Some(r) = args.recall {
        return Ok(ThresholdPolicy::ForRecall(r));
    }
    match (file.get_f64("threshold")?, file.get_f64("recall")?) {
        (Some(_), Some(_)) => Err(Failure::config(
            "config sets both threshold and recall; pick one",
        )),
        (Some(t), None) => Ok(ThresholdPolicy::Fixed(t)),
        (None, Some(r)) => Ok(ThresholdPolicy::ForRecall(r)),
        (None, None) => Ok(ThresholdPolicy::default()),
    }
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}
