//! `pairwise-sim`: synthetic click-bias study for the ranking variant.
//!
//! Generates a biased pair corpus, trains an unpenalized ranker plus one arm
//! per penalty variant over several seeds, and evaluates every model on a
//! fresh corpus drawn with a different seed from the same process.

use std::path::PathBuf;

use clap::Args;
use mindiff::data::pairs::{generate_pair_corpus, PairCorpusConfig};
use mindiff::exec::par_map;
use mindiff::experiments::PenaltyVariant;
use mindiff::pairwise::{pairwise_metric, train_pairs, PairTrainConfig, PairwiseReport, PAIRWISE_CSV_HEADER};
use mindiff::penalties::PenaltyConfig;
use mindiff::Execution;

use crate::config::{resolve, FileConfig};
use crate::failure::{CliResult, Failure};
use crate::manifest::Manifest;
use crate::setup::write_file;

#[derive(Debug, Args)]
pub struct PairwiseSimArgs {
    /// Flat key-value config file (flags take precedence)
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Directory for artifacts (created if missing)
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Pairs in each generated corpus [default: 20000]
    #[arg(long)]
    pub pairs: Option<usize>,

    /// Probability that an item belongs to the subgroup [default: 0.2]
    #[arg(long)]
    pub subgroup_rate: Option<f64>,

    /// Strength of the click-process bias against the subgroup [default: 1]
    #[arg(long)]
    pub bias: Option<f64>,

    /// Number of query buckets [default: 4]
    #[arg(long)]
    pub buckets: Option<usize>,

    /// Seed for the training corpus [default: 7]
    #[arg(long)]
    pub corpus_seed: Option<u64>,

    /// Seed for the held-out evaluation corpus [default: 1007]
    #[arg(long)]
    pub eval_seed: Option<u64>,

    /// Number of training seeds per arm [default: 10]
    #[arg(long)]
    pub seeds: Option<usize>,

    /// First training seed (run i uses seed + i) [default: 17]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Penalty weight for the penalized arms [default: 0.1]
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Kernel length scale for the mmd arms [default: 0.1]
    #[arg(long)]
    pub kernel_length: Option<f64>,

    /// Training epochs [default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Minibatch size in pairs [default: 128]
    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Adam learning rate [default: 0.005]
    #[arg(long)]
    pub learning_rate: Option<f64>,

    /// Hidden layer width of the scoring network [default: 16]
    #[arg(long)]
    pub hidden_units: Option<usize>,

    /// Worker threads for independent runs (1 = sequential) [default: 1]
    #[arg(long)]
    pub jobs: Option<usize>,
}

struct Arm {
    name: &'static str,
    penalty: PenaltyConfig,
}

pub fn run(args: &PairwiseSimArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;

    let corpus_defaults = PairCorpusConfig::default();
    let corpus = PairCorpusConfig {
        n_pairs: resolve(args.pairs, file.get_usize("pairs")?, corpus_defaults.n_pairs),
        subgroup_rate: resolve(
            args.subgroup_rate,
            file.get_f64("subgroup_rate")?,
            corpus_defaults.subgroup_rate,
        ),
        bias_strength: resolve(args.bias, file.get_f64("bias")?, corpus_defaults.bias_strength),
        n_buckets: resolve(args.buckets, file.get_usize("buckets")?, corpus_defaults.n_buckets),
        seed: resolve(args.corpus_seed, file.get_u64("corpus_seed")?, corpus_defaults.seed),
    };
    let eval_corpus_config = PairCorpusConfig {
        seed: resolve(args.eval_seed, file.get_u64("eval_seed")?, 1007),
        ..corpus.clone()
    };
    if eval_corpus_config.seed == corpus.seed {
        return Err(Failure::config(
            "evaluation corpus seed equals the training corpus seed",
        ));
    }

    let train_defaults = PairTrainConfig::default();
    let base = PairTrainConfig {
        seed: resolve(args.seed, file.get_u64("seed")?, train_defaults.seed),
        epochs: resolve(args.epochs, file.get_usize("epochs")?, train_defaults.epochs),
        batch_size: resolve(
            args.batch_size,
            file.get_usize("batch_size")?,
            train_defaults.batch_size,
        ),
        learning_rate: resolve(
            args.learning_rate,
            file.get_f64("learning_rate")?,
            train_defaults.learning_rate,
        ),
        hidden_units: resolve(
            args.hidden_units,
            file.get_usize("hidden_units")?,
            train_defaults.hidden_units,
        ),
        penalty: PenaltyConfig::off(),
    };
    base.validate()?;
    let seeds = resolve(args.seeds, file.get_usize("seeds")?, 10);
    if seeds == 0 {
        return Err(Failure::config("seeds must be at least 1"));
    }
    let lambda = resolve(args.lambda, file.get_f64("lambda")?, 0.1);
    let kernel_length = resolve(args.kernel_length, file.get_f64("kernel_length")?, 0.1);
    let jobs = resolve(args.jobs, file.get_usize("jobs")?, 1);

    let arms = vec![
        Arm {
            name: "none",
            penalty: PenaltyConfig::off(),
        },
        Arm {
            name: "corr",
            penalty: PenaltyVariant::Correlation.penalty_config(lambda, kernel_length)?,
        },
        Arm {
            name: "mmd_gaussian",
            penalty: PenaltyVariant::MmdGaussian.penalty_config(lambda, kernel_length)?,
        },
        Arm {
            name: "mmd_laplace",
            penalty: PenaltyVariant::MmdLaplace.penalty_config(lambda, kernel_length)?,
        },
    ];

    let train_pairs_corpus = generate_pair_corpus(&corpus)?;
    let eval_pairs = generate_pair_corpus(&eval_corpus_config)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::data(format!("cannot create {}: {e}", args.out.display())))?;
    let manifest = Manifest::new(
        "pairwise-sim",
        serde_json::json!({
            "corpus": corpus,
            "eval_corpus": eval_corpus_config,
            "base": base,
            "seeds": seeds,
            "lambda": lambda,
            "kernel_length": kernel_length,
        }),
        jobs,
    );
    manifest.write(&args.out)?;

    // One task per (arm, seed); everything is independent, so the whole
    // grid goes through the worker pool at once.
    let mut tasks: Vec<(usize, PairTrainConfig)> = Vec::with_capacity(arms.len() * seeds);
    for (ai, arm) in arms.iter().enumerate() {
        for i in 0..seeds {
            tasks.push((
                ai,
                PairTrainConfig {
                    seed: base.seed + i as u64,
                    penalty: arm.penalty.clone(),
                    ..base.clone()
                },
            ));
        }
    }
    let outcomes = par_map(Execution::with_jobs(jobs), tasks, |(ai, config)| {
        let seed = config.seed;
        let report = train_pairs(&train_pairs_corpus, &config)
            .and_then(|r| pairwise_metric(&eval_pairs, &r.params));
        (ai, seed, report)
    });

    let mut rows = String::from("arm,seed,overall_accuracy,total_gap,undefined_buckets\n");
    let mut bucket_rows = format!("arm,{PAIRWISE_CSV_HEADER}\n");
    let mut per_arm: Vec<Vec<PairwiseReport>> = (0..arms.len()).map(|_| Vec::new()).collect();
    for (ai, seed, outcome) in outcomes {
        let report = outcome?;
        let arm = arms[ai].name;
        rows.push_str(&format!(
            "{arm},{seed},{},{},{}\n",
            report.overall_accuracy, report.total_gap, report.undefined_buckets
        ));
        if seed == base.seed {
            for line in report.bucket_csv().lines().skip(1) {
                bucket_rows.push_str(&format!("{arm},{line}\n"));
            }
        }
        per_arm[ai].push(report);
    }
    write_file(&args.out.join("pairwise.csv"), &rows)?;
    write_file(&args.out.join("buckets.csv"), &bucket_rows)?;

    for (arm, reports) in arms.iter().zip(&per_arm) {
        let n = reports.len() as f64;
        let acc = reports.iter().map(|r| r.overall_accuracy).sum::<f64>() / n;
        let gap = reports.iter().map(|r| r.total_gap).sum::<f64>() / n;
        println!(
            "{:<13} accuracy {:.4}  total gap {:+.4}  ({} seeds)",
            arm.name,
            acc,
            gap,
            reports.len()
        );
    }
    Ok(())
}
