//! `train`: fit one classifier (or several seeds of it) on the census data
//! and write evaluation artifacts.

use clap::Args;
use mindiff::experiments::PenaltyVariant;
use mindiff::metrics::EVAL_CSV_HEADER;
use mindiff::penalties::PenaltyConfig;
use mindiff::training::{run_repeated, train, MetricSummary, RepeatedRuns, TrainResult};

use crate::config::{resolve, FileConfig};
use crate::failure::{CliResult, Failure};
use crate::manifest::Manifest;
use crate::setup::{write_file, CommonArgs, Session};

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Penalty: none, corr, mmd_gaussian, or mmd_laplace [default: none]
    #[arg(long)]
    pub penalty: Option<String>,

    /// Penalty weight [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Kernel length scale (mmd penalties only) [default: 0.1]
    #[arg(long)]
    pub kernel_length: Option<f64>,

    /// Train this many models with consecutive seeds and aggregate [default: 1]
    #[arg(long)]
    pub runs: Option<usize>,
}

/// Resolve the penalty settings, rejecting combinations that would silently
/// ignore a flag (a lambda without a penalty, a kernel length without a
/// kernel).
pub fn resolve_penalty(
    penalty: Option<&str>,
    lambda: Option<f64>,
    kernel_length: Option<f64>,
    file: &FileConfig,
) -> CliResult<PenaltyConfig> {
    let id = match penalty {
        Some(p) => p.to_string(),
        None => file.get_string("penalty")?.unwrap_or_else(|| "none".into()),
    };
    let lambda = match lambda {
        Some(l) => Some(l),
        None => file.get_f64("lambda")?,
    };
    let kernel_length = match kernel_length {
        Some(l) => Some(l),
        None => file.get_f64("kernel_length")?,
    };

    if id == "none" {
        if lambda.is_some() {
            return Err(Failure::config("lambda given but no penalty selected"));
        }
        if kernel_length.is_some() {
            return Err(Failure::config(
                "kernel length given but no penalty selected",
            ));
        }
        return Ok(PenaltyConfig::off());
    }

    let variant = PenaltyVariant::from_id(&id)?;
    if !variant.uses_kernel() && kernel_length.is_some() {
        return Err(Failure::config(format!(
            "kernel length given but the {id} penalty has no kernel"
        )));
    }
    let config = variant.penalty_config(lambda.unwrap_or(1.0), kernel_length.unwrap_or(0.1))?;
    Ok(config)
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let mut session = Session::resolve(&args.common, &file)?;
    session.base.penalty = resolve_penalty(
        args.penalty.as_deref(),
        args.lambda,
        args.kernel_length,
        &file,
    )?;
    let runs = resolve(args.runs, file.get_usize("runs")?, 1);
    if runs == 0 {
        return Err(Failure::config("runs must be at least 1"));
    }
    session.base.validate()?;

    let (data, schema, dataset) = session.load_data()?;
    session.create_out_dir()?;
    let out = &session.out_dir;

    let settings = serde_json::json!({
        "config": session.base,
        "runs": runs,
        "group_labels": session.group_labels,
    });
    let mut manifest = Manifest::new("train", settings, session.jobs);
    manifest.dataset = Some(dataset);
    manifest.write(out)?;
    write_file(&out.join("schema.json"), &(schema.to_json() + "\n"))?;

    if runs == 1 {
        let result = train(&data, &session.base)?;
        write_single(out, &result)?;
        print_single(&result);
        Ok(())
    } else {
        let repeated = run_repeated(&data, &session.base, runs, session.execution())?;
        write_runs(out, &repeated)?;
        print_aggregate(&repeated);
        if repeated.failures.is_empty() {
            Ok(())
        } else {
            Err(Failure::partial_sweep(format!(
                "{} of {runs} runs failed (see runs.csv)",
                repeated.failures.len()
            )))
        }
    }
}

fn write_single(out: &std::path::Path, result: &TrainResult) -> CliResult<()> {
    let model = serde_json::to_string_pretty(&result.params)
        .map_err(|e| Failure::data(format!("cannot serialize model: {e}")))?;
    write_file(&out.join("model.json"), &(model + "\n"))?;

    let mut losses = String::from("epoch,primary,penalty,total\n");
    for (i, loss) in result.epoch_losses.iter().enumerate() {
        losses.push_str(&format!(
            "{},{},{},{}\n",
            i, loss.primary, loss.penalty, loss.total
        ));
    }
    write_file(&out.join("losses.csv"), &losses)?;

    let eval = format!(
        "split,{EVAL_CSV_HEADER}\ntrain,{}\ntest,{}\n",
        result.train_report.to_csv_row(),
        result.test_report.to_csv_row()
    );
    write_file(&out.join("eval.csv"), &eval)
}

fn write_runs(out: &std::path::Path, repeated: &RepeatedRuns) -> CliResult<()> {
    let mut rows = format!("run,seed,split,{EVAL_CSV_HEADER}\n");
    for (i, run) in repeated.runs.iter().enumerate() {
        rows.push_str(&format!("{i},{},train,{}\n", run.seed, run.train.to_csv_row()));
        rows.push_str(&format!("{i},{},test,{}\n", run.seed, run.test.to_csv_row()));
    }
    write_file(&out.join("runs.csv"), &rows)?;

    if !repeated.failures.is_empty() {
        let mut rows = String::from("run,seed,message\n");
        for f in &repeated.failures {
            rows.push_str(&format!("{},{},{:?}\n", f.run_index, f.seed, f.message));
        }
        write_file(&out.join("failures.csv"), &rows)?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn print_single(result: &TrainResult) {
    let r = &result.test_report;
    println!(
        "test accuracy {:.4}  fpr gap {}  (group0 {}, group1 {})  threshold {:.4}",
        r.accuracy,
        fmt_opt(r.fpr_gap),
        fmt_opt(r.fpr_group0),
        fmt_opt(r.fpr_group1),
        result.threshold,
    );
}

fn fmt_summary(s: &MetricSummary) -> String {
    if s.defined_runs == 0 {
        "-".into()
    } else {
        format!("{:.4} +/- {:.4}", s.mean, s.stderr)
    }
}

fn print_aggregate(repeated: &RepeatedRuns) {
    println!(
        "{} runs: test accuracy {}  fpr gap {}  (group0 {}, group1 {}){}",
        repeated.runs.len(),
        fmt_summary(&repeated.test_accuracy),
        fmt_summary(&repeated.test_fpr_gap),
        fmt_summary(&repeated.test_fpr_group0),
        fmt_summary(&repeated.test_fpr_group1),
        if repeated.failures.is_empty() {
            String::new()
        } else {
            format!("  [{} failed]", repeated.failures.len())
        }
    );
}
