//! `sweep`, `kernel-sweep`, and `pareto`: grid experiments over penalty
//! weight and kernel length, plus the accuracy/fairness Pareto front.

use std::path::Path;

use clap::Args;
use mindiff::data::DataSplit;
use mindiff::experiments::{
    kernel_length_sweep, kernel_sweep_csv, pareto_csv, pareto_front, parse_sweep_csv, sweep,
    sweep_csv, KernelSweepPoint, KernelSweepSpec, PenaltyVariant, SweepPoint, SweepSpec,
};

use crate::config::{parse_f64_list, resolve, FileConfig};
use crate::failure::{CliResult, Failure};
use crate::manifest::Manifest;
use crate::setup::{write_file, CommonArgs, Session};

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Comma-joined penalty variants (corr, mmd_gaussian, mmd_laplace)
    /// [default: all three]
    #[arg(long)]
    pub variants: Option<String>,

    /// Comma-joined penalty weights
    /// [default: 0,0.25,0.5,1,2,4,8,14,16,32,64]
    #[arg(long)]
    pub lambdas: Option<String>,

    /// Kernel length scale used by the mmd variants [default: 0.1]
    #[arg(long)]
    pub kernel_length: Option<f64>,

    /// Training runs per grid cell [default: 5]
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct KernelSweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Comma-joined kernel variants (mmd_gaussian, mmd_laplace)
    /// [default: both]
    #[arg(long)]
    pub variants: Option<String>,

    /// Comma-joined penalty weights [default: 1,8]
    #[arg(long)]
    pub lambdas: Option<String>,

    /// Comma-joined kernel length scales
    /// [default: ten log-spaced over 0.001..10]
    #[arg(long)]
    pub lengths: Option<String>,

    /// Training runs per grid cell [default: 3]
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,

    /// Read sweep results from this CSV instead of running the sweep
    #[arg(long)]
    pub from: Option<std::path::PathBuf>,
}

fn parse_variants(text: &str) -> CliResult<Vec<PenaltyVariant>> {
    let variants: Vec<PenaltyVariant> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PenaltyVariant::from_id)
        .collect::<Result<_, _>>()?;
    if variants.is_empty() {
        return Err(Failure::config("variant list is empty"));
    }
    Ok(variants)
}

fn resolve_sweep_spec(args: &SweepArgs, file: &FileConfig, session: &Session) -> CliResult<SweepSpec> {
    let mut spec = SweepSpec::new(session.base.clone());
    if let Some(v) = &args.variants {
        spec.variants = parse_variants(v)?;
    } else if let Some(v) = file.get_string("variants")? {
        spec.variants = parse_variants(&v)?;
    }
    if let Some(l) = &args.lambdas {
        spec.lambdas = parse_f64_list(l, "lambda")?;
    } else if let Some(l) = file.get_string("lambdas")? {
        spec.lambdas = parse_f64_list(&l, "lambda")?;
    }
    spec.kernel_length = resolve(args.kernel_length, file.get_f64("kernel_length")?, 0.1);
    spec.runs_per_cell = resolve(args.runs, file.get_usize("runs")?, 5);
    Ok(spec)
}

/// Run the lambda sweep and write `sweep.csv`. Returns the points plus the
/// total number of failed runs (the artifact is written either way).
fn run_sweep(
    session: &Session,
    spec: &SweepSpec,
    data: &DataSplit,
    points_out: &Path,
) -> CliResult<(Vec<SweepPoint>, usize)> {
    let points = sweep(data, spec, session.execution())?;
    write_file(points_out, &sweep_csv(&points))?;
    for p in &points {
        println!(
            "{:<13} lambda {:<8} accuracy {:.4} +/- {:.4}  fpr gap {:.4} +/- {:.4}{}",
            p.variant.id(),
            p.value,
            p.mean_accuracy,
            p.stderr_accuracy,
            p.mean_fpr_gap,
            p.stderr_fpr_gap,
            if p.failed > 0 {
                format!("  [{} of {} runs failed]", p.failed, p.runs + p.failed)
            } else {
                String::new()
            }
        );
    }
    let failed = points.iter().map(|p| p.failed).sum();
    Ok((points, failed))
}

pub fn run_sweep_cmd(args: &SweepArgs) -> CliResult<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let session = Session::resolve(&args.common, &file)?;
    let spec = resolve_sweep_spec(args, &file, &session)?;

    let (data, _, dataset) = session.load_data()?;
    session.create_out_dir()?;

    let mut manifest = Manifest::new(
        "sweep",
        serde_json::json!({ "spec": spec, "group_labels": session.group_labels }),
        session.jobs,
    );
    manifest.dataset = Some(dataset);
    manifest.write(&session.out_dir)?;

    let (_, failed) = run_sweep(&session, &spec, &data, &session.out_dir.join("sweep.csv"))?;
    if failed > 0 {
        return Err(Failure::partial_sweep(format!(
            "{failed} runs failed; aggregates in sweep.csv cover the rest"
        )));
    }
    Ok(())
}

pub fn run_kernel_sweep_cmd(args: &KernelSweepArgs) -> CliResult<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let session = Session::resolve(&args.common, &file)?;

    let mut spec = KernelSweepSpec::new(session.base.clone());
    if let Some(v) = &args.variants {
        spec.variants = parse_variants(v)?;
    } else if let Some(v) = file.get_string("variants")? {
        spec.variants = parse_variants(&v)?;
    }
    if let Some(l) = &args.lambdas {
        spec.lambdas = parse_f64_list(l, "lambda")?;
    } else if let Some(l) = file.get_string("lambdas")? {
        spec.lambdas = parse_f64_list(&l, "lambda")?;
    }
    if let Some(l) = &args.lengths {
        spec.lengths = parse_f64_list(l, "length")?;
    } else if let Some(l) = file.get_string("lengths")? {
        spec.lengths = parse_f64_list(&l, "length")?;
    }
    spec.runs_per_cell = resolve(args.runs, file.get_usize("runs")?, 3);

    let (data, _, dataset) = session.load_data()?;
    session.create_out_dir()?;

    let mut manifest = Manifest::new(
        "kernel-sweep",
        serde_json::json!({ "spec": spec, "group_labels": session.group_labels }),
        session.jobs,
    );
    manifest.dataset = Some(dataset);
    manifest.write(&session.out_dir)?;

    let points = kernel_length_sweep(&data, &spec, session.execution())?;
    write_file(
        &session.out_dir.join("kernel_sweep.csv"),
        &kernel_sweep_csv(&points),
    )?;
    print_kernel_points(&points);

    let failed: usize = points.iter().map(|p| p.failed).sum();
    if failed > 0 {
        return Err(Failure::partial_sweep(format!(
            "{failed} runs failed; aggregates in kernel_sweep.csv cover the rest"
        )));
    }
    Ok(())
}

fn print_kernel_points(points: &[KernelSweepPoint]) {
    for p in points {
        println!(
            "{:<13} lambda {:<6} length {:<8} accuracy {:.4} +/- {:.4}  fpr gap {:.4} +/- {:.4}{}{}",
            p.variant.id(),
            p.lambda,
            p.kernel_length,
            p.mean_accuracy,
            p.stderr_accuracy,
            p.mean_fpr_gap,
            p.stderr_fpr_gap,
            if p.sweet_spot { "  <- sweet spot" } else { "" },
            if p.failed > 0 {
                format!("  [{} of {} runs failed]", p.failed, p.runs + p.failed)
            } else {
                String::new()
            }
        );
    }
}

pub fn run_pareto_cmd(args: &ParetoArgs) -> CliResult<()> {
    let file = FileConfig::load(args.sweep.common.config.as_deref())?;
    let session = Session::resolve(&args.sweep.common, &file)?;
    session.create_out_dir()?;

    let (points, sweep_failures) = match &args.from {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
            (parse_sweep_csv(&text)?, 0)
        }
        None => {
            let spec = resolve_sweep_spec(&args.sweep, &file, &session)?;
            let (data, _, dataset) = session.load_data()?;
            let mut manifest = Manifest::new(
                "pareto",
                serde_json::json!({ "spec": spec, "group_labels": session.group_labels }),
                session.jobs,
            );
            manifest.dataset = Some(dataset);
            manifest.write(&session.out_dir)?;
            run_sweep(&session, &spec, &data, &session.out_dir.join("sweep.csv"))?
        }
    };

    // Cells whose aggregates are NaN (every run failed) cannot be ranked;
    // drop them with a warning rather than abort the whole front.
    let (usable, skipped): (Vec<SweepPoint>, Vec<SweepPoint>) = points
        .into_iter()
        .partition(|p| p.mean_accuracy.is_finite() && p.mean_fpr_gap.is_finite());
    if !skipped.is_empty() {
        eprintln!(
            "warning: skipping {} cell(s) with non-finite aggregates",
            skipped.len()
        );
    }

    let front = pareto_front(&usable)?;
    write_file(&session.out_dir.join("pareto.csv"), &pareto_csv(&front))?;
    println!("pareto front: {} of {} cells", front.len(), usable.len());
    for entry in &front {
        println!(
            "  {:<13} {} = {:<8} accuracy {:.4}  fpr gap {:.4}{}",
            entry.point.variant.id(),
            entry.point.swept_param,
            entry.point.value,
            entry.point.mean_accuracy,
            entry.point.mean_fpr_gap,
            if entry.duplicates > 0 {
                format!("  ({} duplicate cells)", entry.duplicates)
            } else {
                String::new()
            }
        );
    }

    if sweep_failures > 0 {
        return Err(Failure::partial_sweep(format!(
            "{sweep_failures} sweep runs failed; front computed from the rest"
        )));
    }
    Ok(())
}
