//! Sweep orchestration and Pareto-front extraction.
//!
//! A sweep trains a grid of penalty configurations — (variant, lambda) for
//! the accuracy/fairness trade-off study, (variant, lambda, kernel length)
//! for the kernel sensitivity study — with `runs_per_cell` seeds per cell,
//! and reports per-cell means and standard errors.
//!
//! Seeding: each cell derives its own seed stream from the sweep's master
//! seed and the cell's identity (variant salt, lambda bits). Kernel-length
//! cells deliberately *exclude* the length from the derivation, so cells
//! along the length axis share seeds (common random numbers) and a
//! zero-lambda row is exactly flat.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::exec::{par_map, Execution};
use crate::penalties::{KernelSpec, PenaltyConfig};
use crate::training::{train, RepeatedRuns, TrainConfig, TrainResult};

/// Lambda grid for the main trade-off sweep: powers of two plus one
/// refinement at 14, where the mmd penalties sit on the knee between "gap
/// barely moves" (8) and "accuracy starts to slide" (16). The top of the
/// grid reaches the regimes where the correlation penalty collapses
/// accuracy and the mmd penalties reach near-parity.
pub const DEFAULT_LAMBDA_GRID: [f64; 11] =
    [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 14.0, 16.0, 32.0, 64.0];

/// Lambdas at which kernel lengths are swept. The larger one shows the
/// length sensitivity most clearly.
pub const DEFAULT_KERNEL_SWEEP_LAMBDAS: [f64; 2] = [1.0, 8.0];

/// Ten kernel lengths log-spaced over [1e-3, 1e1].
pub fn default_kernel_length_grid() -> Vec<f64> {
    let (lo, hi) = (1e-3f64.log10(), 1e1f64.log10());
    (0..10)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / 9.0))
        .collect()
}

fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with distinguishing tags into an independent seed.
/// Order-sensitive: `derive_seed(s, &[a, b]) != derive_seed(s, &[b, a])`.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag));
    }
    state
}

/// Which penalty family a sweep cell trains with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PenaltyVariant {
    Correlation,
    MmdGaussian,
    MmdLaplace,
}

impl PenaltyVariant {
    pub const ALL: [PenaltyVariant; 3] = [
        PenaltyVariant::Correlation,
        PenaltyVariant::MmdGaussian,
        PenaltyVariant::MmdLaplace,
    ];

    /// Stable identifier used in CSV output and seed derivation.
    pub fn id(self) -> &'static str {
        match self {
            PenaltyVariant::Correlation => "corr",
            PenaltyVariant::MmdGaussian => "mmd_gaussian",
            PenaltyVariant::MmdLaplace => "mmd_laplace",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        PenaltyVariant::ALL
            .into_iter()
            .find(|v| v.id() == id)
            .ok_or_else(|| Error::Config(format!("unknown penalty variant {id:?}")))
    }

    fn salt(self) -> u64 {
        match self {
            PenaltyVariant::Correlation => 1,
            PenaltyVariant::MmdGaussian => 2,
            PenaltyVariant::MmdLaplace => 3,
        }
    }

    /// Penalty configuration at the given strength. `kernel_length` is
    /// ignored by the correlation variant.
    pub fn penalty_config(self, weight: f64, kernel_length: f64) -> Result<PenaltyConfig> {
        Ok(match self {
            PenaltyVariant::Correlation => PenaltyConfig::correlation(weight),
            PenaltyVariant::MmdGaussian => {
                PenaltyConfig::mmd(KernelSpec::gaussian(kernel_length)?, weight)
            }
            PenaltyVariant::MmdLaplace => {
                PenaltyConfig::mmd(KernelSpec::laplace(kernel_length)?, weight)
            }
        })
    }

    /// Whether the variant has a kernel length to configure.
    pub fn uses_kernel(self) -> bool {
        self != PenaltyVariant::Correlation
    }
}

/// Grid description for the lambda sweep. `base.penalty` is replaced cell
/// by cell; `base.seed` is the master seed every cell derives from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: TrainConfig,
    pub variants: Vec<PenaltyVariant>,
    pub lambdas: Vec<f64>,
    /// Kernel length used by the mmd variants.
    pub kernel_length: f64,
    pub runs_per_cell: usize,
}

impl SweepSpec {
    pub fn new(base: TrainConfig) -> Self {
        SweepSpec {
            base,
            variants: PenaltyVariant::ALL.to_vec(),
            lambdas: DEFAULT_LAMBDA_GRID.to_vec(),
            kernel_length: 0.1,
            runs_per_cell: 5,
        }
    }

    fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.variants.is_empty() || self.lambdas.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.runs_per_cell == 0 {
            return Err(Error::Config("runs_per_cell must be at least 1".into()));
        }
        for &l in &self.lambdas {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!("lambda must be finite and >= 0, got {l}")));
            }
        }
        KernelSpec::gaussian(self.kernel_length)?;
        Ok(())
    }
}

/// Aggregated result of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub variant: PenaltyVariant,
    /// Name of the swept axis (`"lambda"` for [`sweep`]).
    pub swept_param: String,
    /// Value on the swept axis.
    pub value: f64,
    /// Successful runs.
    pub runs: usize,
    /// Failed runs.
    pub failed: usize,
    /// First seed of the cell's seed stream.
    pub seed_base: u64,
    /// Truncated sha256 of the cell's training configuration.
    pub config_hash: String,
    pub mean_accuracy: f64,
    pub stderr_accuracy: f64,
    pub mean_fpr_gap: f64,
    pub stderr_fpr_gap: f64,
    pub single_run: bool,
}

/// Column order of [`sweep_csv`].
pub const SWEEP_CSV_HEADER: &str = "variant,swept_param,value,runs,failed,seed_base,\
config_hash,mean_accuracy,stderr_accuracy,mean_fpr_gap,stderr_fpr_gap,single_run";

impl SweepPoint {
    fn from_cell(
        variant: PenaltyVariant,
        swept_param: &str,
        value: f64,
        seed_base: u64,
        config_hash: String,
        agg: &RepeatedRuns,
    ) -> SweepPoint {
        SweepPoint {
            variant,
            swept_param: swept_param.to_string(),
            value,
            runs: agg.runs.len(),
            failed: agg.failures.len(),
            seed_base,
            config_hash,
            mean_accuracy: agg.test_accuracy.mean,
            stderr_accuracy: agg.test_accuracy.stderr,
            mean_fpr_gap: agg.test_fpr_gap.mean,
            stderr_fpr_gap: agg.test_fpr_gap.stderr,
            single_run: agg.single_run,
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.variant.id(),
            self.swept_param,
            self.value,
            self.runs,
            self.failed,
            self.seed_base,
            self.config_hash,
            self.mean_accuracy,
            self.stderr_accuracy,
            self.mean_fpr_gap,
            self.stderr_fpr_gap,
            self.single_run,
        )
    }

    pub fn from_csv_row(row: &str) -> Result<SweepPoint> {
        let f = split_fields(row, 12)?;
        Ok(SweepPoint {
            variant: PenaltyVariant::from_id(f[0])?,
            swept_param: f[1].to_string(),
            value: parse_field(f[2], "value")?,
            runs: parse_field(f[3], "runs")?,
            failed: parse_field(f[4], "failed")?,
            seed_base: parse_field(f[5], "seed_base")?,
            config_hash: f[6].to_string(),
            mean_accuracy: parse_field(f[7], "mean_accuracy")?,
            stderr_accuracy: parse_field(f[8], "stderr_accuracy")?,
            mean_fpr_gap: parse_field(f[9], "mean_fpr_gap")?,
            stderr_fpr_gap: parse_field(f[10], "stderr_fpr_gap")?,
            single_run: parse_field(f[11], "single_run")?,
        })
    }
}

fn split_fields(row: &str, expected: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != expected {
        return Err(Error::Config(format!(
            "expected {expected} CSV fields, got {} in {row:?}",
            fields.len()
        )));
    }
    Ok(fields)
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("cannot parse {name} from {s:?}")))
}

fn csv_document<T>(header: &str, rows: &[T], to_row: impl Fn(&T) -> String) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&to_row(r));
        out.push('\n');
    }
    out
}

fn parse_csv_document<T>(
    text: &str,
    header: &str,
    parse: impl Fn(&str) -> Result<T>,
) -> Result<Vec<T>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == header => {}
        other => {
            return Err(Error::Config(format!(
                "bad CSV header: expected {header:?}, got {other:?}"
            )))
        }
    }
    lines.filter(|l| !l.is_empty()).map(parse).collect()
}

/// Render sweep results as CSV (header, one row per cell, trailing newline).
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    csv_document(SWEEP_CSV_HEADER, points, SweepPoint::to_csv_row)
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepPoint>> {
    parse_csv_document(text, SWEEP_CSV_HEADER, SweepPoint::from_csv_row)
}

/// Hash of a cell's full training configuration (seed set to the cell's
/// seed base), truncated for readability.
fn config_hash(config: &TrainConfig) -> String {
    let json = serde_json::to_string(config).expect("TrainConfig always serializes");
    hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
}

struct Cell {
    seed_base: u64,
    config: TrainConfig,
}

/// Train every cell of the grid and aggregate. Cell order: variants outer,
/// lambdas inner. The flat (cell, run) task list is what parallelizes, so
/// `exec` speeds up even single-cell grids with many runs.
pub fn sweep(data: &DataSplit, spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    let mut cells = Vec::new();
    let mut meta = Vec::new();
    for &variant in &spec.variants {
        for &lambda in &spec.lambdas {
            let seed_base = derive_seed(spec.base.seed, &[variant.salt(), lambda.to_bits()]);
            let config = TrainConfig {
                seed: seed_base,
                penalty: variant.penalty_config(lambda, spec.kernel_length)?,
                ..spec.base.clone()
            };
            meta.push((variant, lambda));
            cells.push(Cell { seed_base, config });
        }
    }
    let aggregates = run_cells(data, &cells, spec.runs_per_cell, exec);
    Ok(meta
        .into_iter()
        .zip(&cells)
        .zip(&aggregates)
        .map(|(((variant, lambda), cell), agg)| {
            SweepPoint::from_cell(
                variant,
                "lambda",
                lambda,
                cell.seed_base,
                config_hash(&cell.config),
                agg,
            )
        })
        .collect())
}

/// Run `runs_per_cell` seeds for every cell as one flat parallel task list,
/// then regroup per cell in order.
fn run_cells(
    data: &DataSplit,
    cells: &[Cell],
    runs_per_cell: usize,
    exec: Execution,
) -> Vec<RepeatedRuns> {
    let tasks: Vec<(usize, TrainConfig)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, cell)| {
            (0..runs_per_cell).map(move |ri| {
                (
                    ci,
                    TrainConfig {
                        seed: cell.seed_base.wrapping_add(ri as u64),
                        ..cell.config.clone()
                    },
                )
            })
        })
        .collect();
    let outcomes: Vec<(usize, u64, Result<TrainResult>)> =
        par_map(exec, tasks, |(ci, cfg)| (ci, cfg.seed, train(data, &cfg)));

    let mut per_cell: Vec<Vec<(u64, Result<TrainResult>)>> =
        (0..cells.len()).map(|_| Vec::with_capacity(runs_per_cell)).collect();
    for (ci, seed, outcome) in outcomes {
        per_cell[ci].push((seed, outcome));
    }
    per_cell
        .into_iter()
        .map(|outcomes| RepeatedRuns::from_outcomes(outcomes, runs_per_cell))
        .collect()
}

/// Grid description for the kernel-length sweep. Only mmd variants are
/// allowed — the correlation penalty has no kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSweepSpec {
    pub base: TrainConfig,
    pub variants: Vec<PenaltyVariant>,
    pub lambdas: Vec<f64>,
    pub lengths: Vec<f64>,
    pub runs_per_cell: usize,
}

impl KernelSweepSpec {
    pub fn new(base: TrainConfig) -> Self {
        KernelSweepSpec {
            base,
            variants: vec![PenaltyVariant::MmdGaussian, PenaltyVariant::MmdLaplace],
            lambdas: DEFAULT_KERNEL_SWEEP_LAMBDAS.to_vec(),
            lengths: default_kernel_length_grid(),
            runs_per_cell: 3,
        }
    }

    fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.variants.is_empty() || self.lambdas.is_empty() || self.lengths.is_empty() {
            return Err(Error::Config("kernel sweep grid is empty".into()));
        }
        if self.runs_per_cell == 0 {
            return Err(Error::Config("runs_per_cell must be at least 1".into()));
        }
        for v in &self.variants {
            if !v.uses_kernel() {
                return Err(Error::Config(format!(
                    "kernel sweep over {:?} makes no sense: it has no kernel",
                    v.id()
                )));
            }
        }
        for &l in &self.lambdas {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!("lambda must be finite and >= 0, got {l}")));
            }
        }
        for &len in &self.lengths {
            KernelSpec::gaussian(len)?;
        }
        Ok(())
    }
}

/// Aggregated result of one kernel-sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSweepPoint {
    pub variant: PenaltyVariant,
    pub lambda: f64,
    pub kernel_length: f64,
    pub runs: usize,
    pub failed: usize,
    pub seed_base: u64,
    pub config_hash: String,
    pub mean_accuracy: f64,
    pub stderr_accuracy: f64,
    pub mean_fpr_gap: f64,
    pub stderr_fpr_gap: f64,
    pub single_run: bool,
    /// Within each (variant, lambda) row: lowest mean gap among lengths
    /// whose accuracy is within 0.02 of the row's best.
    pub sweet_spot: bool,
}

/// Column order of [`kernel_sweep_csv`].
pub const KERNEL_SWEEP_CSV_HEADER: &str = "variant,lambda,kernel_length,runs,failed,seed_base,\
config_hash,mean_accuracy,stderr_accuracy,mean_fpr_gap,stderr_fpr_gap,single_run,sweet_spot";

/// Accuracy slack when picking a row's sweet spot.
const SWEET_SPOT_ACCURACY_SLACK: f64 = 0.02;

impl KernelSweepPoint {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.variant.id(),
            self.lambda,
            self.kernel_length,
            self.runs,
            self.failed,
            self.seed_base,
            self.config_hash,
            self.mean_accuracy,
            self.stderr_accuracy,
            self.mean_fpr_gap,
            self.stderr_fpr_gap,
            self.single_run,
            self.sweet_spot,
        )
    }

    pub fn from_csv_row(row: &str) -> Result<KernelSweepPoint> {
        let f = split_fields(row, 13)?;
        Ok(KernelSweepPoint {
            variant: PenaltyVariant::from_id(f[0])?,
            lambda: parse_field(f[1], "lambda")?,
            kernel_length: parse_field(f[2], "kernel_length")?,
            runs: parse_field(f[3], "runs")?,
            failed: parse_field(f[4], "failed")?,
            seed_base: parse_field(f[5], "seed_base")?,
            config_hash: f[6].to_string(),
            mean_accuracy: parse_field(f[7], "mean_accuracy")?,
            stderr_accuracy: parse_field(f[8], "stderr_accuracy")?,
            mean_fpr_gap: parse_field(f[9], "mean_fpr_gap")?,
            stderr_fpr_gap: parse_field(f[10], "stderr_fpr_gap")?,
            single_run: parse_field(f[11], "single_run")?,
            sweet_spot: parse_field(f[12], "sweet_spot")?,
        })
    }
}

pub fn kernel_sweep_csv(points: &[KernelSweepPoint]) -> String {
    csv_document(KERNEL_SWEEP_CSV_HEADER, points, KernelSweepPoint::to_csv_row)
}

pub fn parse_kernel_sweep_csv(text: &str) -> Result<Vec<KernelSweepPoint>> {
    parse_csv_document(text, KERNEL_SWEEP_CSV_HEADER, KernelSweepPoint::from_csv_row)
}

/// Train every (variant, lambda, length) cell. Seeds derive from (variant,
/// lambda) only, so cells along the length axis share seeds: differences
/// across lengths are penalty effects, not seed noise, and lambda = 0 rows
/// are exactly flat.
pub fn kernel_length_sweep(
    data: &DataSplit,
    spec: &KernelSweepSpec,
    exec: Execution,
) -> Result<Vec<KernelSweepPoint>> {
    spec.validate()?;
    let mut cells = Vec::new();
    let mut meta = Vec::new();
    for &variant in &spec.variants {
        for &lambda in &spec.lambdas {
            let seed_base = derive_seed(spec.base.seed, &[variant.salt(), lambda.to_bits()]);
            for &length in &spec.lengths {
                let config = TrainConfig {
                    seed: seed_base,
                    penalty: variant.penalty_config(lambda, length)?,
                    ..spec.base.clone()
                };
                meta.push((variant, lambda, length));
                cells.push(Cell { seed_base, config });
            }
        }
    }
    let aggregates = run_cells(data, &cells, spec.runs_per_cell, exec);
    let mut points: Vec<KernelSweepPoint> = meta
        .into_iter()
        .zip(&cells)
        .zip(aggregates)
        .map(|(((variant, lambda, kernel_length), cell), agg)| KernelSweepPoint {
            variant,
            lambda,
            kernel_length,
            runs: agg.runs.len(),
            failed: agg.failures.len(),
            seed_base: cell.seed_base,
            config_hash: config_hash(&cell.config),
            mean_accuracy: agg.test_accuracy.mean,
            stderr_accuracy: agg.test_accuracy.stderr,
            mean_fpr_gap: agg.test_fpr_gap.mean,
            stderr_fpr_gap: agg.test_fpr_gap.stderr,
            single_run: agg.single_run,
            sweet_spot: false,
        })
        .collect();
    mark_sweet_spots(&mut points);
    Ok(points)
}

/// Flag one point per (variant, lambda) row: the lowest mean gap among
/// points whose accuracy is within [`SWEET_SPOT_ACCURACY_SLACK`] of the
/// row's best accuracy. Rows whose metrics are all NaN get no flag.
fn mark_sweet_spots(points: &mut [KernelSweepPoint]) {
    let mut rows: Vec<(PenaltyVariant, u64)> = points
        .iter()
        .map(|p| (p.variant, p.lambda.to_bits()))
        .collect();
    rows.sort();
    rows.dedup();
    for (variant, lambda_bits) in rows {
        let row: Vec<usize> = (0..points.len())
            .filter(|&i| {
                points[i].variant == variant && points[i].lambda.to_bits() == lambda_bits
            })
            .collect();
        let best_acc = row
            .iter()
            .map(|&i| points[i].mean_accuracy)
            .filter(|a| a.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let winner = row
            .iter()
            .copied()
            .filter(|&i| {
                points[i].mean_accuracy >= best_acc - SWEET_SPOT_ACCURACY_SLACK
                    && points[i].mean_fpr_gap.is_finite()
            })
            .min_by(|&a, &b| points[a].mean_fpr_gap.total_cmp(&points[b].mean_fpr_gap));
        if let Some(i) = winner {
            points[i].sweet_spot = true;
        }
    }
}

/// A Pareto-optimal sweep point plus how many other points collapsed onto
/// it (bit-identical accuracy and gap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoEntry {
    pub point: SweepPoint,
    pub duplicates: usize,
}

/// Column order of [`pareto_csv`].
pub const PARETO_CSV_HEADER: &str = "variant,swept_param,value,runs,failed,seed_base,\
config_hash,mean_accuracy,stderr_accuracy,mean_fpr_gap,stderr_fpr_gap,single_run,duplicates";

impl ParetoEntry {
    pub fn to_csv_row(&self) -> String {
        format!("{},{}", self.point.to_csv_row(), self.duplicates)
    }

    pub fn from_csv_row(row: &str) -> Result<ParetoEntry> {
        let (point, duplicates) = row
            .rsplit_once(',')
            .ok_or_else(|| Error::Config(format!("bad pareto row {row:?}")))?;
        Ok(ParetoEntry {
            point: SweepPoint::from_csv_row(point)?,
            duplicates: parse_field(duplicates, "duplicates")?,
        })
    }
}

pub fn pareto_csv(entries: &[ParetoEntry]) -> String {
    csv_document(PARETO_CSV_HEADER, entries, ParetoEntry::to_csv_row)
}

pub fn parse_pareto_csv(text: &str) -> Result<Vec<ParetoEntry>> {
    parse_csv_document(text, PARETO_CSV_HEADER, ParetoEntry::from_csv_row)
}

/// True when `q` is at least as good as `p` on both axes (higher accuracy,
/// lower gap) and strictly better on at least one.
fn dominates(q: &SweepPoint, p: &SweepPoint) -> bool {
    q.mean_accuracy >= p.mean_accuracy
        && q.mean_fpr_gap <= p.mean_fpr_gap
        && (q.mean_accuracy > p.mean_accuracy || q.mean_fpr_gap < p.mean_fpr_gap)
}

/// Non-dominated subset of a sweep, sorted by gap ascending. Points with
/// bit-identical (accuracy, gap) collapse into one entry whose `duplicates`
/// counts the collapsed extras. Rejects points with non-finite means —
/// cells whose runs all failed have no place on a front.
pub fn pareto_front(points: &[SweepPoint]) -> Result<Vec<ParetoEntry>> {
    for p in points {
        if !(p.mean_accuracy.is_finite() && p.mean_fpr_gap.is_finite()) {
            return Err(Error::Metric(format!(
                "non-finite metrics on {} {}={} (accuracy {}, gap {}); drop failed cells first",
                p.variant.id(),
                p.swept_param,
                p.value,
                p.mean_accuracy,
                p.mean_fpr_gap,
            )));
        }
    }
    let mut entries: Vec<ParetoEntry> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if points.iter().enumerate().any(|(j, q)| j != i && dominates(q, p)) {
            continue;
        }
        let key = (p.mean_accuracy.to_bits(), p.mean_fpr_gap.to_bits());
        match entries.iter_mut().find(|e| {
            (e.point.mean_accuracy.to_bits(), e.point.mean_fpr_gap.to_bits()) == key
        }) {
            Some(e) => e.duplicates += 1,
            None => entries.push(ParetoEntry {
                point: p.clone(),
                duplicates: 0,
            }),
        }
    }
    entries.sort_by(|a, b| a.point.mean_fpr_gap.total_cmp(&b.point.mean_fpr_gap));
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::test_support::toy_split;
    use crate::training::run_repeated;

    fn tiny_base() -> TrainConfig {
        TrainConfig {
            seed: 99,
            epochs: 2,
            batch_size: 32,
            hidden_units: 4,
            learning_rate: 0.01,
            ..TrainConfig::default()
        }
    }

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            lambdas: vec![0.0, 1.0],
            runs_per_cell: 2,
            ..SweepSpec::new(tiny_base())
        }
    }

    #[test]
    fn derive_seed_separates_tags() {
        let s = derive_seed(17, &[1, 2]);
        assert_ne!(s, derive_seed(17, &[2, 1]));
        assert_ne!(s, derive_seed(17, &[1, 3]));
        assert_ne!(s, derive_seed(18, &[1, 2]));
        assert_eq!(s, derive_seed(17, &[1, 2]));
    }

    #[test]
    fn default_grids_have_documented_shape() {
        let grid = default_kernel_length_grid();
        assert_eq!(grid.len(), 10);
        assert!((grid[0] - 1e-3).abs() < 1e-12);
        assert!((grid[9] - 1e1).abs() < 1e-9);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(DEFAULT_LAMBDA_GRID[0], 0.0);
    }

    #[test]
    fn sweep_covers_grid_in_order() {
        let data = toy_split(400, 3);
        let points = sweep(&data, &tiny_spec(), Execution::Sequential).unwrap();
        assert_eq!(points.len(), 6); // 3 variants x 2 lambdas
        let got: Vec<(&str, f64)> = points.iter().map(|p| (p.variant.id(), p.value)).collect();
        assert_eq!(
            got,
            vec![
                ("corr", 0.0),
                ("corr", 1.0),
                ("mmd_gaussian", 0.0),
                ("mmd_gaussian", 1.0),
                ("mmd_laplace", 0.0),
                ("mmd_laplace", 1.0),
            ]
        );
        for p in &points {
            assert_eq!(p.swept_param, "lambda");
            assert_eq!(p.runs, 2);
            assert_eq!(p.failed, 0);
            assert!(!p.single_run);
            assert_eq!(p.config_hash.len(), 16);
            assert!(p.mean_accuracy.is_finite());
        }
    }

    #[test]
    fn sweep_cells_match_direct_repeated_runs() {
        let data = toy_split(400, 3);
        let spec = tiny_spec();
        let points = sweep(&data, &spec, Execution::Sequential).unwrap();

        // Recompute the (corr, lambda = 1) cell by hand.
        let seed_base = derive_seed(99, &[1, 1.0f64.to_bits()]);
        let config = TrainConfig {
            seed: seed_base,
            penalty: PenaltyVariant::Correlation.penalty_config(1.0, 0.1).unwrap(),
            ..tiny_base()
        };
        let direct = run_repeated(&data, &config, 2, Execution::Sequential).unwrap();
        let p = &points[1];
        assert_eq!(p.seed_base, seed_base);
        assert_eq!(p.mean_accuracy.to_bits(), direct.test_accuracy.mean.to_bits());
        assert_eq!(p.mean_fpr_gap.to_bits(), direct.test_fpr_gap.mean.to_bits());
    }

    #[test]
    fn sweep_is_deterministic_and_parallel_agrees() {
        let data = toy_split(300, 4);
        let spec = tiny_spec();
        let a = sweep(&data, &spec, Execution::Sequential).unwrap();
        let b = sweep(&data, &spec, Execution::Sequential).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = sweep(&data, &spec, Execution::ParallelWith(2)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn variant_order_does_not_change_cell_results() {
        let data = toy_split(300, 4);
        let spec = tiny_spec();
        let reversed = SweepSpec {
            variants: spec.variants.iter().rev().copied().collect(),
            ..spec.clone()
        };
        let a = sweep(&data, &spec, Execution::Sequential).unwrap();
        let b = sweep(&data, &reversed, Execution::Sequential).unwrap();
        for p in &a {
            let q = b
                .iter()
                .find(|q| q.variant == p.variant && q.value == p.value)
                .unwrap();
            assert_eq!(p.mean_accuracy.to_bits(), q.mean_accuracy.to_bits());
            assert_eq!(p.config_hash, q.config_hash);
        }
    }

    #[test]
    fn kernel_sweep_lambda_zero_rows_are_exactly_flat() {
        let data = toy_split(300, 5);
        let spec = KernelSweepSpec {
            lambdas: vec![0.0, 0.5],
            lengths: vec![1e-3, 0.1, 1.0],
            runs_per_cell: 2,
            variants: vec![PenaltyVariant::MmdGaussian],
            ..KernelSweepSpec::new(tiny_base())
        };
        let points = kernel_length_sweep(&data, &spec, Execution::Sequential).unwrap();
        assert_eq!(points.len(), 6);
        let zero_row: Vec<&KernelSweepPoint> =
            points.iter().filter(|p| p.lambda == 0.0).collect();
        assert_eq!(zero_row.len(), 3);
        for p in &zero_row[1..] {
            // Same seeds + inert penalty: identical to the last bit.
            assert_eq!(p.mean_accuracy.to_bits(), zero_row[0].mean_accuracy.to_bits());
            assert_eq!(p.mean_fpr_gap.to_bits(), zero_row[0].mean_fpr_gap.to_bits());
            // But the configs differ, so the hashes must not collide.
            assert_ne!(p.config_hash, zero_row[0].config_hash);
        }
        assert_eq!(points.iter().filter(|p| p.sweet_spot).count(), 2); // one per lambda row
    }

    #[test]
    fn kernel_sweep_rejects_correlation_variant() {
        let spec = KernelSweepSpec {
            variants: vec![PenaltyVariant::Correlation],
            ..KernelSweepSpec::new(tiny_base())
        };
        let data = toy_split(100, 5);
        assert!(matches!(
            kernel_length_sweep(&data, &spec, Execution::Sequential),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sweet_spot_picks_lowest_gap_within_accuracy_slack() {
        let mk = |acc: f64, gap: f64, len: f64| KernelSweepPoint {
            variant: PenaltyVariant::MmdGaussian,
            lambda: 1.0,
            kernel_length: len,
            runs: 1,
            failed: 0,
            seed_base: 0,
            config_hash: "x".into(),
            mean_accuracy: acc,
            stderr_accuracy: 0.0,
            mean_fpr_gap: gap,
            stderr_fpr_gap: 0.0,
            single_run: true,
            sweet_spot: false,
        };
        // The lowest-gap point (gap 0.01) costs 5 accuracy points, outside
        // the 0.02 slack; the sweet spot is the 0.005-length point.
        let mut points = vec![
            mk(0.85, 0.10, 0.001),
            mk(0.80, 0.01, 0.005),
            mk(0.84, 0.03, 0.1),
            mk(0.85, 0.08, 1.0),
        ];
        mark_sweet_spots(&mut points);
        let flags: Vec<bool> = points.iter().map(|p| p.sweet_spot).collect();
        assert_eq!(flags, vec![false, false, true, false]);
    }

    fn point(acc: f64, gap: f64) -> SweepPoint {
        SweepPoint {
            variant: PenaltyVariant::Correlation,
            swept_param: "lambda".into(),
            value: 1.0,
            runs: 1,
            failed: 0,
            seed_base: 7,
            config_hash: "deadbeefdeadbeef".into(),
            mean_accuracy: acc,
            stderr_accuracy: 0.0,
            mean_fpr_gap: gap,
            stderr_fpr_gap: 0.0,
            single_run: true,
        }
    }

    #[test]
    fn pareto_front_hand_case() {
        // (0.9, 0.10) and (0.8, 0.05) trade off; (0.85, 0.20) is dominated
        // by the first; (0.8, 0.05) repeats bit-identically.
        let points = vec![
            point(0.9, 0.10),
            point(0.85, 0.20),
            point(0.8, 0.05),
            point(0.8, 0.05),
        ];
        let front = pareto_front(&points).unwrap();
        assert_eq!(front.len(), 2);
        assert_eq!(front[0].point.mean_fpr_gap, 0.05); // sorted by gap
        assert_eq!(front[0].duplicates, 1);
        assert_eq!(front[1].point.mean_accuracy, 0.9);
        assert_eq!(front[1].duplicates, 0);
    }

    #[test]
    fn pareto_front_equal_axis_cases() {
        // Same accuracy, different gaps: only the lower gap survives.
        let front = pareto_front(&[point(0.9, 0.1), point(0.9, 0.2)]).unwrap();
        assert_eq!(front.len(), 1);
        assert_eq!(front[0].point.mean_fpr_gap, 0.1);
        // Empty input: empty front.
        assert!(pareto_front(&[]).unwrap().is_empty());
    }

    #[test]
    fn pareto_front_matches_quadratic_oracle() {
        // Deterministic pseudo-grid of 60 points with planted duplicates.
        let mut pts = Vec::new();
        for i in 0..60u64 {
            let acc = 0.7 + 0.25 * ((splitmix64(i) % 1000) as f64 / 1000.0);
            let gap = 0.01 + 0.2 * ((splitmix64(i ^ 0xabcd) % 1000) as f64 / 1000.0);
            pts.push(point(acc, gap));
        }
        pts.push(pts[3].clone());
        pts.push(pts[3].clone());

        let front = pareto_front(&pts).unwrap();

        // Oracle: quadratic scan, then exact dedup by bits.
        let mut surviving: Vec<&SweepPoint> = pts
            .iter()
            .filter(|p| !pts.iter().any(|q| dominates(q, p)))
            .collect();
        surviving.sort_by(|a, b| a.mean_fpr_gap.total_cmp(&b.mean_fpr_gap));
        let mut expected: Vec<((u64, u64), usize)> = Vec::new();
        for p in surviving {
            let key = (p.mean_accuracy.to_bits(), p.mean_fpr_gap.to_bits());
            match expected.iter_mut().find(|(k, _)| *k == key) {
                Some((_, n)) => *n += 1,
                None => expected.push((key, 0)),
            }
        }
        assert_eq!(front.len(), expected.len());
        for (e, (key, dups)) in front.iter().zip(expected) {
            assert_eq!(
                (e.point.mean_accuracy.to_bits(), e.point.mean_fpr_gap.to_bits()),
                key
            );
            assert_eq!(e.duplicates, dups);
        }
        // Every front point is non-dominated and every non-front point is
        // dominated or a duplicate.
        let total: usize = front.iter().map(|e| 1 + e.duplicates).sum();
        let non_dominated = pts
            .iter()
            .filter(|p| !pts.iter().any(|q| dominates(q, p)))
            .count();
        assert_eq!(total, non_dominated);
    }

    #[test]
    fn pareto_front_rejects_nan_metrics() {
        let mut bad = point(0.9, 0.1);
        bad.mean_fpr_gap = f64::NAN;
        assert!(matches!(
            pareto_front(&[point(0.8, 0.2), bad]),
            Err(Error::Metric(_))
        ));
    }

    #[test]
    fn csv_round_trips_exactly() {
        let mut p = point(0.1 + 0.2, f64::MIN_POSITIVE); // awkward floats on purpose
        p.stderr_accuracy = 1.0 / 3.0;
        p.value = 0.25;
        let q = SweepPoint::from_csv_row(&p.to_csv_row()).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.mean_accuracy.to_bits(), q.mean_accuracy.to_bits());

        let doc = sweep_csv(&[p.clone()]);
        assert!(doc.starts_with(SWEEP_CSV_HEADER));
        assert!(doc.ends_with('\n'));
        assert_eq!(parse_sweep_csv(&doc).unwrap(), vec![p.clone()]);

        let entry = ParetoEntry {
            point: p.clone(),
            duplicates: 3,
        };
        let doc = pareto_csv(std::slice::from_ref(&entry));
        assert_eq!(parse_pareto_csv(&doc).unwrap(), vec![entry]);

        let kp = KernelSweepPoint {
            variant: PenaltyVariant::MmdLaplace,
            lambda: 0.1,
            kernel_length: 0.046415888336127795,
            runs: 3,
            failed: 1,
            seed_base: u64::MAX,
            config_hash: "0123456789abcdef".into(),
            mean_accuracy: 0.8433333333333333,
            stderr_accuracy: 0.002,
            mean_fpr_gap: f64::NAN,
            stderr_fpr_gap: f64::NAN,
            single_run: false,
            sweet_spot: true,
        };
        let back = KernelSweepPoint::from_csv_row(&kp.to_csv_row()).unwrap();
        // NaN != NaN, so compare through bits where it matters.
        assert_eq!(back.mean_fpr_gap.to_bits(), kp.mean_fpr_gap.to_bits());
        assert_eq!(back.kernel_length.to_bits(), kp.kernel_length.to_bits());
        assert!(back.sweet_spot);
        let doc = kernel_sweep_csv(&[kp]);
        assert_eq!(parse_kernel_sweep_csv(&doc).unwrap().len(), 1);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(parse_sweep_csv("wrong,header\n").is_err());
        let doc = format!("{SWEEP_CSV_HEADER}\ncorr,lambda,notanumber,1,0,7,h,0.8,0,0.1,0,true\n");
        assert!(parse_sweep_csv(&doc).is_err());
        let doc = format!("{SWEEP_CSV_HEADER}\ncorr,lambda,0.5\n");
        assert!(parse_sweep_csv(&doc).is_err());
    }

    #[test]
    fn sweep_validation_rejects_bad_grids() {
        let data = toy_split(50, 1);
        let mut spec = tiny_spec();
        spec.lambdas.clear();
        assert!(sweep(&data, &spec, Execution::Sequential).is_err());
        let mut spec = tiny_spec();
        spec.lambdas = vec![-1.0];
        assert!(sweep(&data, &spec, Execution::Sequential).is_err());
        let mut spec = tiny_spec();
        spec.runs_per_cell = 0;
        assert!(sweep(&data, &spec, Execution::Sequential).is_err());
        let mut spec = tiny_spec();
        spec.kernel_length = 0.0;
        assert!(sweep(&data, &spec, Execution::Sequential).is_err());
    }
}
