//! MinDiff fairness penalties: absolute correlation and kernel MMD.
//!
//! Both penalties compare the score distributions that a classifier produces
//! on the *negative* (label 0) examples of the two sensitive groups. Training
//! adds `weight * penalty` to the primary loss, which pushes the false
//! positive behaviour of the groups together.
//!
//! The MMD estimator is the biased V-statistic form (diagonal terms
//! included, no square root):
//!
//! ```text
//! mmd^2 = (1/m^2) sum_ij k(a_i, a_j)
//!       - (2/mn)  sum_ij k(a_i, b_j)
//!       + (1/n^2) sum_ij k(b_i, b_j)
//! ```
//!
//! Gradients with respect to every sample point are computed analytically in
//! the same pass as the value.

use std::cmp::Ordering;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Batch;

/// Standard deviations below this are treated as zero when deciding whether
/// the correlation penalty is defined.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Kernel family for the MMD penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Laplace,
}

impl KernelFamily {
    pub fn id(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplace => "laplace",
        }
    }
}

/// A kernel family plus its length scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub length: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, length: f64) -> Result<KernelSpec> {
        let spec = KernelSpec { family, length };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(length: f64) -> Result<KernelSpec> {
        KernelSpec::new(KernelFamily::Gaussian, length)
    }

    pub fn laplace(length: f64) -> Result<KernelSpec> {
        KernelSpec::new(KernelFamily::Laplace, length)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::Config(format!(
                "kernel length must be positive and finite, got {}",
                self.length
            )));
        }
        Ok(())
    }

    /// Kernel value at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        match self.family {
            KernelFamily::Gaussian => (-(d * d) / (self.length * self.length)).exp(),
            KernelFamily::Laplace => (-d.abs() / self.length).exp(),
        }
    }

    /// Kernel value and its partial derivative with respect to `x`. The
    /// Laplace kernel uses subgradient 0 at `x == y`.
    fn eval_with_grad(&self, x: f64, y: f64) -> (f64, f64) {
        let d = x - y;
        match self.family {
            KernelFamily::Gaussian => {
                let k = (-(d * d) / (self.length * self.length)).exp();
                (k, -2.0 * d / (self.length * self.length) * k)
            }
            KernelFamily::Laplace => {
                let k = (-d.abs() / self.length).exp();
                let s = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                (k, -s / self.length * k)
            }
        }
    }
}

/// Gaussian kernel `exp(-(x - y)^2 / length^2)`.
pub fn gaussian_kernel(x: f64, y: f64, length: f64) -> Result<f64> {
    Ok(KernelSpec::gaussian(length)?.eval(x, y))
}

/// Laplace kernel `exp(-|x - y| / length)`.
pub fn laplace_kernel(x: f64, y: f64, length: f64) -> Result<f64> {
    Ok(KernelSpec::laplace(length)?.eval(x, y))
}

/// MMD^2 value plus gradients with respect to each input sample.
#[derive(Debug, Clone)]
pub struct MmdTerm {
    pub value: f64,
    /// d(mmd^2)/d(s0[i]), aligned with the input order of `s0`.
    pub grad0: Vec<f64>,
    /// d(mmd^2)/d(s1[j]), aligned with the input order of `s1`.
    pub grad1: Vec<f64>,
}

fn sort_with_perm(s: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let sorted = idx.iter().map(|&i| s[i]).collect();
    (sorted, idx)
}

/// Total order on sorted samples: by length, then lexicographic. Used to pick
/// a canonical summation order for the cross term so that
/// `mmd(s0, s1) == mmd(s1, s0)` holds bit for bit.
fn canonical_le(a: &[f64], b: &[f64]) -> bool {
    match a.len().cmp(&b.len()) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => {
            for (x, y) in a.iter().zip(b) {
                match x.total_cmp(y) {
                    Ordering::Less => return true,
                    Ordering::Greater => return false,
                    Ordering::Equal => {}
                }
            }
            true
        }
    }
}

/// `sum_ij k(s_i, s_j)` over one sample with its gradient (unscaled).
fn self_block(s: &[f64], kernel: &KernelSpec) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut grad = vec![0.0; s.len()];
    for (i, &a) in s.iter().enumerate() {
        for (j, &b) in s.iter().enumerate() {
            let (k, dk) = kernel.eval_with_grad(a, b);
            total += k;
            grad[i] += dk;
            grad[j] -= dk;
        }
    }
    (total, grad)
}

/// `sum_ij k(outer_i, inner_j)` with gradients for both sides (unscaled).
fn cross_block(outer: &[f64], inner: &[f64], kernel: &KernelSpec) -> (f64, Vec<f64>, Vec<f64>) {
    let mut total = 0.0;
    let mut g_outer = vec![0.0; outer.len()];
    let mut g_inner = vec![0.0; inner.len()];
    for (i, &a) in outer.iter().enumerate() {
        for (j, &b) in inner.iter().enumerate() {
            let (k, dk) = kernel.eval_with_grad(a, b);
            total += k;
            g_outer[i] += dk;
            g_inner[j] -= dk;
        }
    }
    (total, g_outer, g_inner)
}

/// Biased (V-statistic) squared MMD between two score samples, with analytic
/// gradients for every input point.
///
/// Samples are sorted internally before summation, which makes the value
/// exactly invariant under permutations of either input and exactly zero for
/// identical multisets; gradients are scattered back to input order.
pub fn mmd_squared(s0: &[f64], s1: &[f64], kernel: &KernelSpec) -> Result<MmdTerm> {
    kernel.validate()?;
    if s0.is_empty() || s1.is_empty() {
        return Err(Error::InsufficientSample(format!(
            "mmd needs non-empty samples, got sizes {} and {}",
            s0.len(),
            s1.len()
        )));
    }

    let (sorted0, perm0) = sort_with_perm(s0);
    let (sorted1, perm1) = sort_with_perm(s1);
    let (m, n) = (s0.len() as f64, s1.len() as f64);

    let (t00, g00) = self_block(&sorted0, kernel);
    let (t11, g11) = self_block(&sorted1, kernel);
    let (t01, gc0, gc1) = if canonical_le(&sorted0, &sorted1) {
        cross_block(&sorted0, &sorted1, kernel)
    } else {
        let (t, gi1, gi0) = cross_block(&sorted1, &sorted0, kernel);
        (t, gi0, gi1)
    };

    let value = t00 / (m * m) - 2.0 * t01 / (m * n) + t11 / (n * n);

    let mut grad0 = vec![0.0; s0.len()];
    for (k, &orig) in perm0.iter().enumerate() {
        grad0[orig] = g00[k] / (m * m) - 2.0 * gc0[k] / (m * n);
    }
    let mut grad1 = vec![0.0; s1.len()];
    for (k, &orig) in perm1.iter().enumerate() {
        grad1[orig] = g11[k] / (n * n) - 2.0 * gc1[k] / (m * n);
    }

    Ok(MmdTerm { value, grad0, grad1 })
}

/// Absolute Pearson correlation with its gradient with respect to `x`.
#[derive(Debug, Clone)]
pub struct CorrTerm {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// |Pearson(x, y)| and d|r|/dx for arbitrary real `y`. Returns zero with a
/// zero gradient when either side is (numerically) constant.
pub(crate) fn abs_correlation(x: &[f64], y: &[f64]) -> Result<CorrTerm> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "correlation inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientSample(format!(
            "correlation needs at least 2 points, got {}",
            x.len()
        )));
    }

    let nf = x.len() as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }

    if (sxx / nf).sqrt() < VARIANCE_FLOOR || (syy / nf).sqrt() < VARIANCE_FLOOR {
        return Ok(CorrTerm {
            value: 0.0,
            grad: vec![0.0; x.len()],
        });
    }

    let denom = (sxx * syy).sqrt();
    let r = sxy / denom;
    // d|r|/dx_i = sign(r) * ((y_i - my) - (x_i - mx) * sxy / sxx) / denom,
    // with subgradient 0 at r == 0.
    let sign = if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    };
    let grad = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| sign * ((b - my) - (a - mx) * sxy / sxx) / denom)
        .collect();

    Ok(CorrTerm { value: r.abs(), grad })
}

/// Absolute Pearson correlation between scores and a binary group indicator.
pub fn correlation_penalty(preds: &[f64], group: &[f64]) -> Result<CorrTerm> {
    if let Some(bad) = group.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::Config(format!(
            "group indicator must be 0 or 1, got {bad}"
        )));
    }
    abs_correlation(preds, group)
}

/// Which penalty to apply during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// Primary loss only.
    None,
    /// Absolute Pearson correlation between scores and group membership.
    Correlation,
    /// Kernel MMD between per-group score distributions.
    Mmd,
}

/// Fully specified penalty: kind, kernel (MMD only), weight, and the minimum
/// per-group negative count below which a batch is skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    /// Required for `Mmd`, must be absent otherwise.
    pub kernel: Option<KernelSpec>,
    /// The lambda multiplier applied to the raw penalty.
    pub weight: f64,
    /// Minimum negatives per group for the penalty to engage on a batch.
    pub min_side: usize,
}

pub const DEFAULT_MIN_SIDE: usize = 2;

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig::off()
    }
}

impl PenaltyConfig {
    /// Penalty disabled entirely.
    pub fn off() -> PenaltyConfig {
        PenaltyConfig {
            kind: PenaltyKind::None,
            kernel: None,
            weight: 0.0,
            min_side: DEFAULT_MIN_SIDE,
        }
    }

    pub fn correlation(weight: f64) -> PenaltyConfig {
        PenaltyConfig {
            kind: PenaltyKind::Correlation,
            kernel: None,
            weight,
            min_side: DEFAULT_MIN_SIDE,
        }
    }

    pub fn mmd(kernel: KernelSpec, weight: f64) -> PenaltyConfig {
        PenaltyConfig {
            kind: PenaltyKind::Mmd,
            kernel: Some(kernel),
            weight,
            min_side: DEFAULT_MIN_SIDE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::Config(format!(
                "penalty weight must be non-negative and finite, got {}",
                self.weight
            )));
        }
        match (self.kind, &self.kernel) {
            (PenaltyKind::Mmd, None) => {
                return Err(Error::Config("mmd penalty requires a kernel".into()))
            }
            (PenaltyKind::Mmd, Some(k)) => k.validate()?,
            (_, Some(_)) => {
                return Err(Error::Config(
                    "kernel specified but penalty kind is not mmd".into(),
                ))
            }
            (_, None) => {}
        }
        if self.min_side == 0 {
            return Err(Error::Config("min_side must be at least 1".into()));
        }
        Ok(())
    }
}

/// Weighted penalty value with its gradient on the full prediction vector.
#[derive(Debug, Clone)]
pub struct PenaltyTerm {
    /// `weight * raw_penalty`.
    pub value: f64,
    /// Gradient with respect to every prediction in the batch; entries for
    /// examples the penalty never touches (positives, unknown group) are 0.
    pub grad: Array1<f64>,
    /// True when the batch lacked `min_side` negatives in either group and
    /// the penalty was therefore skipped.
    pub skipped: bool,
}

impl PenaltyTerm {
    fn zero(n: usize, skipped: bool) -> PenaltyTerm {
        PenaltyTerm {
            value: 0.0,
            grad: Array1::zeros(n),
            skipped,
        }
    }
}

/// Evaluate the configured MinDiff penalty on one batch of predictions.
///
/// Only negative (label 0) examples with a known group label participate;
/// everything else receives zero gradient.
pub fn mindiff_penalty(preds: &Array1<f64>, batch: &Batch, config: &PenaltyConfig) -> Result<PenaltyTerm> {
    config.validate()?;
    let n = batch.len();
    if preds.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "predictions have {} entries but batch has {n}",
            preds.len()
        )));
    }
    if config.kind == PenaltyKind::None || config.weight == 0.0 {
        return Ok(PenaltyTerm::zero(n, false));
    }

    // Indices of negatives with known group, in batch order.
    let mut idx = Vec::new();
    let mut scores = Vec::new();
    let mut indicator = Vec::new();
    let mut side_counts = [0usize; 2];
    for i in 0..n {
        if batch.y()[i] != 0.0 {
            continue;
        }
        if let Some(g) = batch.groups()[i].indicator() {
            idx.push(i);
            scores.push(preds[i]);
            indicator.push(g);
            side_counts[g as usize] += 1;
        }
    }
    if side_counts[0] < config.min_side || side_counts[1] < config.min_side {
        return Ok(PenaltyTerm::zero(n, true));
    }

    let mut grad = Array1::zeros(n);
    let value = match config.kind {
        PenaltyKind::None => unreachable!("handled above"),
        PenaltyKind::Correlation => {
            let term = correlation_penalty(&scores, &indicator)?;
            for (&i, g) in idx.iter().zip(&term.grad) {
                grad[i] = config.weight * g;
            }
            config.weight * term.value
        }
        PenaltyKind::Mmd => {
            let kernel = config.kernel.as_ref().expect("validated above");
            let mut s0 = Vec::with_capacity(side_counts[0]);
            let mut i0 = Vec::with_capacity(side_counts[0]);
            let mut s1 = Vec::with_capacity(side_counts[1]);
            let mut i1 = Vec::with_capacity(side_counts[1]);
            for ((&i, &s), &g) in idx.iter().zip(&scores).zip(&indicator) {
                if g == 0.0 {
                    s0.push(s);
                    i0.push(i);
                } else {
                    s1.push(s);
                    i1.push(i);
                }
            }
            let term = mmd_squared(&s0, &s1, kernel)?;
            for (&i, g) in i0.iter().zip(&term.grad0) {
                grad[i] = config.weight * g;
            }
            for (&i, g) in i1.iter().zip(&term.grad1) {
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
