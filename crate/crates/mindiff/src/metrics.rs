//! Classification and group fairness metrics.
//!
//! Everything here works on hard decisions derived from scores with a strict
//! `score > threshold` rule. Per-group false positive rates can be undefined
//! (a group may have no negative examples in the evaluation set); undefined
//! cells are represented as `None`, never as NaN.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Group;

/// Hard decision per score: positive iff the score strictly exceeds the
/// threshold.
pub fn classify(preds: &Array1<f64>, threshold: f64) -> Vec<bool> {
    preds.iter().map(|&p| p > threshold).collect()
}

/// Decision counts split by group, label, and decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecisionCounts {
    /// `cells[group][label][decision]`, group index 2 is `Unknown`.
    pub cells: [[[u64; 2]; 2]; 3],
}

impl DecisionCounts {
    fn group_index(g: Group) -> usize {
        match g {
            Group::Group0 => 0,
            Group::Group1 => 1,
            Group::Unknown => 2,
        }
    }

    fn record(&mut self, group: Group, label: bool, decision: bool) {
        self.cells[Self::group_index(group)][usize::from(label)][usize::from(decision)] += 1;
    }

    pub fn count(&self, group: Group, label: bool, decision: bool) -> u64 {
        self.cells[Self::group_index(group)][usize::from(label)][usize::from(decision)]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().flatten().sum()
    }

    /// False positive rate for one group; `None` if the group has no
    /// negatives.
    pub fn fpr(&self, group: Group) -> Option<f64> {
        let gi = Self::group_index(group);
        let negatives = self.cells[gi][0][0] + self.cells[gi][0][1];
        if negatives == 0 {
            None
        } else {
            Some(self.cells[gi][0][1] as f64 / negatives as f64)
        }
    }
}

/// Evaluation summary for one model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Fraction of correct decisions over all rows, unknown group included.
    pub accuracy: f64,
    /// FPR on group-0 rows; `None` if the group has no negatives.
    pub fpr_group0: Option<f64>,
    /// FPR on group-1 rows; `None` if the group has no negatives.
    pub fpr_group1: Option<f64>,
    /// `|fpr_group1 - fpr_group0|`; `None` if either rate is undefined.
    pub fpr_gap: Option<f64>,
    /// `fpr_group1 / fpr_group0`; `None` if either rate is undefined or the
    /// denominator is zero.
    pub fpr_ratio: Option<f64>,
    /// Threshold the decisions were made with.
    pub threshold: f64,
    pub counts: DecisionCounts,
}

/// Column order of [`EvalReport::to_csv_row`]. Count columns are named
/// `<group>_y<label>_d<decision>`.
pub const EVAL_CSV_HEADER: &str = "accuracy,fpr_group0,fpr_group1,fpr_gap,fpr_ratio,threshold,\
g0_y0_d0,g0_y0_d1,g0_y1_d0,g0_y1_d1,\
g1_y0_d0,g1_y0_d1,g1_y1_d0,g1_y1_d1,\
gu_y0_d0,gu_y0_d1,gu_y1_d0,gu_y1_d1";

fn opt_to_csv(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_from_csv(field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        field
            .parse::<f64>()
            .map(Some)
            .map_err(|e| Error::Ingestion(format!("bad float {field:?}: {e}")))
    }
}

impl EvalReport {
    /// One CSV row in [`EVAL_CSV_HEADER`] order; undefined metrics serialize
    /// as empty fields.
    pub fn to_csv_row(&self) -> String {
        let mut fields = vec![
            self.accuracy.to_string(),
            opt_to_csv(self.fpr_group0),
            opt_to_csv(self.fpr_group1),
            opt_to_csv(self.fpr_gap),
            opt_to_csv(self.fpr_ratio),
            self.threshold.to_string(),
        ];
        for group in self.counts.cells {
            for label in group {
                for count in label {
                    fields.push(count.to_string());
                }
            }
        }
        fields.join(",")
    }

    /// Parse a row produced by [`EvalReport::to_csv_row`].
    pub fn from_csv_row(row: &str) -> Result<EvalReport> {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 18 {
            return Err(Error::Ingestion(format!(
                "eval row has {} fields, expected 18",
                fields.len()
            )));
        }
        let float = |f: &str| {
            f.parse::<f64>()
                .map_err(|e| Error::Ingestion(format!("bad float {f:?}: {e}")))
        };
        let mut cells = [[[0u64; 2]; 2]; 3];
        for (k, f) in fields[6..].iter().enumerate() {
            cells[k / 4][(k / 2) % 2][k % 2] = f
                .parse::<u64>()
                .map_err(|e| Error::Ingestion(format!("bad count {f:?}: {e}")))?;
        }
        Ok(EvalReport {
            accuracy: float(fields[0])?,
            fpr_group0: opt_from_csv(fields[1])?,
            fpr_group1: opt_from_csv(fields[2])?,
            fpr_gap: opt_from_csv(fields[3])?,
            fpr_ratio: opt_from_csv(fields[4])?,
            threshold: float(fields[5])?,
            counts: DecisionCounts { cells },
        })
    }
}

fn check_eval_inputs(preds: &Array1<f64>, labels: &Array1<f64>, groups: &[Group]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::Metric("evaluation set is empty".into()));
    }
    if preds.len() != labels.len() || preds.len() != groups.len() {
        return Err(Error::DimensionMismatch(format!(
            "evaluation lengths disagree: preds {}, labels {}, groups {}",
            preds.len(),
            labels.len(),
            groups.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::Config(format!("labels must be 0 or 1, got {bad}")));
    }
    Ok(())
}

/// Score a model's predictions: accuracy plus per-group false positive rates
/// and their gap/ratio.
pub fn evaluate(
    preds: &Array1<f64>,
    labels: &Array1<f64>,
    groups: &[Group],
    threshold: f64,
) -> Result<EvalReport> {
    check_eval_inputs(preds, labels, groups)?;
    if !threshold.is_finite() {
        return Err(Error::Config(format!("threshold must be finite, got {threshold}")));
    }

    let decisions = classify(preds, threshold);
    let mut counts = DecisionCounts::default();
    let mut correct = 0u64;
    for ((&label, &group), &decision) in labels.iter().zip(groups).zip(&decisions) {
        let label = label == 1.0;
        counts.record(group, label, decision);
        if label == decision {
            correct += 1;
        }
    }

    let fpr0 = counts.fpr(Group::Group0);
    let fpr1 = counts.fpr(Group::Group1);
    let fpr_gap = match (fpr0, fpr1) {
        (Some(a), Some(b)) => Some((b - a).abs()),
        _ => None,
    };
    let fpr_ratio = match (fpr0, fpr1) {
        (Some(a), Some(b)) if a > 0.0 => Some(b / a),
        _ => None,
    };

    Ok(EvalReport {
        accuracy: correct as f64 / preds.len() as f64,
        fpr_group0: fpr0,
        fpr_group1: fpr1,
        fpr_gap,
        fpr_ratio,
        threshold,
        counts,
    })
}

/// Largest threshold among the distinct prediction values whose recall (with
/// the strict `>` decision rule) reaches `target`. If no candidate reaches it
/// — e.g. target 1.0 while the smallest prediction is a positive — the result
/// is just below the smallest prediction, which classifies everything
/// positive.
pub fn threshold_for_recall(preds: &Array1<f64>, labels: &Array1<f64>, target: f64) -> Result<f64> {
    check_eval_inputs(preds, labels, &vec![Group::Unknown; preds.len()])?;
    if !(target.is_finite() && target > 0.0 && target <= 1.0) {
        return Err(Error::Config(format!(
            "target recall must lie in (0, 1], got {target}"
        )));
    }

    let mut positives: Vec<f64> = preds
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1.0)
        .map(|(&p, _)| p)
        .collect();
    if positives.is_empty() {
        return Err(Error::Metric("recall is undefined without positive examples".into()));
    }
    positives.sort_by(f64::total_cmp);
    let n_pos = positives.len() as f64;

    let mut candidates: Vec<f64> = preds.to_vec();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // Recall is non-increasing in the threshold, so the first candidate that
    // reaches the target while scanning downward is the largest one.
    for &t in candidates.iter().rev() {
        let above = positives.len() - positives.partition_point(|&p| p <= t);
        if above as f64 / n_pos >= target {
            return Ok(t);
        }
    }
    Ok(f64::next_down(candidates[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn classify_uses_strict_inequality() {
        let decisions = classify(&array![0.2, 0.5, 0.51], 0.5);
        assert_eq!(decisions, vec![false, false, true]);
    }

    #[test]
    fn evaluate_hand_counted_case() {
        // All labels negative; decisions [1, 0, 1, 1]; groups [0, 0, 1, 1].
        // Group0: 1 FP out of 2 negatives -> 0.5. Group1: 2/2 -> 1.0.
        let report = evaluate(
            &array![0.9, 0.1, 0.8, 0.7],
            &array![0.0, 0.0, 0.0, 0.0],
            &[Group::Group0, Group::Group0, Group::Group1, Group::Group1],
            0.5,
        )
        .unwrap();
        assert_eq!(report.accuracy, 0.25);
        assert_eq!(report.fpr_group0, Some(0.5));
        assert_eq!(report.fpr_group1, Some(1.0));
        assert_eq!(report.fpr_gap, Some(0.5));
        assert_eq!(report.fpr_ratio, Some(2.0));
        assert_eq!(report.counts.total(), 4);
        assert_eq!(report.counts.count(Group::Group0, false, true), 1);
    }

    #[test]
    fn evaluate_all_negative_decisions_gives_zero_gap() {
        let report = evaluate(
            &array![0.1, 0.2, 0.3, 0.4],
            &array![0.0, 1.0, 0.0, 1.0],
            &[Group::Group0, Group::Group0, Group::Group1, Group::Group1],
            0.5,
        )
        .unwrap();
        assert_eq!(report.fpr_group0, Some(0.0));
        assert_eq!(report.fpr_group1, Some(0.0));
        assert_eq!(report.fpr_gap, Some(0.0));
        // 0/0 ratio is undefined, reported as a flag rather than NaN.
        assert_eq!(report.fpr_ratio, None);
        assert_eq!(report.accuracy, 0.5);
    }

    #[test]
    fn evaluate_flags_group_without_negatives() {
        let report = evaluate(
            &array![0.9, 0.2, 0.6],
            &array![1.0, 0.0, 1.0],
            &[Group::Group1, Group::Group0, Group::Group1],
            0.5,
        )
        .unwrap();
        assert_eq!(report.fpr_group0, Some(0.0));
        assert_eq!(report.fpr_group1, None);
        assert_eq!(report.fpr_gap, None);
        assert_eq!(report.fpr_ratio, None);
    }

    #[test]
    fn evaluate_counts_unknown_group_in_accuracy() {
        let report = evaluate(
            &array![0.9, 0.1],
            &array![1.0, 1.0],
            &[Group::Unknown, Group::Unknown],
            0.5,
        )
        .unwrap();
        assert_eq!(report.accuracy, 0.5);
        assert_eq!(report.counts.count(Group::Unknown, true, true), 1);
        assert_eq!(report.fpr_group0, None);
    }

    #[test]
    fn evaluate_input_validation() {
        let empty: Array1<f64> = array![];
        assert!(matches!(
            evaluate(&empty, &empty, &[], 0.5),
            Err(Error::Metric(_))
        ));
        assert!(matches!(
            evaluate(&array![0.5], &array![1.0, 0.0], &[Group::Group0], 0.5),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            evaluate(&array![0.5], &array![0.7], &[Group::Group0], 0.5),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            evaluate(&array![0.5], &array![1.0], &[Group::Group0], f64::NAN),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn csv_row_round_trips() {
        let report = evaluate(
            &array![0.9, 0.1, 0.8, 0.7],
            &array![0.0, 0.0, 0.0, 0.0],
            &[Group::Group0, Group::Group0, Group::Group1, Group::Unknown],
            0.5,
        )
        .unwrap();
        assert_eq!(EVAL_CSV_HEADER.split(',').count(), 18);
        let row = report.to_csv_row();
        assert_eq!(row.split(',').count(), 18);
        assert_eq!(EvalReport::from_csv_row(&row).unwrap(), report);
    }

    #[test]
    fn threshold_for_recall_blessed_example() {
        // Positives score 0.9 and 0.7. Any threshold in [0.7, 0.9) yields
        // recall 0.5; the largest candidate value in that range is 0.7.
        let t = threshold_for_recall(&array![0.9, 0.7, 0.3], &array![1.0, 1.0, 0.0], 0.5).unwrap();
        assert_eq!(t, 0.7);
    }

    #[test]
    fn threshold_for_recall_full_recall_falls_below_minimum() {
        // Recall 1.0 requires every positive strictly above the threshold;
        // with the minimum prediction itself positive the result must drop
        // just below it.
        let preds = array![0.9, 0.3, 0.5];
        let labels = array![1.0, 1.0, 0.0];
        let t = threshold_for_recall(&preds, &labels, 1.0).unwrap();
        assert_eq!(t, f64::next_down(0.3));
        let decisions = classify(&preds, t);
        assert_eq!(decisions, vec![true, true, true]);
    }

    #[test]
    fn threshold_for_recall_handles_duplicate_scores() {
        let preds = array![0.8, 0.8, 0.8, 0.2, 0.2];
        let labels = array![1.0, 1.0, 0.0, 1.0, 0.0];
        // recall(0.2) = 2/3 (the 0.8s), recall(next_down(0.2)) would be 1.
        let t = threshold_for_recall(&preds, &labels, 0.5).unwrap();
        assert_eq!(t, 0.2);
        let t = threshold_for_recall(&preds, &labels, 0.9).unwrap();
        assert_eq!(t, f64::next_down(0.2));
    }

    #[test]
    fn threshold_for_recall_validation() {
        let preds = array![0.5, 0.6];
        assert!(matches!(
            threshold_for_recall(&preds, &array![0.0, 0.0], 0.5),
            Err(Error::Metric(_))
        ));
        for bad in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(
                threshold_for_recall(&preds, &array![1.0, 0.0], bad),
                Err(Error::Config(_))
            ));
        }
    }

    /// Exhaustive scan over candidate thresholds as an independent oracle.
    #[test]
    fn threshold_for_recall_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for _ in 0..200 {
            let n = rng.random_range(2..30);
            let preds: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..10)) / 10.0).collect();
            let labels: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..2))).collect();
            if !labels.contains(&1.0) {
                continue;
            }
            let target = f64::from(rng.random_range(1..=10)) / 10.0;

            let preds = Array1::from_vec(preds);
            let labels = Array1::from_vec(labels);
            let got = threshold_for_recall(&preds, &labels, target).unwrap();

            // Oracle: try every distinct value, pick the largest whose recall
            // reaches the target; otherwise next_down(min).
            let n_pos = labels.iter().filter(|&&y| y == 1.0).count() as f64;
            let recall_at = |t: f64| {
                preds
                    .iter()
                    .zip(&labels)
                    .filter(|&(&p, &y)| y == 1.0 && p > t)
                    .count() as f64
                    / n_pos
            };
            let mut distinct: Vec<f64> = preds.to_vec();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let expected = distinct
                .iter()
                .rev()
                .find(|&&t| recall_at(t) >= target)
                .copied()
                .unwrap_or_else(|| f64::next_down(distinct[0]));

            assert_eq!(got, expected);
            assert!(recall_at(got) >= target, "post-condition violated");
        }
    }
}
