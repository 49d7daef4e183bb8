//! Dataset containers, the UCI Adult loader, and the synthetic pair corpus.

pub mod adult;
pub mod pairs;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Group;

/// One encoded split: dense features, binary labels, sensitive groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub groups: Vec<Group>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        if self.y.len() != self.len() || self.groups.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "dataset rows disagree: x has {}, y has {}, groups has {}",
                self.len(),
                self.y.len(),
                self.groups.len()
            )));
        }
        if let Some(bad) = self.y.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(Error::Config(format!("labels must be 0 or 1, got {bad}")));
        }
        Ok(())
    }
}

/// Train and test splits encoded with the same schema.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Dataset,
    pub test: Dataset,
}

/// Withhold group labels from a random subset of examples, keeping exactly
/// `floor(keep_fraction * n)` of them. Withheld entries become
/// [`Group::Unknown`], which the penalties skip. Evaluation splits should not
/// be masked — masking models a training-time labeling budget.
pub fn mask_group_labels(data: &Dataset, keep_fraction: f64, seed: u64) -> Result<Dataset> {
    if !(keep_fraction.is_finite() && keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "keep fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    let n = data.len();
    let keep = (keep_fraction * n as f64).floor() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut groups = data.groups.clone();
    for &i in &order[keep..] {
        groups[i] = Group::Unknown;
    }
    Ok(Dataset {
        x: data.x.clone(),
        y: data.y.clone(),
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy(n: usize) -> Dataset {
        Dataset {
            x: Array2::zeros((n, 2)),
            y: Array1::from_shape_fn(n, |i| f64::from(u8::from(i % 2 == 0))),
            groups: (0..n)
                .map(|i| if i % 3 == 0 { Group::Group1 } else { Group::Group0 })
                .collect(),
        }
    }

    #[test]
    fn full_fraction_keeps_everything() {
        let data = toy(10);
        let masked = mask_group_labels(&data, 1.0, 99).unwrap();
        assert_eq!(masked, data);
    }

    #[test]
    fn half_fraction_keeps_exactly_half() {
        let data = toy(100);
        let masked = mask_group_labels(&data, 0.5, 3).unwrap();
        let kept = masked.groups.iter().filter(|g| **g != Group::Unknown).count();
        assert_eq!(kept, 50);
    }

    #[test]
    fn masking_is_deterministic() {
        let data = toy(40);
        let a = mask_group_labels(&data, 0.3, 5).unwrap();
        let b = mask_group_labels(&data, 0.3, 5).unwrap();
        assert_eq!(a, b);
        let c = mask_group_labels(&data, 0.3, 6).unwrap();
        assert_ne!(a.groups, c.groups);
    }

    #[test]
    fn masking_rejects_bad_fractions() {
        let data = toy(4);
        for bad in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                mask_group_labels(&data, bad, 1),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn dataset_validation() {
        let ds = Dataset {
            x: array![[1.0], [2.0]],
            y: array![0.0, 2.0],
            groups: vec![Group::Group0, Group::Group1],
        };
        assert!(matches!(ds.validate(), Err(Error::Config(_))));
        let ds = Dataset {
            x: array![[1.0], [2.0]],
            y: array![0.0],
            groups: vec![Group::Group0],
        };
        assert!(matches!(ds.validate(), Err(Error::DimensionMismatch(_))));
    }
}
