//! UCI Adult (Census Income) ingestion.
//!
//! The raw files are comma-separated with 15 columns; `adult.test` may start
//! with a `|`-prefixed comment line and carries a trailing period on its
//! labels. Rows containing a `?` field are dropped. All encoding statistics
//! (means, standard deviations, category vocabularies) come from the
//! training split alone and are then applied verbatim to the test split, so
//! nothing about the test distribution can leak into the features.
//!
//! Encoding: numeric columns are standardized with population mean/std;
//! categorical columns are one-hot over the sorted training vocabulary, with
//! categories unseen in training encoded as all zeros (and counted). The
//! sensitive column (`sex` by default) never enters the feature matrix — the
//! classifier must not observe group membership directly.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{DataSplit, Dataset};
use crate::error::{Error, Result};
use crate::nn::Group;

/// Column kind in the raw file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColKind {
    Numeric,
    Categorical,
}

/// The fixed Adult column order (label column excluded).
pub const ADULT_COLUMNS: [(&str, ColKind); 14] = [
    ("age", ColKind::Numeric),
    ("workclass", ColKind::Categorical),
    ("fnlwgt", ColKind::Numeric),
    ("education", ColKind::Categorical),
    ("education-num", ColKind::Numeric),
    ("marital-status", ColKind::Categorical),
    ("occupation", ColKind::Categorical),
    ("relationship", ColKind::Categorical),
    ("race", ColKind::Categorical),
    ("sex", ColKind::Categorical),
    ("capital-gain", ColKind::Numeric),
    ("capital-loss", ColKind::Numeric),
    ("hours-per-week", ColKind::Numeric),
    ("native-country", ColKind::Categorical),
];

pub const LABEL_COLUMN: &str = "income";

/// Loader options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdultConfig {
    /// Columns excluded from the features entirely.
    pub drop_columns: Vec<String>,
    /// Column carrying the sensitive attribute; never a feature.
    pub sensitive_column: String,
    /// Value of the sensitive column mapped to [`Group::Group1`].
    pub sensitive_positive: String,
}

impl Default for AdultConfig {
    fn default() -> Self {
        AdultConfig {
            // fnlwgt is a census sampling weight, not a person attribute.
            drop_columns: vec!["fnlwgt".into()],
            sensitive_column: "sex".into(),
            sensitive_positive: "Female".into(),
        }
    }
}

/// How one raw column was encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum ColumnSchema {
    /// `(value - mean) / std`, one feature.
    Standardized { name: String, mean: f64, std: f64 },
    /// One feature per vocabulary entry, in sorted order.
    OneHot { name: String, vocab: Vec<String> },
    /// Excluded from the features.
    Dropped { name: String, reason: String },
    /// The sensitive column: drives the group label, never a feature.
    Sensitive { name: String, positive: String },
}

/// Everything needed to re-encode a row, plus ingest accounting. Serialized
/// next to run artifacts so every experiment records its exact encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdultSchema {
    pub columns: Vec<ColumnSchema>,
    /// Expanded feature names, e.g. `workclass=Private`.
    pub feature_names: Vec<String>,
    pub label_column: String,
    pub rows_train: usize,
    pub rows_test: usize,
    pub dropped_missing_train: usize,
    pub dropped_missing_test: usize,
    /// Test cells whose category was unseen in training (encoded all-zero).
    pub unseen_category_cells_test: usize,
}

impl AdultSchema {
    pub fn feature_dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

/// Raw rows: 15 trimmed fields each, `?`-rows removed.
struct RawSplit {
    rows: Vec<Vec<String>>,
    dropped_missing: usize,
}

fn parse_split(text: &str, origin: &str) -> Result<RawSplit> {
    let mut rows = Vec::new();
    let mut dropped_missing = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('|') {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
        if fields.len() != ADULT_COLUMNS.len() + 1 {
            return Err(Error::Ingestion(format!(
                "{origin}:{}: expected {} fields, found {}",
                lineno + 1,
                ADULT_COLUMNS.len() + 1,
                fields.len()
            )));
        }
        if fields.iter().any(|f| f == "?") {
            dropped_missing += 1;
            continue;
        }
        rows.push(fields);
    }
    Ok(RawSplit {
        rows,
        dropped_missing,
    })
}

fn parse_label(raw: &str, origin: &str) -> Result<f64> {
    match raw.trim_end_matches('.') {
        "<=50K" => Ok(0.0),
        ">50K" => Ok(1.0),
        other => Err(Error::Ingestion(format!(
            "{origin}: unrecognized label {other:?}"
        ))),
    }
}

fn parse_numeric(raw: &str, column: &str, origin: &str) -> Result<f64> {
    raw.parse::<f64>().map_err(|e| {
        Error::Ingestion(format!("{origin}: bad numeric value {raw:?} in column {column}: {e}"))
    })
}

fn check_config(config: &AdultConfig) -> Result<()> {
    let known = |name: &str| ADULT_COLUMNS.iter().any(|(n, _)| *n == name);
    for col in &config.drop_columns {
        if !known(col) {
            return Err(Error::Config(format!("unknown drop column {col:?}")));
        }
        if *col == config.sensitive_column {
            return Err(Error::Config(format!(
                "sensitive column {col:?} cannot also be dropped"
            )));
        }
    }
    match ADULT_COLUMNS.iter().find(|(n, _)| *n == config.sensitive_column) {
        None => {
            return Err(Error::Config(format!(
                "unknown sensitive column {:?}",
                config.sensitive_column
            )))
        }
        Some((_, ColKind::Numeric)) => {
            return Err(Error::Config(format!(
                "sensitive column {:?} must be categorical",
                config.sensitive_column
            )))
        }
        Some((_, ColKind::Categorical)) => {}
    }
    Ok(())
}

fn build_columns(train: &RawSplit, config: &AdultConfig, origin: &str) -> Result<Vec<ColumnSchema>> {
    let mut columns = Vec::with_capacity(ADULT_COLUMNS.len());
    for (ci, (name, kind)) in ADULT_COLUMNS.iter().enumerate() {
        if config.drop_columns.iter().any(|c| c == name) {
            columns.push(ColumnSchema::Dropped {
                name: (*name).into(),
                reason: "excluded by configuration".into(),
            });
            continue;
        }
        if *name == config.sensitive_column {
            columns.push(ColumnSchema::Sensitive {
                name: (*name).into(),
                positive: config.sensitive_positive.clone(),
            });
            continue;
        }
        match kind {
            ColKind::Numeric => {
                let mut values = Vec::with_capacity(train.rows.len());
                for row in &train.rows {
                    values.push(parse_numeric(&row[ci], name, origin)?);
                }
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let std = var.sqrt();
                if std < 1e-12 {
                    columns.push(ColumnSchema::Dropped {
                        name: (*name).into(),
                        reason: "constant in training split".into(),
                    });
                } else {
                    columns.push(ColumnSchema::Standardized {
                        name: (*name).into(),
                        mean,
                        std,
                    });
                }
            }
            ColKind::Categorical => {
                let vocab: std::collections::BTreeSet<String> =
                    train.rows.iter().map(|row| row[ci].clone()).collect();
                columns.push(ColumnSchema::OneHot {
                    name: (*name).into(),
                    vocab: vocab.into_iter().collect(),
                });
            }
        }
    }
    Ok(columns)
}

fn feature_names(columns: &[ColumnSchema]) -> Vec<String> {
    let mut names = Vec::new();
    for col in columns {
        match col {
            ColumnSchema::Standardized { name, .. } => names.push(name.clone()),
            ColumnSchema::OneHot { name, vocab } => {
                names.extend(vocab.iter().map(|v| format!("{name}={v}")));
            }
            ColumnSchema::Dropped { .. } | ColumnSchema::Sensitive { .. } => {}
        }
    }
    names
}

struct Encoded {
    data: Dataset,
    unseen_cells: usize,
}

fn encode_split(split: &RawSplit, columns: &[ColumnSchema], dim: usize, origin: &str) -> Result<Encoded> {
    let n = split.rows.len();
    if n == 0 {
        return Err(Error::Ingestion(format!("{origin}: no usable rows")));
    }
    let mut x = Array2::zeros((n, dim));
    let mut y = Array1::zeros(n);
    let mut groups = Vec::with_capacity(n);
    let mut unseen_cells = 0usize;

    for (ri, row) in split.rows.iter().enumerate() {
        let mut fi = 0usize;
        for (ci, col) in columns.iter().enumerate() {
            match col {
                ColumnSchema::Standardized { name, mean, std } => {
                    let v = parse_numeric(&row[ci], name, origin)?;
                    x[[ri, fi]] = (v - mean) / std;
                    fi += 1;
                }
                ColumnSchema::OneHot { vocab, .. } => {
                    match vocab.binary_search(&row[ci]) {
                        Ok(k) => x[[ri, fi + k]] = 1.0,
                        Err(_) => unseen_cells += 1, // unseen category: all zeros
                    }
                    fi += vocab.len();
                }
                ColumnSchema::Dropped { .. } => {}
                ColumnSchema::Sensitive { positive, .. } => {
                    groups.push(if row[ci] == *positive {
                        Group::Group1
                    } else {
                        Group::Group0
                    });
                }
            }
        }
        debug_assert_eq!(fi, dim);
        y[ri] = parse_label(&row[ADULT_COLUMNS.len()], origin)?;
    }

    Ok(Encoded {
        data: Dataset { x, y, groups },
        unseen_cells,
    })
}

/// Load and encode the Adult train/test pair from explicit file paths.
pub fn load_adult(
    train_path: &Path,
    test_path: &Path,
    config: &AdultConfig,
) -> Result<(DataSplit, AdultSchema)> {
    check_config(config)?;
    let read = |p: &Path| {
        fs::read_to_string(p)
            .map_err(|e| Error::Ingestion(format!("cannot read {}: {e}", p.display())))
    };
    let train_raw = parse_split(&read(train_path)?, &train_path.display().to_string())?;
    let test_raw = parse_split(&read(test_path)?, &test_path.display().to_string())?;

    let train_origin = train_path.display().to_string();
    let test_origin = test_path.display().to_string();
    if train_raw.rows.is_empty() {
        return Err(Error::Ingestion(format!("{train_origin}: no usable rows")));
    }

    let columns = build_columns(&train_raw, config, &train_origin)?;
    let names = feature_names(&columns);
    if names.is_empty() {
        return Err(Error::Ingestion("no feature columns left after dropping".into()));
    }

    let train = encode_split(&train_raw, &columns, names.len(), &train_origin)?;
    let test = encode_split(&test_raw, &columns, names.len(), &test_origin)?;

    let schema = AdultSchema {
        columns,
        feature_names: names,
        label_column: LABEL_COLUMN.into(),
        rows_train: train.data.len(),
        rows_test: test.data.len(),
        dropped_missing_train: train_raw.dropped_missing,
        dropped_missing_test: test_raw.dropped_missing,
        unseen_category_cells_test: test.unseen_cells,
    };
    Ok((
        DataSplit {
            train: train.data,
            test: test.data,
        },
        schema,
    ))
}

/// Load `adult.data` / `adult.test` from a directory.
pub fn load_adult_dir(dir: &Path, config: &AdultConfig) -> Result<(DataSplit, AdultSchema)> {
    load_adult(&dir.join("adult.data"), &dir.join("adult.test"), config)
}
