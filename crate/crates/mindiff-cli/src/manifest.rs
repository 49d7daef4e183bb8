//! Run manifests.
//!
//! Every command that produces artifacts writes a `manifest.json` next to
//! them recording the command, the effective settings after flag/config
//! resolution, and — when a dataset was ingested — file hashes and row
//! accounting, so a result directory is self-describing.

use std::path::Path;

use serde::Serialize;

use crate::failure::{CliResult, Failure};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetManifest>,
    pub settings: serde_json::Value,
    pub jobs: usize,
}

#[derive(Debug, Serialize)]
pub struct DatasetManifest {
    pub train_path: String,
    pub test_path: String,
    pub train_sha256: String,
    pub test_sha256: String,
    pub rows_train: usize,
    pub rows_test: usize,
    pub dropped_missing_train: usize,
    pub dropped_missing_test: usize,
    pub feature_dim: usize,
    pub unseen_category_cells_test: usize,
}

impl Manifest {
    pub fn new(command: &'static str, settings: serde_json::Value, jobs: usize) -> Manifest {
        Manifest {
            tool: "mindiff",
            command,
            dataset: None,
            settings,
            jobs,
        }
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Failure::data(format!("cannot serialize manifest: {e}")))?;
        std::fs::write(out_dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn dataset_manifest(
    train_path: &Path,
    test_path: &Path,
    schema: &mindiff::data::adult::AdultSchema,
) -> CliResult<DatasetManifest> {
    Ok(DatasetManifest {
        train_path: train_path.display().to_string(),
        test_path: test_path.display().to_string(),
        train_sha256: sha256_file(train_path)?,
        test_sha256: sha256_file(test_path)?,
        rows_train: schema.rows_train,
        rows_test: schema.rows_test,
        dropped_missing_train: schema.dropped_missing_train,
        dropped_missing_test: schema.dropped_missing_test,
        feature_dim: schema.feature_dim(),
        unseen_category_cells_test: schema.unseen_category_cells_test,
    })
}
