//! Flat key-value config files.
//!
//! The file is TOML restricted to scalar values at the top level — no
//! tables, no arrays. List-valued settings (`lambdas`, `variants`,
//! `lengths`) are comma-joined strings. Precedence everywhere is
//! command-line flag > config file > built-in default.

use std::path::Path;

use crate::failure::{CliResult, Failure};

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "epochs",
    "batch_size",
    "learning_rate",
    "hidden_units",
    "penalty",
    "lambda",
    "kernel_length",
    "threshold",
    "recall",
    "group_labels",
    "runs",
    "jobs",
    "data_dir",
    "variants",
    "lambdas",
    "lengths",
    "pairs",
    "subgroup_rate",
    "bias",
    "buckets",
    "corpus_seed",
    "eval_seed",
    "seeds",
];

/// Parsed config file; empty when no file was given.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: toml::Table,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        let values: toml::Table = text
            .parse()
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        for (key, value) in &values {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Failure::config(format!(
                    "{}: unknown setting {key:?}",
                    path.display()
                )));
            }
            if value.is_table() || value.is_array() {
                return Err(Failure::config(format!(
                    "{}: {key:?} must be a scalar (lists are comma-joined strings)",
                    path.display()
                )));
            }
        }
        Ok(FileConfig { values })
    }

    fn bad_type(&self, key: &str, want: &str) -> Failure {
        Failure::config(format!("config setting {key:?} is not {want}"))
    }

    pub fn get_f64(&self, key: &str) -> CliResult<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .map(Some)
                .ok_or_else(|| self.bad_type(key, "a number")),
        }
    }

    pub fn get_usize(&self, key: &str) -> CliResult<Option<usize>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_integer()
                .and_then(|i| usize::try_from(i).ok())
                .map(Some)
                .ok_or_else(|| self.bad_type(key, "a non-negative integer")),
        }
    }

    pub fn get_u64(&self, key: &str) -> CliResult<Option<u64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_integer()
                .and_then(|i| u64::try_from(i).ok())
                .map(Some)
                .ok_or_else(|| self.bad_type(key, "a non-negative integer")),
        }
    }

    pub fn get_string(&self, key: &str) -> CliResult<Option<String>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| self.bad_type(key, "a string")),
        }
    }
}

/// Flag > config file > default.
pub fn resolve<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Parse a comma-joined list of numbers, e.g. `"0,0.5,1"`.
pub fn parse_f64_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Failure::config(format!("bad {what} entry {s:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_scalars_and_coerces_integers_to_floats() {
        let f = write_config("epochs = 3\nlambda = 2\nlearning_rate = 0.01\npenalty = \"corr\"\n");
        let config = FileConfig::load(Some(f.path())).unwrap();
        assert_eq!(config.get_usize("epochs").unwrap(), Some(3));
        assert_eq!(config.get_f64("lambda").unwrap(), Some(2.0));
        assert_eq!(config.get_f64("learning_rate").unwrap(), Some(0.01));
        assert_eq!(config.get_string("penalty").unwrap(), Some("corr".into()));
        assert_eq!(config.get_usize("runs").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_keys_and_structured_values() {
        let f = write_config("epoch = 3\n");
        assert!(FileConfig::load(Some(f.path())).unwrap_err().message.contains("epoch"));
        let f = write_config("lambdas = [1, 2]\n");
        assert!(FileConfig::load(Some(f.path())).is_err());
        let f = write_config("epochs = \"three\"\n");
        let config = FileConfig::load(Some(f.path())).unwrap();
        assert!(config.get_usize("epochs").is_err());
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_f64_list("0, 0.5 ,1", "lambda").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_f64_list("0,x", "lambda").is_err());
    }
}
