//! `fetch-data`: obtain the census files and verify their content.
//!
//! Files come from the UCI archive (or `--from-dir` for an offline copy).
//! Verification hashes a normalized view of the text — comment banner and
//! blank lines dropped, line endings canonicalized — so a mirror that
//! differs only in whitespace framing still passes, while any change to the
//! actual rows fails. The files are stored byte-for-byte as received, and
//! `SHA256SUMS` records the raw on-disk hashes for `sha256sum -c`.

use std::path::{Path, PathBuf};

use clap::Args;
use sha2::{Digest, Sha256};

use crate::failure::{CliResult, Failure};

const BASE_URL: &str = "https://archive.ics.uci.edu/ml/machine-learning-databases/adult";

/// Expected sha256 of each file's normalized content.
const PINS: [(&str, &str); 2] = [
    (
        "adult.data",
        "df25a4e32ed6f1bd4b3910d21a7bd661a09061eced7cb45555a519d9667cc87b",
    ),
    (
        "adult.test",
        "5c8e678e04c82a07182bbcb6667c9a06faaba123a55b409af7c5d21fb45784b3",
    ),
];

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// Directory to place the files in
    #[arg(long, default_value = "data/adult")]
    pub out: PathBuf,

    /// Copy from this directory instead of downloading
    #[arg(long)]
    pub from_dir: Option<PathBuf>,
}

/// Hash the rows themselves: banner and blank lines dropped, CRLF folded,
/// exactly one trailing newline.
fn normalized_sha256(bytes: &[u8]) -> CliResult<String> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Failure::data(format!("file is not valid UTF-8: {e}")))?;
    let mut norm = String::new();
    for line in text.lines() {
        if line.trim().is_empty() || line.starts_with('|') {
            continue;
        }
        norm.push_str(line);
        norm.push('\n');
    }
    Ok(hex::encode(Sha256::digest(norm.as_bytes())))
}

fn obtain(name: &str, from_dir: Option<&Path>) -> CliResult<Vec<u8>> {
    match from_dir {
        Some(dir) => {
            let path = dir.join(name);
            std::fs::read(&path)
                .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
        }
        None => {
            let url = format!("{BASE_URL}/{name}");
            let response = reqwest::blocking::get(&url)
                .and_then(|r| r.error_for_status())
                .map_err(|e| Failure::data(format!("download of {url} failed: {e}")))?;
            let bytes = response
                .bytes()
                .map_err(|e| Failure::data(format!("download of {url} failed: {e}")))?;
            Ok(bytes.to_vec())
        }
    }
}

pub fn run(args: &FetchArgs) -> CliResult<()> {
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::data(format!("cannot create {}: {e}", args.out.display())))?;

    let mut sums = String::new();
    for (name, pin) in PINS {
        let bytes = obtain(name, args.from_dir.as_deref())?;
        let actual = normalized_sha256(&bytes)?;
        if actual != pin {
            return Err(Failure::data(format!(
                "{name}: content hash mismatch\n  expected {pin}\n  got      {actual}"
            )));
        }
        let path = args.out.join(name);
        std::fs::write(&path, &bytes)
            .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))?;
        sums.push_str(&format!("{}  {name}\n", hex::encode(Sha256::digest(&bytes))));
        println!("{name}: {} bytes, content hash ok", bytes.len());
    }
    std::fs::write(args.out.join("SHA256SUMS"), sums)
        .map_err(|e| Failure::data(format!("cannot write SHA256SUMS: {e}")))?;
    Ok(())
}
