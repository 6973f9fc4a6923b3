//! Output staging and the manifest of emitted files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.txt";

/// Files produced by one experiment, written only once all are ready.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes every file and then the manifest. On failure, whatever was
    /// already written is removed again.
    pub fn write_all(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let mut written = Vec::new();
        let result = (|| {
            let mut manifest = String::from("path,sha256,rows\n");
            for (name, contents) in &self.files {
                let path = dir.join(name);
                written.push(path.clone());
                fs::write(&path, contents)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                manifest.push_str(&format!(
                    "{name},{},{}\n",
                    sha256_hex(contents.as_bytes()),
                    rows(name, contents)
                ));
            }
            let path = dir.join(MANIFEST);
            written.push(path.clone());
            fs::write(&path, manifest).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(path)
        })();
        if result.is_err() {
            for p in &written {
                let _ = fs::remove_file(p);
            }
        }
        result
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Data rows: lines after the header for CSV files, all lines otherwise.
pub fn rows(name: &str, contents: &str) -> usize {
    let lines = contents.lines().count();
    if name.ends_with(".csv") {
        lines.saturating_sub(1)
    } else {
        lines
    }
}
