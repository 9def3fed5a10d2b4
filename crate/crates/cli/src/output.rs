//! CSV artifacts, digests and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Reals are written with 17 significant digits so that files round-trip
/// bit-exactly.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Builds a CSV document row by row.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        let mut text = String::with_capacity(1 << 12);
        text.push_str(header);
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(f);
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn trace_csv(z: &[u64], c: &[u64]) -> String {
    let mut csv = Csv::new("h,Z,C");
    for (h, (zh, ch)) in z.iter().zip(c).enumerate() {
        let _ = writeln!(csv.text, "{h},{zh},{ch}");
    }
    csv.into_string()
}

pub fn cousin_csv(csn: &[u64], k: &[u64]) -> String {
    let mut csv = Csv::new("j,csn,K");
    for (j, kj) in k.iter().enumerate() {
        let s = csn.get(j).copied().unwrap_or(0);
        let _ = writeln!(csv.text, "{j},{s},{kj}");
    }
    csv.into_string()
}

pub fn walk_csv(x: &[i64]) -> String {
    let mut csv = Csv::new("i,X");
    for (i, v) in x.iter().enumerate() {
        let _ = writeln!(csv.text, "{i},{v}");
    }
    csv.into_string()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub duration_secs: f64,
    pub files: Vec<FileDigest>,
}

/// An output directory that records a digest for every file it writes.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileDigest {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(
        self,
        command: &str,
        config: serde_json::Value,
        duration_secs: f64,
    ) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            version: format!("critwin {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            config,
            duration_secs,
            files: self.files,
        };
        let path = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.7615941559557649] {
            assert_eq!(real(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(real(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_layouts() {
        assert_eq!(trace_csv(&[2, 1], &[2, 3]), "h,Z,C\n0,2,2\n1,1,3\n");
        assert_eq!(cousin_csv(&[1, 2, 2], &[0, 1, 3, 5]), "j,csn,K\n0,1,0\n1,2,1\n2,2,3\n3,0,5\n");
        assert_eq!(walk_csv(&[0, -1]), "i,X\n0,0\n1,-1\n");
    }
}
