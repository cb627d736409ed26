//! Run manifests: every emitted file listed with its content hash, plus
//! the config hash and seeds, so byte-identical reruns are checkable at a
//! glance.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hex = String::with_capacity(64);
    for b in Sha256::digest(bytes) {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Collects emitted files and writes `manifest.txt` at the run root.
#[derive(Debug)]
pub struct Manifest {
    root: PathBuf,
    config_hash: String,
    seeds: Vec<u64>,
    files: Vec<(String, String)>,
    failure: Option<String>,
}

impl Manifest {
    pub fn new(root: &Path, config_text: &str, seeds: &[u64]) -> Self {
        Self {
            root: root.to_path_buf(),
            config_hash: sha256_hex(config_text.as_bytes()),
            seeds: seeds.to_vec(),
            files: Vec::new(),
            failure: None,
        }
    }

    /// Writes a file under the run root and records its hash.
    pub fn emit(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.push((rel.to_string(), sha256_hex(bytes)));
        Ok(path)
    }

    /// Records a stage failure; the partial manifest still gets written.
    pub fn record_failure(&mut self, message: &str) {
        self.failure = Some(message.to_string());
    }

    pub fn write(mut self) -> Result<PathBuf, CliError> {
        let mut out = String::new();
        let _ = writeln!(out, "config_sha256={}", self.config_hash);
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "seeds={}", seeds.join(","));
        if let Some(failure) = &self.failure {
            let _ = writeln!(out, "failure={failure}");
        }
        self.files.sort();
        for (rel, hash) in &self.files {
            let _ = writeln!(out, "file={rel} sha256={hash}");
        }
        let path = self.root.join("manifest.txt");
        std::fs::create_dir_all(&self.root)?;
        std::fs::write(&path, out)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_every_emitted_file_with_its_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new(dir.path(), "cfg", &[0, 1]);
        m.emit("a.csv", b"hello").unwrap();
        m.emit("sub/b.txt", b"world").unwrap();
        let path = m.write().unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("seeds=0,1"));
        assert!(text.contains(&format!("file=a.csv sha256={}", sha256_hex(b"hello"))));
        assert!(text.contains(&format!("file=sub/b.txt sha256={}", sha256_hex(b"world"))));
        // hash of the actual bytes on disk matches
        let on_disk = std::fs::read(dir.path().join("a.csv")).unwrap();
        assert_eq!(sha256_hex(&on_disk), sha256_hex(b"hello"));
    }
}
