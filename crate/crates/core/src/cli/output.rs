//! Deterministic output files: `<command>-<hash><suffix>.<ext>`, written
//! through a temporary file and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;

/// Output location for one command run.
#[derive(Debug, Clone)]
pub struct OutputSet {
    dir: PathBuf,
    stem: String,
    written: Vec<PathBuf>,
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn parameter_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Write `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

impl OutputSet {
    /// `key` is everything that determines the output besides the command name.
    pub fn new(dir: impl Into<PathBuf>, command: &str, key: &str) -> Self {
        let hash = parameter_hash(&format!("{command}\n{key}"));
        Self {
            dir: dir.into(),
            stem: format!("{command}-{hash}"),
            written: Vec::new(),
        }
    }

    pub fn stem(&self) -> &str {
        &self.stem
    }

    pub fn path(&self, suffix: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}.{ext}", self.stem))
    }

    pub fn write(&mut self, suffix: &str, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(suffix, ext);
        write_atomic(&p, bytes)?;
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn write_json<T: serde::Serialize>(&mut self, suffix: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(suffix, "json", text.as_bytes())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable() {
        assert_eq!(parameter_hash("abc"), "ba7816bf8f01cfea");
        let a = OutputSet::new("d", "arcs", "k");
        let b = OutputSet::new("d", "arcs", "k");
        assert_eq!(a.stem(), b.stem());
        assert_ne!(a.stem(), OutputSet::new("d", "chains", "k").stem());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new(dir.path().join("nested"), "x", "y");
        let p = out.write("", "txt", b"one").unwrap();
        out.write("", "txt", b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        let names: Vec<_> = fs::read_dir(p.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }
}
