//! Run directory ownership, write-if-changed outputs, and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const LOCK_FILE: &str = ".lock";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARTIAL_DIR: &str = "partial";
pub const CACHE_DIR: &str = "_cache";

/// Exclusive handle on an output directory. The lock file is removed on drop.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    pub fn open(root: &Path) -> Result<Self, CliError> {
        let io_err = |e: io::Error| CliError::data("output", format!("{}: {e}", root.display()));
        fs::create_dir_all(root).map_err(io_err)?;
        let lock = root.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => {}
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(CliError::data(
                    "output",
                    format!("{} is locked by another run (delete {} if stale)", root.display(), lock.display()),
                ));
            }
            Err(e) => return Err(io_err(e)),
        }
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Files produced by this run so far, relative to the root.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Leaves an existing file untouched when its bytes already match.
    pub fn write(&mut self, rel: &str, bytes: &[u8], stage: &'static str) -> Result<(), CliError> {
        let path = self.path(rel);
        let io_err = |e: io::Error| CliError::data(stage, format!("{}: {e}", path.display()));
        if fs::read(&path).ok().as_deref() != Some(bytes) {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io_err)?;
            }
            fs::write(&path, bytes).map_err(io_err)?;
        }
        self.written.push(rel.to_string());
        Ok(())
    }

    /// Records a failed stage under `partial/`; outputs already written stay.
    pub fn record_failure(&mut self, error: &CliError) {
        #[derive(Serialize)]
        struct Failure<'a> {
            stage: Option<&'a str>,
            error: String,
            written: &'a [String],
        }
        let failure = Failure { stage: error.stage(), error: error.to_string(), written: &self.written };
        let dir = self.path(PARTIAL_DIR);
        let body = serde_json::to_string_pretty(&failure).expect("failure serializes");
        if fs::create_dir_all(&dir).and_then(|_| fs::write(dir.join("error.json"), body + "\n")).is_err() {
            eprintln!("warning: could not record failure under {}", dir.display());
        }
    }

    pub fn clear_failure(&self) {
        let _ = fs::remove_dir_all(self.path(PARTIAL_DIR));
    }

    pub fn write_manifest(&mut self, config_hash: &str, provider: &str) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            config_hash: config_hash.to_string(),
            provider: provider.to_string(),
            files: digest_tree(&self.root).map_err(|e| CliError::data("manifest", e))?,
        };
        let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        self.write(MANIFEST_FILE, body.as_bytes(), "manifest")?;
        Ok(manifest)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_FILE));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub provider: String,
    /// Relative path (forward slashes) to SHA-256 hex.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digests of every output file, skipping the lock, manifest, cache and
/// failure records.
fn digest_tree(root: &Path) -> io::Result<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![PathBuf::new()];
    while let Some(rel_dir) = stack.pop() {
        for entry in fs::read_dir(root.join(&rel_dir))? {
            let entry = entry?;
            let rel = rel_dir.join(entry.file_name());
            let name = rel.to_string_lossy().replace('\\', "/");
            if [LOCK_FILE, MANIFEST_FILE, PARTIAL_DIR, CACHE_DIR].contains(&name.as_str()) {
                continue;
            }
            if entry.file_type()?.is_dir() {
                stack.push(rel);
            } else {
                files.insert(name, sha256_hex(&fs::read(entry.path())?));
            }
        }
    }
    Ok(files)
}
