//! Run manifests.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::output::{write_file, OutputError};

/// Object id of `content` hashed like a git blob, with SHA-256.
pub fn content_hash(content: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved settings, one `key = value` per line.
    pub config: String,
    pub hash: String,
    pub started: u64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: String, outputs: Vec<PathBuf>) -> Self {
        let hash = content_hash(&config);
        Self { command: command.into(), config, hash, started: unix_time(), outputs }
    }

    pub fn render(&self) -> String {
        let mut s = format!("command = {}\nconfig_hash = {}\nstarted = {}\n", self.command, self.hash, self.started);
        for o in &self.outputs {
            s.push_str(&format!("output = {}\n", o.display()));
        }
        s.push_str("[config]\n");
        s.push_str(&self.config);
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, OutputError> {
        let path = dir.join(MANIFEST_FILE);
        write_file(&path, &self.render())?;
        Ok(path)
    }
}

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SUMMARY_FILE: &str = "summary.txt";
