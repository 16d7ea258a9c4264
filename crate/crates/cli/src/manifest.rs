use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA_VERSION: &str = "1.0";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileRecord {
    fn of(path: &Path, bytes: &[u8]) -> Self {
        Self { path: path.to_path_buf(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) }
    }
}

/// Bookkeeping for one invocation: every file read or written goes through here.
#[derive(Debug, Default)]
pub struct Run {
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

impl Run {
    pub fn read(&mut self, path: &Path) -> anyhow::Result<Vec<u8>> {
        let bytes = stream_tts::formats::read_file(path)?;
        self.inputs.push(FileRecord::of(path, &bytes));
        Ok(bytes)
    }

    pub fn read_to_string(&mut self, path: &Path) -> anyhow::Result<String> {
        Ok(String::from_utf8(self.read(path)?)?)
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
        stream_tts::formats::write_atomic(path, bytes)?;
        self.outputs.push(FileRecord::of(path, bytes));
        Ok(())
    }

    /// Records a file that was already written by other means.
    pub fn record_output(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = std::fs::read(path)?;
        self.outputs.push(FileRecord::of(path, &bytes));
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema_version: &'static str,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub core_version: &'static str,
    pub command: &'a str,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub config_file: Option<FileRecord>,
    pub settings: Value,
    pub inputs: &'a [FileRecord],
    pub outputs: &'a [FileRecord],
}
