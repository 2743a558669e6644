//! Run manifests. Each command appends one JSON line to `manifest.jsonl` in
//! its output directory, naming every file it read and wrote.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Serialize)]
pub struct Fingerprint {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl Fingerprint {
    fn of(path: &Path, bytes: &[u8]) -> Self {
        Fingerprint { path: path.display().to_string(), bytes: bytes.len() as u64, sha256: namepop::content_hash(bytes) }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<Fingerprint>,
    pub outputs: Vec<Fingerprint>,
    pub timings_ms: BTreeMap<String, f64>,
    pub errors: Vec<String>,
}

/// Bookkeeping for one command invocation.
pub struct Run {
    out_dir: PathBuf,
    started: Instant,
    manifest: RunManifest,
}

impl Run {
    pub fn start<C: Serialize>(command: &str, out_dir: &Path, config: &C) -> Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(Run {
            out_dir: out_dir.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: serde_json::to_value(config)?,
                seeds: Vec::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings_ms: BTreeMap::new(),
                errors: Vec::new(),
            },
        })
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    pub fn error(&mut self, message: String) {
        self.manifest.errors.push(message);
    }

    /// Reads an input artifact and records its fingerprint.
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| InputMissing(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.inputs.push(Fingerprint::of(path, &bytes));
        Ok(bytes)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.manifest.outputs.push(Fingerprint::of(Path::new(name), bytes));
        Ok(path)
    }

    pub fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.manifest.timings_ms.insert(label.to_string(), t.elapsed().as_secs_f64() * 1e3);
        out
    }

    /// Appends the manifest as a single line.
    pub fn finish(mut self) -> Result<()> {
        self.manifest.timings_ms.insert("total".into(), self.started.elapsed().as_secs_f64() * 1e3);
        let mut line = serde_json::to_vec(&self.manifest)?;
        line.push(b'\n');
        let path = self.out_dir.join(MANIFEST_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("cannot open {}", path.display()))?;
        f.write_all(&line)?;
        Ok(())
    }
}

/// A named input artifact is absent or unreadable.
#[derive(Debug)]
pub struct InputMissing(pub String);

impl std::fmt::Display for InputMissing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputMissing {}
