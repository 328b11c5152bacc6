//! Artifact writer: every file goes through here so the manifest lists it.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: &'a str,
    seed: u64,
    outputs: &'a [Artifact],
    checks: &'a [Check],
    timings: &'a [Timing],
    summary: &'a serde_json::Value,
    error: Option<&'a str>,
}

pub struct Output {
    dir: PathBuf,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub timings: Vec<Timing>,
    pub summary: serde_json::Map<String, serde_json::Value>,
    clock: Instant,
}

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Output {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            artifacts: vec![],
            checks: vec![],
            timings: vec![],
            summary: Default::default(),
            clock: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.artifacts.push(Artifact { path: name.to_string(), bytes: contents.len() });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        self.write(name, &(text + "\n"))
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    /// Record the time since the previous mark under `stage`.
    pub fn mark(&mut self, stage: &str) {
        self.timings.push(Timing { stage: stage.into(), seconds: self.clock.elapsed().as_secs_f64() });
        self.clock = Instant::now();
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn finish(&self, command: &str, config_sha: &str, seed: u64, error: Option<&str>) -> std::io::Result<()> {
        let summary = serde_json::Value::Object(self.summary.clone());
        let m = Manifest {
            tool: "mixedsolve",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: config_sha,
            seed,
            outputs: &self.artifacts,
            checks: &self.checks,
            timings: &self.timings,
            summary: &summary,
            error,
        };
        let text = serde_json::to_string_pretty(&m).map_err(std::io::Error::other)?;
        std::fs::write(self.dir.join(MANIFEST), text + "\n")
    }
}
