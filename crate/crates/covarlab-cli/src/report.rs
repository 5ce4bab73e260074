//! Run reports: verdicts in `report.json`, timings and cache traffic in
//! `timings.json`, tables as CSV.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::cache::CacheEvent;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub metrics: Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl Check {
    /// `witness` is evaluated only for failures.
    pub fn new(name: impl Into<String>, pass: bool, metrics: Value, witness: impl FnOnce() -> String) -> Self {
        let metrics = match metrics {
            Value::Object(m) => m,
            other => Map::from_iter([("value".to_string(), other)]),
        };
        Check { name: name.into(), pass, metrics, witness: (!pass).then(witness) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub resolution_scale: usize,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Paths relative to the command's output directory.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Default, Serialize)]
pub struct Timings {
    pub phases: Vec<(String, f64)>,
    pub cache: Vec<(String, CacheEvent)>,
    pub total_seconds: f64,
}

/// Collects checks and artifacts for one command.
pub struct Recorder {
    pub dir: PathBuf,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub timings: Timings,
    started: Instant,
}

impl Recorder {
    pub fn new(dir: PathBuf) -> std::io::Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Recorder { dir, checks: Vec::new(), artifacts: Vec::new(), timings: Timings::default(), started: Instant::now() })
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn timed<T>(&mut self, phase: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.phases.push((phase.into(), t.elapsed().as_secs_f64()));
        out
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, v: &T) -> std::io::Result<()> {
        let path = self.dir.join(rel);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p)?;
        }
        let mut text = serde_json::to_string_pretty(v).expect("serialisable");
        text.push('\n');
        fs::write(path, text)?;
        self.artifacts.push(rel.to_string());
        Ok(())
    }

    pub fn write_csv<R: Serialize>(&mut self, rel: &str, rows: &[R]) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(rel))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.artifacts.push(rel.to_string());
        Ok(())
    }

    /// Writes `report.json` and `timings.json`; returns the report.
    pub fn finish(mut self, command: &str, config_hash: String, seed: Option<u64>, scale: usize) -> std::io::Result<RunReport> {
        let report = RunReport {
            command: command.into(),
            config_hash,
            seed,
            resolution_scale: scale,
            pass: self.checks.iter().all(|c| c.pass),
            checks: std::mem::take(&mut self.checks),
            artifacts: std::mem::take(&mut self.artifacts),
        };
        self.timings.total_seconds = self.started.elapsed().as_secs_f64();
        write_pretty(&self.dir.join("report.json"), &report)?;
        write_pretty(&self.dir.join("timings.json"), &self.timings)?;
        Ok(report)
    }
}

fn write_pretty<T: Serialize>(path: &Path, v: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(v).expect("serialisable");
    text.push('\n');
    fs::write(path, text)
}
