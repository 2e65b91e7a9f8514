use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Kind;
use crate::error::{CliError, CliResult};
use crate::tolerance::{ToleranceProfile, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub pass: bool,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    /// SHA-256 of the config bytes; empty for runs without a config file.
    pub config_sha256: String,
    pub kind: Kind,
    pub seed: u64,
    pub tolerance_profile: ToleranceProfile,
    pub stages: Vec<StageRecord>,
    /// Paths relative to the output directory, `report.json` included.
    pub files: Vec<PathBuf>,
    pub pass: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// What a stage hands back: its own pass flag, a JSON summary and a value
/// for later stages.
pub struct StageOutput<T> {
    pub pass: bool,
    pub summary: serde_json::Value,
    pub value: T,
}

impl<T> StageOutput<T> {
    pub fn new(pass: bool, summary: serde_json::Value, value: T) -> Self {
        Self { pass, summary, value }
    }
}

/// Output directory, file manifest and stage log of one run.
pub struct Ctx {
    pub out: PathBuf,
    pub tol: Tolerances,
    pub report: RunReport,
}

impl Ctx {
    pub fn new(out: PathBuf, kind: Kind, seed: u64, profile: ToleranceProfile, config_bytes: Option<&[u8]>) -> CliResult<Self> {
        fs::create_dir_all(&out)?;
        Ok(Self {
            out,
            tol: profile.tolerances(),
            report: RunReport {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_sha256: config_bytes.map(sha256_hex).unwrap_or_default(),
                kind,
                seed,
                tolerance_profile: profile,
                stages: Vec::new(),
                files: Vec::new(),
                pass: true,
            },
        })
    }

    pub fn path(&self, rel: &str) -> CliResult<PathBuf> {
        let p = self.out.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        Ok(p)
    }

    /// Records files written under the output directory.
    pub fn add(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        for p in paths {
            let rel = p.strip_prefix(&self.out).map(Path::to_path_buf).unwrap_or(p);
            if !self.report.files.contains(&rel) {
                self.report.files.push(rel);
            }
        }
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> CliResult<PathBuf> {
        let p = self.path(rel)?;
        fs::write(&p, text)?;
        self.add([p.clone()]);
        Ok(p)
    }

    pub fn write_json<S: Serialize>(&mut self, rel: &str, value: &S) -> CliResult<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))? + "\n";
        self.write_text(rel, &text)
    }

    /// Runs one named stage and logs it. Library errors become stage
    /// errors carrying the stage name.
    pub fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> CliResult<StageOutput<T>>,
    ) -> CliResult<T> {
        let start = Instant::now();
        let result = f(self);
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(out) => {
                self.report.pass &= out.pass;
                self.report.stages.push(StageRecord {
                    name: name.to_string(),
                    pass: out.pass,
                    seconds,
                    error: None,
                    summary: out.summary,
                });
                Ok(out.value)
            }
            Err(e) => {
                let e = match e {
                    CliError::Stage { source, .. } => CliError::stage(name, source),
                    other => other,
                };
                self.report.pass = false;
                self.report.stages.push(StageRecord {
                    name: name.to_string(),
                    pass: false,
                    seconds,
                    error: Some(e.to_string()),
                    summary: serde_json::Value::Null,
                });
                Err(e)
            }
        }
    }

    /// Writes `report.json` and returns the report.
    pub fn finish(mut self) -> CliResult<RunReport> {
        let path = self.out.join("report.json");
        self.add([path.clone()]);
        let text = serde_json::to_string_pretty(&self.report).map_err(|e| CliError::Io(e.into()))? + "\n";
        fs::write(&path, text)?;
        Ok(self.report)
    }
}

/// Lifts library errors into stage errors; [`Ctx::stage`] fills in the name.
pub trait StageResultExt<T> {
    fn staged(self) -> CliResult<T>;
}

impl<T> StageResultExt<T> for seglab::Result<T> {
    fn staged(self) -> CliResult<T> {
        self.map_err(|e| CliError::stage("", e))
    }
}
