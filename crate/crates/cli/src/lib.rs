//! Experiment driver for `seglab`: JSON configs in, fields, profiles,
//! nodal exports and a `report.json` manifest out.
//!
//! Exit codes: `0` when every declared check passes, `1` on a failed check
//! or stage, `2` for an invalid config (nothing is written).

pub mod analysis;
pub mod config;
mod error;
pub mod pipeline;
pub mod report;
pub mod tolerance;
pub mod validate;

use std::path::{Path, PathBuf};

pub use config::{AnalysisSpec, CentersSpec, DiagnoseBlock, ExperimentConfig, Kind, ValidateBlock, CONFIG_VERSION};
pub use error::{CliError, CliResult};
pub use report::RunReport;
pub use tolerance::{ToleranceProfile, Tolerances};

use report::Ctx;

/// Overrides given on the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub profile: ToleranceProfile,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    /// The stage error that ended the run early, if any.
    pub failure: Option<CliError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.pass && self.failure.is_none() {
            0
        } else {
            1
        }
    }
}

pub const DEFAULT_OUT: &str = "seglab-out";

/// Runs an already validated config. `config_bytes` feeds the report hash.
pub fn run_config(cfg: &ExperimentConfig, config_bytes: &[u8], base: &Path, opts: &RunOptions) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let out = match (&opts.out, &cfg.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) if o.is_relative() => base.join(o),
        (None, Some(o)) => o.clone(),
        (None, None) => PathBuf::from(DEFAULT_OUT),
    };
    let seed = opts.seed.unwrap_or(cfg.seed);
    let ctx = Ctx::new(out, cfg.kind, seed, opts.profile, Some(config_bytes))?;
    pipeline::execute(cfg, ctx)
}

/// Loads, validates and runs the config at `path`.
pub fn run_file(path: &Path, opts: &RunOptions) -> CliResult<RunOutcome> {
    let (cfg, bytes) = ExperimentConfig::load(path)?;
    run_config(&cfg, &bytes, path.parent().unwrap_or(Path::new(".")), opts)
}

/// Diagnostics on field files without a config file. `centers` is `auto`
/// or a JSON file holding a list of `[x, y]` points.
pub fn diagnose_files(fields: &[PathBuf], centers: Option<&str>, opts: &RunOptions) -> CliResult<RunOutcome> {
    let centers = match centers {
        None | Some("auto") => CentersSpec::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::invalid(format!("cannot read centers file {path}: {e}")))?;
            CentersSpec::List(serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("centers file {path}: {e}")))?)
        }
    };
    let cfg = ExperimentConfig {
        version: CONFIG_VERSION,
        kind: Kind::Diagnose,
        grid: None,
        out: None,
        seed: 0,
        gp: None,
        lv: None,
        prototype: None,
        partition: None,
        diagnose: Some(DiagnoseBlock {
            fields: fields.to_vec(),
            reaction: None,
        }),
        blowup: None,
        validate: None,
        analysis: Some(AnalysisSpec {
            centers,
            ..Default::default()
        }),
    };
    let bytes = serde_json::to_vec(&cfg).map_err(|e| CliError::invalid(e.to_string()))?;
    run_config(&cfg, &bytes, Path::new("."), opts)
}

/// The prototype invariant suite with default settings.
pub fn validate_default(opts: &RunOptions) -> CliResult<RunOutcome> {
    let cfg = ExperimentConfig {
        version: CONFIG_VERSION,
        kind: Kind::Validate,
        grid: None,
        out: None,
        seed: 0,
        gp: None,
        lv: None,
        prototype: None,
        partition: None,
        diagnose: None,
        blowup: None,
        validate: Some(ValidateBlock::default()),
        analysis: None,
    };
    let bytes = serde_json::to_vec(&cfg).map_err(|e| CliError::invalid(e.to_string()))?;
    run_config(&cfg, &bytes, Path::new("."), opts)
}
