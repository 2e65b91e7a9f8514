//! Experiment configs: versioned JSON, unknown keys rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seglab::almgren::Reaction;
use seglab::grid::{Grid2D, Point};
use seglab::partition::{deserialize_p, serialize_p, PartitionOptions};
use seglab::solver::SolveOptions;

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Gp,
    Lv,
    Prototype,
    Partition,
    Diagnose,
    Blowup,
    Validate,
}

impl Kind {
    fn block(self) -> &'static str {
        match self {
            Kind::Gp => "gp",
            Kind::Lv => "lv",
            Kind::Prototype => "prototype",
            Kind::Partition => "partition",
            Kind::Diagnose => "diagnose",
            Kind::Blowup => "blowup",
            Kind::Validate => "validate",
        }
    }

    fn needs_grid(self) -> bool {
        !matches!(self, Kind::Diagnose | Kind::Validate)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.block())
    }
}

/// Square grid `[lower, lower + side]^2` with `cells` cells per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub cells: usize,
    #[serde(default)]
    pub lower: Point,
    #[serde(default = "one")]
    pub side: f64,
}

fn one() -> f64 {
    1.0
}

impl GridSpec {
    pub fn build(&self) -> CliResult<Grid2D> {
        if self.cells == 0 || !(self.side > 0.0) {
            return Err(CliError::invalid("grid needs cells > 0 and side > 0"));
        }
        Grid2D::new(self.cells + 1, self.cells + 1, self.side / self.cells as f64, self.lower)
            .map_err(|e| CliError::invalid(e.to_string()))
    }
}

/// Dirichlet traces for the competition solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum TraceSpec {
    /// `A (1 - 2x)^+` and `A (2x - 1)^+` in unit-square coordinates.
    Planar { amplitude: f64 },
    /// Boundary values of the `m`-sector prototype around `center`.
    Sectors {
        m: usize,
        amplitude: f64,
        #[serde(default)]
        center: Point,
        #[serde(default)]
        assignment: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpBlock {
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub omega: f64,
    pub beta_ladder: Vec<f64>,
    pub trace: TraceSpec,
    #[serde(default)]
    pub solve: SolveOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LvBlock {
    /// One reaction per component.
    pub reaction: Vec<Reaction>,
    pub beta_ladder: Vec<f64>,
    pub trace: TraceSpec,
    #[serde(default)]
    pub solve: SolveOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrototypeBlock {
    pub m: usize,
    #[serde(default)]
    pub center: Point,
    #[serde(default)]
    pub assignment: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    /// The whole grid.
    Rectangle,
    Disk { center: Point, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionBlock {
    pub parts: usize,
    #[serde(serialize_with = "serialize_p", deserialize_with = "deserialize_p")]
    pub p: f64,
    pub domain: DomainSpec,
    #[serde(default)]
    pub options: PartitionOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseBlock {
    /// One field file per component; relative paths resolve against the
    /// config file's directory.
    pub fields: Vec<PathBuf>,
    #[serde(default)]
    pub reaction: Option<Vec<Reaction>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupBlock {
    pub m: usize,
    #[serde(default)]
    pub assignment: Option<Vec<usize>>,
    #[serde(default)]
    pub center: Point,
    pub x0: Point,
    /// Decreasing frame scales `t`.
    pub scales: Vec<f64>,
    #[serde(default = "one")]
    pub trace_radius: f64,
    #[serde(default = "default_angles")]
    pub n_angles: usize,
}

fn default_angles() -> usize {
    720
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateBlock {
    #[serde(default = "default_degrees")]
    pub degrees: Vec<usize>,
    #[serde(default = "default_validate_cells")]
    pub cells: usize,
}

fn default_degrees() -> Vec<usize> {
    vec![2, 3, 4]
}

fn default_validate_cells() -> usize {
    256
}

impl Default for ValidateBlock {
    fn default() -> Self {
        Self {
            degrees: default_degrees(),
            cells: default_validate_cells(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoCenters {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CentersSpec {
    /// Every `spacing` along the nodal set plus all singular candidates.
    Auto(AutoCenters),
    List(Vec<Point>),
}

impl Default for CentersSpec {
    fn default() -> Self {
        Self::Auto(AutoCenters::Auto)
    }
}

/// Diagnostics chained after a field-producing stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    pub centers: CentersSpec,
    pub spacing: f64,
    pub r_max: f64,
    pub n_radii: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            centers: CentersSpec::default(),
            spacing: 0.05,
            r_max: 0.25,
            n_radii: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub kind: Kind,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gp: Option<GpBlock>,
    #[serde(default)]
    pub lv: Option<LvBlock>,
    #[serde(default)]
    pub prototype: Option<PrototypeBlock>,
    #[serde(default)]
    pub partition: Option<PartitionBlock>,
    #[serde(default)]
    pub diagnose: Option<DiagnoseBlock>,
    #[serde(default)]
    pub blowup: Option<BlowupBlock>,
    #[serde(default)]
    pub validate: Option<ValidateBlock>,
    #[serde(default)]
    pub analysis: Option<AnalysisSpec>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates `path`; relative field paths are rebased onto the
    /// config's directory.
    pub fn load(path: &Path) -> CliResult<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::invalid(e.to_string()))?;
        let mut cfg = Self::parse(text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(d) = cfg.diagnose.as_mut() {
            for f in &mut d.fields {
                if f.is_relative() {
                    *f = base.join(&*f);
                }
            }
        }
        Ok((cfg, bytes))
    }

    fn present(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, set) in [
            ("gp", self.gp.is_some()),
            ("lv", self.lv.is_some()),
            ("prototype", self.prototype.is_some()),
            ("partition", self.partition.is_some()),
            ("diagnose", self.diagnose.is_some()),
            ("blowup", self.blowup.is_some()),
            ("validate", self.validate.is_some()),
        ] {
            if set {
                out.push(name);
            }
        }
        out
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::invalid(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let want = self.kind.block();
        let present = self.present();
        if let Some(other) = present.iter().find(|&&b| b != want) {
            return Err(CliError::invalid(format!("block `{other}` given for kind `{want}`")));
        }
        if present.is_empty() && self.kind != Kind::Validate {
            return Err(CliError::invalid(format!("kind `{want}` needs a `{want}` block")));
        }
        match (self.kind.needs_grid(), &self.grid) {
            (true, None) => return Err(CliError::invalid(format!("kind `{want}` needs a grid"))),
            (false, Some(_)) => {
                return Err(CliError::invalid(format!("kind `{want}` takes no grid")));
            }
            (true, Some(g)) => {
                g.build()?;
            }
            _ => {}
        }
        if let Some(a) = &self.analysis {
            if matches!(self.kind, Kind::Blowup | Kind::Validate) {
                return Err(CliError::invalid(format!("kind `{want}` takes no analysis block")));
            }
            if !(a.spacing > 0.0 && a.r_max > 0.0 && a.n_radii >= 8) {
                return Err(CliError::invalid("analysis needs spacing > 0, r_max > 0, n_radii >= 8"));
            }
        }
        let ladder_ok = |l: &[f64]| !l.is_empty() && l.iter().all(|b| *b >= 0.0) && l.windows(2).all(|w| w[1] > w[0]);
        match self.kind {
            Kind::Gp => {
                let b = self.gp.as_ref().unwrap();
                if !ladder_ok(&b.beta_ladder) {
                    return Err(CliError::invalid("beta_ladder must be nonempty, nonnegative and increasing"));
                }
                trace_components(&b.trace)?;
            }
            Kind::Lv => {
                let b = self.lv.as_ref().unwrap();
                if !ladder_ok(&b.beta_ladder) {
                    return Err(CliError::invalid("beta_ladder must be nonempty, nonnegative and increasing"));
                }
                if trace_components(&b.trace)? != b.reaction.len() {
                    return Err(CliError::invalid("one reaction per traced component is required"));
                }
            }
            Kind::Prototype => {
                let b = self.prototype.as_ref().unwrap();
                check_degree(b.m, b.assignment.as_deref())?;
            }
            Kind::Partition => {
                let b = self.partition.as_ref().unwrap();
                if b.parts == 0 || !(b.p >= 1.0) {
                    return Err(CliError::invalid("partition needs parts >= 1 and p in [1, inf]"));
                }
                if let DomainSpec::Disk { radius, .. } = b.domain {
                    if !(radius > 0.0) {
                        return Err(CliError::invalid("disk radius must be positive"));
                    }
                }
            }
            Kind::Diagnose => {
                let b = self.diagnose.as_ref().unwrap();
                if b.fields.is_empty() {
                    return Err(CliError::invalid("diagnose needs at least one field file"));
                }
                if b.reaction.as_ref().is_some_and(|r| r.len() != b.fields.len()) {
                    return Err(CliError::invalid("one reaction per field is required"));
                }
            }
            Kind::Blowup => {
                let b = self.blowup.as_ref().unwrap();
                check_degree(b.m, b.assignment.as_deref())?;
                if b.scales.is_empty() || b.scales.iter().any(|t| !(*t > 0.0)) || b.scales.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(CliError::invalid("blowup scales must be positive and decreasing"));
                }
                if b.n_angles < 8 || !(b.trace_radius > 0.0 && b.trace_radius < 2.0) {
                    return Err(CliError::invalid("blowup needs n_angles >= 8 and trace_radius in (0, 2)"));
                }
            }
            Kind::Validate => {
                let b = self.validate.clone().unwrap_or_default();
                if b.degrees.is_empty() || b.degrees.iter().any(|&m| m < 2) || b.cells < 64 {
                    return Err(CliError::invalid("validate needs degrees >= 2 and cells >= 64"));
                }
            }
        }
        Ok(())
    }
}

fn check_degree(m: usize, assignment: Option<&[usize]>) -> CliResult<()> {
    if m < 2 {
        return Err(CliError::invalid(format!("degree m must be >= 2, got {m}")));
    }
    if assignment.is_some_and(|a| a.len() != m) {
        return Err(CliError::invalid("assignment must list one component per sector"));
    }
    Ok(())
}

/// Number of components a trace spec produces.
pub fn trace_components(trace: &TraceSpec) -> CliResult<usize> {
    match trace {
        TraceSpec::Planar { amplitude } => {
            if !(*amplitude > 0.0) {
                return Err(CliError::invalid("trace amplitude must be positive"));
            }
            Ok(2)
        }
        TraceSpec::Sectors {
            m,
            amplitude,
            assignment,
            ..
        } => {
            if !(*amplitude > 0.0) {
                return Err(CliError::invalid("trace amplitude must be positive"));
            }
            check_degree(*m, assignment.as_deref())?;
            let a = assignment
                .clone()
                .unwrap_or_else(|| seglab::solver::default_assignment(*m));
            Ok(a.iter().max().map_or(0, |x| x + 1))
        }
    }
}
