use crate::grid::Point;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {got} values, grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("ball of radius {radius} around ({}, {}) leaves the grid (margin {margin})", center[0], center[1])]
    BallOutOfDomain {
        center: Point,
        radius: f64,
        margin: f64,
    },

    #[error("average H vanishes at radius {radius} (H = {value:e})")]
    DegenerateAverage { radius: f64, value: f64 },

    #[error("frequency profile is not monotone for any C <= {c_max} (residual violation {violation:e})")]
    NonMonotone { c_max: f64, violation: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("components {i} and {j} overlap: ratio {ratio:e} exceeds {eps_seg:e}")]
    NotSegregated {
        i: usize,
        j: usize,
        ratio: f64,
        eps_seg: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solution blew up: sup {sup:e} exceeds limit {limit:e}")]
    Blowup { sup: f64, limit: f64 },

    #[error("solver failed at beta = {beta}: {source}")]
    Continuation {
        beta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("adjacent sectors {0} and {1} share a component")]
    BadAssignment(usize, usize),

    #[error("nodal set is empty")]
    EmptyNodalSet,

    #[error("point is {distance} from a singular candidate (needs {required})")]
    TooCloseToSingular { distance: f64, required: f64 },

    #[error("expected two components in region, found {0}")]
    NotTwoComponents(usize),

    #[error("region has {0} interior nodes")]
    EmptyRegion(usize),

    #[error("component {component} collapsed for seed {seed}")]
    DegenerateSeed { seed: u64, component: usize },

    #[error("field header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
