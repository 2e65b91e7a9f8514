//! Numerical laboratory for segregated configurations of strongly competing
//! elliptic systems.
//!
//! The crate computes segregated states (Gross–Pitaevskii and Lotka–Volterra
//! competition limits, spectral optimal partitions, closed-form homogeneous
//! prototypes) and measures their local structure: the Almgren frequency and
//! its monotonicity, the frequency gap between regular and singular points of
//! the nodal set, the reflection law across interfaces, equal angles at
//! junctions, Reifenberg flatness and blowup homogeneity.
//!
//! Modules:
//! - [`grid`]: 2D node grids, fields, finite differences, disk/circle quadrature.
//! - [`almgren`]: energy `E`, average `H`, frequency `N`, remainder `R`.
//! - [`solver`]: competition systems and analytic prototypes.
//! - [`nodal`]: nodal set extraction and classification.
//! - [`blowup`]: rescaled frames and spherical traces.
//! - [`partition`]: first Dirichlet eigenvalues and optimal partitions.

pub mod almgren;
pub mod blowup;
mod error;
pub mod grid;
pub mod linsolve;
pub mod nodal;
pub mod partition;
pub mod solver;

pub use error::{Error, Result};
