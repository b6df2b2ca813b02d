//! Numerical laboratory for a gravitating gauged sigma-model vortex
//! equation: regularized field decomposition, Green-function machinery with
//! decay certificates, flux-matched monotone schemes, and branch drivers
//! for the minimal, borderline, multiple, and topological solution families.

pub mod error;
pub mod util;
pub mod problem;
pub mod fields;
pub mod elliptic;
pub mod green;
pub mod mesh;
pub mod diagnostics;
pub mod branches;

pub use branches::{
    a0_reference_branch, critical_branch, divergence_probe, minimal_branch, multiple_branch,
    topological_branch, ungated_solution, BranchOutcome, DivergenceReport, ProbeVerdict,
    SchemeWorkspace,
};
pub use error::{Result, VortexError};
pub use problem::{
    classify_regime, derive_params, feasible_ranges, DerivedParams, MarkedPoint, Point, Regime,
    RegimeBand, VortexConfig,
};
