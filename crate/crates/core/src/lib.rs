//! Maximum-margin classification of continuously parameterized data
//! manifolds by a cutting-plane method.
//!
//! The drivers in [`cutting_plane`] alternate between an exact finite QP on a
//! growing working set ([`qp`]) and a separation oracle ([`oracle`]) that
//! searches the manifolds for the worst-violated constraint. [`baseline`]
//! trains a conventional point-sampled SVM for comparison and [`harness`]
//! generates synthetic ellipsoid ensembles and runs experiments.

pub mod baseline;
pub mod cutting_plane;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod invariants;
pub mod linalg;
pub mod oracle;
pub mod qp;
pub mod sampling;
pub mod types;

pub use error::{ModelError, OracleError, QpError, RunError};
pub use types::{
    EllipsoidManifold, InitPolicy, Label, Manifold, OracleResult, OracleSelection, QpSolution,
    RunConfig, RunStatus, RunTrace, SampledManifold, TraceRow, WorkingEntry, WorkingSet,
};
