//! Blow-up certification for semilinear heat equations u' = Lu + f(u) on
//! weighted graphs and kernel-driven measure spaces: Osgood source terms,
//! heat semigroups, sufficient blow-up certificates, dimensional criteria,
//! and a mild-solution integrator for cross-checking predictions.

pub mod blowup;
pub mod cli;
pub mod config;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod semigroup;
pub mod solver;
pub mod source_term;

pub use blowup::{BlowupCertificate, CriterionVerdict, Verdict, Verification};
pub use error::{Error, Result};
pub use graph::WeightedGraph;
pub use kernel::{KernelModel, TorusMesh};
pub use semigroup::{SemigroupAction, SemigroupOperator};
pub use solver::{SolutionTrace, SolveStatus, StepControls};
pub use source_term::{OsgoodFunctional, SourceTerm};
