//! Scenario approximation of chance-constrained stochastic games.
//!
//! * [`game`]: parametric N-player games and assumption checks.
//! * [`certificates`]: scenario sampling and sample-complexity bounds.
//! * [`inner`]: per-scenario augmented subgames solved by interior point.
//! * [`admm`]: the consensus ADMM outer loop and its diagnostics.
//! * [`oracle`]: centralized and extragradient reference solvers.
//! * [`rendezvous`]: the two-spacecraft rendezvous example.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admm;
pub mod certificates;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod inner;
mod interior_point;
pub mod oracle;
pub mod rendezvous;

pub use admm::{
    AdmmConfig, AdmmOutcome, AdmmStatus, AdmmSummary, ConsensusState, SolverTrace, TraceRow,
    ViResidual,
};
pub use certificates::{CertificateQuery, CertificateReport, Proposition, Sampler, ScenarioSet};
pub use error::{Error, InnerSolveError, Result};
pub use game::{GameCallbacks, GameDims, GameSpec, JointDecision};
pub use inner::{InnerOptions, KktPoint, KktResidual, ScenarioSubproblem};
pub use oracle::ReferenceSolution;
pub use rendezvous::{RendezvousConfig, RendezvousGame};
