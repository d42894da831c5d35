//! A laboratory for stochastic online scheduling with the objective of
//! minimizing expected total weighted completion time on unrelated machines.
//!
//! The crate provides:
//!
//! * problem data types (jobs, processing-time distributions, instances,
//!   realization sampling) in [`model`],
//! * the virtual preemptive WSPT schedule of deterministic counterparts,
//!   alpha-points and mean busy times in [`wspt`],
//! * single-machine alpha-point policies (uniform and density-driven
//!   randomized variants, fixed-alpha deterministic variants) in [`policies`],
//! * the greedy immediate-dispatch assignment rule for unrelated machines
//!   in [`assign`],
//! * lower bounds: the mean-busy-time bound, a time-indexed LP relaxation
//!   and dual-fitting certificates in [`bounds`],
//! * closed-form guarantee curves and mis-specification tables in
//!   [`guarantees`],
//! * a reproducible Monte Carlo evaluation engine in [`sim`].

pub mod assign;
pub mod bounds;
pub mod guarantees;
pub mod model;
pub mod policies;
pub mod rng;
pub mod sim;
pub mod util;
pub mod wspt;

mod error;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;

pub use assign::{AssignmentTrace, GaRun, MachineState};
pub use bounds::{CertificateCheck, CertifyReport, DualCertificate, LprModel, LprSolution};
pub use model::{Distribution, GeneratorSpec, Job, Realization, UnrelatedInstance};
pub use policies::{AlphaVector, Density, RealizedSchedule, SingleMachinePolicy};
pub use sim::{McReport, McStats, RatioReport};
pub use wspt::VirtualSchedule;

/// The golden ratio (1+sqrt(5))/2.
pub const PHI: f64 = 1.618033988749894848;
