//! Seeded simulator of a bank loan-application process for benchmarking
//! prescriptive process monitoring methods.
//!
//! The crate generates event logs under a tunable mixture of a rule-based
//! bank policy and randomized assignment, runs online decision sessions,
//! enumerates every counterfactual outcome of a case with common random
//! numbers, and scores policies by their relative gain over the bank.

pub mod engine;
pub mod error;
pub mod evaluation;
pub mod interfaces;
pub mod interventions;
pub mod learners;
pub mod policies;
pub mod process;
pub mod stochastic;

pub use engine::{Policy, Session, Simulator};
pub use error::{Result, SimError};
pub use interventions::{Action, InterventionKind, InterventionSequence};
pub use policies::{BankPolicy, PolicyRegime};
pub use process::ProcessSpec;
