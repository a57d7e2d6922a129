//! The loan-application process: activities, attributes, environment
//! dynamics and profit.

mod activity;
mod dynamics;
mod spec;
mod state;

pub use activity::{ActivityKind, Branch, InterestRate, Procedure};
pub use dynamics::{
    acceptance_probability, apply_activity, client_decision, compute_outcome, init_case, legal_next, sigmoid,
    ClientResponse,
};
pub use spec::{ActivityCost, DurationDist, ProcessSpec, MAX_CALLS};
pub use state::{AttributeSnapshot, CaseResult, CaseState, ClientProfile, Event, Outcome, Stage};
