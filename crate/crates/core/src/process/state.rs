use serde::{Deserialize, Serialize};

use super::activity::{ActivityKind, Branch, InterestRate, Procedure};

/// Client attributes drawn at application time. `quality` is never visible
/// to the bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientProfile {
    pub amount: f64,
    pub quality: f64,
    pub unc_quality_0: f64,
}

/// Observable attributes at the moment an event completed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeSnapshot {
    /// Cumulative case cost.
    pub cost: f64,
    pub amount: f64,
    pub est_quality: f64,
    pub unc_quality: f64,
    pub interest_rate: Option<InterestRate>,
    pub discount_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub activity: ActivityKind,
    /// Days since case start.
    pub start: f64,
    pub end: f64,
    /// Cost of this activity alone.
    pub cost: f64,
    pub branch: Branch,
    pub attributes: AttributeSnapshot,
}

/// Where the case is in the control flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initiated,
    /// Standard procedure: customer-contact loop and HQ branch running.
    ParallelBlock,
    /// Priority procedure right after choose_procedure.
    PriorityFastTrack,
    Validated,
    Offered,
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    Refused,
    Canceled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseState {
    pub case_nr: u64,
    /// Days since case start; the latest event end.
    pub clock: f64,
    pub events: Vec<Event>,
    pub cost: f64,
    pub amount: f64,
    pub est_quality: f64,
    pub unc_quality: f64,
    pub interest_rate: Option<InterestRate>,
    pub discount_factor: Option<f64>,
    pub profile: ClientProfile,
    pub procedure: Option<Procedure>,
    pub hq_contacted: bool,
    /// The HQ branch was skipped, which forces cancellation.
    pub hq_declined: bool,
    /// HQ timing points already answered with `wait`.
    pub hq_points_decided: usize,
    pub calls_made: usize,
    /// Loop length drawn when the standard procedure starts.
    pub planned_calls: usize,
    /// End time of the customer-contact branch so far.
    pub branch_a_end: f64,
    pub stage: Stage,
    pub outcome: Option<Outcome>,
}

impl CaseState {
    pub fn terminal(&self) -> bool {
        self.stage == Stage::Terminal
    }

    pub fn snapshot(&self) -> AttributeSnapshot {
        AttributeSnapshot {
            cost: self.cost,
            amount: self.amount,
            est_quality: self.est_quality,
            unc_quality: self.unc_quality,
            interest_rate: self.interest_rate,
            discount_factor: self.discount_factor,
        }
    }

    pub fn last_activity(&self) -> Option<ActivityKind> {
        self.events.last().map(|e| e.activity)
    }

    pub fn count(&self, activity: ActivityKind) -> usize {
        self.events.iter().filter(|e| e.activity == activity).count()
    }

    /// Loop finished and the HQ branch resolved one way or the other.
    pub fn block_resolved(&self) -> bool {
        self.calls_made >= self.planned_calls && (self.hq_contacted || self.hq_declined)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    /// Net present value in EUR.
    pub profit: f64,
    pub accepted: bool,
    pub canceled: bool,
    pub total_cost: f64,
    /// Days from application to the terminal event.
    pub elapsed: f64,
    pub final_state: CaseState,
}
