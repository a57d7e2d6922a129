//! Data-gathering regimes: the bank's rule-based policy, uniform random
//! (RCT) assignment, and their per-case mixture.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::interventions::{Action, DecisionPoint, InterventionKind};
use crate::process::{CaseState, InterestRate, Procedure};
use crate::stochastic::{Purpose, StreamKey, StreamProvider};

/// Thresholds of the bank policy. Only observable attributes are consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankPolicy {
    /// Priority procedure when uncertainty is below this ...
    pub priority_max_uncertainty: f64,
    /// ... and the amount is below this.
    pub priority_max_amount: f64,
    pub rate_low_min_est: f64,
    pub rate_mid_min_est: f64,
    /// HQ is contacted at the first point after at least `hq_min_calls`
    /// calls where the estimate reaches this.
    pub hq_min_est: f64,
    pub hq_min_calls: usize,
}

impl Default for BankPolicy {
    fn default() -> Self {
        Self {
            priority_max_uncertainty: 0.25,
            priority_max_amount: 30_000.0,
            rate_low_min_est: 0.7,
            rate_mid_min_est: 0.4,
            hq_min_est: 0.35,
            hq_min_calls: 1,
        }
    }
}

impl BankPolicy {
    pub fn action(&self, state: &CaseState, point: &DecisionPoint) -> Action {
        match point.intervention {
            InterventionKind::ChooseProcedure => {
                if state.unc_quality < self.priority_max_uncertainty && state.amount < self.priority_max_amount {
                    Action::Procedure(Procedure::Priority)
                } else {
                    Action::Procedure(Procedure::Standard)
                }
            }
            InterventionKind::SetInterestRate => {
                let rate = if state.est_quality >= self.rate_low_min_est {
                    InterestRate::R07
                } else if state.est_quality >= self.rate_mid_min_est {
                    InterestRate::R08
                } else {
                    InterestRate::R09
                };
                Action::Rate(rate)
            }
            InterventionKind::TimeContactHq => {
                if state.calls_made >= self.hq_min_calls && state.est_quality >= self.hq_min_est {
                    Action::Contact
                } else {
                    Action::Wait
                }
            }
        }
    }
}

/// How actions at active decision points are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", content = "delta", rename_all = "snake_case")]
pub enum PolicyRegime {
    Bank,
    Random,
    /// Per case: bank with probability δ, otherwise random at every point.
    Mixed(f64),
    /// Actions come from outside the simulator.
    External,
}

impl PolicyRegime {
    pub fn mixed(delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(SimError::InvalidArgument(format!("delta {delta} outside [0, 1]")));
        }
        Ok(PolicyRegime::Mixed(delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeTag {
    Bank,
    Rct,
}

impl RegimeTag {
    pub fn name(self) -> &'static str {
        match self {
            RegimeTag::Bank => "bank",
            RegimeTag::Rct => "rct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub point: DecisionPoint,
    pub action: Action,
    pub tag: RegimeTag,
}

/// Which side of the mixture a case falls on. Drawn once per case.
pub fn case_regime(case_nr: u64, regime: PolicyRegime, streams: &StreamProvider) -> Result<RegimeTag> {
    match regime {
        PolicyRegime::Bank => Ok(RegimeTag::Bank),
        PolicyRegime::Random => Ok(RegimeTag::Rct),
        PolicyRegime::Mixed(delta) => {
            let bank = streams
                .samplers(StreamKey::new(case_nr, Purpose::Regime, 0))
                .bernoulli(delta)?;
            Ok(if bank { RegimeTag::Bank } else { RegimeTag::Rct })
        }
        PolicyRegime::External => Err(SimError::ExternalActionRequired),
    }
}

/// Uniform choice among the allowed actions, keyed by point so that every
/// point of a case has its own draw.
pub fn random_action(state: &CaseState, point: &DecisionPoint, streams: &StreamProvider) -> Result<Action> {
    let occurrence = 16 * point.intervention.index() as u64 + point.point_index as u64;
    let idx = streams
        .samplers(StreamKey::new(state.case_nr, Purpose::PolicyNoise, occurrence))
        .index(point.allowed.len())?;
    Ok(point.allowed[idx])
}

pub fn select_action(
    state: &CaseState,
    point: &DecisionPoint,
    regime: PolicyRegime,
    bank: &BankPolicy,
    streams: &StreamProvider,
) -> Result<PolicyDecision> {
    let tag = case_regime(state.case_nr, regime, streams)?;
    let action = match tag {
        RegimeTag::Bank => bank.action(state, point),
        RegimeTag::Rct => random_action(state, point, streams)?,
    };
    Ok(PolicyDecision {
        point: point.clone(),
        action,
        tag,
    })
}
