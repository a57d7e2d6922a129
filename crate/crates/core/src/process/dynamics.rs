//! Case initialization, control flow, activity effects, client response and
//! profit.
//!
//! Stream layout per case (purpose / occurrence):
//!
//! | purpose         | occurrence                         | use                         |
//! |-----------------|------------------------------------|-----------------------------|
//! | case-init       | 0, 1, 2, 3                         | amount, quality, unc₀, est₀ |
//! | loop-count      | 0                                  | number of calls             |
//! | call-redraw     | call index                         | est_quality after the call  |
//! | duration        | 16 · activity index + instance     | activity duration           |
//! | client-decision | 0                                  | accept / refuse             |

use crate::error::{Result, SimError};
use crate::stochastic::{Purpose, StreamKey, StreamProvider};

use super::activity::{ActivityKind, Branch, Procedure};
use super::spec::{DurationDist, ProcessSpec};
use super::state::{CaseResult, CaseState, ClientProfile, Event, Outcome, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClientResponse {
    Accept,
    Refuse,
}

fn key(case_nr: u64, purpose: Purpose, occurrence: u64) -> StreamKey {
    StreamKey::new(case_nr, purpose, occurrence)
}

fn sample_duration(
    dist: DurationDist,
    streams: &StreamProvider,
    case_nr: u64,
    activity: ActivityKind,
    instance: u64,
) -> Result<f64> {
    match dist {
        DurationDist::Fixed { days } => Ok(days),
        DurationDist::Uniform { lo, hi } => streams
            .samplers(key(case_nr, Purpose::Duration, 16 * activity.index() as u64 + instance))
            .uniform_range(lo, hi),
    }
}

fn estimate(quality: f64, unc: f64, streams: &StreamProvider, k: StreamKey) -> Result<f64> {
    Ok(streams.samplers(k).normal(quality, unc)?.clamp(0.0, 1.0))
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Starts a case with its application event recorded.
pub fn init_case(case_nr: u64, streams: &StreamProvider, spec: &ProcessSpec) -> Result<CaseState> {
    let init = |occ| streams.samplers(key(case_nr, Purpose::CaseInit, occ));
    let amount = init(0)
        .lognormal(spec.amount_log_mean, spec.amount_log_sd)?
        .clamp(spec.amount_min, spec.amount_max);
    let quality = init(1).beta(spec.quality_alpha, spec.quality_beta)?;
    let unc_quality_0 = init(2).uniform_range(spec.unc_quality_min, spec.unc_quality_max)?;
    let est_quality = estimate(quality, unc_quality_0, streams, key(case_nr, Purpose::CaseInit, 3))?;

    let duration = sample_duration(spec.initiate.duration, streams, case_nr, ActivityKind::InitiateApplication, 0)?;
    let mut state = CaseState {
        case_nr,
        clock: 0.0,
        events: Vec::with_capacity(12),
        cost: 0.0,
        amount,
        est_quality,
        unc_quality: unc_quality_0,
        interest_rate: None,
        discount_factor: None,
        profile: ClientProfile {
            amount,
            quality,
            unc_quality_0,
        },
        procedure: None,
        hq_contacted: false,
        hq_declined: false,
        hq_points_decided: 0,
        calls_made: 0,
        planned_calls: 0,
        branch_a_end: 0.0,
        stage: Stage::Initiated,
        outcome: None,
    };
    record(&mut state, ActivityKind::InitiateApplication, 0.0, duration, spec.initiate.cost, Branch::Main);
    Ok(state)
}

fn record(state: &mut CaseState, activity: ActivityKind, start: f64, duration: f64, cost: f64, branch: Branch) {
    let end = start + duration;
    state.cost += cost;
    state.clock = state.clock.max(end);
    state.events.push(Event {
        activity,
        start,
        end,
        cost,
        branch,
        attributes: state.snapshot(),
    });
}

/// Activities the control flow enables next.
pub fn legal_next(state: &CaseState, spec: &ProcessSpec) -> Result<Vec<ActivityKind>> {
    use ActivityKind::*;
    let next = match state.stage {
        Stage::Terminal => return Err(SimError::CaseTerminal),
        Stage::Initiated => vec![ChooseProcedure],
        Stage::PriorityFastTrack => vec![ValidateApplication],
        Stage::Validated => vec![CalculateOffer],
        Stage::Offered => vec![ReceiveAcceptance, ReceiveRefusal],
        Stage::ParallelBlock => {
            let hq_open = !state.hq_contacted && !state.hq_declined;
            if state.calls_made < state.planned_calls {
                let mut v = vec![CallCustomer];
                if hq_open {
                    v.push(ContactHq);
                }
                v
            } else if hq_open {
                vec![ContactHq, CancelApplication]
            } else if state.hq_declined || state.est_quality < spec.cancel_threshold {
                vec![CancelApplication]
            } else {
                vec![ValidateApplication]
            }
        }
    };
    Ok(next)
}

/// Executes one enabled activity and returns the updated case.
///
/// `choose_procedure` reads `state.procedure` and `calculate_offer` reads
/// `state.interest_rate`; the caller sets them first. An unset procedure
/// defaults to standard.
pub fn apply_activity(
    state: &CaseState,
    activity: ActivityKind,
    streams: &StreamProvider,
    spec: &ProcessSpec,
) -> Result<CaseState> {
    if !legal_next(state, spec)?.contains(&activity) {
        return Err(SimError::ActivityNotEnabled(activity));
    }
    let mut s = state.clone();
    let case_nr = s.case_nr;
    let duration = |dist, instance| sample_duration(dist, streams, case_nr, activity, instance);
    match activity {
        ActivityKind::InitiateApplication => unreachable!("never enabled after init"),
        ActivityKind::ChooseProcedure => {
            let procedure = *s.procedure.get_or_insert(Procedure::Standard);
            let d = duration(spec.choose_procedure.duration, 0)?;
            let mut cost = spec.choose_procedure.cost;
            match procedure {
                Procedure::Standard => {
                    let idx = streams
                        .samplers(key(case_nr, Purpose::LoopCount, 0))
                        .categorical(&spec.call_count_weights)?;
                    s.planned_calls = idx + 1;
                    s.stage = Stage::ParallelBlock;
                }
                Procedure::Priority => {
                    cost += spec.priority_surcharge;
                    s.stage = Stage::PriorityFastTrack;
                }
            }
            let start = s.clock;
            record(&mut s, activity, start, d, cost, Branch::Main);
            s.branch_a_end = s.clock;
        }
        ActivityKind::CallCustomer => {
            let call = s.calls_made as u64;
            let d = duration(spec.call_customer.duration, call)?;
            s.calls_made += 1;
            s.unc_quality = (s.unc_quality * spec.uncertainty_decay).clamp(0.0, 1.0);
            s.est_quality = estimate(
                s.profile.quality,
                s.unc_quality,
                streams,
                key(case_nr, Purpose::CallRedraw, call),
            )?;
            let start = s.branch_a_end;
            record(&mut s, activity, start, d, spec.call_customer.cost, Branch::A);
            s.branch_a_end = start + d;
        }
        ActivityKind::ContactHq => {
            let d = duration(spec.contact_hq_duration, 0)?;
            let cost = spec.hq_cost(s.unc_quality);
            s.hq_contacted = true;
            let start = s.branch_a_end;
            record(&mut s, activity, start, d, cost, Branch::B);
        }
        ActivityKind::ValidateApplication => {
            let d = duration(spec.validate.duration, 0)?;
            let start = s.clock;
            s.stage = Stage::Validated;
            record(&mut s, activity, start, d, spec.validate.cost, Branch::Main);
        }
        ActivityKind::CalculateOffer => {
            s.interest_rate.ok_or(SimError::MissingInterestRate)?;
            s.discount_factor = Some(spec.discount_rate(s.est_quality, s.unc_quality));
            let d = duration(spec.calculate_offer.duration, 0)?;
            let start = s.clock;
            s.stage = Stage::Offered;
            record(&mut s, activity, start, d, spec.calculate_offer.cost, Branch::Main);
        }
        ActivityKind::ReceiveAcceptance | ActivityKind::ReceiveRefusal => {
            let d = duration(spec.receive_response.duration, 0)?;
            let start = s.clock;
            s.stage = Stage::Terminal;
            s.outcome = Some(if activity == ActivityKind::ReceiveAcceptance {
                Outcome::Accepted
            } else {
                Outcome::Refused
            });
            record(&mut s, activity, start, d, spec.receive_response.cost, Branch::Main);
        }
        ActivityKind::CancelApplication => {
            if !s.hq_contacted {
                s.hq_declined = true;
            }
            let d = duration(spec.cancel.duration, 0)?;
            let start = s.clock;
            s.stage = Stage::Terminal;
            s.outcome = Some(Outcome::Canceled);
            record(&mut s, activity, start, d, spec.cancel.cost, Branch::Main);
        }
    }
    Ok(s)
}

/// Acceptance probability of the current offer.
pub fn acceptance_probability(state: &CaseState, spec: &ProcessSpec) -> Result<f64> {
    let rate = state.interest_rate.ok_or(SimError::MissingInterestRate)?;
    Ok(sigmoid(spec.acceptance_logit(rate.value(), state.clock, state.amount)))
}

/// The client's answer to the offer, drawn from the case's client-decision
/// stream.
pub fn client_decision(state: &CaseState, streams: &StreamProvider, spec: &ProcessSpec) -> Result<ClientResponse> {
    let p = acceptance_probability(state, spec)?;
    let accept = streams
        .samplers(key(state.case_nr, Purpose::ClientDecision, 0))
        .bernoulli(p)?;
    Ok(if accept {
        ClientResponse::Accept
    } else {
        ClientResponse::Refuse
    })
}

/// Net present value of a finished case.
pub fn compute_outcome(state: &CaseState, spec: &ProcessSpec) -> Result<CaseResult> {
    let outcome = match (state.stage, state.outcome) {
        (Stage::Terminal, Some(o)) => o,
        _ => return Err(SimError::NotTerminal),
    };
    let profit = match outcome {
        Outcome::Accepted => {
            let rate = state.interest_rate.ok_or(SimError::MissingInterestRate)?.value();
            let discount = state
                .discount_factor
                .unwrap_or_else(|| spec.discount_rate(state.est_quality, state.unc_quality));
            let revenue = state.amount * rate * spec.interest_years * spec.quality_factor(state.profile.quality);
            revenue / (1.0 + discount).powf(state.clock / 365.0) - state.cost
        }
        Outcome::Refused | Outcome::Canceled => -state.cost,
    };
    Ok(CaseResult {
        profit,
        accepted: outcome == Outcome::Accepted,
        canceled: outcome == Outcome::Canceled,
        total_cost: state.cost,
        elapsed: state.clock,
        final_state: state.clone(),
    })
}
