//! Drives cases end to end.
//!
//! A [`Session`] is a checkpoint of one case: it simulates forward until a
//! decision of an active intervention is due, waits for an action, and then
//! resumes. Offline simulation, online sessions, counterfactual enumeration
//! and the oracle are all built on that one stepping loop, so the execution
//! paths cannot drift apart.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::interventions::{apply_decision, pending_point, Action, DecisionPoint, InterventionKind, InterventionSequence};
use crate::policies::{case_regime, select_action, BankPolicy, PolicyRegime, RegimeTag};
use crate::process::{
    apply_activity, client_decision, compute_outcome, init_case, legal_next, ActivityKind, CaseResult, CaseState,
    ClientResponse, Event, ProcessSpec, Stage,
};
use crate::stochastic::StreamProvider;

/// Offset separating held-out test case numbers from training ones.
pub const TEST_CASE_BASE: u64 = 1_000_000_000;
pub const VALIDATION_CASE_BASE: u64 = 2_000_000_000;

/// Anything that picks an action at a decision point.
pub trait Policy: Sync {
    fn act(&self, state: &CaseState, point: &DecisionPoint) -> Result<Action>;
}

impl Policy for BankPolicy {
    fn act(&self, state: &CaseState, point: &DecisionPoint) -> Result<Action> {
        Ok(self.action(state, point))
    }
}

/// Uniform random actions with noise keyed by the policy's own seed.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    streams: StreamProvider,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            streams: StreamProvider::new(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&self, state: &CaseState, point: &DecisionPoint) -> Result<Action> {
        crate::policies::random_action(state, point, &self.streams)
    }
}

struct SimInner {
    spec: ProcessSpec,
    bank: BankPolicy,
    streams: StreamProvider,
}

/// Environment configuration plus the global seed. Cheap to clone.
#[derive(Clone)]
pub struct Simulator {
    inner: Arc<SimInner>,
}

impl fmt::Debug for Simulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulator").field("seed", &self.seed()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub point: DecisionPoint,
    pub action: Action,
    /// `None` when the action came from outside.
    pub tag: Option<RegimeTag>,
}

#[derive(Debug, Clone)]
pub struct CaseRun {
    pub result: CaseResult,
    pub decisions: Vec<DecisionRecord>,
    pub tag: RegimeTag,
}

/// One case under simulation, paused at a decision or finished.
#[derive(Debug, Clone)]
pub struct Session {
    sim: Simulator,
    active: InterventionSequence,
    background: PolicyRegime,
    state: CaseState,
    pending: Option<DecisionPoint>,
    result: Option<CaseResult>,
    decisions: Vec<DecisionRecord>,
}

impl Session {
    pub fn state(&self) -> &CaseState {
        &self.state
    }

    pub fn pending(&self) -> Option<&DecisionPoint> {
        self.pending.as_ref()
    }

    pub fn result(&self) -> Option<&CaseResult> {
        self.result.as_ref()
    }

    pub fn is_terminal(&self) -> bool {
        self.result.is_some()
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }

    pub fn active(&self) -> &InterventionSequence {
        &self.active
    }

    /// Answers the pending decision and simulates to the next one.
    pub fn step(&mut self, action: Action) -> Result<()> {
        self.step_tagged(action, None)
    }

    fn step_tagged(&mut self, action: Action, tag: Option<RegimeTag>) -> Result<()> {
        if self.result.is_some() {
            return Err(SimError::CaseTerminal);
        }
        let point = self.pending.clone().ok_or(SimError::NoPendingDecision)?;
        point.check(action)?;
        self.pending = None;
        self.decide(point, action, tag)?;
        self.advance()
    }

    fn decide(&mut self, point: DecisionPoint, action: Action, tag: Option<RegimeTag>) -> Result<()> {
        let inner = &self.sim.inner;
        apply_decision(&mut self.state, &point, action)?;
        if action == Action::Contact {
            self.state = apply_activity(&self.state, ActivityKind::ContactHq, &inner.streams, &inner.spec)?;
        }
        self.decisions.push(DecisionRecord { point, action, tag });
        Ok(())
    }

    fn advance(&mut self) -> Result<()> {
        loop {
            if self.state.terminal() {
                self.result = Some(compute_outcome(&self.state, &self.sim.inner.spec)?);
                return Ok(());
            }
            if let Some(point) = pending_point(&self.state) {
                if self.active.contains(point.intervention) {
                    self.pending = Some(point);
                    return Ok(());
                }
                let inner = self.sim.inner.clone();
                let d = select_action(&self.state, &point, self.background, &inner.bank, &inner.streams)?;
                self.decide(point, d.action, Some(d.tag))?;
                continue;
            }
            let next = self.next_activity()?;
            let inner = &self.sim.inner;
            self.state = apply_activity(&self.state, next, &inner.streams, &inner.spec)?;
        }
    }

    fn next_activity(&self) -> Result<ActivityKind> {
        let inner = &self.sim.inner;
        let s = &self.state;
        match s.stage {
            Stage::ParallelBlock if s.calls_made < s.planned_calls => Ok(ActivityKind::CallCustomer),
            // Every HQ point was answered with wait: the branch is skipped.
            Stage::ParallelBlock if !s.hq_contacted && !s.hq_declined => Ok(ActivityKind::CancelApplication),
            Stage::Offered => Ok(match client_decision(s, &inner.streams, &inner.spec)? {
                ClientResponse::Accept => ActivityKind::ReceiveAcceptance,
                ClientResponse::Refuse => ActivityKind::ReceiveRefusal,
            }),
            _ => Ok(legal_next(s, &inner.spec)?[0]),
        }
    }
}

/// A full assignment of actions along one counterfactual branch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchTrace {
    pub steps: Vec<(InterventionKind, usize, Action)>,
}

impl BranchTrace {
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.steps.iter().map(|s| s.2)
    }

    /// Compact label, e.g. `choose_procedure=priority;set_interest_rate=0.08`
    /// or `time_contact_hq=contact@2` / `time_contact_hq=never`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        for kind in InterventionKind::ALL {
            let steps: Vec<_> = self.steps.iter().filter(|s| s.0 == kind).collect();
            if steps.is_empty() {
                continue;
            }
            let value = if kind == InterventionKind::TimeContactHq {
                match steps.iter().find(|s| s.2 == Action::Contact) {
                    Some(s) => format!("contact@{}", s.1),
                    None => "never".to_string(),
                }
            } else {
                steps[0].2.name().to_string()
            };
            parts.push(format!("{}={}", kind.name(), value));
        }
        parts.join(";")
    }
}

impl fmt::Display for BranchTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone)]
pub struct OracleChoice {
    pub branch_index: usize,
    pub branch: BranchTrace,
    pub profit: f64,
}

/// One case of a generated log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCase {
    pub case_nr: u64,
    pub tag: RegimeTag,
    pub events: Vec<Event>,
    pub decisions: Vec<DecisionRecord>,
    pub profit: f64,
    pub accepted: bool,
    pub canceled: bool,
    /// Hidden client quality; exported only on request.
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMeta {
    pub seed: u64,
    pub delta: f64,
    pub active: InterventionSequence,
    pub n_cases: usize,
    pub base_case_nr: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub meta: LogMeta,
    pub cases: Vec<LoggedCase>,
}

impl EventLog {
    pub fn event_count(&self) -> usize {
        self.cases.iter().map(|c| c.events.len()).sum()
    }
}

impl Simulator {
    pub fn new(seed: u64) -> Self {
        Self::with_config(ProcessSpec::default(), BankPolicy::default(), seed)
    }

    pub fn with_config(spec: ProcessSpec, bank: BankPolicy, seed: u64) -> Self {
        Self {
            inner: Arc::new(SimInner {
                spec,
                bank,
                streams: StreamProvider::new(seed),
            }),
        }
    }

    /// Same environment, different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self::with_config(self.inner.spec.clone(), self.inner.bank.clone(), seed)
    }

    pub fn seed(&self) -> u64 {
        self.inner.streams.seed()
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.inner.spec
    }

    pub fn bank(&self) -> &BankPolicy {
        &self.inner.bank
    }

    pub fn streams(&self) -> &StreamProvider {
        &self.inner.streams
    }

    /// Opens a case whose inactive decisions follow the bank policy.
    pub fn open_session(&self, case_nr: u64, active: &InterventionSequence) -> Result<Session> {
        self.open_session_with(case_nr, active, PolicyRegime::Bank)
    }

    /// Opens a case whose inactive decisions follow `background`.
    pub fn open_session_with(
        &self,
        case_nr: u64,
        active: &InterventionSequence,
        background: PolicyRegime,
    ) -> Result<Session> {
        if background == PolicyRegime::External {
            return Err(SimError::ExternalActionRequired);
        }
        let state = init_case(case_nr, &self.inner.streams, &self.inner.spec)?;
        let mut session = Session {
            sim: self.clone(),
            active: active.clone(),
            background,
            state,
            pending: None,
            result: None,
            decisions: Vec::new(),
        };
        session.advance()?;
        Ok(session)
    }

    /// Offline run of one case: active decisions come from `regime`,
    /// everything else from the bank policy.
    pub fn simulate_case(&self, case_nr: u64, active: &InterventionSequence, regime: PolicyRegime) -> Result<CaseRun> {
        let tag = case_regime(case_nr, regime, &self.inner.streams)?;
        let mut session = self.open_session(case_nr, active)?;
        while let Some(point) = session.pending.clone() {
            let d = select_action(&session.state, &point, regime, &self.inner.bank, &self.inner.streams)?;
            session.step_tagged(d.action, Some(d.tag))?;
        }
        Ok(CaseRun {
            result: session.result.take().ok_or(SimError::NotTerminal)?,
            decisions: session.decisions,
            tag,
        })
    }

    /// Online run of one case with `policy` answering every active decision.
    pub fn run_policy(&self, case_nr: u64, active: &InterventionSequence, policy: &dyn Policy) -> Result<Session> {
        let mut session = self.open_session(case_nr, active)?;
        while let Some(point) = session.pending.clone() {
            let action = policy.act(&session.state, &point)?;
            session.step(action)?;
        }
        Ok(session)
    }

    /// Profits of `policy` over a contiguous range of cases, in case order.
    pub fn policy_profits(
        &self,
        cases: std::ops::Range<u64>,
        active: &InterventionSequence,
        policy: &dyn Policy,
    ) -> Result<Vec<f64>> {
        cases
            .into_par_iter()
            .map(|c| {
                let s = self.run_policy(c, active, policy)?;
                Ok(s.result.map(|r| r.profit).unwrap_or(f64::NAN))
            })
            .collect()
    }

    /// `n_cases` cases under the δ-mixture. Cases are simulated in parallel
    /// but returned in case order, so the log does not depend on scheduling.
    pub fn generate_log(
        &self,
        n_cases: usize,
        delta: f64,
        active: &InterventionSequence,
        base_case_nr: u64,
    ) -> Result<EventLog> {
        let regime = PolicyRegime::mixed(delta)?;
        let run = |case_nr: u64| -> Result<LoggedCase> {
            let run = self.simulate_case(case_nr, active, regime)?;
            let quality = run.result.final_state.profile.quality;
            Ok(LoggedCase {
                case_nr,
                tag: run.tag,
                events: run.result.final_state.events,
                decisions: run.decisions,
                profit: run.result.profit,
                accepted: run.result.accepted,
                canceled: run.result.canceled,
                quality,
            })
        };
        let range = base_case_nr..base_case_nr + n_cases as u64;
        let cases = range.into_par_iter().map(run).collect::<Result<Vec<_>>>()?;
        Ok(EventLog {
            meta: LogMeta {
                seed: self.seed(),
                delta,
                active: active.clone(),
                n_cases,
                base_case_nr,
            },
            cases,
        })
    }

    /// Same as [`Simulator::generate_log`] on the calling thread only.
    pub fn generate_log_sequential(
        &self,
        n_cases: usize,
        delta: f64,
        active: &InterventionSequence,
        base_case_nr: u64,
    ) -> Result<EventLog> {
        let regime = PolicyRegime::mixed(delta)?;
        let mut cases = Vec::with_capacity(n_cases);
        for case_nr in base_case_nr..base_case_nr + n_cases as u64 {
            let run = self.simulate_case(case_nr, active, regime)?;
            cases.push(LoggedCase {
                case_nr,
                tag: run.tag,
                quality: run.result.final_state.profile.quality,
                events: run.result.final_state.events,
                decisions: run.decisions,
                profit: run.result.profit,
                accepted: run.result.accepted,
                canceled: run.result.canceled,
            });
        }
        Ok(EventLog {
            meta: LogMeta {
                seed: self.seed(),
                delta,
                active: active.clone(),
                n_cases,
                base_case_nr,
            },
            cases,
        })
    }

    /// Every complete action assignment for the case, depth first in
    /// canonical action order. For HQ timing this yields `contact@0 ..
    /// contact@P-1` followed by `never`.
    pub fn evaluate_counterfactuals(
        &self,
        case_nr: u64,
        active: &InterventionSequence,
    ) -> Result<Vec<(BranchTrace, CaseResult)>> {
        if active.is_empty() {
            return Err(SimError::InvalidArgument("no active intervention".into()));
        }
        let root = self.open_session(case_nr, active)?;
        let mut out = Vec::new();
        explore(root, Vec::new(), &mut out)?;
        Ok(out)
    }

    pub fn counterfactual_branches(&self, case_nr: u64, active: &InterventionSequence) -> Result<Vec<BranchTrace>> {
        Ok(self
            .evaluate_counterfactuals(case_nr, active)?
            .into_iter()
            .map(|(b, _)| b)
            .collect())
    }

    /// Best branch by profit; the lowest index wins ties.
    pub fn oracle(&self, case_nr: u64, active: &InterventionSequence) -> Result<OracleChoice> {
        let branches = self.evaluate_counterfactuals(case_nr, active)?;
        let mut best = 0;
        for (i, (_, r)) in branches.iter().enumerate() {
            if r.profit > branches[best].1.profit {
                best = i;
            }
        }
        let (branch, result) = branches.into_iter().nth(best).ok_or(SimError::NotTerminal)?;
        Ok(OracleChoice {
            branch_index: best,
            branch,
            profit: result.profit,
        })
    }

    pub fn oracle_profits(&self, cases: std::ops::Range<u64>, active: &InterventionSequence) -> Result<Vec<f64>> {
        cases
            .into_par_iter()
            .map(|c| self.oracle(c, active).map(|o| o.profit))
            .collect()
    }
}

fn explore(
    session: Session,
    trace: Vec<(InterventionKind, usize, Action)>,
    out: &mut Vec<(BranchTrace, CaseResult)>,
) -> Result<()> {
    let Some(point) = session.pending.clone() else {
        let result = session.result.ok_or(SimError::NotTerminal)?;
        // Fixed-position interventions the branch never reached still take
        // part in the cross product; their action has no effect.
        let mut leaves = vec![trace];
        for &kind in session.active.kinds() {
            if kind.spec().depth != 1 || leaves[0].iter().any(|s| s.0 == kind) {
                continue;
            }
            leaves = leaves
                .into_iter()
                .flat_map(|t| {
                    kind.actions().iter().map(move |&a| {
                        let mut t = t.clone();
                        t.push((kind, 0, a));
                        t.sort_by_key(|s| s.0);
                        t
                    })
                })
                .collect();
        }
        for steps in leaves {
            out.push((BranchTrace { steps }, result.clone()));
        }
        return Ok(());
    };
    for &action in &point.allowed {
        let mut next = session.clone();
        next.step(action)?;
        let mut t = trace.clone();
        t.push((point.intervention, point.point_index, action));
        explore(next, t, out)?;
    }
    Ok(())
}
