//! The three interventions, their action sets and where in a case they can
//! be taken.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::process::{CaseState, InterestRate, Procedure, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionKind {
    ChooseProcedure,
    TimeContactHq,
    SetInterestRate,
}

impl InterventionKind {
    /// Ordered by position in the process.
    pub const ALL: [InterventionKind; 3] = [
        InterventionKind::ChooseProcedure,
        InterventionKind::TimeContactHq,
        InterventionKind::SetInterestRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InterventionKind::ChooseProcedure => "choose_procedure",
            InterventionKind::TimeContactHq => "time_contact_hq",
            InterventionKind::SetInterestRate => "set_interest_rate",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn spec(self) -> InterventionSpec {
        InterventionSpec::of(self)
    }

    /// Canonical action order; the first action wins ties.
    pub fn actions(self) -> &'static [Action] {
        match self {
            InterventionKind::ChooseProcedure => &[
                Action::Procedure(Procedure::Standard),
                Action::Procedure(Procedure::Priority),
            ],
            InterventionKind::SetInterestRate => &[
                Action::Rate(InterestRate::R07),
                Action::Rate(InterestRate::R08),
                Action::Rate(InterestRate::R09),
            ],
            InterventionKind::TimeContactHq => &[Action::Contact, Action::Wait],
        }
    }
}

impl fmt::Display for InterventionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterventionKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        InterventionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SimError::UnknownIntervention(s.to_string()))
    }
}

/// A concrete action at a decision point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Procedure(Procedure),
    Rate(InterestRate),
    Contact,
    Wait,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Procedure(p) => p.name(),
            Action::Rate(r) => r.name(),
            Action::Contact => "contact",
            Action::Wait => "wait",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        InterventionKind::ALL
            .iter()
            .flat_map(|k| k.actions().iter().copied())
            .find(|a| a.name() == s)
            .ok_or_else(|| SimError::InvalidArgument(format!("unknown action '{s}'")))
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Declared shape of an intervention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterventionSpec {
    pub kind: InterventionKind,
    pub actions: Vec<Action>,
    /// Number of distinct actions per point.
    pub width: usize,
    /// Number of candidate timing points.
    pub depth: usize,
    pub point_rule: &'static str,
}

impl InterventionSpec {
    pub fn of(kind: InterventionKind) -> Self {
        let (depth, point_rule) = match kind {
            InterventionKind::ChooseProcedure => (1, "after initiate_application"),
            InterventionKind::SetInterestRate => (1, "before calculate_offer"),
            InterventionKind::TimeContactHq => (
                4,
                "after choose_procedure and after each call, while HQ is not contacted (standard procedure only)",
            ),
        };
        Self {
            kind,
            actions: kind.actions().to_vec(),
            width: kind.actions().len(),
            depth,
            point_rule,
        }
    }
}

/// A decision due in a running case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub intervention: InterventionKind,
    /// 0-based; for HQ timing this equals the number of calls made.
    pub point_index: usize,
    /// Number of events in the prefix when the point is reached.
    pub position: usize,
    pub allowed: Vec<Action>,
}

impl DecisionPoint {
    fn new(intervention: InterventionKind, point_index: usize, position: usize) -> Self {
        Self {
            intervention,
            point_index,
            position,
            allowed: intervention.actions().to_vec(),
        }
    }

    pub fn allows(&self, action: Action) -> bool {
        self.allowed.contains(&action)
    }

    pub fn check(&self, action: Action) -> Result<()> {
        if self.allows(action) {
            Ok(())
        } else {
            Err(SimError::IllegalAction {
                action: action.name().to_string(),
                allowed: self.allowed.iter().map(|a| a.name().to_string()).collect(),
            })
        }
    }
}

/// Interventions handed to an outside decision maker, in process order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<InterventionKind>", into = "Vec<InterventionKind>")]
pub struct InterventionSequence(Vec<InterventionKind>);

impl InterventionSequence {
    /// Sorts into process order; duplicates are rejected.
    pub fn new(mut kinds: Vec<InterventionKind>) -> Result<Self> {
        kinds.sort();
        if kinds.windows(2).any(|w| w[0] == w[1]) {
            return Err(SimError::InvalidArgument("duplicate intervention in sequence".into()));
        }
        Ok(Self(kinds))
    }

    pub fn single(kind: InterventionKind) -> Self {
        Self(vec![kind])
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Parses a comma-separated list of intervention names.
    pub fn parse(list: &str) -> Result<Self> {
        let kinds = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(kinds)
    }

    pub fn contains(&self, kind: InterventionKind) -> bool {
        self.0.contains(&kind)
    }

    pub fn kinds(&self) -> &[InterventionKind] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.0.iter().map(|k| k.name()).collect()
    }
}

impl TryFrom<Vec<InterventionKind>> for InterventionSequence {
    type Error = SimError;

    fn try_from(v: Vec<InterventionKind>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<InterventionSequence> for Vec<InterventionKind> {
    fn from(s: InterventionSequence) -> Self {
        s.0
    }
}

impl fmt::Display for InterventionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(","))
    }
}

fn hq_open(state: &CaseState) -> bool {
    state.stage == Stage::ParallelBlock && !state.hq_contacted && !state.hq_declined
}

/// The decision due at exactly this state, whichever intervention owns it.
/// Every case passes the same points regardless of which interventions are
/// active; inactive ones are answered by the bank policy.
pub fn pending_point(state: &CaseState) -> Option<DecisionPoint> {
    let position = state.events.len();
    match state.stage {
        Stage::Initiated if state.procedure.is_none() => {
            Some(DecisionPoint::new(InterventionKind::ChooseProcedure, 0, position))
        }
        Stage::ParallelBlock if hq_open(state) && state.hq_points_decided == state.calls_made => Some(
            DecisionPoint::new(InterventionKind::TimeContactHq, state.calls_made, position),
        ),
        Stage::Validated if state.interest_rate.is_none() => {
            Some(DecisionPoint::new(InterventionKind::SetInterestRate, 0, position))
        }
        _ => None,
    }
}

/// Points of the active interventions that are still ahead of (or at) the
/// current state and structurally reachable from it.
pub fn decision_points(state: &CaseState, active: &InterventionSequence) -> Vec<DecisionPoint> {
    let mut out = Vec::new();
    if state.terminal() {
        return out;
    }
    let position = state.events.len();
    for &kind in active.kinds() {
        match kind {
            InterventionKind::ChooseProcedure => {
                if state.stage == Stage::Initiated && state.procedure.is_none() {
                    out.push(DecisionPoint::new(kind, 0, position));
                }
            }
            InterventionKind::TimeContactHq => {
                if hq_open(state) {
                    let first = state.hq_points_decided.max(state.calls_made);
                    for j in first..=state.planned_calls {
                        let pos = if j == state.calls_made { position } else { position + (j - state.calls_made) };
                        out.push(DecisionPoint::new(kind, j, pos));
                    }
                }
            }
            InterventionKind::SetInterestRate => {
                if state.interest_rate.is_none() && matches!(
                    state.stage,
                    Stage::Initiated | Stage::ParallelBlock | Stage::PriorityFastTrack | Stage::Validated
                ) {
                    out.push(DecisionPoint::new(kind, 0, position));
                }
            }
        }
    }
    out
}

/// Writes the effect of a decision into the case. HQ contact itself is an
/// activity executed by the engine right after a `contact` decision.
pub fn apply_decision(state: &mut CaseState, point: &DecisionPoint, action: Action) -> Result<()> {
    point.check(action)?;
    match action {
        Action::Procedure(p) => state.procedure = Some(p),
        Action::Rate(r) => state.interest_rate = Some(r),
        Action::Contact => {}
        Action::Wait => state.hq_points_decided = point.point_index + 1,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declared_shapes() {
        let shape: Vec<_> = [
            InterventionKind::ChooseProcedure,
            InterventionKind::SetInterestRate,
            InterventionKind::TimeContactHq,
        ]
        .iter()
        .map(|k| {
            let s = k.spec();
            (s.width, s.depth)
        })
        .collect();
        assert_eq!(shape, vec![(2, 1), (3, 1), (2, 4)]);
        let rates: Vec<_> = InterventionKind::SetInterestRate
            .actions()
            .iter()
            .map(|a| a.name())
            .collect();
        assert_eq!(rates, vec!["0.07", "0.08", "0.09"]);
    }

    #[test]
    fn sequence_is_sorted_and_deduplicated() {
        let s = InterventionSequence::parse("set_interest_rate,choose_procedure").unwrap();
        assert_eq!(
            s.kinds(),
            &[InterventionKind::ChooseProcedure, InterventionKind::SetInterestRate]
        );
        assert!(InterventionSequence::parse("time_contact_hq,time_contact_hq").is_err());
        assert!(InterventionSequence::parse("bogus").is_err());
    }

    #[test]
    fn actions_parse_by_name() {
        for k in InterventionKind::ALL {
            for a in k.actions() {
                assert_eq!(a.name().parse::<Action>().unwrap(), *a);
            }
        }
        assert!("0.1".parse::<Action>().is_err());
    }

    #[test]
    fn illegal_action_lists_allowed() {
        let p = DecisionPoint::new(InterventionKind::ChooseProcedure, 0, 1);
        match p.check(Action::Rate(InterestRate::R08)) {
            Err(SimError::IllegalAction { allowed, .. }) => assert_eq!(allowed, vec!["standard", "priority"]),
            other => panic!("{other:?}"),
        }
    }
}
