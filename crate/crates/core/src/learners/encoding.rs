//! Aggregation encoding of a case prefix.

use crate::interventions::{Action, InterventionKind};
use crate::process::{ActivityKind, CaseState, Event};

/// Activity counts (9) followed by last est_quality, last unc_quality,
/// amount / 10⁴, cumulative cost / 10², elapsed days / 10 and the HQ flag.
pub const FEATURE_DIM: usize = 15;

pub type Features = [f64; FEATURE_DIM];

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixEncoding {
    pub features: Features,
    /// One-hot over the intervention's canonical actions.
    pub action_block: Vec<f64>,
}

impl PrefixEncoding {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.features.to_vec();
        v.extend_from_slice(&self.action_block);
        v
    }
}

/// Features of an event prefix. Only observable attributes are used, so an
/// outside agent holding the same prefix computes the same vector.
pub fn prefix_features(events: &[Event]) -> Features {
    let mut f = [0.0; FEATURE_DIM];
    for e in events {
        f[e.activity.index()] += 1.0;
    }
    if let Some(last) = events.last() {
        let a = &last.attributes;
        f[9] = a.est_quality;
        f[10] = a.unc_quality;
        f[11] = a.amount / 1e4;
        f[12] = a.cost / 1e2;
    }
    f[13] = events.iter().map(|e| e.end).fold(0.0, f64::max) / 10.0;
    f[14] = if f[ActivityKind::ContactHq.index()] > 0.0 { 1.0 } else { 0.0 };
    f
}

pub fn one_hot(kind: InterventionKind, action: Action) -> Vec<f64> {
    kind.actions()
        .iter()
        .map(|a| if *a == action { 1.0 } else { 0.0 })
        .collect()
}

pub fn encode_events(events: &[Event], kind: InterventionKind, action: Action) -> PrefixEncoding {
    PrefixEncoding {
        features: prefix_features(events),
        action_block: one_hot(kind, action),
    }
}

pub fn encode_prefix(state: &CaseState, kind: InterventionKind, action: Action) -> PrefixEncoding {
    encode_events(&state.events, kind, action)
}
