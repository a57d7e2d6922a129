//! S-learner: one ridge regression per intervention with the candidate
//! action as input, acting by comparing predicted profits.

use rayon::prelude::*;

use crate::engine::{EventLog, Policy, Simulator};
use crate::error::{Result, SimError};
use crate::interventions::{Action, DecisionPoint, InterventionKind, InterventionSequence};
use crate::process::CaseState;

use super::encoding::{prefix_features, Features};
use super::ridge::{dot, fit_ridge};

/// Number of grid points used when tuning the contact threshold.
pub const THRESHOLD_GRID: usize = 21;

/// Shared inputs: the prefix encoding, a bias, and second-order terms of
/// the estimate, its uncertainty and the amount.
const BASE_DIM: usize = super::encoding::FEATURE_DIM + 5;

fn base(features: &Features) -> [f64; BASE_DIM] {
    let (est, unc, amount) = (features[9], features[10], features[11]);
    let mut b = [0.0; BASE_DIM];
    b[..features.len()].copy_from_slice(features);
    b[BASE_DIM - 5] = 1.0;
    b[BASE_DIM - 4] = est * amount;
    b[BASE_DIM - 3] = est * est;
    b[BASE_DIM - 2] = est * unc;
    b[BASE_DIM - 1] = unc * unc;
    b
}

/// Regression input for `(prefix, action)`: the shared inputs followed by
/// one copy of them per action, zero except in the candidate's block.
pub fn design(kind: InterventionKind, features: &Features, action: Action) -> Vec<f64> {
    let b = base(features);
    let actions = kind.actions();
    let mut row = Vec::with_capacity(BASE_DIM * (actions.len() + 1));
    row.extend_from_slice(&b);
    for a in actions {
        if *a == action {
            row.extend_from_slice(&b);
        } else {
            row.extend(std::iter::repeat_n(0.0, BASE_DIM));
        }
    }
    row
}

/// First index of the maximum.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn threshold_rule(uplift: f64, tau: f64) -> Action {
    if uplift > tau {
        Action::Contact
    } else {
        Action::Wait
    }
}

/// Grid value with the highest profit; the smallest value wins ties.
pub fn best_threshold(grid: &[f64], profits: &[f64]) -> Result<f64> {
    if grid.is_empty() || grid.len() != profits.len() {
        return Err(SimError::InvalidArgument("threshold grid empty or mismatched".into()));
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let mut best = order[0];
    for &i in &order[1..] {
        if profits[i] > profits[best] {
            best = i;
        }
    }
    Ok(grid[best])
}

/// Evenly spaced empirical quantiles (nearest rank) of `values`.
pub fn quantile_grid(values: &[f64], n: usize) -> Vec<f64> {
    if values.is_empty() || n == 0 {
        return vec![0.0];
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let last = v.len() - 1;
    (0..n)
        .map(|i| {
            let q = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
            v[(q * last as f64).round() as usize]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SLearner {
    pub kind: InterventionKind,
    pub lambda: f64,
    weights: Option<Vec<f64>>,
    /// Contact threshold for the timed intervention.
    pub threshold: Option<f64>,
}

impl SLearner {
    pub fn new(kind: InterventionKind, lambda: f64) -> Self {
        Self {
            kind,
            lambda,
            weights: None,
            threshold: None,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_fitted(&self) -> bool {
        self.weights.is_some()
    }

    /// One training row per logged decision of this intervention, labelled
    /// with the case's final profit. Returns the number of rows.
    pub fn fit(&mut self, log: &EventLog) -> Result<usize> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for case in &log.cases {
            for d in case.decisions.iter().filter(|d| d.point.intervention == self.kind) {
                let f = prefix_features(&case.events[..d.point.position]);
                x.push(design(self.kind, &f, d.action));
                y.push(case.profit);
            }
        }
        if x.is_empty() {
            return Err(SimError::InvalidArgument(format!(
                "log holds no {} decisions",
                self.kind
            )));
        }
        self.fit_rows(&x, &y)?;
        Ok(x.len())
    }

    pub fn fit_rows(&mut self, x: &[Vec<f64>], y: &[f64]) -> Result<()> {
        self.weights = Some(fit_ridge(x, y, self.lambda)?);
        Ok(())
    }

    pub fn predict(&self, features: &Features, action: Action) -> Result<f64> {
        let w = self.weights.as_ref().ok_or(SimError::UnfittedModel)?;
        Ok(dot(w, &design(self.kind, features, action)))
    }

    /// Predicted profit of every canonical action.
    pub fn predict_all(&self, features: &Features) -> Result<Vec<f64>> {
        self.kind.actions().iter().map(|a| self.predict(features, *a)).collect()
    }

    /// Predicted gain of contacting HQ now over waiting.
    pub fn uplift(&self, features: &Features) -> Result<f64> {
        Ok(self.predict(features, Action::Contact)? - self.predict(features, Action::Wait)?)
    }

    pub fn act_on(&self, state: &CaseState, point: &DecisionPoint) -> Result<Action> {
        let f = prefix_features(&state.events);
        match point.intervention {
            InterventionKind::TimeContactHq => {
                let tau = self.threshold.ok_or(SimError::UnfittedModel)?;
                Ok(threshold_rule(self.uplift(&f)?, tau))
            }
            kind => {
                let preds = self.predict_all(&f)?;
                Ok(kind.actions()[argmax_first(&preds)])
            }
        }
    }

    /// Sets the contact threshold by replaying the validation cases once per
    /// grid value. The default grid holds quantiles of the uplift seen at
    /// every HQ point the validation cases pass.
    pub fn tune_threshold(
        &mut self,
        sim: &Simulator,
        cases: std::ops::Range<u64>,
        grid: Option<Vec<f64>>,
    ) -> Result<f64> {
        if self.kind != InterventionKind::TimeContactHq {
            return Err(SimError::InvalidArgument(format!("{} has no threshold", self.kind)));
        }
        let active = InterventionSequence::single(self.kind);
        let grid = match grid {
            Some(g) => g,
            None => {
                let probe = UpliftProbe(self);
                let uplifts: Vec<Vec<f64>> = cases
                    .clone()
                    .into_par_iter()
                    .map(|c| {
                        let mut s = sim.open_session(c, &active)?;
                        let mut seen = Vec::new();
                        while let Some(p) = s.pending().cloned() {
                            seen.push(probe.0.uplift(&prefix_features(&s.state().events))?);
                            s.step(probe.act(s.state(), &p)?)?;
                        }
                        Ok(seen)
                    })
                    .collect::<Result<_>>()?;
                quantile_grid(&uplifts.concat(), THRESHOLD_GRID)
            }
        };
        let mut totals = Vec::with_capacity(grid.len());
        for &tau in &grid {
            let mut candidate = self.clone();
            candidate.threshold = Some(tau);
            let profits = sim.policy_profits(cases.clone(), &active, &candidate)?;
            totals.push(crate::evaluation::pairwise_sum(&profits));
        }
        let tau = best_threshold(&grid, &totals)?;
        self.threshold = Some(tau);
        Ok(tau)
    }
}

/// Waits at every point but the last so that all points are visited.
struct UpliftProbe<'a>(&'a SLearner);

impl UpliftProbe<'_> {
    fn act(&self, state: &CaseState, point: &DecisionPoint) -> Result<Action> {
        Ok(if point.point_index >= state.planned_calls {
            Action::Contact
        } else {
            Action::Wait
        })
    }
}

impl Policy for SLearner {
    fn act(&self, state: &CaseState, point: &DecisionPoint) -> Result<Action> {
        if point.intervention != self.kind {
            return Err(SimError::UnknownIntervention(point.intervention.to_string()));
        }
        self.act_on(state, point)
    }
}

/// One S-learner per active intervention.
#[derive(Debug, Clone, PartialEq)]
pub struct SLearnerPolicy {
    pub models: Vec<SLearner>,
}

impl Policy for SLearnerPolicy {
    fn act(&self, state: &CaseState, point: &DecisionPoint) -> Result<Action> {
        self.models
            .iter()
            .find(|m| m.kind == point.intervention)
            .ok_or_else(|| SimError::UnknownIntervention(point.intervention.to_string()))?
            .act_on(state, point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::VALIDATION_CASE_BASE;
    use crate::process::{InterestRate, Procedure};

    fn features(seed: f64) -> Features {
        let mut f = [0.0; super::super::encoding::FEATURE_DIM];
        for (i, v) in f.iter_mut().enumerate() {
            *v = (seed + i as f64).sin();
        }
        f
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax_first(&[100.0, 80.0]), 0);
        assert_eq!(argmax_first(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn threshold_rule_waits_below_tau() {
        assert_eq!(threshold_rule(5.0, 10.0), Action::Wait);
        assert_eq!(threshold_rule(10.5, 10.0), Action::Contact);
    }

    #[test]
    fn best_threshold_cases() {
        assert_eq!(best_threshold(&[3.0], &[-1.0]).unwrap(), 3.0);
        assert_eq!(best_threshold(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 3.0);
        assert_eq!(best_threshold(&[3.0, 1.0, 2.0], &[5.0, 5.0, 4.0]).unwrap(), 1.0);
        assert!(best_threshold(&[], &[]).is_err());
    }

    #[test]
    fn quantile_grid_spans_the_sample() {
        let v: Vec<f64> = (0..101).map(f64::from).collect();
        let g = quantile_grid(&v, 21);
        assert_eq!(g.len(), 21);
        assert_eq!((g[0], g[10], g[20]), (0.0, 50.0, 100.0));
    }

    #[test]
    fn unfitted_model_errors() {
        let m = SLearner::new(InterventionKind::ChooseProcedure, 1.0);
        assert!(matches!(
            m.predict(&features(0.0), Action::Procedure(Procedure::Standard)),
            Err(SimError::UnfittedModel)
        ));
    }

    #[test]
    fn scaling_predictions_keeps_the_argmax() {
        let kind = InterventionKind::SetInterestRate;
        let dim = design(kind, &features(0.0), Action::Rate(InterestRate::R07)).len();
        let mut m = SLearner::new(kind, 1.0);
        m.weights = Some((0..dim).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect());
        let mut scaled = m.clone();
        scaled.weights = Some(m.weights().unwrap().iter().map(|w| w * 3.5).collect());
        for s in 0..50 {
            let f = features(s as f64 * 0.37);
            assert_eq!(
                argmax_first(&m.predict_all(&f).unwrap()),
                argmax_first(&scaled.predict_all(&f).unwrap())
            );
        }
    }

    #[test]
    fn tuned_threshold_beats_every_grid_value() {
        let sim = Simulator::new(11);
        let kind = InterventionKind::TimeContactHq;
        let log = sim
            .generate_log(1500, 0.0, &InterventionSequence::single(kind), 0)
            .unwrap();
        let mut m = SLearner::new(kind, 1.0);
        m.fit(&log).unwrap();
        let cases = VALIDATION_CASE_BASE..VALIDATION_CASE_BASE + 200;
        let grid = vec![-400.0, -100.0, 0.0, 100.0, 400.0, 1e9];
        let tau = m.tune_threshold(&sim, cases.clone(), Some(grid.clone())).unwrap();
        let total = |t: f64| {
            let mut c = m.clone();
            c.threshold = Some(t);
            sim.policy_profits(cases.clone(), &InterventionSequence::single(kind), &c)
                .unwrap()
                .iter()
                .sum::<f64>()
        };
        let best = total(tau);
        for g in grid {
            assert!(best >= total(g) - 1e-6);
        }
    }
}
