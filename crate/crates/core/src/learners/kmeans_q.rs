//! Q-learning over a k-means abstraction of case prefixes.

use rayon::prelude::*;

use crate::engine::{Policy, Session, Simulator};
use crate::error::{Result, SimError};
use crate::interventions::{Action, DecisionPoint, InterventionSequence};
use crate::process::{ActivityKind, CaseState};
use crate::BankPolicy;

use super::encoding::prefix_features;
use super::kmeans::{KMeans, Standardizer};
use super::qlearning::{q_learn, EpisodicEnv, QConfig, QTable, Transition};

pub const ILLEGAL_PENALTY: f64 = -10.0;
pub const REWARD_SCALE: f64 = 1e-3;

/// `(cluster, last activity, point index)`.
pub type QState = (usize, Option<ActivityKind>, usize);

/// Columns of the prefix encoding that are clustered: est_quality,
/// unc_quality, amount, cumulative cost and elapsed time. Activity counts
/// are left out because the last activity and point index already carry
/// them.
const CLUSTER_COLUMNS: std::ops::Range<usize> = 9..14;

fn cluster_input(state: &CaseState) -> Vec<f64> {
    prefix_features(&state.events)[CLUSTER_COLUMNS].to_vec()
}

/// Maps a prefix to its discrete state.
#[derive(Debug, Clone)]
pub struct StateAbstraction {
    pub kmeans: KMeans,
    pub standardizer: Standardizer,
}

impl StateAbstraction {
    /// Clusters the prefixes at every decision point of the given cases,
    /// run with the active decisions taken by the bank.
    pub fn fit(
        sim: &Simulator,
        active: &InterventionSequence,
        cases: std::ops::Range<u64>,
        k: usize,
        max_iters: usize,
    ) -> Result<Self> {
        let per_case: Vec<Vec<Vec<f64>>> = cases
            .clone()
            .into_par_iter()
            .map(|c| {
                let mut s = sim.open_session(c, active)?;
                let mut seen = Vec::new();
                while let Some(p) = s.pending().cloned() {
                    seen.push(cluster_input(s.state()));
                    let a = sim.bank().action(s.state(), &p);
                    s.step(a)?;
                }
                Ok(seen)
            })
            .collect::<Result<_>>()?;
        let raw = per_case.concat();
        if raw.is_empty() {
            return Err(SimError::InvalidArgument("no decision points to cluster".into()));
        }
        let standardizer = Standardizer::fit(&raw);
        let scaled: Vec<Vec<f64>> = raw.iter().map(|v| standardizer.apply(v)).collect();
        let kmeans = KMeans::fit(&scaled, k, max_iters, cases.start)?;
        Ok(Self { kmeans, standardizer })
    }

    pub fn state(&self, state: &CaseState, point: &DecisionPoint) -> QState {
        let cluster = self.kmeans.predict(&self.standardizer.apply(&cluster_input(state)));
        (cluster, state.last_activity(), point.point_index)
    }
}

/// Every action of the active interventions, in process order.
pub fn action_space(active: &InterventionSequence) -> Vec<Action> {
    active.kinds().iter().flat_map(|k| k.actions().iter().copied()).collect()
}

/// Online training environment: one case per episode.
pub struct LoanEnv<'a> {
    sim: &'a Simulator,
    active: InterventionSequence,
    abstraction: &'a StateAbstraction,
    actions: Vec<Action>,
    base_case_nr: u64,
    session: Option<Session>,
}

impl<'a> LoanEnv<'a> {
    pub fn new(
        sim: &'a Simulator,
        active: &InterventionSequence,
        abstraction: &'a StateAbstraction,
        base_case_nr: u64,
    ) -> Self {
        Self {
            sim,
            active: active.clone(),
            abstraction,
            actions: action_space(active),
            base_case_nr,
            session: None,
        }
    }

    fn observe(&self) -> Option<QState> {
        let s = self.session.as_ref()?;
        s.pending().map(|p| self.abstraction.state(s.state(), p))
    }
}

impl EpisodicEnv for LoanEnv<'_> {
    type State = QState;

    fn n_actions(&self) -> usize {
        self.actions.len()
    }

    fn reset(&mut self, episode: usize) -> Result<Option<QState>> {
        let case_nr = self.base_case_nr + episode as u64;
        self.session = Some(self.sim.open_session(case_nr, &self.active)?);
        Ok(self.observe())
    }

    /// An action not allowed at the point is penalized and replaced by the
    /// bank's choice.
    fn step(&mut self, action: usize) -> Result<Transition<QState>> {
        let sim = self.sim;
        let session = self.session.as_mut().ok_or(SimError::NoPendingDecision)?;
        let point = session.pending().cloned().ok_or(SimError::NoPendingDecision)?;
        let mut chosen = self.actions[action];
        let mut reward = 0.0;
        if !point.allows(chosen) {
            reward += ILLEGAL_PENALTY;
            chosen = sim.bank().action(session.state(), &point);
        }
        session.step(chosen)?;
        if let Some(r) = session.result() {
            reward += r.profit * REWARD_SCALE;
            return Ok(Transition { reward, next: None });
        }
        Ok(Transition {
            reward,
            next: self.observe(),
        })
    }
}

/// Greedy policy read from a trained table. States never visited in
/// training fall back to the bank.
#[derive(Debug, Clone)]
pub struct KMeansQPolicy {
    pub abstraction: StateAbstraction,
    pub table: QTable<QState>,
    pub actions: Vec<Action>,
    pub bank: BankPolicy,
}

impl KMeansQPolicy {
    pub fn train(
        sim: &Simulator,
        active: &InterventionSequence,
        abstraction: StateAbstraction,
        base_case_nr: u64,
        cfg: &QConfig,
    ) -> Result<Self> {
        let mut env = LoanEnv::new(sim, active, &abstraction, base_case_nr);
        let table = q_learn(&mut env, cfg)?;
        Ok(Self {
            actions: action_space(active),
            table,
            bank: sim.bank().clone(),
            abstraction,
        })
    }
}

impl Policy for KMeansQPolicy {
    fn act(&self, state: &CaseState, point: &DecisionPoint) -> Result<Action> {
        let allowed: Vec<usize> = (0..self.actions.len())
            .filter(|&i| point.allows(self.actions[i]))
            .collect();
        let s = self.abstraction.state(state, point);
        Ok(match self.table.greedy_among(&s, &allowed) {
            Some(i) => self.actions[i],
            None => self.bank.action(state, point),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::InterventionKind;

    #[test]
    fn action_space_is_the_union() {
        let active = InterventionSequence::parse("choose_procedure,set_interest_rate").unwrap();
        let names: Vec<_> = action_space(&active).iter().map(|a| a.name()).collect();
        assert_eq!(names, vec!["standard", "priority", "0.07", "0.08", "0.09"]);
    }

    #[test]
    fn illegal_actions_are_penalized_and_replaced() {
        let sim = Simulator::new(5);
        let active = InterventionSequence::parse("choose_procedure,set_interest_rate").unwrap();
        let abs = StateAbstraction::fit(&sim, &active, 0..200, 4, 50).unwrap();
        let mut env = LoanEnv::new(&sim, &active, &abs, 0);
        env.reset(0).unwrap().unwrap();
        // A rate at the procedure point.
        let t = env.step(3).unwrap();
        assert_eq!(t.reward, ILLEGAL_PENALTY);
        let bank = sim.run_policy(0, &active, sim.bank()).unwrap();
        let first = &env.session.as_ref().unwrap().decisions()[0];
        assert_eq!(first.action, bank.decisions()[0].action);
    }

    #[test]
    fn terminal_reward_is_scaled_profit() {
        let sim = Simulator::new(6);
        let active = InterventionSequence::single(InterventionKind::ChooseProcedure);
        let abs = StateAbstraction::fit(&sim, &active, 0..100, 3, 50).unwrap();
        let mut env = LoanEnv::new(&sim, &active, &abs, 0);
        env.reset(7).unwrap().unwrap();
        let t = env.step(0).unwrap();
        assert!(t.next.is_none());
        let s = sim.run_policy(7, &active, &crate::engine::RandomPolicy::new(0)).unwrap();
        let standard = sim
            .evaluate_counterfactuals(7, &active)
            .unwrap()
            .into_iter()
            .next()
            .unwrap()
            .1;
        assert!(s.is_terminal());
        assert_eq!(t.reward, standard.profit * REWARD_SCALE);
    }

    #[test]
    fn unseen_states_follow_the_bank() {
        let sim = Simulator::new(8);
        let active = InterventionSequence::single(InterventionKind::SetInterestRate);
        let abs = StateAbstraction::fit(&sim, &active, 0..100, 3, 50).unwrap();
        let policy = KMeansQPolicy {
            abstraction: abs,
            table: QTable::new(3),
            actions: action_space(&active),
            bank: sim.bank().clone(),
        };
        for c in 0..50 {
            let a = sim.run_policy(c, &active, &policy).unwrap();
            let b = sim.run_policy(c, &active, sim.bank()).unwrap();
            assert_eq!(a.result().unwrap().profit, b.result().unwrap().profit);
        }
    }
}
