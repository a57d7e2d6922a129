//! Gain metric and repeated train/test experiments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::{Policy, RandomPolicy, Simulator, TEST_CASE_BASE, VALIDATION_CASE_BASE};
use crate::error::{Result, SimError};
use crate::interventions::{InterventionKind, InterventionSequence};
use crate::learners::kmeans_q::{KMeansQPolicy, StateAbstraction};
use crate::learners::qlearning::QConfig;
use crate::learners::slearner::{SLearner, SLearnerPolicy};
use crate::policies::PolicyRegime;

/// Case numbers of Q-learning training episodes.
pub const EPISODE_CASE_BASE: u64 = 3_000_000_000;
/// Case numbers of the prefixes clustered for the state abstraction.
pub const CLUSTER_CASE_BASE: u64 = 4_000_000_000;

/// Default Q-learning episodes per training case.
pub const Q_EPISODES_PER_CASE: usize = 5;

/// Sum with pairwise splitting, so the result depends only on the order
/// of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Relative change of total profit against the bank on the same cases.
pub fn gain(policy_profits: &[f64], bank_profits: &[f64]) -> Result<f64> {
    if policy_profits.len() != bank_profits.len() {
        return Err(SimError::LengthMismatch(policy_profits.len(), bank_profits.len()));
    }
    let bank = pairwise_sum(bank_profits);
    if bank == 0.0 {
        return Err(SimError::DegenerateBaseline);
    }
    Ok((pairwise_sum(policy_profits) - bank) / bank.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Random,
    Bank,
    Oracle,
    SLearner,
    KmeansQ,
    /// Served over the protocol; cannot run in-process.
    External,
}

impl PolicyKind {
    pub const BUILT_IN: [PolicyKind; 5] = [
        PolicyKind::Random,
        PolicyKind::Bank,
        PolicyKind::SLearner,
        PolicyKind::KmeansQ,
        PolicyKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Bank => "bank",
            PolicyKind::Oracle => "oracle",
            PolicyKind::SLearner => "s-learner",
            PolicyKind::KmeansQ => "kmeans-q",
            PolicyKind::External => "external",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        [
            PolicyKind::Random,
            PolicyKind::Bank,
            PolicyKind::Oracle,
            PolicyKind::SLearner,
            PolicyKind::KmeansQ,
            PolicyKind::External,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| SimError::UnknownPolicy(s.to_string()))
    }
}

/// Learner hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub lambda: f64,
    pub k: usize,
    pub kmeans_iters: usize,
    pub kmeans_cases: usize,
    pub q_alpha: f64,
    pub q_epsilon_start: f64,
    pub q_epsilon_end: f64,
    pub q_gamma: f64,
    pub q_harmonic_start: bool,
    /// Defaults to [`Q_EPISODES_PER_CASE`] times the number of training cases.
    pub q_episodes: Option<usize>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            k: 20,
            kmeans_iters: 100,
            kmeans_cases: 10_000,
            q_alpha: 0.005,
            q_epsilon_start: 0.1,
            q_epsilon_end: 0.01,
            q_gamma: 1.0,
            q_harmonic_start: true,
            q_episodes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_reps: usize,
    pub delta: f64,
    pub learner: LearnerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_train: 100_000,
            n_val: 1_000,
            n_test: 10_000,
            n_reps: 5,
            delta: 0.0,
            learner: LearnerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub policy: PolicyKind,
    pub interventions: InterventionSequence,
    pub delta: f64,
    pub gains: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over repetitions.
    pub std: f64,
    pub n_test: usize,
    pub n_reps: usize,
}

impl GainReport {
    pub fn from_gains(
        policy: PolicyKind,
        interventions: InterventionSequence,
        delta: f64,
        gains: Vec<f64>,
        n_test: usize,
    ) -> Self {
        let (mean, std) = mean_std(&gains);
        Self {
            policy,
            interventions,
            delta,
            n_reps: gains.len(),
            gains,
            mean,
            std,
            n_test,
        }
    }

    pub fn std_error(&self) -> f64 {
        self.std / (self.n_reps as f64).sqrt()
    }

    /// Two-sided 95% Student-t interval for the mean.
    pub fn ci95(&self) -> (f64, f64) {
        if self.n_reps < 2 {
            return (self.mean, self.mean);
        }
        let t = StudentsT::new(0.0, 1.0, (self.n_reps - 1) as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::NAN);
        let h = t * self.std_error();
        (self.mean - h, self.mean + h)
    }
}

/// Mean and sample standard deviation; 0 spread for a single value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (pairwise_sum(&ss) / (n - 1) as f64).sqrt())
}

pub fn test_cases(n_test: usize) -> std::ops::Range<u64> {
    TEST_CASE_BASE..TEST_CASE_BASE + n_test as u64
}

/// Trains one S-learner per active intervention on a fresh log.
pub fn train_s_learner(sim: &Simulator, active: &InterventionSequence, cfg: &ExperimentConfig) -> Result<SLearnerPolicy> {
    let log = sim.generate_log(cfg.n_train, cfg.delta, active, 0)?;
    let mut models = Vec::new();
    for &kind in active.kinds() {
        let mut m = SLearner::new(kind, cfg.learner.lambda);
        m.fit(&log)?;
        if kind == InterventionKind::TimeContactHq {
            m.tune_threshold(sim, VALIDATION_CASE_BASE..VALIDATION_CASE_BASE + cfg.n_val as u64, None)?;
        }
        models.push(m);
    }
    Ok(SLearnerPolicy { models })
}

pub fn train_kmeans_q(sim: &Simulator, active: &InterventionSequence, cfg: &ExperimentConfig) -> Result<KMeansQPolicy> {
    let l = &cfg.learner;
    let abstraction = StateAbstraction::fit(
        sim,
        active,
        CLUSTER_CASE_BASE..CLUSTER_CASE_BASE + l.kmeans_cases as u64,
        l.k,
        l.kmeans_iters,
    )?;
    let q = QConfig {
        episodes: l.q_episodes.unwrap_or(Q_EPISODES_PER_CASE * cfg.n_train),
        alpha: l.q_alpha,
        epsilon_start: l.q_epsilon_start,
        epsilon_end: l.q_epsilon_end,
        gamma: l.q_gamma,
        seed: sim.seed(),
        harmonic_start: l.q_harmonic_start,
    };
    KMeansQPolicy::train(sim, active, abstraction, EPISODE_CASE_BASE, &q)
}

/// Test-set profits of one repetition. `rep_sim` carries the repetition
/// seed for training; the test cases always come from `sim`.
pub fn policy_test_profits(
    sim: &Simulator,
    rep_sim: &Simulator,
    policy: PolicyKind,
    active: &InterventionSequence,
    cfg: &ExperimentConfig,
) -> Result<Vec<f64>> {
    let cases = test_cases(cfg.n_test);
    match policy {
        PolicyKind::Bank => sim.policy_profits(cases, active, sim.bank()),
        PolicyKind::Random => sim.policy_profits(cases, active, &RandomPolicy::new(rep_sim.seed())),
        PolicyKind::Oracle => sim.oracle_profits(cases, active),
        PolicyKind::SLearner => {
            let p = train_s_learner(rep_sim, active, cfg)?;
            sim.policy_profits(cases, active, &p)
        }
        PolicyKind::KmeansQ => {
            let p = train_kmeans_q(rep_sim, active, cfg)?;
            sim.policy_profits(cases, active, &p)
        }
        PolicyKind::External => Err(SimError::ExternalActionRequired),
    }
}

/// Evaluates `policy` over `cfg.n_reps` repetitions on the shared test
/// cases of `sim`.
pub fn run_experiment(
    sim: &Simulator,
    policy: PolicyKind,
    active: &InterventionSequence,
    cfg: &ExperimentConfig,
) -> Result<GainReport> {
    if cfg.n_reps == 0 {
        return Err(SimError::InvalidArgument("n_reps must be at least 1".into()));
    }
    if policy == PolicyKind::External {
        return Err(SimError::ExternalActionRequired);
    }
    if active.is_empty() {
        return Err(SimError::InvalidArgument("no active intervention".into()));
    }
    PolicyRegime::mixed(cfg.delta)?;
    let bank = sim.policy_profits(test_cases(cfg.n_test), active, sim.bank())?;
    let mut gains = Vec::with_capacity(cfg.n_reps);
    for rep in 0..cfg.n_reps {
        let rep_sim = sim.reseeded(sim.streams().derive_seed(rep as u64));
        let profits = policy_test_profits(sim, &rep_sim, policy, active, cfg)?;
        gains.push(gain(&profits, &bank)?);
    }
    Ok(GainReport::from_gains(policy, active.clone(), cfg.delta, gains, cfg.n_test))
}

/// One report per training δ, all on the same test cases.
pub fn delta_sweep(
    sim: &Simulator,
    policy: PolicyKind,
    active: &InterventionSequence,
    deltas: &[f64],
    cfg: &ExperimentConfig,
) -> Result<Vec<GainReport>> {
    deltas
        .iter()
        .map(|&delta| {
            let cfg = ExperimentConfig { delta, ..cfg.clone() };
            run_experiment(sim, policy, active, &cfg)
        })
        .collect()
}

/// Profits of an in-process policy on the test cases, for callers that
/// bring their own [`Policy`].
pub fn custom_policy_gain(
    sim: &Simulator,
    active: &InterventionSequence,
    policy: &dyn Policy,
    n_test: usize,
) -> Result<f64> {
    let cases = test_cases(n_test);
    let bank = sim.policy_profits(cases.clone(), active, sim.bank())?;
    let profits = sim.policy_profits(cases, active, policy)?;
    gain(&profits, &bank)
}
