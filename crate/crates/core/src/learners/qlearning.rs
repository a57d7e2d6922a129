//! Tabular Q-learning with ε-greedy exploration.

use std::collections::HashMap;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};

pub struct Transition<S> {
    pub reward: f64,
    /// `None` when the episode ended.
    pub next: Option<S>,
}

/// An episodic environment with a fixed discrete action set.
pub trait EpisodicEnv {
    type State: Clone + Eq + Hash;

    fn n_actions(&self) -> usize;

    /// Starts episode `episode`. `None` means it needs no decision at all.
    fn reset(&mut self, episode: usize) -> Result<Option<Self::State>>;

    fn step(&mut self, action: usize) -> Result<Transition<Self::State>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct QConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub gamma: f64,
    pub seed: u64,
    /// Step size `max(alpha, 1/n)` on the n-th visit of a pair, so early
    /// estimates are sample means instead of being shrunk toward zero.
    pub harmonic_start: bool,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            alpha: 0.1,
            epsilon_start: 0.1,
            epsilon_end: 0.01,
            gamma: 1.0,
            seed: 0,
            harmonic_start: true,
        }
    }
}

impl QConfig {
    /// Linear decay from `epsilon_start` to `epsilon_end` over the run.
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_start;
        }
        let t = episode as f64 / (self.episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

#[derive(Debug, Clone)]
pub struct QTable<S: Eq + Hash> {
    values: HashMap<S, Vec<f64>>,
    visits: HashMap<S, Vec<u64>>,
    n_actions: usize,
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl<S: Clone + Eq + Hash> QTable<S> {
    pub fn new(n_actions: usize) -> Self {
        Self {
            values: HashMap::new(),
            visits: HashMap::new(),
            n_actions,
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: &S) -> Option<&[f64]> {
        self.values.get(s).map(Vec::as_slice)
    }

    pub fn value(&self, s: &S, a: usize) -> f64 {
        self.values.get(s).map_or(0.0, |v| v[a])
    }

    fn max_value(&self, s: &S) -> f64 {
        self.values
            .get(s)
            .map_or(0.0, |v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Greedy action; the lowest index wins ties. `None` for unseen states.
    pub fn greedy(&self, s: &S) -> Option<usize> {
        self.values.get(s).map(|v| argmax(v))
    }

    /// Greedy among `allowed` action indices.
    pub fn greedy_among(&self, s: &S, allowed: &[usize]) -> Option<usize> {
        let v = self.values.get(s)?;
        let mut best = *allowed.first()?;
        for &a in allowed {
            if v[a] > v[best] {
                best = a;
            }
        }
        Some(best)
    }

    /// Number of updates `Q(s, a)` has received.
    pub fn visits(&self, s: &S, a: usize) -> u64 {
        self.visits.get(s).map_or(0, |v| v[a])
    }

    /// Moves `Q(s, a)` toward `target` by step `alpha`; returns the change.
    pub fn update(&mut self, s: &S, a: usize, target: f64, alpha: f64) -> f64 {
        let n = self.n_actions;
        let row = self.values.entry(s.clone()).or_insert_with(|| vec![0.0; n]);
        let delta = alpha * (target - row[a]);
        row[a] += delta;
        self.visits.entry(s.clone()).or_insert_with(|| vec![0; n])[a] += 1;
        delta
    }
}

/// Runs `cfg.episodes` episodes of ε-greedy Q-learning on `env`.
pub fn q_learn<E: EpisodicEnv>(env: &mut E, cfg: &QConfig) -> Result<QTable<E::State>> {
    if cfg.episodes == 0 {
        return Err(SimError::InvalidArgument("q-learning needs at least one episode".into()));
    }
    let n = env.n_actions();
    let mut table = QTable::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for episode in 0..cfg.episodes {
        let eps = cfg.epsilon(episode);
        let Some(mut state) = env.reset(episode)? else {
            continue;
        };
        loop {
            let action = if rng.gen::<f64>() < eps {
                rng.gen_range(0..n)
            } else {
                table.greedy(&state).unwrap_or(0)
            };
            let t = env.step(action)?;
            let target = match &t.next {
                Some(next) => t.reward + cfg.gamma * table.max_value(next),
                None => t.reward,
            };
            let alpha = if cfg.harmonic_start {
                cfg.alpha.max(1.0 / (table.visits(&state, action) + 1) as f64)
            } else {
                cfg.alpha
            };
            table.update(&state, action, target, alpha);
            match t.next {
                Some(next) => state = next,
                None => break,
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One state, two actions, deterministic rewards.
    struct Bandit;

    impl EpisodicEnv for Bandit {
        type State = ();

        fn n_actions(&self) -> usize {
            2
        }

        fn reset(&mut self, _: usize) -> Result<Option<()>> {
            Ok(Some(()))
        }

        fn step(&mut self, action: usize) -> Result<Transition<()>> {
            Ok(Transition {
                reward: if action == 0 { 1.0 } else { 0.0 },
                next: None,
            })
        }
    }

    #[test]
    fn bandit_converges() {
        let cfg = QConfig {
            episodes: 5_000,
            epsilon_start: 0.5,
            epsilon_end: 0.5,
            gamma: 0.0,
            ..QConfig::default()
        };
        let q = q_learn(&mut Bandit, &cfg).unwrap();
        assert!((q.value(&(), 0) - 1.0).abs() < 1e-6);
        assert!(q.value(&(), 1).abs() < 1e-6);
        assert_eq!(q.greedy(&()), Some(0));
    }

    #[test]
    fn zero_epsilon_is_deterministic() {
        let cfg = QConfig {
            episodes: 100,
            epsilon_start: 0.0,
            epsilon_end: 0.0,
            ..QConfig::default()
        };
        let a = q_learn(&mut Bandit, &cfg).unwrap();
        let b = q_learn(&mut Bandit, &QConfig { seed: 99, ..cfg }).unwrap();
        assert_eq!(a.get(&()), b.get(&()));
    }

    #[test]
    fn update_touches_one_entry() {
        let mut q: QTable<u8> = QTable::new(3);
        q.update(&0, 1, 4.0, 0.5);
        q.update(&1, 2, -2.0, 0.5);
        let before: Vec<_> = [0u8, 1].iter().map(|s| q.get(s).unwrap().to_vec()).collect();
        let delta = q.update(&0, 2, 10.0, 0.1);
        assert!((delta - 1.0).abs() < 1e-12);
        assert_eq!(q.get(&0).unwrap(), &[0.0, 2.0, 1.0]);
        assert_eq!(q.get(&1).unwrap(), before[1].as_slice());
        assert_eq!(q.get(&0).unwrap()[..2], before[0][..2]);
    }

    /// States 0, 1, 2 in a row. Action 0 advances (reward -1, or +10 for
    /// leaving state 2); action 1 exits with a state-dependent reward.
    struct Chain {
        at: usize,
    }

    const EXIT: [f64; 3] = [2.0, 9.5, 1.0];

    impl EpisodicEnv for Chain {
        type State = usize;

        fn n_actions(&self) -> usize {
            2
        }

        fn reset(&mut self, _: usize) -> Result<Option<usize>> {
            self.at = 0;
            Ok(Some(0))
        }

        fn step(&mut self, action: usize) -> Result<Transition<usize>> {
            let s = self.at;
            Ok(match (action, s) {
                (1, _) => Transition { reward: EXIT[s], next: None },
                (_, 2) => Transition { reward: 10.0, next: None },
                _ => {
                    self.at += 1;
                    Transition { reward: -1.0, next: Some(self.at) }
                }
            })
        }
    }

    fn value_iteration_policy() -> Vec<usize> {
        let mut v = [0.0f64; 4];
        for _ in 0..10 {
            for s in (0..3).rev() {
                let advance = if s == 2 { 10.0 } else { -1.0 + v[s + 1] };
                v[s] = advance.max(EXIT[s]);
            }
        }
        (0..3)
            .map(|s| {
                let advance = if s == 2 { 10.0 } else { -1.0 + v[s + 1] };
                if advance >= EXIT[s] { 0 } else { 1 }
            })
            .collect()
    }

    #[test]
    fn chain_matches_value_iteration() {
        let q = q_learn(&mut Chain { at: 0 }, &QConfig::default()).unwrap();
        let greedy: Vec<usize> = (0..3).map(|s| q.greedy(&s).unwrap()).collect();
        assert_eq!(greedy, value_iteration_policy());
        assert_eq!(greedy, vec![0, 1, 0]);
    }

    #[test]
    fn epsilon_decays_linearly() {
        let cfg = QConfig {
            episodes: 11,
            ..QConfig::default()
        };
        assert!((cfg.epsilon(0) - 0.1).abs() < 1e-12);
        assert!((cfg.epsilon(10) - 0.01).abs() < 1e-12);
        assert!((cfg.epsilon(5) - 0.055).abs() < 1e-12);
    }
}
