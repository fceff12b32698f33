//! Finite MDPs with exact transition tables.

use super::{EpisodeClock, Environment, Observation, StepResult};
use crate::error::{Error, Result};
use crate::rng::{categorical, stream, Rng, Stream};
use rand::Rng as _;

/// Step cap for episodes on tabular MDPs, which never terminate on their own.
pub const TABULAR_EPISODE_CAP: usize = 100;

const ROW_TOLERANCE: f64 = 1e-12;

/// A finite MDP `(S, A, P, r, γ, d0)`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `P(s'|s,a)` at `[(s * n_actions + a) * n_states + s']`.
    transition: Vec<f64>,
    /// `r(s,a)` at `[s * n_actions + a]`.
    reward: Vec<f64>,
    gamma: f64,
    initial: Vec<f64>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::Domain(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("discount {gamma} outside (0, 1)")))
    }
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Domain("need at least one state and one action".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::Domain(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::Domain("reward table has the wrong size".into()));
        }
        if initial.len() != n_states {
            return Err(Error::Domain("initial distribution has the wrong size".into()));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::Domain("reward table has a non-finite entry".into()));
        }
        check_gamma(gamma)?;
        for (i, row) in transition.chunks(n_states).enumerate() {
            check_distribution(row, &format!("P(.|s={}, a={})", i / n_actions, i % n_actions))?;
        }
        check_distribution(&initial, "d0")?;
        Ok(Self { n_states, n_actions, transition, reward, gamma, initial })
    }

    /// Same MDP under a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { gamma, ..self.clone() })
    }

    /// Same MDP with a different start distribution.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != self.n_states {
            return Err(Error::Domain("initial distribution has the wrong size".into()));
        }
        check_distribution(&initial, "d0")?;
        Ok(Self { initial, ..self.clone() })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// The row `P(·|s,a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn sample_initial(&self, rng: &mut Rng) -> usize {
        categorical(&self.initial, rng)
    }

    pub fn sample_next(&self, s: usize, a: usize, rng: &mut Rng) -> usize {
        categorical(self.transition_row(s, a), rng)
    }

    /// One-hot observation for state `s`.
    pub fn observe(&self, s: usize) -> Observation {
        one_hot(self.n_states, s)
    }
}

pub fn one_hot(n: usize, i: usize) -> Observation {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Index of the hot entry of a one-hot observation.
pub fn state_index(obs: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (i, &v) in obs.iter().enumerate() {
        if v == 1.0 {
            if hot.is_some() {
                return Err(Error::Domain("observation is not one-hot".into()));
            }
            hot = Some(i);
        } else if v != 0.0 {
            return Err(Error::Domain("observation is not one-hot".into()));
        }
    }
    hot.ok_or_else(|| Error::Domain("observation is not one-hot".into()))
}

/// A random ergodic two-action chain.
///
/// Action 0 drifts left and action 1 drifts right, on top of strictly
/// positive background mass on every successor, so every policy induces an
/// irreducible aperiodic chain. Rewards are uniform on `[0, 1]`, `γ = 0.95`,
/// and `d0` is uniform. Identical `(n_states, seed)` give identical MDPs.
pub fn make_chain_mdp(n_states: usize, seed: u64) -> Result<TabularMdp> {
    if n_states < 2 {
        return Err(Error::Domain(format!("chain needs at least 2 states, got {n_states}")));
    }
    let n_actions = 2;
    let mut rng = stream(seed, Stream::Fixture);
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for s in 0..n_states {
        for a in 0..n_actions {
            let mut row: Vec<f64> = (0..n_states).map(|_| rng.gen_range(0.1..1.0)).collect();
            let target = if a == 0 { s.saturating_sub(1) } else { (s + 1).min(n_states - 1) };
            row[target] += 2.0;
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            transition.extend(row);
        }
    }
    let reward = (0..n_states * n_actions).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let initial = vec![1.0 / n_states as f64; n_states];
    TabularMdp::new(n_states, n_actions, transition, reward, 0.95, initial)
}

/// One state, two actions, one shared reward drawn from `seed`. Every policy
/// has the same return.
pub fn single_state_mdp(seed: u64) -> Result<TabularMdp> {
    let mut rng = stream(seed, Stream::Fixture);
    let r: f64 = rng.gen_range(0.0..=1.0);
    TabularMdp::new(1, 2, vec![1.0, 1.0], vec![r, r], 0.95, vec![1.0])
}

/// Episodic wrapper around a [`TabularMdp`] with one-hot observations.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    mdp: TabularMdp,
    state: usize,
    cap: usize,
    clock: EpisodeClock,
}

impl TabularEnv {
    pub fn new(mdp: TabularMdp) -> Self {
        Self { mdp, state: 0, cap: TABULAR_EPISODE_CAP, clock: EpisodeClock::default() }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

impl Environment for TabularEnv {
    fn obs_dim(&self) -> usize {
        self.mdp.n_states
    }

    fn n_actions(&self) -> usize {
        self.mdp.n_actions
    }

    fn max_steps(&self) -> usize {
        self.cap
    }

    fn default_gamma(&self) -> f64 {
        self.mdp.gamma
    }

    fn reset(&mut self, rng: &mut Rng) -> Observation {
        self.state = self.mdp.sample_initial(rng);
        self.clock.reset();
        self.mdp.observe(self.state)
    }

    fn step(&mut self, action: usize, rng: &mut Rng) -> Result<StepResult> {
        self.clock.check(action, self.mdp.n_actions)?;
        let reward = self.mdp.reward(self.state, action);
        self.state = self.mdp.sample_next(self.state, action, rng);
        let truncated = self.clock.tick(false, self.cap);
        debug_assert!(self.clock.steps() <= self.cap);
        Ok(StepResult {
            next_obs: self.mdp.observe(self.state),
            reward,
            terminated: false,
            truncated,
        })
    }

    fn tabular(&self) -> Option<&TabularMdp> {
        Some(&self.mdp)
    }
}
