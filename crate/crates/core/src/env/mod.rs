//! Episodic environments behind one interface.
//!
//! Three classic-control tasks (CartPole, Acrobot, MountainCar) plus finite
//! tabular MDPs whose observations are one-hot state vectors, so the same
//! network code drives both. Environments are selected by string id, see
//! [`EnvId`].

mod acrobot;
mod cartpole;
mod mountain_car;
mod tabular;

pub use acrobot::Acrobot;
pub use cartpole::CartPole;
pub use mountain_car::MountainCar;
pub use tabular::{make_chain_mdp, one_hot, single_state_mdp, state_index, TabularEnv, TabularMdp, TABULAR_EPISODE_CAP};

use crate::error::{Error, Result};
use crate::rng::Rng;
use std::fmt;
use std::str::FromStr;

/// A real observation vector. Its length is fixed per environment instance.
pub type Observation = Vec<f64>;

/// Outcome of one environment tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_obs: Observation,
    pub reward: f64,
    /// The task itself ended (pole fell, goal reached).
    pub terminated: bool,
    /// The episode hit its step cap without terminating.
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub trait Environment: Send {
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Hard episode cap; reaching it sets `truncated`.
    fn max_steps(&self) -> usize;
    /// Discount factor the task is meant to be optimized under.
    fn default_gamma(&self) -> f64;
    /// Samples a start state and zeroes the step counter.
    fn reset(&mut self, rng: &mut Rng) -> Observation;
    fn step(&mut self, action: usize, rng: &mut Rng) -> Result<StepResult>;
    /// The underlying MDP for tabular environments.
    fn tabular(&self) -> Option<&TabularMdp> {
        None
    }
}

/// Episode bookkeeping shared by all environments.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    steps: usize,
    done: bool,
    started: bool,
}

impl EpisodeClock {
    pub(crate) fn reset(&mut self) {
        self.steps = 0;
        self.done = false;
        self.started = true;
    }

    pub(crate) fn check(&self, action: usize, n_actions: usize) -> Result<()> {
        if action >= n_actions {
            return Err(Error::Domain(format!(
                "action {action} out of range for {n_actions} actions"
            )));
        }
        if !self.started {
            return Err(Error::State("step called before reset".into()));
        }
        if self.done {
            return Err(Error::State("episode already finished; call reset".into()));
        }
        Ok(())
    }

    /// Advances the counter and returns whether the cap was hit.
    pub(crate) fn tick(&mut self, terminated: bool, cap: usize) -> bool {
        self.steps += 1;
        let truncated = !terminated && self.steps >= cap;
        self.done = terminated || truncated;
        truncated
    }

    pub(crate) fn steps(&self) -> usize {
        self.steps
    }
}

/// Environment selector: `cartpole`, `acrobot`, `mountaincar`, `chain:<n>:<seed>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvId {
    CartPole,
    Acrobot,
    MountainCar,
    Chain { n_states: usize, seed: u64 },
}

impl EnvId {
    pub fn is_tabular(&self) -> bool {
        matches!(self, EnvId::Chain { .. })
    }

    pub fn make(&self) -> Result<Box<dyn Environment>> {
        Ok(match *self {
            EnvId::CartPole => Box::new(CartPole::new()),
            EnvId::Acrobot => Box::new(Acrobot::new()),
            EnvId::MountainCar => Box::new(MountainCar::new()),
            EnvId::Chain { .. } => Box::new(TabularEnv::new(self.tabular_mdp()?)),
        })
    }

    /// The MDP behind a `chain:` id. `chain:1:<seed>` is a single state whose
    /// reward does not depend on the action.
    pub fn tabular_mdp(&self) -> Result<TabularMdp> {
        match *self {
            EnvId::Chain { n_states: 1, seed } => single_state_mdp(seed),
            EnvId::Chain { n_states, seed } => make_chain_mdp(n_states, seed),
            _ => Err(Error::Domain(format!("{self} is not a tabular environment"))),
        }
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartpole" => return Ok(EnvId::CartPole),
            "acrobot" => return Ok(EnvId::Acrobot),
            "mountaincar" => return Ok(EnvId::MountainCar),
            _ => {}
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 && parts[0] == "chain" {
            let n_states: usize = parts[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad state count in env id `{s}`")))?;
            let seed: u64 = parts[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad seed in env id `{s}`")))?;
            if n_states == 0 {
                return Err(Error::Domain("chain needs at least one state".into()));
            }
            return Ok(EnvId::Chain { n_states, seed });
        }
        Err(Error::Parse(format!("unknown environment id `{s}`")))
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvId::CartPole => write!(f, "cartpole"),
            EnvId::Acrobot => write!(f, "acrobot"),
            EnvId::MountainCar => write!(f, "mountaincar"),
            EnvId::Chain { n_states, seed } => write!(f, "chain:{n_states}:{seed}"),
        }
    }
}
