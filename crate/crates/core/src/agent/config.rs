//! Agent configuration, per-task defaults and the flat `key = value` format.

use crate::env::EnvId;
use crate::error::{Error, Result};
use crate::net::Activation;
use crate::schedule::StepSchedule;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Ac,
    Nac,
    OffAc,
    OffNac,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ac, Algorithm::Nac, Algorithm::OffAc, Algorithm::OffNac];

    pub fn is_off_policy(self) -> bool {
        matches!(self, Algorithm::OffAc | Algorithm::OffNac)
    }

    pub fn is_natural(self) -> bool {
        matches!(self, Algorithm::Nac | Algorithm::OffNac)
    }

    /// The same update rule on the other side of the on/off-policy split.
    pub fn counterpart(self) -> Algorithm {
        match self {
            Algorithm::Ac => Algorithm::OffAc,
            Algorithm::Nac => Algorithm::OffNac,
            Algorithm::OffAc => Algorithm::Ac,
            Algorithm::OffNac => Algorithm::Nac,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ac => "ac",
            Algorithm::Nac => "nac",
            Algorithm::OffAc => "offac",
            Algorithm::OffNac => "offnac",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ac" => Ok(Algorithm::Ac),
            "nac" => Ok(Algorithm::Nac),
            "offac" => Ok(Algorithm::OffAc),
            "offnac" => Ok(Algorithm::OffNac),
            other => Err(Error::Parse(format!("unknown algorithm `{other}`; expected ac|nac|offac|offnac"))),
        }
    }
}

/// Data-generating policy for the off-policy algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Behavior {
    /// Every action equally likely in every state.
    #[default]
    Uniform,
    /// `μ = π_θ`; all corrections are exactly 1.
    Target,
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Behavior::Uniform => "uniform",
            Behavior::Target => "target",
        })
    }
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(Behavior::Uniform),
            "target" => Ok(Behavior::Target),
            other => Err(Error::Parse(format!("unknown behavior `{other}`; expected uniform|target"))),
        }
    }
}

/// Where the state-distribution ratios come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatioSource {
    /// Fitted by kernel-loss descent on recent behavior data.
    #[default]
    Kernel,
    /// Solved exactly from the MDP (tabular environments only).
    Exact,
}

impl fmt::Display for RatioSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RatioSource::Kernel => "kernel",
            RatioSource::Exact => "exact",
        })
    }
}

impl FromStr for RatioSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "kernel" => Ok(RatioSource::Kernel),
            "exact" => Ok(RatioSource::Exact),
            other => Err(Error::Parse(format!("unknown ratio source `{other}`; expected kernel|exact"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub env: EnvId,
    pub episodes: usize,
    pub seed: u64,
    /// `None` uses the environment's own discount.
    pub gamma: Option<f64>,
    /// `0` is plain TD(0); positive values enable the eligibility trace.
    pub lambda: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub advantage_lr: f64,
    pub ratio_lr: f64,
    pub schedule: StepSchedule,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub ratio_hidden: Vec<usize>,
    pub activation: Activation,
    pub behavior: Behavior,
    pub ratio_source: RatioSource,
    /// Refit the ratio estimators every this many training episodes.
    pub ratio_refit_every: usize,
    /// Ceiling applied to `w`, `ŵ` before use; `None` disables clipping.
    pub ratio_clip: Option<f64>,
    /// Gradient steps per refit.
    pub ratio_steps: usize,
    /// Transitions subsampled from the buffer for one refit.
    pub ratio_batch: usize,
    /// Behavior episodes kept for refits.
    pub ratio_buffer: usize,
    pub ratio_bandwidth: Option<f64>,
}

/// `(actor, advantage, critic, ratio)` learning rates.
type Rates = (f64, f64, f64, f64);

fn default_rates(algo: Algorithm, env: EnvId, traced: bool) -> Rates {
    use Algorithm::*;
    match (env, algo, traced) {
        (EnvId::CartPole, Ac, _) => (1e-3, 0.0, 5e-3, 0.0),
        (EnvId::CartPole, Nac, _) => (1e-3, 1e-3, 1e-2, 0.0),
        (EnvId::CartPole, OffAc, _) => (5e-4, 0.0, 1e-2, 1e-3),
        (EnvId::CartPole, OffNac, _) => (5e-4, 1e-2, 1e-2, 1e-2),
        (EnvId::Acrobot, Ac, _) => (5e-4, 0.0, 1e-3, 0.0),
        (EnvId::Acrobot, Nac, _) => (1e-4, 1e-3, 5e-3, 0.0),
        (EnvId::Acrobot, OffAc, _) => (1e-4, 0.0, 5e-3, 1e-4),
        (EnvId::Acrobot, OffNac, _) => (5e-5, 1e-4, 5e-3, 1e-4),
        (EnvId::MountainCar, Ac, false) => (1e-3, 0.0, 5e-3, 0.0),
        (EnvId::MountainCar, Nac, false) => (1e-5, 1e-4, 5e-3, 0.0),
        (EnvId::MountainCar, OffAc, false) => (1e-4, 0.0, 5e-3, 1e-2),
        (EnvId::MountainCar, OffNac, false) => (1e-6, 1e-4, 5e-3, 1e-2),
        (EnvId::MountainCar, Ac, true) => (5e-3, 0.0, 5e-2, 0.0),
        (EnvId::MountainCar, Nac, true) => (1e-4, 1e-3, 5e-2, 0.0),
        (EnvId::MountainCar, OffAc, true) => (1e-4, 0.0, 5e-3, 1e-2),
        (EnvId::MountainCar, OffNac, true) => (1e-6, 1e-4, 5e-3, 1e-2),
        (EnvId::Chain { .. }, Ac | OffAc, _) => (0.05, 0.0, 0.1, 0.05),
        (EnvId::Chain { .. }, Nac | OffNac, _) => (0.05, 0.1, 0.1, 0.05),
    }
}

/// Trace decay used for the MountainCar trace runs.
pub fn default_lambda(algo: Algorithm) -> f64 {
    if algo.is_natural() {
        1.0
    } else {
        0.7
    }
}

impl AgentConfig {
    /// Task defaults. `traced` selects the eligibility-trace rate table
    /// where one exists; `lambda` itself stays 0 until set.
    pub fn defaults(algorithm: Algorithm, env: EnvId, traced: bool) -> Self {
        let (actor_lr, advantage_lr, critic_lr, ratio_lr) = default_rates(algorithm, env, traced);
        // rates the tables leave blank fall back to the critic rate
        let advantage_lr = if advantage_lr > 0.0 { advantage_lr } else { critic_lr };
        let ratio_lr = if ratio_lr > 0.0 { ratio_lr } else { 1e-3 };
        let (actor_hidden, critic_hidden, ratio_hidden) = match env {
            EnvId::CartPole => (vec![16], vec![64, 64], vec![16]),
            EnvId::Acrobot | EnvId::MountainCar => (vec![32], vec![32, 32], vec![32]),
            EnvId::Chain { .. } => (vec![], vec![], vec![]),
        };
        Self {
            algorithm,
            env,
            episodes: 1000,
            seed: 0,
            gamma: None,
            lambda: 0.0,
            actor_lr,
            critic_lr,
            advantage_lr,
            ratio_lr,
            schedule: StepSchedule::Constant,
            actor_hidden,
            critic_hidden,
            ratio_hidden,
            activation: Activation::Tanh,
            behavior: Behavior::Uniform,
            ratio_source: RatioSource::Kernel,
            ratio_refit_every: 1,
            ratio_clip: Some(20.0),
            ratio_steps: 10,
            ratio_batch: 256,
            ratio_buffer: 10,
            ratio_bandwidth: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if self.episodes == 0 {
            return bad("episodes must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("adv_lr", self.advantage_lr),
            ("ratio_lr", self.ratio_lr),
        ] {
            // a zero actor rate freezes the policy and is allowed
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a nonnegative number, got {v}"));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return bad(format!("gamma {g} outside (0, 1)"));
            }
        }
        self.schedule.validate()?;
        if self.ratio_refit_every == 0 || self.ratio_steps == 0 || self.ratio_batch < 2 || self.ratio_buffer == 0 {
            return bad("ratio refit settings must be positive (batch at least 2)".into());
        }
        if let Some(c) = self.ratio_clip {
            if !(c > 0.0) {
                return bad(format!("ratio clip must be positive, got {c}"));
            }
        }
        if let Some(h) = self.ratio_bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("ratio bandwidth must be positive, got {h}"));
            }
        }
        if self.ratio_source == RatioSource::Exact && !self.env.is_tabular() {
            return bad("exact ratios need a tabular environment".into());
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Parse(format!("{key}: `{v}` is not a number")));
        let int = |v: &str| v.parse::<u64>().map_err(|_| Error::Parse(format!("{key}: `{v}` is not an integer")));
        let opt = |v: &str| -> Result<Option<f64>> {
            if v == "none" {
                Ok(None)
            } else {
                num(v).map(Some)
            }
        };
        match key.trim() {
            "algo" => self.algorithm = value.parse()?,
            "env" => self.env = value.parse()?,
            "episodes" => self.episodes = int(value)? as usize,
            "seed" => self.seed = int(value)?,
            "gamma" => self.gamma = opt(value)?,
            "lambda" => self.lambda = num(value)?,
            "actor_lr" => self.actor_lr = num(value)?,
            "critic_lr" => self.critic_lr = num(value)?,
            "adv_lr" => self.advantage_lr = num(value)?,
            "ratio_lr" => self.ratio_lr = num(value)?,
            "schedule" => self.schedule = value.parse()?,
            "actor_hidden" => self.actor_hidden = parse_sizes(value)?,
            "critic_hidden" => self.critic_hidden = parse_sizes(value)?,
            "ratio_hidden" => self.ratio_hidden = parse_sizes(value)?,
            "activation" => self.activation = value.parse()?,
            "behavior" => self.behavior = value.parse()?,
            "ratio_source" => self.ratio_source = value.parse()?,
            "ratio_refit_every" => self.ratio_refit_every = int(value)? as usize,
            "ratio_clip" => self.ratio_clip = opt(value)?,
            "ratio_steps" => self.ratio_steps = int(value)? as usize,
            "ratio_batch" => self.ratio_batch = int(value)? as usize,
            "ratio_buffer" => self.ratio_buffer = int(value)? as usize,
            "ratio_bandwidth" => self.ratio_bandwidth = opt(value)?,
            other => return Err(Error::Parse(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Every setting as ordered `(key, value)` pairs; `set` inverts this.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        vec![
            ("algo", self.algorithm.to_string()),
            ("env", self.env.to_string()),
            ("episodes", self.episodes.to_string()),
            ("seed", self.seed.to_string()),
            ("gamma", opt(self.gamma)),
            ("lambda", self.lambda.to_string()),
            ("actor_lr", self.actor_lr.to_string()),
            ("critic_lr", self.critic_lr.to_string()),
            ("adv_lr", self.advantage_lr.to_string()),
            ("ratio_lr", self.ratio_lr.to_string()),
            ("schedule", self.schedule.to_string()),
            ("actor_hidden", format_sizes(&self.actor_hidden)),
            ("critic_hidden", format_sizes(&self.critic_hidden)),
            ("ratio_hidden", format_sizes(&self.ratio_hidden)),
            ("activation", self.activation.to_string()),
            ("behavior", self.behavior.to_string()),
            ("ratio_source", self.ratio_source.to_string()),
            ("ratio_refit_every", self.ratio_refit_every.to_string()),
            ("ratio_clip", opt(self.ratio_clip)),
            ("ratio_steps", self.ratio_steps.to_string()),
            ("ratio_batch", self.ratio_batch.to_string()),
            ("ratio_buffer", self.ratio_buffer.to_string()),
            ("ratio_bandwidth", opt(self.ratio_bandwidth)),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Builds a config from merged settings: `algo` and `env` are required,
    /// `lambda` picks the rate table, everything else overrides defaults.
    pub fn from_settings(settings: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| settings.get(k).map(String::as_str);
        let algorithm: Algorithm = get("algo").ok_or_else(|| Error::Parse("missing `algo`".into()))?.parse()?;
        let env: EnvId = get("env").ok_or_else(|| Error::Parse("missing `env`".into()))?.parse()?;
        let traced = match get("lambda") {
            Some(v) => v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("lambda: `{v}` is not a number")))? > 0.0,
            None => false,
        };
        let mut cfg = Self::defaults(algorithm, env, traced);
        for (k, v) in settings {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_settings(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_sizes(v: &str) -> Result<Vec<usize>> {
    if v.is_empty() || v == "none" {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Parse(format!("bad layer size `{t}`"))),
        })
        .collect()
}

fn format_sizes(v: &[usize]) -> String {
    if v.is_empty() {
        "none".into()
    } else {
        v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    }
}
