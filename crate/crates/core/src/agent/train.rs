//! The training loop shared by all four algorithms.
//!
//! Per environment step, in this order: act (under `π` or `μ`), value
//! update with correction `ŵρ`, recompute `δ` with the updated critic,
//! compatible features `f`, then either the advantage update with
//! correction `wρ` followed by `θ ← θ + β x` (natural variants) or
//! `θ ← θ + β wρ δ f` (vanilla variants). On-policy runs use corrections of
//! exactly 1, so they share every floating-point operation with an
//! off-policy run whose behavior policy is the target itself.

use super::config::{AgentConfig, Behavior, RatioSource};
use crate::critic::{AdvantageCritic, Transition, ValueCritic};
use crate::env::{Environment, Observation};
use crate::error::{Error, Result};
use crate::net::Mlp;
use crate::oracle::FixedPolicy;
use crate::policy::SoftmaxPolicy;
use crate::ratio::{exact_ratios, rho, RatioEstimator, RatioTarget, TransitionBatch};
use crate::rng::{categorical, stream, substream, Rng, Stream};
use rand::Rng as _;
use std::collections::VecDeque;
use std::time::Instant;

/// Parameter vectors beyond this norm abort training.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// `0.9·reward + 0.1·prev`; the first episode starts the average at its
/// own reward.
pub fn ema_update(prev: Option<f64>, reward: f64) -> f64 {
    match prev {
        None => reward,
        Some(p) => 0.9 * reward + 0.1 * p,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based.
    pub index: usize,
    /// Training-episode return on-policy; evaluation-episode return
    /// off-policy.
    pub total_reward: f64,
    pub ema_reward: f64,
    pub steps: usize,
    pub wall_ms: u64,
}

/// Mean and population standard deviation of `episodes` returns under `π`.
pub fn evaluate(policy: &SoftmaxPolicy, env: &mut dyn Environment, episodes: usize, rng: &mut Rng) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::Domain("evaluation needs at least one episode".into()));
    }
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        returns.push(run_episode(policy, env, rng)?.0);
    }
    // deviations from the first return keep identical returns at std 0 exactly
    let shift = returns[0];
    let offset = returns.iter().map(|r| r - shift).sum::<f64>() / episodes as f64;
    let var = returns.iter().map(|r| (r - shift - offset).powi(2)).sum::<f64>() / episodes as f64;
    Ok((shift + offset, var.sqrt()))
}

/// One episode under `π` without learning: `(return, steps)`.
pub fn run_episode(policy: &SoftmaxPolicy, env: &mut dyn Environment, rng: &mut Rng) -> Result<(f64, usize)> {
    let mut obs = env.reset(rng);
    let mut total = 0.0;
    let mut steps = 0;
    loop {
        let a = policy.sample_action(&obs, rng)?;
        let out = env.step(a, rng)?;
        total += out.reward;
        steps += 1;
        if out.done() {
            return Ok((total, steps));
        }
        obs = out.next_obs;
    }
}

#[derive(Debug, Clone)]
struct Stored {
    obs: Observation,
    action: usize,
    next_obs: Observation,
    t: usize,
}

/// Ratio estimators plus the behavior data they are refit on.
struct RatioState {
    w_hat: RatioEstimator,
    w: RatioEstimator,
    episodes: VecDeque<(Observation, Vec<Stored>)>,
    current: Vec<Stored>,
    current_start: Option<Observation>,
}

/// Everything needed to continue training.
pub struct Agent {
    cfg: AgentConfig,
    gamma: f64,
    env: Box<dyn Environment>,
    eval_env: Box<dyn Environment>,
    policy: SoftmaxPolicy,
    critic: ValueCritic,
    advantage: AdvantageCritic,
    ratios: Option<RatioState>,
    env_rng: Rng,
    policy_rng: Rng,
    ratio_rng: Rng,
    episode: usize,
    ema: Option<f64>,
    best: Option<(f64, SoftmaxPolicy)>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub records: Vec<EpisodeRecord>,
    pub policy: SoftmaxPolicy,
    pub critic: ValueCritic,
    pub advantage: AdvantageCritic,
    /// The policy after the episode with the highest EMA reward (latest on
    /// ties).
    pub best_policy: SoftmaxPolicy,
    pub best_ema: f64,
}

fn dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend_from_slice(hidden);
    d.push(output);
    d
}

impl Agent {
    pub fn new(cfg: AgentConfig) -> Result<Self> {
        cfg.validate()?;
        let env = cfg.env.make()?;
        let eval_env = cfg.env.make()?;
        let gamma = cfg.gamma.unwrap_or_else(|| env.default_gamma());
        let (obs_dim, n_actions) = (env.obs_dim(), env.n_actions());
        let mut init = stream(cfg.seed, Stream::Init);
        let policy = SoftmaxPolicy::new(Mlp::new(&dims(obs_dim, &cfg.actor_hidden, n_actions), cfg.activation, &mut init)?);
        let value_net = Mlp::new(&dims(obs_dim, &cfg.critic_hidden, 1), cfg.activation, &mut init)?;
        let critic = if cfg.lambda > 0.0 {
            ValueCritic::with_trace(value_net, gamma, cfg.lambda)?
        } else {
            ValueCritic::new(value_net, gamma)?
        };
        let advantage = AdvantageCritic::new(policy.num_params());
        let ratios = if cfg.algorithm.is_off_policy() && cfg.behavior == Behavior::Uniform {
            let (w_hat, w) = match (cfg.ratio_source, env.tabular()) {
                (RatioSource::Exact, Some(mdp)) => (
                    RatioEstimator::tabular(mdp.n_states(), RatioTarget::Stationary),
                    RatioEstimator::tabular(mdp.n_states(), RatioTarget::Visitation { gamma }),
                ),
                _ => {
                    let mk = |target, rng: &mut Rng| {
                        RatioEstimator::network(obs_dim, &cfg.ratio_hidden, cfg.activation, target, rng)
                            .map(|e| e.with_bandwidth(cfg.ratio_bandwidth))
                    };
                    (mk(RatioTarget::Stationary, &mut init)?, mk(RatioTarget::Visitation { gamma }, &mut init)?)
                }
            };
            Some(RatioState { w_hat, w, episodes: VecDeque::new(), current: Vec::new(), current_start: None })
        } else {
            None
        };
        Ok(Self {
            env_rng: stream(cfg.seed, Stream::Env),
            policy_rng: stream(cfg.seed, Stream::Policy),
            ratio_rng: stream(cfg.seed, Stream::Ratio),
            cfg,
            gamma,
            env,
            eval_env,
            policy,
            critic,
            advantage,
            ratios,
            episode: 0,
            ema: None,
            best: None,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn policy(&self) -> &SoftmaxPolicy {
        &self.policy
    }

    /// Replaces the policy parameters, e.g. to start from a fixture.
    pub fn set_policy(&mut self, policy: SoftmaxPolicy) -> Result<()> {
        if policy.net().dims() != self.policy.net().dims() {
            return Err(Error::Domain("policy shape does not match the agent".into()));
        }
        self.policy = policy;
        Ok(())
    }

    pub fn critic(&self) -> &ValueCritic {
        &self.critic
    }

    pub fn advantage(&self) -> &AdvantageCritic {
        &self.advantage
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    /// Current ratio estimates `(ŵ(s), w(s))`; both 1 on-policy.
    pub fn ratio_values(&self, obs: &[f64]) -> Result<(f64, f64)> {
        match &self.ratios {
            None => Ok((1.0, 1.0)),
            Some(r) => Ok((
                r.w_hat.clipped(obs, self.cfg.ratio_clip)?,
                r.w.clipped(obs, self.cfg.ratio_clip)?,
            )),
        }
    }

    fn behavior_probs(&self, pi: &[f64]) -> Vec<f64> {
        match (self.cfg.algorithm.is_off_policy(), self.cfg.behavior) {
            (true, Behavior::Uniform) => vec![1.0 / pi.len() as f64; pi.len()],
            _ => pi.to_vec(),
        }
    }

    fn refit_ratios(&mut self) -> Result<()> {
        let Some(state) = self.ratios.as_mut() else { return Ok(()) };
        if self.cfg.ratio_source == RatioSource::Exact {
            let mdp = self.env.tabular().ok_or_else(|| Error::Domain("exact ratios need a tabular environment".into()))?;
            let mu = FixedPolicy::uniform(mdp.n_states(), mdp.n_actions());
            let exact = exact_ratios(mdp, &self.policy, &mu)?;
            state.w_hat = RatioEstimator::from_table(exact.w_hat, RatioTarget::Stationary)?;
            state.w = RatioEstimator::from_table(exact.w, RatioTarget::Visitation { gamma: self.gamma })?;
            return Ok(());
        }
        let pool: Vec<&Stored> = state.episodes.iter().flat_map(|(_, e)| e.iter()).collect();
        if pool.len() < 2 {
            return Ok(());
        }
        let n = self.cfg.ratio_batch.min(pool.len());
        let mut stationary = TransitionBatch::new();
        let mut visitation = TransitionBatch::new();
        for _ in 0..n {
            let s = pool[self.ratio_rng.gen_range(0..pool.len())];
            let pi = self.policy.action_probs(&s.obs)?;
            let mu = vec![1.0 / pi.len() as f64; pi.len()];
            let r = rho(&pi, &mu, s.action)?;
            stationary.push(s.obs.clone(), s.action, s.next_obs.clone(), r, 1.0);
            visitation.push(s.obs.clone(), s.action, s.next_obs.clone(), r, self.gamma.powi(s.t as i32));
        }
        visitation.starts = state.episodes.iter().map(|(s0, _)| s0.clone()).collect();
        state.w_hat.fit(&stationary, self.cfg.ratio_steps, self.cfg.ratio_lr)?;
        state.w.fit(&visitation, self.cfg.ratio_steps, self.cfg.ratio_lr)?;
        log::debug!(
            "episode {}: refit ratios on {} transitions",
            self.episode,
            stationary.len()
        );
        Ok(())
    }

    fn check_divergence(&self, step: usize) -> Result<()> {
        let checks = [
            ("policy", self.policy.net().param_norm()),
            ("value critic", self.critic.net().param_norm()),
            ("advantage critic", crate::net::dot(self.advantage.weights(), self.advantage.weights()).sqrt()),
        ];
        for (what, norm) in checks {
            if !norm.is_finite() || norm > DIVERGENCE_NORM {
                return Err(Error::Divergence {
                    episode: self.episode + 1,
                    step,
                    reason: format!("{what} parameter norm {norm:e}"),
                });
            }
        }
        Ok(())
    }

    /// Runs one training episode and returns its record.
    pub fn train_episode(&mut self) -> Result<EpisodeRecord> {
        let started = Instant::now();
        let n = self.episode as u64;
        if self.ratios.is_some() && n % self.cfg.ratio_refit_every as u64 == 0 {
            if self.cfg.ratio_source == RatioSource::Exact || n > 0 {
                self.refit_ratios()?;
            }
        }
        let alpha = self.cfg.critic_lr * self.cfg.schedule.fast(n);
        let alpha_adv = self.cfg.advantage_lr * self.cfg.schedule.fast(n);
        let beta = self.cfg.actor_lr * self.cfg.schedule.slow(n);
        let natural = self.cfg.algorithm.is_natural();

        self.critic.reset_trace();
        let mut obs = self.env.reset(&mut self.env_rng);
        if let Some(r) = self.ratios.as_mut() {
            r.current.clear();
            r.current_start = Some(obs.clone());
        }
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let pi = self.policy.action_probs(&obs)?;
            let mu = self.behavior_probs(&pi);
            let action = categorical(&mu, &mut self.policy_rng);
            let out = self.env.step(action, &mut self.env_rng)?;
            total += out.reward;
            // corrections are exactly 1 unless μ differs from π
            let (c_value, c_adv) = if self.ratios.is_some() {
                let r = rho(&pi, &mu, action)?;
                let (w_hat, w) = self.ratio_values(&obs)?;
                (w_hat * r, w * r)
            } else {
                (1.0, 1.0)
            };
            let t = Transition { obs: &obs, reward: out.reward, next_obs: &out.next_obs, terminated: out.terminated };
            self.critic.update(&t, alpha, c_value)?;
            let delta = self.critic.td_error(&t)?;
            let f = self.policy.compat_features(&obs, action)?;
            if natural {
                self.advantage.update(&f, delta, alpha_adv, c_adv)?;
                let x = self.advantage.natural_direction();
                self.policy.net_mut().apply_update(&x, beta)?;
            } else {
                self.policy.net_mut().apply_update(&f, beta * c_adv * delta)?;
            }
            self.check_divergence(steps)?;
            if let Some(r) = self.ratios.as_mut() {
                r.current.push(Stored { obs: obs.clone(), action, next_obs: out.next_obs.clone(), t: steps });
            }
            steps += 1;
            if out.done() {
                break;
            }
            obs = out.next_obs;
        }

        if let Some(r) = self.ratios.as_mut() {
            let start = r.current_start.take().unwrap_or_default();
            r.episodes.push_back((start, std::mem::take(&mut r.current)));
            while r.episodes.len() > self.cfg.ratio_buffer {
                r.episodes.pop_front();
            }
        }

        let score = if self.cfg.algorithm.is_off_policy() {
            let mut rng = substream(self.cfg.seed, Stream::Eval, n);
            run_episode(&self.policy, self.eval_env.as_mut(), &mut rng)?.0
        } else {
            total
        };
        let ema = ema_update(self.ema, score);
        self.ema = Some(ema);
        if self.best.as_ref().map_or(true, |(b, _)| ema >= *b) {
            self.best = Some((ema, self.policy.clone()));
        }
        self.episode += 1;
        Ok(EpisodeRecord {
            index: self.episode,
            total_reward: score,
            ema_reward: ema,
            steps,
            wall_ms: started.elapsed().as_millis() as u64,
        })
    }

    pub fn finish(self, records: Vec<EpisodeRecord>) -> TrainResult {
        let (best_ema, best_policy) = self.best.unwrap_or((f64::NEG_INFINITY, self.policy.clone()));
        TrainResult {
            records,
            policy: self.policy,
            critic: self.critic,
            advantage: self.advantage,
            best_policy,
            best_ema,
        }
    }
}

/// Runs `config.episodes` episodes.
pub fn train(config: &AgentConfig) -> Result<TrainResult> {
    train_with(config, |_| {})
}

/// [`train`] with a callback per finished episode.
pub fn train_with(config: &AgentConfig, mut on_episode: impl FnMut(&EpisodeRecord)) -> Result<TrainResult> {
    let mut agent = Agent::new(config.clone())?;
    let mut records = Vec::with_capacity(config.episodes);
    for _ in 0..config.episodes {
        let rec = agent.train_episode()?;
        log::info!(
            "{} {} episode {}: reward {:.2} ema {:.2} steps {}",
            config.algorithm,
            config.env,
            rec.index,
            rec.total_reward,
            rec.ema_reward,
            rec.steps
        );
        on_episode(&rec);
        records.push(rec);
    }
    Ok(agent.finish(records))
}
