//! Cart-pole balancing.
//!
//! Dynamics follow the classic-control benchmark formulation with explicit
//! Euler integration:
//!
//! | constant          | value            |
//! |-------------------|------------------|
//! | gravity           | 9.8              |
//! | cart mass         | 1.0              |
//! | pole mass         | 0.1              |
//! | pole half-length  | 0.5              |
//! | force magnitude   | 10.0             |
//! | timestep (tau)    | 0.02 s           |
//! | angle limit       | 15 degrees       |
//! | position limit    | 2.4              |
//! | episode cap       | 500 steps        |
//!
//! Observation: `[x, x_dot, theta, theta_dot]`. Action 0 pushes with `+force`,
//! action 1 with `-force`. Every step, including the failing one, pays +1.
//! Start states are uniform on `[-0.05, 0.05]^4`.

use super::{EpisodeClock, Environment, Observation, StepResult};
use crate::error::Result;
use crate::rng::Rng;
use rand::Rng as _;

pub const GRAVITY: f64 = 9.8;
pub const MASS_CART: f64 = 1.0;
pub const MASS_POLE: f64 = 0.1;
pub const HALF_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const ANGLE_LIMIT: f64 = 15.0 * std::f64::consts::PI / 180.0;
pub const POSITION_LIMIT: f64 = 2.4;
pub const EPISODE_CAP: usize = 500;

#[derive(Debug, Clone, Default)]
pub struct CartPole {
    state: [f64; 4],
    clock: EpisodeClock,
}

impl CartPole {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    pub fn is_failure(state: &[f64]) -> bool {
        state[0].abs() > POSITION_LIMIT || state[2].abs() > ANGLE_LIMIT
    }
}

impl Environment for CartPole {
    fn obs_dim(&self) -> usize {
        4
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn max_steps(&self) -> usize {
        EPISODE_CAP
    }

    fn default_gamma(&self) -> f64 {
        0.99
    }

    fn reset(&mut self, rng: &mut Rng) -> Observation {
        for v in self.state.iter_mut() {
            *v = rng.gen_range(-0.05..=0.05);
        }
        self.clock.reset();
        self.state.to_vec()
    }

    fn step(&mut self, action: usize, _rng: &mut Rng) -> Result<StepResult> {
        self.clock.check(action, 2)?;
        let [x, x_dot, theta, theta_dot] = self.state;
        let force = if action == 0 { FORCE_MAG } else { -FORCE_MAG };
        let total_mass = MASS_CART + MASS_POLE;
        let polemass_length = MASS_POLE * HALF_LENGTH;
        let (sin, cos) = theta.sin_cos();

        let temp = (force + polemass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;

        self.state = [
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ];
        let terminated = Self::is_failure(&self.state);
        let truncated = self.clock.tick(terminated, EPISODE_CAP);
        Ok(StepResult {
            next_obs: self.state.to_vec(),
            reward: 1.0,
            terminated,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn reset_range() {
        let mut env = CartPole::new();
        let mut rng = stream(3, Stream::Env);
        for _ in 0..10_000 {
            let obs = env.reset(&mut rng);
            assert!(obs.iter().all(|v| (-0.05..=0.05).contains(v)));
        }
    }

    #[test]
    fn reward_and_termination_rule() {
        let mut env = CartPole::new();
        let mut rng = stream(5, Stream::Env);
        let mut terminations = 0;
        for _ in 0..2_000 {
            env.reset(&mut rng);
            loop {
                let a = rng.gen_range(0..2);
                let out = env.step(a, &mut rng).unwrap();
                assert_eq!(out.reward, 1.0);
                assert_eq!(out.terminated, CartPole::is_failure(&out.next_obs));
                if out.done() {
                    terminations += out.terminated as usize;
                    break;
                }
            }
        }
        assert!(terminations > 1_900);
    }

    #[test]
    fn balanced_pole_truncates_at_cap() {
        // a perfectly upright, motionless pole never falls
        let mut env = CartPole::new();
        let mut rng = stream(0, Stream::Env);
        env.reset(&mut rng);
        env.state = [0.0; 4];
        let mut steps = 0;
        let mut action = 0;
        loop {
            let out = env.step(action, &mut rng).unwrap();
            steps += 1;
            action = if out.next_obs[2] + 0.1 * out.next_obs[3] > 0.0 { 0 } else { 1 };
            if out.done() {
                assert!(out.truncated && !out.terminated, "fell at {steps}");
                break;
            }
        }
        assert_eq!(steps, EPISODE_CAP);
    }
}
