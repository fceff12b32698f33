//! Mountain car.
//!
//! Benchmark-suite dynamics: `v += (a - 1)·0.001 - 0.0025·cos(3p)`, `v`
//! clipped to `±0.07`, `p += v`, `p` clipped to `[-1.2, 0.6]` with the
//! velocity zeroed on hitting the left wall. The goal is `p >= 0.5`.
//!
//! Observation: `[position, velocity]`. Actions 0, 1, 2 accelerate left,
//! not at all, right. Every step pays -1. Start position is uniform on
//! `[-0.6, -0.4]` at rest. Episodes are capped at 10000 steps.

use super::{EpisodeClock, Environment, Observation, StepResult};
use crate::error::Result;
use crate::rng::Rng;
use rand::Rng as _;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const EPISODE_CAP: usize = 10_000;

#[derive(Debug, Clone, Default)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
    clock: EpisodeClock,
}

impl MountainCar {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Environment for MountainCar {
    fn obs_dim(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn max_steps(&self) -> usize {
        EPISODE_CAP
    }

    fn default_gamma(&self) -> f64 {
        0.99
    }

    fn reset(&mut self, rng: &mut Rng) -> Observation {
        self.position = rng.gen_range(-0.6..=-0.4);
        self.velocity = 0.0;
        self.clock.reset();
        vec![self.position, self.velocity]
    }

    fn step(&mut self, action: usize, _rng: &mut Rng) -> Result<StepResult> {
        self.clock.check(action, 3)?;
        self.velocity += (action as f64 - 1.0) * FORCE - GRAVITY * (3.0 * self.position).cos();
        self.velocity = self.velocity.clamp(-MAX_SPEED, MAX_SPEED);
        self.position = (self.position + self.velocity).clamp(MIN_POSITION, MAX_POSITION);
        if self.position <= MIN_POSITION && self.velocity < 0.0 {
            self.velocity = 0.0;
        }
        let terminated = self.position >= GOAL_POSITION;
        let truncated = self.clock.tick(terminated, EPISODE_CAP);
        Ok(StepResult {
            next_obs: vec![self.position, self.velocity],
            reward: -1.0,
            terminated,
            truncated,
        })
    }
}
