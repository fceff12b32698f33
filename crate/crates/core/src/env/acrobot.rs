//! Two-link acrobot swing-up.
//!
//! Uses the benchmark-suite "book" dynamics: unit link lengths and masses,
//! centres of mass at 0.5, unit moments of inertia, g = 9.8, dt = 0.2 s with
//! one fourth-order Runge-Kutta step per tick (the benchmark's scheme for
//! this task). Joint velocities are clipped to `±4π` and `±9π`; angles are
//! wrapped to `[-π, π)`.
//!
//! Observation: `[cos θ1, sin θ1, cos θ2, sin θ2, θ1_dot, θ2_dot]`.
//! Actions 0, 1, 2 apply torque +1, 0, -1 on the actuated joint. Each step
//! pays -1 except the one that reaches the goal height (pays 0). Episodes
//! are capped at 500 steps; the capping step is counted.

use super::{EpisodeClock, Environment, Observation, StepResult};
use crate::error::Result;
use crate::rng::Rng;
use rand::Rng as _;
use std::f64::consts::PI;

const DT: f64 = 0.2;
const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_1: f64 = 0.5;
const LINK_COM_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const GRAVITY: f64 = 9.8;
const MAX_VEL_1: f64 = 4.0 * PI;
const MAX_VEL_2: f64 = 9.0 * PI;
const TORQUES: [f64; 3] = [1.0, 0.0, -1.0];
pub const EPISODE_CAP: usize = 500;

#[derive(Debug, Clone, Default)]
pub struct Acrobot {
    /// `[θ1, θ2, θ1_dot, θ2_dot]`
    state: [f64; 4],
    clock: EpisodeClock,
}

fn wrap(angle: f64) -> f64 {
    (angle + PI).rem_euclid(2.0 * PI) - PI
}

fn derivs(s: [f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2, l1, lc1, lc2) = (LINK_MASS_1, LINK_MASS_2, LINK_LENGTH_1, LINK_COM_1, LINK_COM_2);
    let (i1, i2, g) = (LINK_MOI, LINK_MOI, GRAVITY);
    let [theta1, theta2, dtheta1, dtheta2] = s;
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1
        - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin()
        - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn rk4(s: [f64; 4], torque: f64, dt: f64) -> [f64; 4] {
    let add = |a: [f64; 4], b: [f64; 4], h: f64| {
        [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]]
    };
    let k1 = derivs(s, torque);
    let k2 = derivs(add(s, k1, dt / 2.0), torque);
    let k3 = derivs(add(s, k2, dt / 2.0), torque);
    let k4 = derivs(add(s, k3, dt), torque);
    let mut out = s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

impl Acrobot {
    pub fn new() -> Self {
        Self::default()
    }

    fn observe(&self) -> Observation {
        let [t1, t2, d1, d2] = self.state;
        vec![t1.cos(), t1.sin(), t2.cos(), t2.sin(), d1, d2]
    }

    fn at_goal(&self) -> bool {
        let [t1, t2, _, _] = self.state;
        -t1.cos() - (t1 + t2).cos() > 1.0
    }
}

impl Environment for Acrobot {
    fn obs_dim(&self) -> usize {
        6
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
        for v in self.state.iter_mut() {
            *v = rng.gen_range(-0.1..=0.1);
        }
        self.clock.reset();
        self.observe()
    }

    fn step(&mut self, action: usize, _rng: &mut Rng) -> Result<StepResult> {
        self.clock.check(action, 3)?;
        let next = rk4(self.state, TORQUES[action], DT);
        self.state = [
            wrap(next[0]),
            wrap(next[1]),
            next[2].clamp(-MAX_VEL_1, MAX_VEL_1),
            next[3].clamp(-MAX_VEL_2, MAX_VEL_2),
        ];
        let terminated = self.at_goal();
        let truncated = self.clock.tick(terminated, EPISODE_CAP);
        Ok(StepResult {
            next_obs: self.observe(),
            reward: if terminated { 0.0 } else { -1.0 },
            terminated,
            truncated,
        })
    }
}
