//! Value critic (TD(0) / TD(λ)) and the linear advantage critic.

use crate::error::{ensure_finite, Error, Result};
use crate::net::{dot, FlatGrad, Mlp};

/// One observed transition.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub obs: &'a [f64],
    pub reward: f64,
    pub next_obs: &'a [f64],
    /// True termination. Truncated episodes still bootstrap through `V(s')`.
    pub terminated: bool,
}

/// `δ = r + γ V(s') - V(s)` with `V(s') := 0` on termination.
pub fn td_error(reward: f64, gamma: f64, value: f64, next_value: f64, terminated: bool) -> f64 {
    let bootstrap = if terminated { 0.0 } else { gamma * next_value };
    reward + bootstrap - value
}

/// `V_ψ` network trained by semi-gradient TD, optionally with an
/// accumulating eligibility trace.
#[derive(Debug, Clone)]
pub struct ValueCritic {
    net: Mlp,
    gamma: f64,
    /// `None` is plain TD(0); `Some(λ)` keeps a trace `z ← γλz + ∇V(s)`.
    lambda: Option<f64>,
    trace: FlatGrad,
}

impl ValueCritic {
    pub fn new(net: Mlp, gamma: f64) -> Result<Self> {
        Self::build(net, gamma, None)
    }

    pub fn with_trace(net: Mlp, gamma: f64, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("lambda {lambda} outside [0, 1]")));
        }
        Self::build(net, gamma, Some(lambda))
    }

    fn build(net: Mlp, gamma: f64, lambda: Option<f64>) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::Domain("value network must have one output".into()));
        }
        let k = net.num_params();
        Ok(Self { net, gamma, lambda, trace: FlatGrad::zeros(k) })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn trace(&self) -> &FlatGrad {
        &self.trace
    }

    /// Zeroes the eligibility trace; call at every episode start.
    pub fn reset_trace(&mut self) {
        self.trace.iter_mut().for_each(|z| *z = 0.0);
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.net.forward(obs)?[0])
    }

    pub fn td_error(&self, t: &Transition<'_>) -> Result<f64> {
        let v = self.value(t.obs)?;
        let v_next = if t.terminated { 0.0 } else { self.value(t.next_obs)? };
        Ok(td_error(t.reward, self.gamma, v, v_next, t.terminated))
    }

    /// One corrected TD step; returns the TD error it used.
    ///
    /// TD(0): `ψ ← ψ + α·c·δ·∇V(s)`. With a trace, `z ← γλz + ∇V(s)` first and
    /// then `ψ ← ψ + α·c·δ·z`.
    pub fn update(&mut self, t: &Transition<'_>, alpha: f64, correction: f64) -> Result<f64> {
        ensure_finite(correction, "value correction")?;
        let trace = self.net.forward_trace(t.obs)?;
        let v = trace.output()[0];
        let v_next = if t.terminated { 0.0 } else { self.value(t.next_obs)? };
        let delta = td_error(t.reward, self.gamma, v, v_next, t.terminated);
        ensure_finite(delta, "TD error")?;
        let grad = self.net.backward_trace(&trace, &[1.0])?;
        let scale = alpha * correction * delta;
        match self.lambda {
            None => self.net.apply_update(&grad, scale)?,
            Some(lambda) => {
                let decay = self.gamma * lambda;
                for (z, g) in self.trace.iter_mut().zip(grad.iter()) {
                    *z = decay * *z + g;
                }
                self.net.apply_update(&self.trace, scale)?;
            }
        }
        Ok(delta)
    }
}

/// Linear advantage model `A(s,a) ≈ xᵀ ∇θ log π_θ(s,a)`.
///
/// With compatible features its fixed point is the natural gradient, so `x`
/// is used directly as the actor's ascent direction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageCritic {
    x: Vec<f64>,
}

impl AdvantageCritic {
    pub fn new(k: usize) -> Self {
        Self { x: vec![0.0; k] }
    }

    pub fn from_weights(x: Vec<f64>) -> Self {
        Self { x }
    }

    pub fn weights(&self) -> &[f64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        dot(&self.x, features)
    }

    /// `x ← x + α·c·(δ - xᵀf)·f`.
    pub fn update(&mut self, features: &[f64], delta: f64, alpha: f64, correction: f64) -> Result<()> {
        if features.len() != self.x.len() {
            return Err(Error::Domain(format!(
                "feature length {} does not match critic length {}",
                features.len(),
                self.x.len()
            )));
        }
        ensure_finite(delta, "advantage target")?;
        ensure_finite(correction, "advantage correction")?;
        let residual = delta - self.predict(features);
        let scale = alpha * correction * residual;
        ensure_finite(scale, "advantage step")?;
        if scale != 0.0 {
            for (x, f) in self.x.iter_mut().zip(features) {
                *x += scale * f;
            }
        }
        Ok(())
    }

    /// The actor's ascent direction: `x` itself, no Fisher inversion.
    pub fn natural_direction(&self) -> FlatGrad {
        FlatGrad(self.x.clone())
    }
}
