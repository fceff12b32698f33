//! Softmax policy over network logits and its compatible features.

use crate::error::{Error, Result};
use crate::net::{FlatGrad, Mlp};
use crate::rng::{categorical, Rng};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// `π_θ(a|s) ∝ exp(f(θ, s, a))` where `f` is the network output.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    net: Mlp,
}

impl SoftmaxPolicy {
    pub fn new(net: Mlp) -> Self {
        Self { net }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn into_net(self) -> Mlp {
        self.net
    }

    pub fn n_actions(&self) -> usize {
        self.net.output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params()
    }

    pub fn action_probs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.net.forward(obs)?))
    }

    pub fn sample_action(&self, obs: &[f64], rng: &mut Rng) -> Result<usize> {
        Ok(categorical(&self.action_probs(obs)?, rng))
    }

    /// `∇θ log π_θ(s, a)`, flattened.
    pub fn compat_features(&self, obs: &[f64], action: usize) -> Result<FlatGrad> {
        Ok(self.probs_and_features(obs, action)?.1)
    }

    /// Action probabilities and compatible features from one forward pass.
    ///
    /// For a softmax head `∂ log π(a|s) / ∂ logits = e_a - π(·|s)`, which is
    /// pushed back through the network instead of differentiating `log π`.
    pub fn probs_and_features(&self, obs: &[f64], action: usize) -> Result<(Vec<f64>, FlatGrad)> {
        let n = self.n_actions();
        if action >= n {
            return Err(Error::Domain(format!("action {action} out of range for {n} actions")));
        }
        let trace = self.net.forward_trace(obs)?;
        let probs = softmax(trace.output());
        let mut cograd: Vec<f64> = probs.iter().map(|p| -p).collect();
        cograd[action] += 1.0;
        let features = self.net.backward_trace(&trace, &cograd)?;
        Ok((probs, features))
    }

    pub fn log_prob(&self, obs: &[f64], action: usize) -> Result<f64> {
        let logits = self.net.forward(obs)?;
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        Ok(logits[action] - lse)
    }
}
