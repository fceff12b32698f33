//! Distribution-correction ratios.
//!
//! `ŵ(s) = d_π(s)/d_μ(s)` (stationary) and `w(s) = d̃_π(s)/d̃_μ(s)`
//! (discounted visitation), exactly on tabular MDPs and approximately by
//! minimizing kernel losses on transitions collected under `μ`. For a unit
//! RKHS ball the inner maximization over test functions has a closed form,
//! so each loss is a quadratic form in the per-sample residuals under the
//! Gram matrix of a Gaussian kernel.
//!
//! Samples with bit-identical observations share one Gram row, so a loss
//! evaluation costs `O(n + G²)` for `G` distinct observations.

use crate::env::{state_index, TabularMdp};
use crate::error::{ensure_finite, Error, Result};
use crate::net::{Activation, Mlp};
use crate::oracle::{policy_table, stationary_for_table, visitation_for_table, TabularPolicy};
use crate::rng::{categorical, Rng};
use std::collections::HashMap;

/// Importance ratio `π(a|s)/μ(a|s)`.
pub fn rho(pi_probs: &[f64], mu_probs: &[f64], action: usize) -> Result<f64> {
    let (p, m) = match (pi_probs.get(action), mu_probs.get(action)) {
        (Some(&p), Some(&m)) => (p, m),
        _ => return Err(Error::Domain(format!("action {action} out of range"))),
    };
    if !(m > 0.0) {
        return Err(Error::Domain(format!("behavior policy has no support on action {action}")));
    }
    let r = p / m;
    ensure_finite(r, "importance ratio")?;
    Ok(r)
}

/// `w(s)·ρ - w(s')`.
#[inline]
pub fn delta_term(w: f64, rho_val: f64, w_next: f64) -> f64 {
    w * rho_val - w_next
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    pub bandwidth: f64,
}

/// Points used by the median heuristic are thinned to at most this many.
const MEDIAN_POINTS: usize = 512;

impl GaussianKernel {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Domain(format!("kernel bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { bandwidth })
    }

    /// Bandwidth = median pairwise distance of `points`, or 1 when that is 0.
    pub fn median_heuristic(points: &[Vec<f64>]) -> Self {
        let stride = points.len().div_ceil(MEDIAN_POINTS).max(1);
        let sub: Vec<&Vec<f64>> = points.iter().step_by(stride).collect();
        let mut d = Vec::with_capacity(sub.len() * sub.len().saturating_sub(1) / 2);
        for i in 0..sub.len() {
            for j in i + 1..sub.len() {
                d.push(sq_dist(sub[i], sub[j]).sqrt());
            }
        }
        let h = if d.is_empty() {
            1.0
        } else {
            let mid = d.len() / 2;
            *d.select_nth_unstable_by(mid, f64::total_cmp).1
        };
        Self { bandwidth: if h > 0.0 && h.is_finite() { h } else { 1.0 } }
    }

    #[inline]
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        (-sq_dist(u, v) / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

#[inline]
fn sq_dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Transitions `(s, a, s')` collected under one behavior policy, plus
/// start-state samples for the visitation loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub next_obs: Vec<Vec<f64>>,
    /// `π(a|s)/μ(a|s)` under the policy whose ratios are being estimated.
    pub rho: Vec<f64>,
    /// Sampling weight of each transition (`γ^t` to target `d̃_μ`).
    pub weight: Vec<f64>,
    pub starts: Vec<Vec<f64>>,
}

impl TransitionBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, obs: Vec<f64>, action: usize, next_obs: Vec<f64>, rho: f64, weight: f64) {
        self.obs.push(obs);
        self.actions.push(action);
        self.next_obs.push(next_obs);
        self.rho.push(rho);
        self.weight.push(weight);
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    fn validate(&self, min_len: usize) -> Result<()> {
        let n = self.obs.len();
        if n < min_len {
            return Err(Error::Domain(format!("kernel loss needs at least {min_len} transitions, got {n}")));
        }
        if self.next_obs.len() != n || self.rho.len() != n || self.weight.len() != n || self.actions.len() != n {
            return Err(Error::Domain("transition batch columns differ in length".into()));
        }
        if self.rho.iter().chain(&self.weight).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("ratios and weights must be finite and nonnegative".into()));
        }
        if !(self.weight.iter().sum::<f64>() > 0.0) {
            return Err(Error::Domain("transition weights sum to zero".into()));
        }
        Ok(())
    }
}

/// Observations grouped by bit pattern with their Gram matrix.
struct Groups {
    of: Vec<usize>,
    reps: Vec<Vec<f64>>,
}

impl Groups {
    fn new(points: &[Vec<f64>]) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut reps = Vec::new();
        let of = points
            .iter()
            .map(|p| {
                let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
                *index.entry(key).or_insert_with(|| {
                    reps.push(p.clone());
                    reps.len() - 1
                })
            })
            .collect();
        Self { of, reps }
    }

    fn len(&self) -> usize {
        self.reps.len()
    }
}

/// Dense kernel block between two group sets; computed lazily per call when
/// it would be too large to cache.
struct Gram {
    cached: Option<Vec<f64>>,
    kernel: GaussianKernel,
}

const GRAM_CACHE_LIMIT: usize = 2048 * 2048;

impl Gram {
    fn new(a: &Groups, b: &Groups, kernel: GaussianKernel) -> Self {
        let cached = (a.len() * b.len() <= GRAM_CACHE_LIMIT).then(|| {
            let mut m = Vec::with_capacity(a.len() * b.len());
            for u in &a.reps {
                for v in &b.reps {
                    m.push(kernel.eval(u, v));
                }
            }
            m
        });
        Self { cached, kernel }
    }

    /// `K v` for `v` indexed by the groups of `b`.
    fn apply(&self, a: &Groups, b: &Groups, v: &[f64]) -> Vec<f64> {
        let nb = b.len();
        (0..a.len())
            .map(|i| match &self.cached {
                Some(m) => m[i * nb..(i + 1) * nb].iter().zip(v).map(|(k, x)| k * x).sum(),
                None => b.reps.iter().zip(v).map(|(r, x)| self.kernel.eval(&a.reps[i], r) * x).sum(),
            })
            .collect()
    }
}

fn group_sums(groups: &Groups, values: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; groups.len()];
    for (g, v) in groups.of.iter().zip(values) {
        s[*g] += v;
    }
    s
}

/// `Σ_{i≠j} c_i c_j K(p_i, p_j)` and its gradient in `c`.
fn u_quadratic(groups: &Groups, gram: &Gram, c: &[f64]) -> (f64, Vec<f64>) {
    let s = group_sums(groups, c);
    let ks = gram.apply(groups, groups, &s);
    let full: f64 = s.iter().zip(&ks).map(|(a, b)| a * b).sum();
    // Gaussian kernels have a unit diagonal
    let diag: f64 = c.iter().map(|v| v * v).sum();
    let grad = groups.of.iter().zip(c).map(|(g, v)| 2.0 * (ks[*g] - v)).collect();
    (full - diag, grad)
}

/// Loss value and its gradient with respect to `w(s_i)`, `w(s'_i)` and
/// `w(s0_j)`.
#[derive(Debug, Clone)]
struct LossEval {
    loss: f64,
    d_obs: Vec<f64>,
    d_next: Vec<f64>,
    d_start: Vec<f64>,
}

/// Precomputed sample structure shared by every loss evaluation of one fit.
struct LossProblem<'a> {
    batch: &'a TransitionBatch,
    target: RatioTarget,
    next: Groups,
    next_gram: Gram,
    starts: Groups,
    start_gram: Gram,
    cross_gram: Gram,
    weight_sum: f64,
    pair_norm: f64,
}

impl<'a> LossProblem<'a> {
    fn new(batch: &'a TransitionBatch, target: RatioTarget, kernel: GaussianKernel) -> Result<Self> {
        batch.validate(2)?;
        if let RatioTarget::Visitation { gamma } = target {
            if batch.starts.is_empty() {
                return Err(Error::Domain("visitation loss needs start-state samples".into()));
            }
            if !(0.0..1.0).contains(&gamma) {
                return Err(Error::Domain(format!("discount must lie in [0, 1), got {gamma}")));
            }
        }
        let next = Groups::new(&batch.next_obs);
        let next_gram = Gram::new(&next, &next, kernel);
        let starts = Groups::new(&batch.starts);
        let start_gram = Gram::new(&starts, &starts, kernel);
        let cross_gram = Gram::new(&next, &starts, kernel);
        let weight_sum: f64 = batch.weight.iter().sum();
        let sq: f64 = batch.weight.iter().map(|u| u * u).sum();
        let pair_norm = weight_sum * weight_sum - sq;
        if !(pair_norm > 0.0) {
            return Err(Error::Domain("batch needs two transitions with positive weight".into()));
        }
        Ok(Self { batch, target, next, next_gram, starts, start_gram, cross_gram, weight_sum, pair_norm })
    }

    fn eval(&self, w_obs: &[f64], w_next: &[f64], w_start: &[f64]) -> Result<LossEval> {
        let b = self.batch;
        let n = b.len();
        let delta: Vec<f64> = (0..n).map(|i| delta_term(w_obs[i], b.rho[i], w_next[i])).collect();
        let out = match self.target {
            RatioTarget::Stationary => {
                // scale-free: residuals of w / z with z the weighted mean of w(s)
                let z = (0..n).map(|i| b.weight[i] * w_obs[i]).sum::<f64>() / self.weight_sum;
                if !(z > 0.0) {
                    return Err(Error::Numeric("ratio estimate vanished on the whole batch".into()));
                }
                let c: Vec<f64> = (0..n).map(|i| b.weight[i] * delta[i] / z).collect();
                let (q, gc) = u_quadratic(&self.next, &self.next_gram, &c);
                let loss = q / self.pair_norm;
                let dz = -2.0 * loss / z;
                let mut d_obs = vec![0.0; n];
                let mut d_next = vec![0.0; n];
                for i in 0..n {
                    let g = gc[i] / self.pair_norm * b.weight[i] / z;
                    d_obs[i] = g * b.rho[i] + dz * b.weight[i] / self.weight_sum;
                    d_next[i] = -g;
                }
                LossEval { loss, d_obs, d_next, d_start: vec![0.0; w_start.len()] }
            }
            RatioTarget::Visitation { gamma } => {
                let m = b.starts.len();
                let c: Vec<f64> = (0..n).map(|i| b.weight[i] * delta[i]).collect();
                let e: Vec<f64> = w_start.iter().map(|w| 1.0 - w).collect();

                let (q_tt, g_tt) = u_quadratic(&self.next, &self.next_gram, &c);
                // cross term, mean over all (transition, start) pairs
                let start_sums = group_sums(&self.starts, &e);
                let k_e = self.cross_gram.apply(&self.next, &self.starts, &start_sums);
                let cross_norm = self.weight_sum * m as f64;
                let q_ts: f64 = (0..n).map(|i| c[i] * k_e[self.next.of[i]]).sum::<f64>() / cross_norm;
                // start term, U-statistic when possible
                let (q_ss, g_ss, ss_norm) = if m >= 2 {
                    let (q, g) = u_quadratic(&self.starts, &self.start_gram, &e);
                    (q, g, (m * (m - 1)) as f64)
                } else {
                    (e[0] * e[0], vec![2.0 * e[0]], 1.0)
                };

                let a = gamma * gamma;
                let bc = 2.0 * gamma * (1.0 - gamma);
                let cc = (1.0 - gamma) * (1.0 - gamma);
                let loss = a * q_tt / self.pair_norm + bc * q_ts + cc * q_ss / ss_norm;

                // d/dc_i and d/de_j
                let next_sums = group_sums(&self.next, &c);
                let kt_c = transpose_apply(&self.cross_gram, &self.next, &self.starts, &next_sums);
                let mut d_obs = vec![0.0; n];
                let mut d_next = vec![0.0; n];
                for i in 0..n {
                    let dc = a * g_tt[i] / self.pair_norm + bc * k_e[self.next.of[i]] / cross_norm;
                    let dd = dc * b.weight[i];
                    d_obs[i] = dd * b.rho[i];
                    d_next[i] = -dd;
                }
                let d_start = (0..m)
                    .map(|j| {
                        let de = bc * kt_c[self.starts.of[j]] / cross_norm + cc * g_ss[j] / ss_norm;
                        -de
                    })
                    .collect();
                LossEval { loss, d_obs, d_next, d_start }
            }
        };
        ensure_finite(out.loss, "kernel loss")?;
        Ok(out)
    }
}

/// `Kᵀ v` for `v` indexed by the groups of `a`.
fn transpose_apply(gram: &Gram, a: &Groups, b: &Groups, v: &[f64]) -> Vec<f64> {
    let nb = b.len();
    let mut out = vec![0.0; nb];
    for (i, vi) in v.iter().enumerate() {
        if *vi == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            let k = match &gram.cached {
                Some(m) => m[i * nb + j],
                None => gram.kernel.eval(&a.reps[i], &b.reps[j]),
            };
            *o += k * vi;
        }
    }
    out
}

/// U-statistic estimate of `E[Δ Δ̄ k(s', s̄')]` over pairs of distinct
/// transitions, evaluated on `w / z` with `z` the weighted batch mean of
/// `w(s)` so that the loss does not reward shrinking `w`.
pub fn kernel_loss_stationary(
    w: &dyn Fn(&[f64]) -> f64,
    batch: &TransitionBatch,
    kernel: GaussianKernel,
) -> Result<f64> {
    let p = LossProblem::new(batch, RatioTarget::Stationary, kernel)?;
    let (a, b, c) = evaluate_all(w, batch);
    Ok(p.eval(&a, &b, &c)?.loss)
}

/// Squared RKHS norm of `f ↦ γ E[Δ f(s')] + (1-γ) E_{d0}[(1 - w(s0)) f(s0)]`,
/// estimated with U-statistics within the transition and start samples.
pub fn kernel_loss_visitation(
    w: &dyn Fn(&[f64]) -> f64,
    batch: &TransitionBatch,
    gamma: f64,
    kernel: GaussianKernel,
) -> Result<f64> {
    let p = LossProblem::new(batch, RatioTarget::Visitation { gamma }, kernel)?;
    let (a, b, c) = evaluate_all(w, batch);
    Ok(p.eval(&a, &b, &c)?.loss)
}

fn evaluate_all(w: &dyn Fn(&[f64]) -> f64, batch: &TransitionBatch) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        batch.obs.iter().map(|o| w(o)).collect(),
        batch.next_obs.iter().map(|o| w(o)).collect(),
        batch.starts.iter().map(|o| w(o)).collect(),
    )
}

/// Which distribution ratio an estimator targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatioTarget {
    /// `ŵ = d_π / d_μ`
    Stationary,
    /// `w = d̃_π / d̃_μ`
    Visitation { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RatioModel {
    /// One nonnegative entry per state of a one-hot encoded MDP.
    Table(Vec<f64>),
    /// `w(s) = exp(net(s))`.
    Network(Mlp),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioEstimator {
    pub model: RatioModel,
    pub target: RatioTarget,
    /// Fixed kernel bandwidth; the median heuristic is used when `None`.
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub bandwidth: f64,
    /// Weighted batch mean of `w(s)` before renormalization.
    pub scale: f64,
}

impl RatioEstimator {
    /// Table of ones over `n_states` states.
    pub fn tabular(n_states: usize, target: RatioTarget) -> Self {
        Self { model: RatioModel::Table(vec![1.0; n_states]), target, bandwidth: None }
    }

    pub fn from_table(table: Vec<f64>, target: RatioTarget) -> Result<Self> {
        if table.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("ratio table entries must be finite and nonnegative".into()));
        }
        Ok(Self { model: RatioModel::Table(table), target, bandwidth: None })
    }

    /// Network with a zeroed output layer, so `w ≡ 1` before fitting.
    pub fn network(obs_dim: usize, hidden: &[usize], activation: Activation, target: RatioTarget, rng: &mut Rng) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mut net = Mlp::new(&dims, activation, rng)?;
        net.zero_output_layer();
        Ok(Self { model: RatioModel::Network(net), target, bandwidth: None })
    }

    pub fn with_bandwidth(mut self, bandwidth: Option<f64>) -> Self {
        self.bandwidth = bandwidth;
        self
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        match &self.model {
            RatioModel::Table(t) => {
                let s = state_index(obs)?;
                t.get(s)
                    .copied()
                    .ok_or_else(|| Error::Domain(format!("state {s} outside ratio table")))
            }
            RatioModel::Network(net) => Ok(positive(net.forward(obs)?[0])),
        }
    }

    /// `min(w(s), ceiling)`.
    pub fn clipped(&self, obs: &[f64], ceiling: Option<f64>) -> Result<f64> {
        let w = self.value(obs)?;
        Ok(ceiling.map_or(w, |c| w.min(c)))
    }

    pub fn kernel_for(&self, batch: &TransitionBatch) -> Result<GaussianKernel> {
        match self.bandwidth {
            Some(h) => GaussianKernel::new(h),
            None => Ok(GaussianKernel::median_heuristic(&batch.next_obs)),
        }
    }

    pub fn loss(&self, batch: &TransitionBatch) -> Result<f64> {
        let kernel = self.kernel_for(batch)?;
        let problem = LossProblem::new(batch, self.target, kernel)?;
        let (a, b, c) = self.values_on(batch)?;
        Ok(problem.eval(&a, &b, &c)?.loss)
    }

    fn values_on(&self, batch: &TransitionBatch) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let f = |v: &[Vec<f64>]| v.iter().map(|o| self.value(o)).collect::<Result<Vec<_>>>();
        Ok((f(&batch.obs)?, f(&batch.next_obs)?, f(&batch.starts)?))
    }

    fn weighted_mean(&self, batch: &TransitionBatch) -> Result<f64> {
        let mut acc = 0.0;
        for (o, u) in batch.obs.iter().zip(&batch.weight) {
            acc += u * self.value(o)?;
        }
        Ok(acc / batch.weight.iter().sum::<f64>())
    }

    /// Divides `w` by `z`, the weighted batch mean of `w(s)`.
    pub fn renormalize(&mut self, batch: &TransitionBatch) -> Result<f64> {
        let z = self.weighted_mean(batch)?;
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Numeric(format!("cannot renormalize ratios with batch mean {z}")));
        }
        match &mut self.model {
            RatioModel::Table(t) => t.iter_mut().for_each(|v| *v /= z),
            RatioModel::Network(net) => {
                let k = net.num_params();
                net.params_mut()[k - 1] -= z.ln();
            }
        }
        Ok(z)
    }

    /// Gradient descent on the kernel loss, then renormalization.
    pub fn fit(&mut self, batch: &TransitionBatch, steps: usize, lr: f64) -> Result<FitReport> {
        if steps == 0 {
            return Err(Error::Domain("ratio fitting needs at least one step".into()));
        }
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Domain(format!("ratio learning rate must be positive, got {lr}")));
        }
        let kernel = self.kernel_for(batch)?;
        let problem = LossProblem::new(batch, self.target, kernel)?;
        let mut initial_loss = f64::NAN;
        let mut final_loss = f64::NAN;
        for step in 0..steps {
            let loss = match &mut self.model {
                RatioModel::Table(t) => step_table(t, batch, &problem, lr)?,
                RatioModel::Network(net) => step_network(net, batch, &problem, lr)?,
            };
            if step == 0 {
                initial_loss = loss;
            }
            final_loss = loss;
        }
        let scale = self.renormalize(batch)?;
        Ok(FitReport { initial_loss, final_loss, bandwidth: kernel.bandwidth, scale })
    }
}

fn step_table(table: &mut [f64], batch: &TransitionBatch, problem: &LossProblem<'_>, lr: f64) -> Result<f64> {
    let lookup = |obs: &[Vec<f64>]| -> Result<Vec<usize>> {
        obs.iter()
            .map(|o| {
                let s = state_index(o)?;
                if s < table.len() {
                    Ok(s)
                } else {
                    Err(Error::Domain(format!("state {s} outside ratio table")))
                }
            })
            .collect()
    };
    let (si, ni, zi) = (lookup(&batch.obs)?, lookup(&batch.next_obs)?, lookup(&batch.starts)?);
    let pick = |idx: &[usize]| idx.iter().map(|&s| table[s]).collect::<Vec<_>>();
    let eval = problem.eval(&pick(&si), &pick(&ni), &pick(&zi))?;
    let mut grad = vec![0.0; table.len()];
    for (s, g) in si.iter().zip(&eval.d_obs).chain(ni.iter().zip(&eval.d_next)).chain(zi.iter().zip(&eval.d_start)) {
        grad[*s] += g;
    }
    for (t, g) in table.iter_mut().zip(&grad) {
        *t = (*t - lr * g).max(0.0);
    }
    Ok(eval.loss)
}

/// Network raw outputs are clamped here before `exp`, so one bad step
/// cannot overflow every later loss evaluation.
const LOG_RATIO_LIMIT: f64 = 30.0;

fn positive(raw: f64) -> f64 {
    raw.clamp(-LOG_RATIO_LIMIT, LOG_RATIO_LIMIT).exp()
}

fn step_network(net: &mut Mlp, batch: &TransitionBatch, problem: &LossProblem<'_>, lr: f64) -> Result<f64> {
    let traces = |obs: &[Vec<f64>]| obs.iter().map(|o| net.forward_trace(o)).collect::<Result<Vec<_>>>();
    let (to, tn, ts) = (traces(&batch.obs)?, traces(&batch.next_obs)?, traces(&batch.starts)?);
    let w = |t: &[crate::net::ForwardTrace]| t.iter().map(|x| positive(x.output()[0])).collect::<Vec<_>>();
    let (wo, wn, ws) = (w(&to), w(&tn), w(&ts));
    let eval = problem.eval(&wo, &wn, &ws)?;
    let mut grad = crate::net::FlatGrad::zeros(net.num_params());
    for (traces, ws, gs) in [(&to, &wo, &eval.d_obs), (&tn, &wn, &eval.d_next), (&ts, &ws, &eval.d_start)] {
        for ((t, w), g) in traces.iter().zip(ws).zip(gs) {
            if *g != 0.0 && t.output()[0].abs() < LOG_RATIO_LIMIT {
                // d exp(u)/du = exp(u)
                net.accumulate_backward(t, &[g * w], 1.0, &mut grad)?;
            }
        }
    }
    net.apply_update(&grad, -lr)?;
    if !net.all_finite() {
        return Err(Error::Numeric("ratio network parameters became non-finite".into()));
    }
    Ok(eval.loss)
}

/// Runs `steps` gradient steps of the estimator's kernel loss on `batch`.
pub fn fit_ratio(estimator: &mut RatioEstimator, batch: &TransitionBatch, steps: usize, lr: f64) -> Result<FitReport> {
    estimator.fit(batch, steps, lr)
}

/// Exact `ŵ = d_π/d_μ` and `w = d̃_π/d̃_μ` per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRatios {
    pub w_hat: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn exact_ratios(mdp: &TabularMdp, policy: &dyn TabularPolicy, mu: &dyn TabularPolicy) -> Result<ExactRatios> {
    let pi = policy_table(mdp, policy)?;
    let mu = policy_table(mdp, mu)?;
    let (dp, dm) = (stationary_for_table(mdp, &pi)?, stationary_for_table(mdp, &mu)?);
    let (vp, vm) = (visitation_for_table(mdp, &pi)?, visitation_for_table(mdp, &mu)?);
    let ratio = |num: &[f64], den: &[f64], what: &str| -> Result<Vec<f64>> {
        num.iter()
            .zip(den)
            .map(|(n, d)| {
                if *d > 0.0 {
                    Ok(n / d)
                } else if *n == 0.0 {
                    Ok(0.0)
                } else {
                    Err(Error::Degenerate(format!("{what}: target visits a state the behavior never does")))
                }
            })
            .collect()
    };
    Ok(ExactRatios { w_hat: ratio(&dp, &dm, "stationary ratio")?, w: ratio(&vp, &vm, "visitation ratio")? })
}

/// Draws `n` i.i.d. transitions with `s` from the exact behavior
/// distribution matching `target` (`d_μ` or `d̃_μ`), `a ∼ μ`, `s' ∼ P`, and
/// for the visitation target `n` start states from `d0`.
pub fn sample_tabular_batch(
    mdp: &TabularMdp,
    policy: &dyn TabularPolicy,
    mu: &dyn TabularPolicy,
    target: RatioTarget,
    n: usize,
    rng: &mut Rng,
) -> Result<TransitionBatch> {
    let mu_table = policy_table(mdp, mu)?;
    let pi_table = policy_table(mdp, policy)?;
    let d = match target {
        RatioTarget::Stationary => stationary_for_table(mdp, &mu_table)?,
        RatioTarget::Visitation { .. } => visitation_for_table(mdp, &mu_table)?,
    };
    let mut batch = TransitionBatch::new();
    for _ in 0..n {
        let s = categorical(&d, rng);
        let a = categorical(&mu_table[s], rng);
        let sp = mdp.sample_next(s, a, rng);
        let r = rho(&pi_table[s], &mu_table[s], a)?;
        batch.push(mdp.observe(s), a, mdp.observe(sp), r, 1.0);
    }
    if let RatioTarget::Visitation { .. } = target {
        batch.starts = (0..n).map(|_| mdp.observe(mdp.sample_initial(rng))).collect();
    }
    Ok(batch)
}
