//! Exact quantities on finite MDPs: values, advantages, visitation and
//! stationary distributions, the objective and its gradient, the Fisher
//! matrix and the compatible-critic solution `x*`.
//!
//! Everything here is a pure function of the MDP and the policy parameters.
//! Linear systems are solved with partially pivoted LU; the Fisher system
//! falls back to a least-norm eigen pseudo-solve when it is rank deficient
//! (softmax policies with redundant logits always are).

use crate::env::{one_hot, TabularMdp};
use crate::error::{Error, Result};
use crate::net::{dot, FlatGrad};
use crate::policy::{softmax, SoftmaxPolicy};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// A policy over the states of a finite MDP with differentiable parameters.
pub trait TabularPolicy {
    fn num_params(&self) -> usize;
    /// `π(·|s)`.
    fn probs(&self, state: usize) -> Result<Vec<f64>>;
    /// `∇θ log π(a|s)`; empty for parameter-free policies.
    fn score(&self, state: usize, action: usize) -> Result<Vec<f64>>;
}

impl TabularPolicy for SoftmaxPolicy {
    fn num_params(&self) -> usize {
        SoftmaxPolicy::num_params(self)
    }

    fn probs(&self, state: usize) -> Result<Vec<f64>> {
        self.action_probs(&one_hot_checked(self.net().input_dim(), state)?)
    }

    fn score(&self, state: usize, action: usize) -> Result<Vec<f64>> {
        Ok(self
            .compat_features(&one_hot_checked(self.net().input_dim(), state)?, action)?
            .into_inner())
    }
}

fn one_hot_checked(n: usize, state: usize) -> Result<Vec<f64>> {
    if state >= n {
        return Err(Error::Domain(format!("state {state} out of range for {n} inputs")));
    }
    Ok(one_hot(n, state))
}

/// Softmax with the first action's logit pinned to 0: `θ[s, a-1]` is the
/// logit of action `a ≥ 1` in state `s`. Its Fisher matrix is positive
/// definite whenever every state is visited and every action has positive
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimalSoftmax {
    pub n_states: usize,
    pub n_actions: usize,
    pub theta: Vec<f64>,
}

impl MinimalSoftmax {
    pub fn new(n_states: usize, n_actions: usize, theta: Vec<f64>) -> Result<Self> {
        if n_actions < 2 || theta.len() != n_states * (n_actions - 1) {
            return Err(Error::Domain("minimal softmax needs n_states·(n_actions-1) parameters".into()));
        }
        Ok(Self { n_states, n_actions, theta })
    }

    fn logits(&self, s: usize) -> Vec<f64> {
        let m = self.n_actions - 1;
        let mut l = vec![0.0];
        l.extend_from_slice(&self.theta[s * m..(s + 1) * m]);
        l
    }
}

impl TabularPolicy for MinimalSoftmax {
    fn num_params(&self) -> usize {
        self.theta.len()
    }

    fn probs(&self, state: usize) -> Result<Vec<f64>> {
        if state >= self.n_states {
            return Err(Error::Domain(format!("state {state} out of range")));
        }
        Ok(softmax(&self.logits(state)))
    }

    fn score(&self, state: usize, action: usize) -> Result<Vec<f64>> {
        let p = self.probs(state)?;
        let m = self.n_actions - 1;
        let mut g = vec![0.0; self.theta.len()];
        for b in 1..self.n_actions {
            g[state * m + b - 1] = (action == b) as u8 as f64 - p[b];
        }
        Ok(g)
    }
}

/// A parameter-free policy given by explicit probability rows, e.g. the
/// behavior policy.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPolicy {
    rows: Vec<Vec<f64>>,
}

impl FixedPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for row in &rows {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Domain("policy row is not a probability vector".into()));
            }
        }
        Ok(Self { rows })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { rows: vec![vec![1.0 / n_actions as f64; n_actions]; n_states] }
    }

    /// Snapshot of any tabular policy's action probabilities.
    pub fn snapshot(mdp: &TabularMdp, policy: &dyn TabularPolicy) -> Result<Self> {
        Ok(Self { rows: policy_table(mdp, policy)? })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl TabularPolicy for FixedPolicy {
    fn num_params(&self) -> usize {
        0
    }

    fn probs(&self, state: usize) -> Result<Vec<f64>> {
        self.rows
            .get(state)
            .cloned()
            .ok_or_else(|| Error::Domain(format!("state {state} out of range")))
    }

    fn score(&self, _state: usize, _action: usize) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }
}

/// `π(a|s)` for every state, validated against the MDP's action count.
pub fn policy_table(mdp: &TabularMdp, policy: &dyn TabularPolicy) -> Result<Vec<Vec<f64>>> {
    (0..mdp.n_states())
        .map(|s| {
            let p = policy.probs(s)?;
            if p.len() != mdp.n_actions() {
                return Err(Error::Domain(format!(
                    "policy has {} actions, MDP has {}",
                    p.len(),
                    mdp.n_actions()
                )));
            }
            Ok(p)
        })
        .collect()
}

/// State-to-state kernel `P_π` and expected reward `r_π`.
pub fn induced_chain(mdp: &TabularMdp, pi: &[Vec<f64>]) -> (DMatrix<f64>, DVector<f64>) {
    let n = mdp.n_states();
    let mut p = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);
    for s in 0..n {
        for (a, &pa) in pi[s].iter().enumerate() {
            r[s] += pa * mdp.reward(s, a);
            for (sp, &q) in mdp.transition_row(s, a).iter().enumerate() {
                p[(s, sp)] += pa * q;
            }
        }
    }
    (p, r)
}

fn lu_solve(a: DMatrix<f64>, b: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let lu = a.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min / max < 1e-13 {
        return Err(Error::Degenerate(format!("{what}: system is singular or ill-conditioned")));
    }
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::Degenerate(format!("{what}: singular system")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!("{what}: non-finite solution")));
    }
    Ok(x)
}

fn check_discount(mdp: &TabularMdp) -> Result<()> {
    let g = mdp.gamma();
    if g > 0.0 && g < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("(I - γP) is singular for γ = {g}")))
    }
}

/// `V^π`, `Q^π` and `A^π = Q^π - V^π`.
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    pub v: Vec<f64>,
    /// `q[s][a]`
    pub q: Vec<Vec<f64>>,
    /// `adv[s][a]`
    pub adv: Vec<Vec<f64>>,
}

/// Solves `(I - γP_π) V = r_π` directly, then forms `Q` and `A`.
pub fn exact_values(mdp: &TabularMdp, policy: &dyn TabularPolicy) -> Result<Values> {
    check_discount(mdp)?;
    let pi = policy_table(mdp, policy)?;
    values_for_table(mdp, &pi)
}

pub(crate) fn values_for_table(mdp: &TabularMdp, pi: &[Vec<f64>]) -> Result<Values> {
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let (p, r) = induced_chain(mdp, pi);
    let a = DMatrix::identity(n, n) - p * gamma;
    let v = lu_solve(a, r, "policy evaluation")?;
    let v: Vec<f64> = v.iter().copied().collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..mdp.n_actions())
                .map(|act| mdp.reward(s, act) + gamma * dot(mdp.transition_row(s, act), &v))
                .collect()
        })
        .collect();
    let adv = q
        .iter()
        .zip(&v)
        .map(|(row, vs)| row.iter().map(|qa| qa - vs).collect())
        .collect();
    Ok(Values { v, q, adv })
}

/// Discounted visitation `d̃_π = (1-γ) d0ᵀ (I - γP_π)⁻¹`.
pub fn visitation(mdp: &TabularMdp, policy: &dyn TabularPolicy) -> Result<Vec<f64>> {
    check_discount(mdp)?;
    let pi = policy_table(mdp, policy)?;
    visitation_for_table(mdp, &pi)
}

pub(crate) fn visitation_for_table(mdp: &TabularMdp, pi: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let (p, _) = induced_chain(mdp, pi);
    // (I - γP)ᵀ d = (1-γ) d0
    let a = (DMatrix::identity(n, n) - p * gamma).transpose();
    let b = DVector::from_column_slice(mdp.initial()) * (1.0 - gamma);
    let d = lu_solve(a, b, "visitation")?;
    Ok(d.iter().map(|v| v.max(0.0)).collect())
}

/// Stationary distribution of the state chain under `policy`.
pub fn stationary(mdp: &TabularMdp, policy: &dyn TabularPolicy) -> Result<Vec<f64>> {
    let pi = policy_table(mdp, policy)?;
    stationary_for_table(mdp, &pi)
}

pub(crate) fn stationary_for_table(mdp: &TabularMdp, pi: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = mdp.n_states();
    let (p, _) = induced_chain(mdp, pi);
    // (Pᵀ - I) d = 0 with the last equation replaced by Σd = 1
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let d = lu_solve(a, b, "stationary distribution")?;
    if d.iter().any(|&v| v < -1e-9) {
        return Err(Error::Degenerate("stationary solve produced negative mass".into()));
    }
    Ok(d.iter().map(|v| v.max(0.0)).collect())
}

/// `J(π) = (1-γ) d0ᵀ V^π` and `∇θJ = Σ_s d̃(s) Σ_a π(a|s) A(s,a) ∇θ log π(a|s)`.
pub fn objective_and_gradient(mdp: &TabularMdp, policy: &dyn TabularPolicy) -> Result<(f64, FlatGrad)> {
    check_discount(mdp)?;
    let pi = policy_table(mdp, policy)?;
    let values = values_for_table(mdp, &pi)?;
    let d = visitation_for_table(mdp, &pi)?;
    let j = (1.0 - mdp.gamma()) * dot(mdp.initial(), &values.v);
    let mut grad = vec![0.0; policy.num_params()];
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let w = d[s] * pi[s][a] * values.adv[s][a];
            if w == 0.0 {
                continue;
            }
            for (g, f) in grad.iter_mut().zip(policy.score(s, a)?) {
                *g += w * f;
            }
        }
    }
    Ok((j, FlatGrad(grad)))
}

/// `h(x) = E[A ∇log π] - F x`, the mean field of the advantage-critic update.
#[derive(Debug, Clone)]
pub struct Drift {
    pub fisher: DMatrix<f64>,
    /// `E_{d̃π, π}[A ∇log π]`, equal to `∇θJ`.
    pub target: DVector<f64>,
}

impl Drift {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (&self.target - &self.fisher * x).iter().copied().collect()
    }
}

/// Fisher matrix, its spectrum and the compatible-critic solution.
#[derive(Debug, Clone)]
pub struct FisherSolution {
    pub fisher: DMatrix<f64>,
    /// Ascending eigenvalues of `F`.
    pub eigenvalues: Vec<f64>,
    /// Numerical rank of `F`.
    pub rank: usize,
    /// `F x* = E[A ∇log π]`; least-norm when `F` is rank deficient.
    pub x_star: FlatGrad,
    pub drift: Drift,
    /// The solve could not reproduce its right-hand side to `1e-8`; results
    /// from such instances are not trustworthy.
    pub degenerate: bool,
}

impl FisherSolution {
    pub fn is_positive_definite(&self) -> bool {
        self.rank == self.eigenvalues.len() && self.eigenvalues.first().is_some_and(|&l| l > 0.0)
    }

    /// `‖F‖₂`, the Lipschitz constant of `h`.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, l| m.max(l.abs()))
    }
}

pub fn fisher_and_xstar(mdp: &TabularMdp, policy: &dyn TabularPolicy) -> Result<FisherSolution> {
    check_discount(mdp)?;
    let pi = policy_table(mdp, policy)?;
    let values = values_for_table(mdp, &pi)?;
    let d = visitation_for_table(mdp, &pi)?;
    let k = policy.num_params();
    let mut fisher = DMatrix::zeros(k, k);
    let mut target = DVector::zeros(k);
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let w = d[s] * pi[s][a];
            if w == 0.0 {
                continue;
            }
            let f = DVector::from_vec(policy.score(s, a)?);
            fisher.ger(w, &f, &f, 1.0);
            target.axpy(w * values.adv[s][a], &f, 1.0);
        }
    }
    // symmetrize away summation-order noise
    let fisher = (&fisher + fisher.transpose()) * 0.5;
    let eig = SymmetricEigen::new(fisher.clone());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = lambda_max * 1e-10;
    let rank = eigenvalues.iter().filter(|&&l| l > cutoff).count();

    let x_star = if k > 0 && rank == k {
        lu_solve(fisher.clone(), target.clone(), "Fisher system")?
    } else {
        let mut x = DVector::zeros(k);
        for &i in &order {
            let l = eig.eigenvalues[i];
            if l > cutoff {
                let q = eig.eigenvectors.column(i);
                x.axpy(q.dot(&target) / l, &q, 1.0);
            }
        }
        x
    };
    let residual = (&fisher * &x_star - &target).norm();
    let degenerate = residual > 1e-8 * (1.0 + target.norm());
    Ok(FisherSolution {
        fisher: fisher.clone(),
        eigenvalues,
        rank,
        x_star: FlatGrad(x_star.iter().copied().collect()),
        drift: Drift { fisher, target },
        degenerate,
    })
}

/// `‖E_{d̃π, π}[(A - xᵀf) f]‖` by direct summation over `(s, a)`.
pub fn projection_residual(mdp: &TabularMdp, policy: &dyn TabularPolicy, x: &[f64]) -> Result<f64> {
    let pi = policy_table(mdp, policy)?;
    let values = values_for_table(mdp, &pi)?;
    let d = visitation_for_table(mdp, &pi)?;
    let mut acc = vec![0.0; policy.num_params()];
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let f = policy.score(s, a)?;
            let w = d[s] * pi[s][a] * (values.adv[s][a] - dot(x, &f));
            for (t, fi) in acc.iter_mut().zip(&f) {
                *t += w * fi;
            }
        }
    }
    Ok(dot(&acc, &acc).sqrt())
}

/// Constants from the boundedness argument of the critic's convergence proof.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    /// `‖F(θ)‖₂`
    pub fisher_norm: f64,
    /// `max |r(s,a)|`
    pub k2: f64,
    /// `max ‖∇θ log π(s,a)‖`
    pub k3: f64,
    /// `2 K2 / (1-γ)`, a bound on `|δ|`.
    pub k4: f64,
    /// `1 / min μ(s,a)`, a bound on `ρ`.
    pub k5: f64,
    /// `1 / min d̃_μ(s)`, a bound on `w`.
    pub k6: f64,
    /// `(K5 K6)² max{2 (K3 K4)², 2 K3⁴}`, the noise-growth constant.
    pub noise: f64,
}

pub fn lipschitz_and_bounds(
    mdp: &TabularMdp,
    policy: &dyn TabularPolicy,
    behavior: &dyn TabularPolicy,
) -> Result<Bounds> {
    let mu = policy_table(mdp, behavior)?;
    let min_mu = mu.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !(min_mu > 0.0) {
        return Err(Error::Domain("behavior policy lacks full support".into()));
    }
    let fisher = fisher_and_xstar(mdp, policy)?;
    let d_mu = visitation_for_table(mdp, &mu)?;
    let min_d = d_mu.iter().copied().fold(f64::INFINITY, f64::min);
    let k2 = mdp.rewards().iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let mut k3 = 0.0f64;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let f = policy.score(s, a)?;
            k3 = k3.max(dot(&f, &f).sqrt());
        }
    }
    let k4 = 2.0 * k2 / (1.0 - mdp.gamma());
    let k5 = 1.0 / min_mu;
    let k6 = if min_d > 0.0 { 1.0 / min_d } else { f64::INFINITY };
    let noise = (k5 * k6).powi(2) * (2.0 * (k3 * k4).powi(2)).max(2.0 * k3.powi(4));
    Ok(Bounds { fisher_norm: fisher.operator_norm(), k2, k3, k4, k5, k6, noise })
}

/// Expected undiscounted return of an episode truncated after `horizon`
/// steps: `Σ_{t<T} d0ᵀ P_π^t r_π`.
pub fn finite_horizon_return(mdp: &TabularMdp, policy: &dyn TabularPolicy, horizon: usize) -> Result<f64> {
    let pi = policy_table(mdp, policy)?;
    let (p, r) = induced_chain(mdp, &pi);
    let mut dist = DVector::from_column_slice(mdp.initial());
    let mut total = 0.0;
    for _ in 0..horizon {
        total += dist.dot(&r);
        dist = p.tr_mul(&dist);
    }
    Ok(total)
}

/// Everything the oracle knows about one (MDP, policy) pair.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub v: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub adv: Vec<Vec<f64>>,
    /// `None` when the chain has no unique stationary distribution.
    pub d_stat: Option<Vec<f64>>,
    pub d_visit: Vec<f64>,
    pub j: f64,
    pub grad_j: FlatGrad,
    pub fisher: FisherSolution,
}

impl ExactSolution {
    pub fn x_star(&self) -> &FlatGrad {
        &self.fisher.x_star
    }
}

pub fn solve(mdp: &TabularMdp, policy: &dyn TabularPolicy) -> Result<ExactSolution> {
    let Values { v, q, adv } = exact_values(mdp, policy)?;
    let d_visit = visitation(mdp, policy)?;
    let d_stat = stationary(mdp, policy).ok();
    let (j, grad_j) = objective_and_gradient(mdp, policy)?;
    let fisher = fisher_and_xstar(mdp, policy)?;
    Ok(ExactSolution { v, q, adv, d_stat, d_visit, j, grad_j, fisher })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_chain_mdp;
    use crate::net::{Activation, Mlp};
    use crate::rng::{stream, Stream};
    use rand::Rng as _;

    fn tabular_policy(n_states: usize, n_actions: usize, seed: u64, scale: f64) -> SoftmaxPolicy {
        let mut rng = stream(seed, Stream::Init);
        let mut net = Mlp::new(&[n_states, n_actions], Activation::Tanh, &mut rng).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p *= scale);
        SoftmaxPolicy::new(net)
    }

    /// Independent route to `V`: iterate the Bellman operator to convergence.
    fn value_iteration(mdp: &TabularMdp, pi: &[Vec<f64>]) -> Vec<f64> {
        let n = mdp.n_states();
        let mut v = vec![0.0; n];
        for _ in 0..5_000 {
            v = (0..n)
                .map(|s| {
                    (0..mdp.n_actions())
                        .map(|a| pi[s][a] * (mdp.reward(s, a) + mdp.gamma() * dot(mdp.transition_row(s, a), &v)))
                        .sum()
                })
                .collect();
        }
        v
    }

    fn single_state(r: f64, gamma: f64) -> TabularMdp {
        TabularMdp::new(1, 2, vec![1.0, 1.0], vec![r, r], gamma, vec![1.0]).unwrap()
    }

    #[test]
    fn single_state_value_is_geometric() {
        let mdp = single_state(2.0, 0.8);
        let pol = tabular_policy(1, 2, 1, 1.0);
        let vals = exact_values(&mdp, &pol).unwrap();
        assert!((vals.v[0] - 10.0).abs() < 1e-12);
        assert_eq!(visitation(&mdp, &pol).unwrap(), vec![1.0]);
        let (j, g) = objective_and_gradient(&mdp, &pol).unwrap();
        assert!((j - 2.0).abs() < 1e-12);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_rewards_give_zero_everything() {
        let base = make_chain_mdp(4, 3).unwrap();
        let n = 4 * 2 * 4;
        let p: Vec<f64> = (0..n).map(|i| base.transition_row(i / 8, (i / 4) % 2)[i % 4]).collect();
        let mdp = TabularMdp::new(4, 2, p, vec![0.0; 8], 0.9, vec![0.25; 4]).unwrap();
        let pol = tabular_policy(4, 2, 2, 1.0);
        let vals = exact_values(&mdp, &pol).unwrap();
        assert!(vals.v.iter().chain(vals.q.iter().flatten()).chain(vals.adv.iter().flatten()).all(|&x| x == 0.0));
        let (j, g) = objective_and_gradient(&mdp, &pol).unwrap();
        assert_eq!(j, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn values_match_value_iteration() {
        let mdp = make_chain_mdp(5, 11).unwrap();
        let pol = tabular_policy(5, 2, 4, 2.0);
        let pi = policy_table(&mdp, &pol).unwrap();
        let vals = exact_values(&mdp, &pol).unwrap();
        for (a, b) in vals.v.iter().zip(value_iteration(&mdp, &pi)) {
            assert!((a - b).abs() < 1e-8);
        }
        for s in 0..5 {
            let mean: f64 = (0..2).map(|a| pi[s][a] * vals.adv[s][a]).sum();
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn visitation_matches_truncated_series() {
        let mdp = make_chain_mdp(4, 5).unwrap().with_gamma(0.9).unwrap();
        let pol = tabular_policy(4, 2, 6, 1.5);
        let d = visitation(&mdp, &pol).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let pi = policy_table(&mdp, &pol).unwrap();
        let (p, _) = induced_chain(&mdp, &pi);
        let mut dist = DVector::from_column_slice(mdp.initial());
        let mut series = DVector::zeros(4);
        let mut discount = 1.0;
        for _ in 0..=200 {
            series += &dist * ((1.0 - mdp.gamma()) * discount);
            dist = p.tr_mul(&dist);
            discount *= mdp.gamma();
        }
        for s in 0..4 {
            assert!((d[s] - series[s]).abs() < 1e-8);
        }
    }

    #[test]
    fn visitation_tends_to_start_distribution() {
        let mdp = make_chain_mdp(4, 5)
            .unwrap()
            .with_initial(vec![0.1, 0.2, 0.3, 0.4])
            .unwrap()
            .with_gamma(1e-12)
            .unwrap();
        let pol = tabular_policy(4, 2, 6, 1.0);
        let d = visitation(&mdp, &pol).unwrap();
        for (a, b) in d.iter().zip(mdp.initial()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn stationary_is_positive_and_invariant() {
        let mdp = make_chain_mdp(3, 1).unwrap();
        let mu = FixedPolicy::uniform(3, 2);
        let d = stationary(&mdp, &mu).unwrap();
        assert!(d.iter().all(|&v| v > 0.0));
        // power iteration as an independent check
        let (p, _) = induced_chain(&mdp, mu.rows());
        let mut q = DVector::from_element(3, 1.0 / 3.0);
        for _ in 0..2_000 {
            q = p.tr_mul(&q);
        }
        for s in 0..3 {
            assert!((q[s] - d[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn reducible_chain_is_degenerate() {
        // two absorbing states
        let p = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let mdp = TabularMdp::new(2, 2, p, vec![0.0; 4], 0.9, vec![0.5, 0.5]).unwrap();
        let mu = FixedPolicy::uniform(2, 2);
        assert!(matches!(stationary(&mdp, &mu), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = stream(77, Stream::Env);
        let mdp = make_chain_mdp(4, 9).unwrap();
        let pol = tabular_policy(4, 2, 8, 2.0);
        let (_, g) = objective_and_gradient(&mdp, &pol).unwrap();
        let h = 1e-6;
        for _ in 0..50 {
            let dir: Vec<f64> = (0..pol.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut up = pol.clone();
            up.net_mut().apply_update(&dir, h).unwrap();
            let mut down = pol.clone();
            down.net_mut().apply_update(&dir, -h).unwrap();
            let fd = (objective_and_gradient(&mdp, &up).unwrap().0 - objective_and_gradient(&mdp, &down).unwrap().0)
                / (2.0 * h);
            let exact = dot(&g, &dir);
            assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1e-4), "{fd} vs {exact}");
        }
    }

    #[test]
    fn uniform_reward_has_zero_gradient() {
        let base = make_chain_mdp(3, 2).unwrap();
        let p: Vec<f64> = (0..18).map(|i| base.transition_row(i / 6, (i / 3) % 2)[i % 3]).collect();
        let mdp = TabularMdp::new(3, 2, p, vec![0.7; 6], 0.95, vec![1.0 / 3.0; 3]).unwrap();
        let pol = tabular_policy(3, 2, 1, 3.0);
        let (j, g) = objective_and_gradient(&mdp, &pol).unwrap();
        assert!((j - 0.7).abs() < 1e-12);
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn fisher_properties_and_natural_gradient_identity() {
        for seed in 0..10 {
            let mdp = make_chain_mdp(3 + seed as usize % 3, seed).unwrap();
            let pol = tabular_policy(mdp.n_states(), 2, seed + 100, 2.0);
            let sol = solve(&mdp, &pol).unwrap();
            let f = &sol.fisher.fisher;
            assert!((f - f.transpose()).abs().max() < 1e-10);
            assert!(sol.fisher.eigenvalues[0] >= -1e-10);
            assert!(!sol.fisher.degenerate);
            let fx = f * DVector::from_column_slice(&sol.fisher.x_star);
            for (a, b) in fx.iter().zip(sol.grad_j.iter()) {
                assert!((a - b).abs() < 1e-8);
            }
            assert!(projection_residual(&mdp, &pol, &sol.fisher.x_star).unwrap() < 1e-8);
            assert!((sol.d_visit.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn minimal_softmax_fisher_is_positive_definite() {
        let mdp = make_chain_mdp(4, 3).unwrap();
        let pol = MinimalSoftmax::new(4, 2, vec![0.3, -0.8, 1.1, 0.0]).unwrap();
        let sol = fisher_and_xstar(&mdp, &pol).unwrap();
        assert!(sol.is_positive_definite());
        assert_eq!(sol.rank, 4);
    }

    #[test]
    fn near_deterministic_policy_has_vanishing_fisher() {
        let mdp = make_chain_mdp(3, 4).unwrap();
        let pol = MinimalSoftmax::new(3, 2, vec![40.0, -40.0, 40.0]).unwrap();
        let sol = fisher_and_xstar(&mdp, &pol).unwrap();
        assert!(sol.fisher.abs().max() < 1e-15);
    }

    #[test]
    fn bounds_examples() {
        let mdp = make_chain_mdp(3, 8).unwrap().with_gamma(0.9).unwrap();
        let pol = tabular_policy(3, 2, 3, 1.0);
        let mu = FixedPolicy::uniform(3, 2);
        let b = lipschitz_and_bounds(&mdp, &pol, &mu).unwrap();
        assert!(b.k2 <= 1.0);
        assert!((b.k4 - 20.0 * b.k2).abs() < 1e-12);
        assert_eq!(b.k5, 2.0);
        let bad = FixedPolicy::new(vec![vec![1.0, 0.0]; 3]).unwrap();
        assert!(matches!(lipschitz_and_bounds(&mdp, &pol, &bad), Err(Error::Domain(_))));

        let h = fisher_and_xstar(&mdp, &pol).unwrap();
        let mut rng = stream(5, Stream::Env);
        for _ in 0..100 {
            let x1: Vec<f64> = (0..pol.num_params()).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x2: Vec<f64> = (0..pol.num_params()).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let dh: Vec<f64> = h.drift.eval(&x1).iter().zip(h.drift.eval(&x2)).map(|(a, b)| a - b).collect();
            let dx: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
            assert!(dot(&dh, &dh).sqrt() <= b.fisher_norm * dot(&dx, &dx).sqrt() * (1.0 + 1e-10));
        }
    }

    #[test]
    fn finite_horizon_return_of_constant_reward() {
        let mdp = single_state(0.5, 0.9);
        let pol = tabular_policy(1, 2, 0, 1.0);
        assert!((finite_horizon_return(&mdp, &pol, 10).unwrap() - 5.0).abs() < 1e-12);
    }
}
