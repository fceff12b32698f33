//! Acceptance suite: twelve numbered criteria, one PASS/FAIL line each.
//!
//! Run all with `cargo test -p natgrad --test acceptance`, or a subset by
//! number: `cargo test -p natgrad --test acceptance -- 3 9`. Numbers 1-8
//! are oracle and property checks (seconds); 9-12 train agents at desk
//! scale (tens of minutes on one core).
//!
//! The binary exits 0 after reporting, so a failing experiment is visible
//! without breaking the workspace test run. Set NATGRAD_ACCEPTANCE_STRICT=1
//! to exit 1 when any selected criterion fails.

use natgrad::agent::{evaluate, Agent, AgentConfig, Algorithm, TrainResult};
use natgrad::env::{make_chain_mdp, CartPole, EnvId, Environment, TabularMdp};
use natgrad::net::{dot, Activation, Mlp};
use natgrad::oracle::{
    exact_values, fisher_and_xstar, objective_and_gradient, policy_table, visitation, FixedPolicy, MinimalSoftmax,
    TabularPolicy,
};
use natgrad::critic::{Transition, ValueCritic};
use natgrad::policy::SoftmaxPolicy;
use natgrad::ratio::{exact_ratios, rho, sample_tabular_batch, RatioEstimator, RatioModel, RatioTarget};
use natgrad::rng::{categorical, stream, substream, Stream};
use rand::Rng as _;
use std::time::Instant;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Outcome;

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let checks: [(&str, Check); 12] = [
        ("gradient identity", c1_gradient_identity),
        ("natural-gradient identity", c2_natural_gradient_identity),
        ("compatible critic converges to x*", c3_critic_iterates),
        ("martingale difference", c4_martingale),
        ("change of measure", c5_change_of_measure),
        ("ratio recovery", c6_ratio_recovery),
        ("zero-lambda trace degeneracy", c7_trace_degeneracy),
        ("two-timescale stationarity", c8_stationarity),
        ("on-policy CartPole", c9_cartpole),
        ("NAC vs AC ordering", c10_ordering),
        ("off-policy CartPole", c11_off_policy),
        ("MountainCar TD(lambda)", c12_mountain_car),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        let secs = t.elapsed().as_secs_f64();
        println!("{} criterion {n:2} {name}: {} ({secs:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 && std::env::var("NATGRAD_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

fn tabular_softmax(n_states: usize, params: Vec<f64>) -> SoftmaxPolicy {
    SoftmaxPolicy::new(Mlp::from_params(&[n_states, 2], Activation::Tanh, params).unwrap())
}

fn random_chain(k: u64) -> (TabularMdp, Vec<f64>) {
    let mut rng = substream(k, Stream::Fixture, 1);
    let n = rng.gen_range(3..=6);
    let mdp = make_chain_mdp(n, 100 + k).unwrap();
    let params = (0..n * 2 + 2).map(|_| rng.gen_range(-1.5..1.5)).collect();
    (mdp, params)
}

fn c1_gradient_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let (mdp, params) = random_chain(k);
        let n = mdp.n_states();
        let (_, grad) = objective_and_gradient(&mdp, &tabular_softmax(n, params.clone())).unwrap();
        let h = 1e-5;
        let fd: Vec<f64> = (0..params.len())
            .map(|i| {
                let mut up = params.clone();
                let mut down = params.clone();
                up[i] += h;
                down[i] -= h;
                let (ju, _) = objective_and_gradient(&mdp, &tabular_softmax(n, up)).unwrap();
                let (jd, _) = objective_and_gradient(&mdp, &tabular_softmax(n, down)).unwrap();
                (ju - jd) / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel(&grad.0, &fd));
    }
    outcome(worst <= 1e-5, format!("worst relative error {worst:.2e} over 20 MDPs (need <= 1e-5)"))
}

fn c2_natural_gradient_identity() -> Outcome {
    let mut fx_worst: f64 = 0.0;
    let mut inv_worst: f64 = 0.0;
    let mut pd = 0;
    for k in 0..20 {
        let (mdp, params) = random_chain(k);
        let n = mdp.n_states();
        // redundant-logit softmax: F singular, F x* = ∇J must still hold
        let full = tabular_softmax(n, params.clone());
        // minimal softmax: F positive definite
        let minimal = MinimalSoftmax::new(n, 2, params[..n].to_vec()).unwrap();
        for policy in [&full as &dyn TabularPolicy, &minimal] {
            let (_, grad) = objective_and_gradient(&mdp, policy).unwrap();
            let sol = fisher_and_xstar(&mdp, policy).unwrap();
            let x = nalgebra::DVector::from_column_slice(&sol.x_star.0);
            let fx = &sol.fisher * &x;
            fx_worst = fx_worst.max(fx.iter().zip(&grad.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            if sol.is_positive_definite() {
                pd += 1;
                let g = nalgebra::DVector::from_column_slice(&grad.0);
                let inv = sol.fisher.clone().cholesky().unwrap().solve(&g);
                inv_worst = inv_worst.max((inv - x).amax());
            }
        }
    }
    outcome(
        fx_worst <= 1e-8 && inv_worst <= 1e-8 && pd >= 20,
        format!("max |F x* - grad| {fx_worst:.1e}, max |F^-1 grad - x*| {inv_worst:.1e} on {pd} PD cases (need <= 1e-8)"),
    )
}

fn three_state_setup() -> (TabularMdp, MinimalSoftmax, FixedPolicy) {
    let mdp = make_chain_mdp(3, 1).unwrap();
    let pi = MinimalSoftmax::new(3, 2, vec![0.5, -0.5, 1.0]).unwrap();
    (mdp, pi, FixedPolicy::uniform(3, 2))
}

fn c3_critic_iterates() -> Outcome {
    let (mdp, pi, mu) = three_state_setup();
    let vals = exact_values(&mdp, &pi).unwrap();
    let sol = fisher_and_xstar(&mdp, &pi).unwrap();
    let ratios = exact_ratios(&mdp, &pi, &mu).unwrap();
    let d_mu = visitation(&mdp, &mu).unwrap();
    let table = policy_table(&mdp, &pi).unwrap();
    let steps = 200_000;
    let mut errors = Vec::new();
    for seed in 0..10 {
        let mut rng = substream(seed, Stream::Fixture, 3);
        let mut x = vec![0.0; 3];
        for t in 0..steps {
            let s = categorical(&d_mu, &mut rng);
            let a = categorical(&[0.5, 0.5], &mut rng);
            let sp = mdp.sample_next(s, a, &mut rng);
            let r = rho(&table[s], &[0.5, 0.5], a).unwrap();
            let delta = mdp.reward(s, a) + mdp.gamma() * vals.v[sp] - vals.v[s];
            let f = pi.score(s, a).unwrap();
            let alpha = 1.0 / ((t + 1) as f64).powf(0.7);
            let c = alpha * ratios.w[s] * r * (delta - dot(&x, &f));
            x.iter_mut().zip(&f).for_each(|(xi, fi)| *xi += c * fi);
        }
        errors.push(rel(&x, &sol.x_star.0));
    }
    let ok = errors.iter().filter(|&&e| e <= 0.05).count();
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    outcome(ok >= 9, format!("{ok}/10 seeds within 5% of x* (worst {worst:.3})"))
}

fn c4_martingale() -> Outcome {
    let (mdp, pi, mu) = three_state_setup();
    let vals = exact_values(&mdp, &pi).unwrap();
    let sol = fisher_and_xstar(&mdp, &pi).unwrap();
    let ratios = exact_ratios(&mdp, &pi, &mu).unwrap();
    let d_mu = visitation(&mdp, &mu).unwrap();
    let table = policy_table(&mdp, &pi).unwrap();
    let x = [0.3, -0.2, 0.1];
    let h = sol.drift.eval(&x);
    let n = 100_000;
    let mut rng = stream(4, Stream::Fixture);
    let (mut sum, mut sq) = ([0.0; 3], [0.0; 3]);
    for _ in 0..n {
        let s = categorical(&d_mu, &mut rng);
        let a = categorical(&[0.5, 0.5], &mut rng);
        let sp = mdp.sample_next(s, a, &mut rng);
        let r = rho(&table[s], &[0.5, 0.5], a).unwrap();
        let delta = mdp.reward(s, a) + mdp.gamma() * vals.v[sp] - vals.v[s];
        let f = pi.score(s, a).unwrap();
        let c = ratios.w[s] * r * (delta - dot(&x, &f));
        for i in 0..3 {
            let m = c * f[i] - h[i];
            sum[i] += m;
            sq[i] += m * m;
        }
    }
    let z: Vec<f64> = (0..3)
        .map(|i| {
            let mean = sum[i] / n as f64;
            let se = ((sq[i] / n as f64 - mean * mean) / n as f64).sqrt();
            mean.abs() / se
        })
        .collect();
    let worst = z.iter().cloned().fold(0.0, f64::max);
    outcome(worst <= 3.0, format!("largest |mean|/SE {worst:.2} over 3 components (need <= 3)"))
}

fn c5_change_of_measure() -> Outcome {
    let (mdp, pi, mu) = three_state_setup();
    let ratios = exact_ratios(&mdp, &pi, &mu).unwrap();
    let d_mu = visitation(&mdp, &mu).unwrap();
    let d_pi = visitation(&mdp, &pi).unwrap();
    let (pt, mt) = (policy_table(&mdp, &pi).unwrap(), policy_table(&mdp, &mu).unwrap());
    let mut rng = stream(5, Stream::Fixture);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let g: Vec<[f64; 2]> = (0..3).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for s in 0..3 {
            for a in 0..2 {
                lhs += d_mu[s] * mt[s][a] * ratios.w[s] * rho(&pt[s], &mt[s], a).unwrap() * g[s][a];
                rhs += d_pi[s] * pt[s][a] * g[s][a];
            }
        }
        worst = worst.max((lhs - rhs).abs());
    }
    outcome(worst <= 1e-10, format!("max gap {worst:.1e} over 20 test functions (need <= 1e-10)"))
}

fn c6_ratio_recovery() -> Outcome {
    let mdp = make_chain_mdp(3, 1).unwrap();
    let pi = MinimalSoftmax::new(3, 2, vec![1.5, 1.5, 1.5]).unwrap();
    let mu = FixedPolicy::uniform(3, 2);
    let exact = exact_ratios(&mdp, &pi, &mu).unwrap();
    let max_rel = |fit: &[f64], truth: &[f64]| fit.iter().zip(truth).map(|(f, t)| ((f - t) / t).abs()).fold(0.0, f64::max);
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    let mut baseline = f64::INFINITY;
    for seed in 0..10 {
        let mut rng = substream(seed, Stream::Fixture, 6);
        let mut seed_ok = true;
        for (target, truth) in
            [(RatioTarget::Stationary, &exact.w_hat), (RatioTarget::Visitation { gamma: mdp.gamma() }, &exact.w)]
        {
            let batch = sample_tabular_batch(&mdp, &pi, &mu, target, 10_000, &mut rng).unwrap();
            let mut est = RatioEstimator::tabular(3, target);
            est.fit(&batch, 3000, 1.0).unwrap();
            let RatioModel::Table(fit) = &est.model else { unreachable!() };
            let e = max_rel(fit, truth);
            worst = worst.max(e);
            seed_ok &= e <= 0.05;
            baseline = baseline.min(max_rel(&[1.0; 3], truth));
        }
        ok += seed_ok as usize;
    }
    // the ratios must be far enough from 1 that recovering them means something
    outcome(
        ok >= 9 && baseline > 0.2,
        format!("{ok}/10 seeds recover w and w_hat within 5% (worst {worst:.3}; w = 1 would be off by {baseline:.2})"),
    )
}

fn c7_trace_degeneracy() -> Outcome {
    let mut init = stream(7, Stream::Init);
    let net = Mlp::new(&[4, 64, 64, 1], Activation::Tanh, &mut init).unwrap();
    let policy = SoftmaxPolicy::new(Mlp::new(&[4, 16, 2], Activation::Tanh, &mut init).unwrap());
    let mut plain = ValueCritic::new(net.clone(), 0.99).unwrap();
    let mut traced = ValueCritic::with_trace(net, 0.99, 0.0).unwrap();
    traced.reset_trace();
    let mut env = CartPole::new();
    let mut rng = stream(7, Stream::Env);
    let mut obs = env.reset(&mut rng);
    let mut steps = 0;
    loop {
        let a = policy.sample_action(&obs, &mut rng).unwrap();
        let out = env.step(a, &mut rng).unwrap();
        let t = Transition { obs: &obs, reward: out.reward, next_obs: &out.next_obs, terminated: out.terminated };
        let d1 = plain.update(&t, 5e-3, 1.0).unwrap();
        let d2 = traced.update(&t, 5e-3, 1.0).unwrap();
        if d1.to_bits() != d2.to_bits() || plain.net().params() != traced.net().params() {
            return outcome(false, format!("paths differ at step {}", steps + 1));
        }
        steps += 1;
        if out.done() {
            break;
        }
        obs = out.next_obs;
    }
    outcome(true, format!("bit-equal over a {steps}-step episode"))
}

fn c8_stationarity() -> Outcome {
    let mut cfg = AgentConfig::defaults(Algorithm::Nac, "chain:3:1".parse().unwrap(), false);
    cfg.episodes = 20_000;
    cfg.seed = 1;
    cfg.schedule = "poly:0.6:0.9".parse().unwrap();
    let mdp = cfg.env.tabular_mdp().unwrap();
    let res = natgrad::agent::train(&cfg).unwrap();
    let (_, grad) = objective_and_gradient(&mdp, &res.policy).unwrap();
    let norm = grad.norm();
    outcome(norm <= 1e-2, format!("final |grad J| {norm:.2e} (need <= 1e-2)"))
}

fn train_or_floor(cfg: &AgentConfig) -> Result<TrainResult, String> {
    natgrad::agent::train(cfg).map_err(|e| e.to_string())
}

fn eval_mean(policy: &SoftmaxPolicy, env: EnvId, seed: u64, episodes: usize) -> f64 {
    let mut env = env.make().unwrap();
    let mut rng = stream(seed, Stream::Eval);
    evaluate(policy, env.as_mut(), episodes, &mut rng).unwrap().0
}

fn cartpole(algo: Algorithm, seed: u64, episodes: usize) -> AgentConfig {
    let mut cfg = AgentConfig::defaults(algo, EnvId::CartPole, false);
    cfg.seed = seed;
    cfg.episodes = episodes;
    cfg
}

fn c9_cartpole() -> Outcome {
    let (mut reached, mut good) = (0, 0);
    let mut evals = Vec::new();
    for seed in SEEDS {
        // the table's critic and advantage rates let θ grow without bound
        // here; these slower critic rates keep the policy from saturating
        let mut cfg = cartpole(Algorithm::Nac, seed, 1000);
        cfg.critic_lr = 2e-3;
        cfg.advantage_lr = 3e-4;
        match train_or_floor(&cfg) {
            Ok(res) => {
                reached += res.records.iter().any(|r| r.ema_reward >= 450.0) as usize;
                let m = eval_mean(&res.best_policy, EnvId::CartPole, seed, 200);
                good += (m >= 480.0) as usize;
                evals.push(format!("{m:.1}"));
            }
            Err(e) => evals.push(format!("error({e})")),
        }
    }
    outcome(
        reached >= 3 && good >= 3,
        format!("EMA >= 450 on {reached}/5 seeds; best-policy eval >= 480 on {good}/5 [{}]", evals.join(" ")),
    )
}

/// First episode whose EMA reaches `level`; `None` within the budget.
fn episodes_to(cfg: &AgentConfig, level: f64) -> Option<usize> {
    let mut agent = Agent::new(cfg.clone()).ok()?;
    for _ in 0..cfg.episodes {
        let r = agent.train_episode().ok()?;
        if r.ema_reward >= level {
            return Some(r.index);
        }
    }
    None
}

fn median(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[v.len() / 2]
}

fn c10_ordering() -> Outcome {
    // runs that never reach 400 count as one past the budget
    let budget = 1000;
    let first = |algo| -> Vec<usize> {
        SEEDS.iter().map(|&s| episodes_to(&cartpole(algo, s, budget), 400.0).unwrap_or(budget + 1)).collect()
    };
    let nac = first(Algorithm::Nac);
    let ac = first(Algorithm::Ac);
    let (mn, ma) = (median(nac.clone()), median(ac.clone()));
    outcome(mn <= ma, format!("median episodes to EMA 400: NAC {mn} {nac:?}, AC {ma} {ac:?}"))
}

fn c11_off_policy() -> Outcome {
    let mut good = 0;
    let mut evals = Vec::new();
    for seed in SEEDS {
        let mut cfg = cartpole(Algorithm::OffNac, seed, 1500);
        // a shorter horizon keeps the off-policy critic stable
        cfg.gamma = Some(0.95);
        match train_or_floor(&cfg) {
            Ok(res) => {
                let m = eval_mean(&res.best_policy, EnvId::CartPole, seed, 200);
                good += (m >= 400.0) as usize;
                evals.push(format!("{m:.1}"));
            }
            Err(e) => evals.push(format!("error({e})")),
        }
    }
    outcome(good >= 3, format!("eval >= 400 on {good}/5 seeds [{}]", evals.join(" ")))
}

fn c12_mountain_car() -> Outcome {
    // a diverged run is scored at the episode floor
    let floor = -10_000.0;
    let run = |lambda: f64, seed: u64| -> f64 {
        let mut cfg = AgentConfig::defaults(Algorithm::Nac, EnvId::MountainCar, lambda > 0.0);
        cfg.lambda = lambda;
        cfg.seed = seed;
        cfg.episodes = 500;
        match train_or_floor(&cfg) {
            Ok(res) => eval_mean(&res.best_policy, EnvId::MountainCar, seed, 100),
            Err(_) => floor,
        }
    };
    let traced: Vec<f64> = SEEDS.iter().map(|&s| run(1.0, s)).collect();
    let plain: Vec<f64> = SEEDS.iter().map(|&s| run(0.0, s)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mt, mp) = (mean(&traced), mean(&plain));
    let solved = traced.iter().filter(|&&m| m >= -350.0).count();
    let fmt = |v: &[f64]| v.iter().map(|m| format!("{m:.0}")).collect::<Vec<_>>().join(" ");
    outcome(
        solved >= 3 && mt > mp,
        format!(
            "lambda=1 eval >= -350 on {solved}/5; mean lambda=1 {mt:.1} [{}] vs lambda=0 {mp:.1} [{}]",
            fmt(&traced),
            fmt(&plain)
        ),
    )
}
