use natgrad::critic::{AdvantageCritic, Transition, ValueCritic};
use natgrad::env::{make_chain_mdp, CartPole, Environment};
use natgrad::net::{dot, Activation, Mlp};
use natgrad::oracle::{exact_values, fisher_and_xstar, objective_and_gradient, policy_table, visitation, MinimalSoftmax, TabularPolicy};
use natgrad::policy::SoftmaxPolicy;
use natgrad::rng::{categorical, stream, Stream};

#[test]
fn tabular_td_converges_to_exact_values() {
    let mdp = make_chain_mdp(2, 4).unwrap();
    let pi = MinimalSoftmax::new(2, 2, vec![0.4, -0.8]).unwrap();
    let exact = exact_values(&mdp, &pi).unwrap();
    // linear critic on one-hot features is a table
    let mut critic = ValueCritic::new(Mlp::zeros(&[2, 1], Activation::Tanh).unwrap(), mdp.gamma()).unwrap();
    let table = policy_table(&mdp, &pi).unwrap();
    let mut rng = stream(1, Stream::Fixture);
    let mut s = mdp.sample_initial(&mut rng);
    for t in 0..100_000 {
        let a = categorical(&table[s], &mut rng);
        let sp = mdp.sample_next(s, a, &mut rng);
        let (obs, next) = (mdp.observe(s), mdp.observe(sp));
        let tr = Transition { obs: &obs, reward: mdp.reward(s, a), next_obs: &next, terminated: false };
        critic.update(&tr, 1.0 / ((t + 1) as f64).powf(0.7), 1.0).unwrap();
        s = sp;
    }
    for s in 0..2 {
        let v = critic.value(&mdp.observe(s)).unwrap();
        let rel = (v - exact.v[s]).abs() / exact.v[s].abs();
        assert!(rel < 1e-3, "state {s}: {v} vs {}", exact.v[s]);
    }
}

#[test]
fn zero_lambda_trace_bit_equals_td0_over_an_episode() {
    let mut init = stream(2, Stream::Init);
    let net = Mlp::new(&[4, 16, 16, 1], Activation::Tanh, &mut init).unwrap();
    let policy = SoftmaxPolicy::new(Mlp::new(&[4, 8, 2], Activation::Tanh, &mut init).unwrap());
    let mut plain = ValueCritic::new(net.clone(), 0.99).unwrap();
    let mut traced = ValueCritic::with_trace(net, 0.99, 0.0).unwrap();
    traced.reset_trace();
    let mut env = CartPole::new();
    let mut rng = stream(2, Stream::Env);
    let mut obs = env.reset(&mut rng);
    let mut steps = 0;
    loop {
        let a = policy.sample_action(&obs, &mut rng).unwrap();
        let out = env.step(a, &mut rng).unwrap();
        let t = Transition { obs: &obs, reward: out.reward, next_obs: &out.next_obs, terminated: out.terminated };
        let d1 = plain.update(&t, 0.01, 1.0).unwrap();
        let d2 = traced.update(&t, 0.01, 1.0).unwrap();
        assert_eq!(d1.to_bits(), d2.to_bits());
        assert_eq!(plain.net().params(), traced.net().params());
        steps += 1;
        if out.done() {
            break;
        }
        obs = out.next_obs;
    }
    assert!(steps > 1);
}

#[test]
fn advantage_fixed_point_is_orthogonal_to_features() {
    // exact-expectation iteration of the advantage update converges to x*
    let mdp = make_chain_mdp(4, 6).unwrap();
    let pi = MinimalSoftmax::new(4, 2, vec![0.3, -1.0, 0.8, 1.4]).unwrap();
    let vals = exact_values(&mdp, &pi).unwrap();
    let d = visitation(&mdp, &pi).unwrap();
    let table = policy_table(&mdp, &pi).unwrap();
    let sol = fisher_and_xstar(&mdp, &pi).unwrap();
    let mut critic = AdvantageCritic::new(4);
    for _ in 0..20_000 {
        let mut step = vec![0.0; 4];
        for s in 0..4 {
            for a in 0..2 {
                let f = pi.score(s, a).unwrap();
                let resid = vals.adv[s][a] - dot(critic.weights(), &f);
                for i in 0..4 {
                    step[i] += d[s] * table[s][a] * resid * f[i];
                }
            }
        }
        let x: Vec<f64> = critic.weights().iter().zip(&step).map(|(x, g)| x + 5.0 * g).collect();
        critic = AdvantageCritic::from_weights(x);
    }
    let x = critic.natural_direction();
    let mut residual = [0.0; 4];
    for s in 0..4 {
        for a in 0..2 {
            let f = pi.score(s, a).unwrap();
            let r = vals.adv[s][a] - dot(x.0.as_slice(), &f);
            for i in 0..4 {
                residual[i] += d[s] * table[s][a] * r * f[i];
            }
        }
    }
    assert!(residual.iter().all(|r| r.abs() < 1e-8), "{residual:?}");
    for (a, b) in x.0.iter().zip(sol.x_star.0.iter()) {
        assert!((a - b).abs() < 1e-6);
    }
    // and F x = ∇J
    let (_, grad) = objective_and_gradient(&mdp, &pi).unwrap();
    let fx = sol.fisher.clone() * nalgebra::DVector::from_column_slice(&x.0);
    for i in 0..4 {
        assert!((fx[i] - grad.0[i]).abs() < 1e-8);
    }
}
