//! C ABI over the natgrad toolkit.
//!
//! Objects cross the boundary as opaque handles created by a `*_new` /
//! `*_load` function and released by the matching `*_free`. Every fallible
//! call returns an [`NgStatus`]; on failure the message is kept per thread
//! and can be read with [`ng_last_error_message`]. Panics never unwind into
//! C, they come back as [`NgStatus::Panic`].
//!
//! Handles are not thread-safe; use one handle from one thread at a time.

use natgrad::agent::{evaluate, parse_settings, Agent, AgentConfig};
use natgrad::env::{EnvId, Environment};
use natgrad::net::Mlp;
use natgrad::oracle::{objective_and_gradient, projection_residual, solve};
use natgrad::policy::SoftmaxPolicy;
use natgrad::rng::{stream, Rng, Stream};
use natgrad::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Bad argument: unknown id, malformed text, wrong length, out-of-range
    /// value.
    InvalidArgument = 2,
    /// The call is illegal in the handle's current state.
    InvalidState = 3,
    /// A non-finite value appeared.
    Numeric = 4,
    /// Training left the bounded parameter region.
    Divergence = 5,
    /// An ill-conditioned linear system.
    Degenerate = 6,
    Io = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

impl From<&Error> for NgStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) | Error::Parse(_) => NgStatus::InvalidArgument,
            Error::State(_) => NgStatus::InvalidState,
            Error::Numeric(_) => NgStatus::Numeric,
            Error::Divergence { .. } => NgStatus::Divergence,
            Error::Degenerate(_) => NgStatus::Degenerate,
            Error::Io(_) => NgStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    // interior NULs would truncate the C string
    let msg = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: NgStatus, msg: impl Into<String>) -> NgStatus {
    set_last_error(msg.into());
    status
}

/// Runs `f` with panics contained, recording the error message on failure.
fn guard(f: impl FnOnce() -> Result<(), NgStatus>) -> NgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NgStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(NgStatus::Panic, format!("panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, NgStatus>;
}

impl<T> OrStatus<T> for natgrad::Result<T> {
    fn or_status(self) -> Result<T, NgStatus> {
        self.map_err(|e| fail(NgStatus::from(&e), e.to_string()))
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), NgStatus> {
    if p.is_null() {
        Err(fail(NgStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, NgStatus> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(NgStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], NgStatus> {
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

fn check_len(len: usize, expected: usize, name: &str) -> Result<(), NgStatus> {
    if len == expected {
        Ok(())
    } else {
        Err(fail(NgStatus::InvalidArgument, format!("`{name}` has length {len}, expected {expected}")))
    }
}

unsafe fn write_slice(out: *mut f64, len: usize, values: &[f64], name: &str) -> Result<(), NgStatus> {
    non_null(out, name)?;
    check_len(len, values.len(), name)?;
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(values);
    Ok(())
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> Result<(), NgStatus> {
    non_null(out, name)?;
    out.write(value);
    Ok(())
}

fn parse_env(id: &str) -> Result<EnvId, NgStatus> {
    id.parse::<EnvId>().or_status()
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ng_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Forgets the last error message of this thread.
#[no_mangle]
pub extern "C" fn ng_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ng_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- environments ----

/// An environment instance with its own random stream.
pub struct NgEnv {
    env: Box<dyn Environment>,
    rng: Rng,
}

/// Creates an environment from an id (`cartpole`, `acrobot`, `mountaincar`,
/// `chain:<n>:<seed>`); `seed` drives resets and transition noise.
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ng_env_new(id: *const c_char, seed: u64, out: *mut *mut NgEnv) -> NgStatus {
    guard(|| {
        non_null(out, "out")?;
        let env = parse_env(read_str(id, "id")?)?.make().or_status()?;
        let handle = Box::new(NgEnv { env, rng: stream(seed, Stream::Env) });
        put(out, Box::into_raw(handle), "out")
    })
}

/// Releases an environment; null is ignored.
///
/// # Safety
/// `env` must come from [`ng_env_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ng_env_free(env: *mut NgEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Observation length; 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ng_env_obs_dim(env: *const NgEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.obs_dim())
}

/// Number of discrete actions; 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ng_env_n_actions(env: *const NgEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.n_actions())
}

/// Starts an episode and writes the first observation to `obs[0..obs_len]`.
///
/// # Safety
/// `env` must be a live handle; `obs` must hold `obs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ng_env_reset(env: *mut NgEnv, obs: *mut f64, obs_len: usize) -> NgStatus {
    guard(|| {
        non_null(env, "env")?;
        let e = &mut *env;
        non_null(obs, "obs")?;
        check_len(obs_len, e.env.obs_dim(), "obs")?;
        let first = e.env.reset(&mut e.rng);
        write_slice(obs, obs_len, &first, "obs")
    })
}

/// Outcome of one environment step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NgStep {
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Applies `action`, writes the next observation to `obs` and the reward
/// and end flags to `step`.
///
/// # Safety
/// `env` must be a live handle; `obs` must hold `obs_len` doubles; `step`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ng_env_step(
    env: *mut NgEnv,
    action: usize,
    obs: *mut f64,
    obs_len: usize,
    step: *mut NgStep,
) -> NgStatus {
    guard(|| {
        non_null(env, "env")?;
        non_null(step, "step")?;
        let e = &mut *env;
        // reject a bad buffer before the environment advances
        non_null(obs, "obs")?;
        check_len(obs_len, e.env.obs_dim(), "obs")?;
        let out = e.env.step(action, &mut e.rng).or_status()?;
        write_slice(obs, obs_len, &out.next_obs, "obs")?;
        put(step, NgStep { reward: out.reward, terminated: out.terminated, truncated: out.truncated }, "step")
    })
}

// ---- policies ----

/// A softmax policy network.
pub struct NgPolicy {
    policy: SoftmaxPolicy,
}

/// Loads a policy parameter file written by training.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ng_policy_load(path: *const c_char, out: *mut *mut NgPolicy) -> NgStatus {
    guard(|| {
        non_null(out, "out")?;
        let net = Mlp::load(Path::new(read_str(path, "path")?)).or_status()?;
        put(out, Box::into_raw(Box::new(NgPolicy { policy: SoftmaxPolicy::new(net) })), "out")
    })
}

/// Writes the policy parameters to `path`.
///
/// # Safety
/// `policy` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ng_policy_save(policy: *const NgPolicy, path: *const c_char) -> NgStatus {
    guard(|| {
        non_null(policy, "policy")?;
        (*policy).policy.net().save(Path::new(read_str(path, "path")?)).or_status()
    })
}

/// Releases a policy; null is ignored.
///
/// # Safety
/// `policy` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ng_policy_free(policy: *mut NgPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Number of actions the policy chooses between; 0 for a null handle.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ng_policy_n_actions(policy: *const NgPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.policy.n_actions())
}

/// Writes `π(·|obs)` to `probs[0..n_actions]`.
///
/// # Safety
/// `policy` must be a live handle; `obs` must hold `obs_len` doubles and
/// `probs` `n_actions` doubles.
#[no_mangle]
pub unsafe extern "C" fn ng_policy_action_probs(
    policy: *const NgPolicy,
    obs: *const f64,
    obs_len: usize,
    probs: *mut f64,
    n_actions: usize,
) -> NgStatus {
    guard(|| {
        non_null(policy, "policy")?;
        let p = (*policy).policy.action_probs(read_slice(obs, obs_len, "obs")?).or_status()?;
        write_slice(probs, n_actions, &p, "probs")
    })
}

/// Mean and population standard deviation of `episodes` returns of the
/// policy on a fresh environment `env_id`, seeded with `seed`.
///
/// # Safety
/// `policy` must be a live handle; `env_id` a NUL-terminated string; `mean`
/// and `std_dev` writable.
#[no_mangle]
pub unsafe extern "C" fn ng_policy_evaluate(
    policy: *const NgPolicy,
    env_id: *const c_char,
    episodes: usize,
    seed: u64,
    mean: *mut f64,
    std_dev: *mut f64,
) -> NgStatus {
    guard(|| {
        non_null(policy, "policy")?;
        non_null(mean, "mean")?;
        non_null(std_dev, "std_dev")?;
        let mut env = parse_env(read_str(env_id, "env_id")?)?.make().or_status()?;
        let p = &(*policy).policy;
        if p.net().input_dim() != env.obs_dim() || p.n_actions() != env.n_actions() {
            return Err(fail(NgStatus::InvalidArgument, "policy shape does not match the environment"));
        }
        let mut rng = stream(seed, Stream::Eval);
        let (m, s) = evaluate(p, env.as_mut(), episodes, &mut rng).or_status()?;
        put(mean, m, "mean")?;
        put(std_dev, s, "std_dev")
    })
}

// ---- agents ----

/// A training run in progress.
pub struct NgAgent {
    agent: Agent,
}

/// Summary of one training episode.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NgEpisode {
    /// 1-based episode index.
    pub index: usize,
    pub total_reward: f64,
    pub ema_reward: f64,
    pub steps: usize,
}

/// Creates an agent from `key = value` lines (the format of a run's
/// `config.txt`; `algo` and `env` are required).
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ng_agent_new(config: *const c_char, out: *mut *mut NgAgent) -> NgStatus {
    guard(|| {
        non_null(out, "out")?;
        let settings = parse_settings(read_str(config, "config")?).or_status()?;
        let cfg = AgentConfig::from_settings(&settings).or_status()?;
        let agent = Agent::new(cfg).or_status()?;
        put(out, Box::into_raw(Box::new(NgAgent { agent })), "out")
    })
}

/// Releases an agent; null is ignored.
///
/// # Safety
/// `agent` must come from [`ng_agent_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ng_agent_free(agent: *mut NgAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Runs one training episode. `record` may be null.
///
/// # Safety
/// `agent` must be a live handle; `record` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ng_agent_train_episode(agent: *mut NgAgent, record: *mut NgEpisode) -> NgStatus {
    guard(|| {
        non_null(agent, "agent")?;
        let r = (*agent).agent.train_episode().or_status()?;
        if !record.is_null() {
            record.write(NgEpisode { index: r.index, total_reward: r.total_reward, ema_reward: r.ema_reward, steps: r.steps });
        }
        Ok(())
    })
}

/// Copies the agent's current policy into a new policy handle.
///
/// # Safety
/// `agent` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ng_agent_policy(agent: *const NgAgent, out: *mut *mut NgPolicy) -> NgStatus {
    guard(|| {
        non_null(agent, "agent")?;
        let policy = (*agent).agent.policy().clone();
        put(out, Box::into_raw(Box::new(NgPolicy { policy })), "out")
    })
}

// ---- oracle ----

/// Exact quantities of a tabular policy on a chain MDP.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NgOracleReport {
    /// `J(θ)`.
    pub objective: f64,
    /// `‖∇θ J‖`.
    pub grad_norm: f64,
    pub fisher_rank: usize,
    /// `F x* = ∇J` has no solution. A singular but consistent Fisher system
    /// (any softmax with redundant logits) is not degenerate.
    pub degenerate: bool,
    /// `‖x*‖`.
    pub x_star_norm: f64,
    /// Norm of the compatible-feature residual at `x*`; ~0 by construction.
    pub projection_residual: f64,
}

/// Solves a `chain:<n>:<seed>` MDP exactly under `policy`, whose input
/// size must equal the number of states.
///
/// # Safety
/// `env_id` must be a NUL-terminated string; `policy` a live handle;
/// `report` writable.
#[no_mangle]
pub unsafe extern "C" fn ng_oracle_solve(
    env_id: *const c_char,
    policy: *const NgPolicy,
    report: *mut NgOracleReport,
) -> NgStatus {
    guard(|| {
        non_null(policy, "policy")?;
        non_null(report, "report")?;
        let id = parse_env(read_str(env_id, "env_id")?)?;
        if !id.is_tabular() {
            return Err(fail(NgStatus::InvalidArgument, format!("`{id}` is not a tabular environment")));
        }
        let mdp = id.tabular_mdp().or_status()?;
        let p = &(*policy).policy;
        let sol = solve(&mdp, p).or_status()?;
        let (j, grad) = objective_and_gradient(&mdp, p).or_status()?;
        let x = sol.x_star();
        let residual = projection_residual(&mdp, p, &x.0).or_status()?;
        put(
            report,
            NgOracleReport {
                objective: j,
                grad_norm: grad.norm(),
                fisher_rank: sol.fisher.rank,
                degenerate: sol.fisher.degenerate,
                x_star_norm: x.norm(),
                projection_residual: residual,
            },
            "report",
        )
    })
}
