//! Command-line front end: `train`, `eval`, `compare`, `oracle`,
//! `ratio-test`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numeric
//! divergence.

use super::compare::{band, check_alignment, combined_csv, dedupe_labels, load_run, svg_plot, threshold_report};
use super::records::{records_to_csv, RunManifest};
use crate::agent::{evaluate, parse_settings, train_with, AgentConfig, EpisodeRecord, TrainResult};
use crate::env::EnvId;
use crate::error::{Error, Result};
use crate::net::{Activation, Mlp};
use crate::oracle::{lipschitz_and_bounds, projection_residual, solve, FixedPolicy};
use crate::policy::SoftmaxPolicy;
use crate::ratio::{exact_ratios, sample_tabular_batch, RatioEstimator, RatioModel, RatioTarget};
use crate::rng::{stream, Stream};
use clap::{Args, CommandFactory, Parser, Subcommand};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Parser)]
#[command(name = "natgrad", version, about = "Natural actor-critic experiments and exact tabular oracles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an agent and write per-episode results.
    Train(TrainArgs),
    /// Evaluate a saved policy.
    Eval(EvalArgs),
    /// Aggregate result directories into a combined curve and plot.
    Compare(CompareArgs),
    /// Print exact quantities for a tabular environment.
    Oracle(OracleArgs),
    /// Fit tabular ratio estimators on sampled data and compare with the exact ratios.
    RatioTest(RatioTestArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// ac | nac | offac | offnac
    #[arg(long, required_unless_present = "config")]
    pub algo: Option<String>,
    /// cartpole | acrobot | mountaincar | chain:<n>:<seed>
    #[arg(long, required_unless_present = "config")]
    pub env: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Comma-separated seed list; runs in parallel into `seed-<n>` subdirectories.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Flat `key = value` file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub actor_lr: Option<f64>,
    #[arg(long)]
    pub critic_lr: Option<f64>,
    #[arg(long)]
    pub adv_lr: Option<f64>,
    #[arg(long)]
    pub ratio_lr: Option<f64>,
    #[arg(long)]
    pub ratio_refit_every: Option<usize>,
    /// Ceiling on ratio estimates, or `none`.
    #[arg(long)]
    pub ratio_clip: Option<String>,
    /// constant | poly:<p_fast>:<p_slow>
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Any other config key as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Evaluate the best policy over this many episodes after training.
    #[arg(long, default_value_t = 0)]
    pub eval_episodes: usize,
    /// Write real wall-clock times instead of 0 in the `wall_ms` column.
    #[arg(long)]
    pub record_wall_time: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Saved policy file, or a run directory containing `policy.txt`.
    #[arg(long)]
    pub params: PathBuf,
    /// Defaults to the env recorded next to the policy.
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for `eval.csv`; defaults to the policy's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Result directories (each with `episodes.csv` or `seed-*/episodes.csv`).
    #[arg(required = true, num_args = 2..)]
    pub dirs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Report the first episode whose median EMA reaches each value.
    #[arg(long)]
    pub threshold: Vec<f64>,
    #[arg(long, default_value = "Average total reward")]
    pub title: String,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub env: String,
    /// Seed of the random tabular policy when `--params` is absent.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatioTestArgs {
    #[arg(long)]
    pub env: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 3000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub ratio_lr: f64,
    /// Scale of the random policy logits; larger moves the ratios away from 1.
    #[arg(long, default_value_t = 1.5)]
    pub logit_scale: f64,
}

/// Maps library errors to process exit codes.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } | Error::Numeric(_) => 3,
        _ => 2,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::RatioTest(a) => cmd_ratio_test(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if exit_code(&e) == 2 {
                eprintln!("{}", Cli::command().render_usage());
            }
            exit_code(&e)
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// Config file values, then flags, merged into one settings map.
pub fn train_settings(a: &TrainArgs) -> Result<BTreeMap<String, String>> {
    let mut s = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            parse_settings(&text)?
        }
        None => BTreeMap::new(),
    };
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            s.insert(k.to_string(), v);
        }
    };
    put("algo", a.algo.clone());
    put("env", a.env.clone());
    put("lambda", a.lambda.map(|v| v.to_string()));
    put("episodes", a.episodes.map(|v| v.to_string()));
    put("seed", a.seed.map(|v| v.to_string()));
    put("actor_lr", a.actor_lr.map(|v| v.to_string()));
    put("critic_lr", a.critic_lr.map(|v| v.to_string()));
    put("adv_lr", a.adv_lr.map(|v| v.to_string()));
    put("ratio_lr", a.ratio_lr.map(|v| v.to_string()));
    put("ratio_refit_every", a.ratio_refit_every.map(|v| v.to_string()));
    put("ratio_clip", a.ratio_clip.clone());
    put("schedule", a.schedule.clone());
    put("gamma", a.gamma.map(|v| v.to_string()));
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("--set expects key=value, got `{kv}`")))?;
        s.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(s)
}

struct SeedOutcome {
    seed: u64,
    files: Vec<PathBuf>,
    error: Option<Error>,
}

fn run_seed(cfg: &AgentConfig, dir: &Path, rel: &Path, a: &TrainArgs) -> Result<SeedOutcome> {
    create_dir(dir)?;
    write(&dir.join("config.txt"), &cfg.to_text())?;
    let mut records: Vec<EpisodeRecord> = Vec::with_capacity(cfg.episodes);
    let outcome = train_with(cfg, |r| records.push(r.clone()));
    let mut files = vec![rel.join("episodes.csv"), rel.join("config.txt")];
    write(&dir.join("episodes.csv"), &records_to_csv(&records, a.record_wall_time))?;
    let result: TrainResult = match outcome {
        Ok(r) => r,
        Err(e) => {
            let diag = format!(
                "seed = {}\nepisodes_completed = {}\nerror = {e}\n",
                cfg.seed,
                records.len()
            );
            write(&dir.join("diagnostic.txt"), &diag)?;
            files.push(rel.join("diagnostic.txt"));
            return Ok(SeedOutcome { seed: cfg.seed, files, error: Some(e) });
        }
    };
    result.best_policy.net().save(&dir.join("policy.txt"))?;
    result.policy.net().save(&dir.join("final_policy.txt"))?;
    result.critic.net().save(&dir.join("value.txt"))?;
    files.extend(["policy.txt", "final_policy.txt", "value.txt"].iter().map(|f| rel.join(f)));
    if a.eval_episodes > 0 {
        let mut env = cfg.env.make()?;
        let mut rng = stream(cfg.seed, Stream::Eval);
        let (mean, std) = evaluate(&result.best_policy, env.as_mut(), a.eval_episodes, &mut rng)?;
        write(&dir.join("eval.csv"), &eval_csv(mean, std, a.eval_episodes))?;
        files.push(rel.join("eval.csv"));
        println!("seed={} {}", cfg.seed, eval_line(mean, std, a.eval_episodes));
    }
    Ok(SeedOutcome { seed: cfg.seed, files, error: None })
}

fn eval_line(mean: f64, std: f64, n: usize) -> String {
    format!("mean={mean:.2} std={std:.2} episodes={n}")
}

fn eval_csv(mean: f64, std: f64, n: usize) -> String {
    format!("mean,std,episodes\n{mean:.6},{std:.6},{n}\n")
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let settings = train_settings(a)?;
    let base = AgentConfig::from_settings(&settings)?;
    create_dir(&a.out)?;
    let started = now_ms();
    let (seeds, nested) = match &a.seeds {
        Some(list) if !list.is_empty() => (list.clone(), true),
        _ => (vec![base.seed], false),
    };
    let outcomes: Vec<Result<SeedOutcome>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            let rel = if nested { PathBuf::from(format!("seed-{seed}")) } else { PathBuf::new() };
            run_seed(&cfg, &a.out.join(&rel), &rel, a)
        })
        .collect();
    let mut files = Vec::new();
    let mut failure = None;
    for o in outcomes {
        let o = o?;
        files.extend(o.files);
        if let Some(e) = o.error {
            eprintln!("seed {}: {e}", o.seed);
            failure.get_or_insert(e);
        }
    }
    let manifest = RunManifest {
        config: base,
        seeds,
        files,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
    };
    write(&a.out.join("manifest.txt"), &manifest.to_text())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn load_policy(params: &Path) -> Result<(SoftmaxPolicy, PathBuf)> {
    let file = if params.is_dir() { params.join("policy.txt") } else { params.to_path_buf() };
    let net = Mlp::load(&file)?;
    let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((SoftmaxPolicy::new(net), dir))
}

fn recorded_env(dir: &Path) -> Option<String> {
    let text = std::fs::read_to_string(dir.join("config.txt")).ok()?;
    parse_settings(&text).ok()?.get("env").cloned()
}

fn check_policy_shape(policy: &SoftmaxPolicy, obs_dim: usize, n_actions: usize) -> Result<()> {
    let net = policy.net();
    if net.input_dim() != obs_dim || net.output_dim() != n_actions {
        return Err(Error::Domain(format!(
            "policy maps {} inputs to {} actions; environment has {obs_dim} and {n_actions}",
            net.input_dim(),
            net.output_dim()
        )));
    }
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (policy, dir) = load_policy(&a.params)?;
    let env_id: EnvId = match a.env.clone().or_else(|| recorded_env(&dir)) {
        Some(s) => s.parse()?,
        None => return Err(Error::Parse("--env is required when no config.txt sits next to the policy".into())),
    };
    let mut env = env_id.make()?;
    check_policy_shape(&policy, env.obs_dim(), env.n_actions())?;
    let mut rng = stream(a.seed, Stream::Eval);
    let (mean, std) = evaluate(&policy, env.as_mut(), a.episodes, &mut rng)?;
    let out = a.out.clone().unwrap_or(dir);
    create_dir(&out)?;
    write(&out.join("eval.csv"), &eval_csv(mean, std, a.episodes))?;
    println!("{}", eval_line(mean, std, a.episodes));
    Ok(())
}

pub fn cmd_compare(a: &CompareArgs) -> Result<()> {
    if a.dirs.len() < 2 {
        return Err(Error::Domain("compare needs at least two result directories".into()));
    }
    let mut runs = a.dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
    check_alignment(&runs)?;
    dedupe_labels(&mut runs);
    let bands: Vec<_> = runs.iter().map(band).collect();
    create_dir(&a.out)?;
    write(&a.out.join("combined.csv"), &combined_csv(&bands))?;
    write(&a.out.join("plot.svg"), &svg_plot(&bands, &a.title))?;
    let mut report = String::new();
    for &t in &a.threshold {
        report.push_str(&threshold_report(&bands, t));
    }
    if !report.is_empty() {
        write(&a.out.join("thresholds.txt"), &report)?;
        print!("{report}");
    }
    Ok(())
}

fn tabular_id(env: &str) -> Result<EnvId> {
    let id: EnvId = env.parse()?;
    if !id.is_tabular() {
        return Err(Error::Domain(format!("`{env}` is not a tabular environment; use chain:<n>:<seed>")));
    }
    Ok(id)
}

fn random_tabular_policy(n_states: usize, n_actions: usize, seed: u64, scale: f64) -> Result<SoftmaxPolicy> {
    let mut rng = stream(seed, Stream::Init);
    let mut net = Mlp::new(&[n_states, n_actions], Activation::Tanh, &mut rng)?;
    net.params_mut().iter_mut().for_each(|p| *p *= scale);
    Ok(SoftmaxPolicy::new(net))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(" ")
}

pub fn cmd_oracle(a: &OracleArgs) -> Result<()> {
    let id = tabular_id(&a.env)?;
    let mdp = id.tabular_mdp()?;
    let policy = match &a.params {
        Some(p) => load_policy(p)?.0,
        None => random_tabular_policy(mdp.n_states(), mdp.n_actions(), a.seed, 1.0)?,
    };
    check_policy_shape(&policy, mdp.n_states(), mdp.n_actions())?;
    let sol = solve(&mdp, &policy)?;
    let mu = FixedPolicy::uniform(mdp.n_states(), mdp.n_actions());
    let bounds = lipschitz_and_bounds(&mdp, &policy, &mu)?;
    let residual = projection_residual(&mdp, &policy, sol.x_star())?;
    let mut out = String::new();
    let _ = writeln!(out, "env = {id}");
    let _ = writeln!(out, "gamma = {}", mdp.gamma());
    let _ = writeln!(out, "J = {:.10}", sol.j);
    let _ = writeln!(out, "grad_norm = {:.6e}", sol.grad_j.norm());
    let _ = writeln!(out, "fisher_rank = {}/{}", sol.fisher.rank, sol.fisher.eigenvalues.len());
    let _ = writeln!(out, "fisher_eigenvalues = {}", fmt_vec(&sol.fisher.eigenvalues));
    let _ = writeln!(out, "fisher_norm = {:.6e}", bounds.fisher_norm);
    let _ = writeln!(out, "degenerate = {}", sol.fisher.degenerate);
    let _ = writeln!(out, "x_star = {}", fmt_vec(sol.x_star()));
    let _ = writeln!(out, "projection_residual = {residual:.6e}");
    let _ = writeln!(out, "V = {}", fmt_vec(&sol.v));
    let _ = writeln!(out, "d_visit = {}", fmt_vec(&sol.d_visit));
    match &sol.d_stat {
        Some(d) => {
            let _ = writeln!(out, "d_stat = {}", fmt_vec(d));
        }
        None => {
            let _ = writeln!(out, "d_stat = none");
        }
    }
    let _ = writeln!(
        out,
        "K2 = {:.6e}\nK3 = {:.6e}\nK4 = {:.6e}\nK5 = {:.6e}\nK6 = {:.6e}\nnoise_bound = {:.6e}",
        bounds.k2, bounds.k3, bounds.k4, bounds.k5, bounds.k6, bounds.noise
    );
    print!("{out}");
    Ok(())
}

pub fn cmd_ratio_test(a: &RatioTestArgs) -> Result<()> {
    let id = tabular_id(&a.env)?;
    let mdp = id.tabular_mdp()?;
    let policy = random_tabular_policy(mdp.n_states(), mdp.n_actions(), a.seed, a.logit_scale)?;
    let mu = FixedPolicy::uniform(mdp.n_states(), mdp.n_actions());
    let exact = exact_ratios(&mdp, &policy, &mu)?;
    let mut rng = stream(a.seed, Stream::Ratio);
    let mut out = String::new();
    for (name, target, truth) in [
        ("w_hat", RatioTarget::Stationary, &exact.w_hat),
        ("w", RatioTarget::Visitation { gamma: mdp.gamma() }, &exact.w),
    ] {
        let batch = sample_tabular_batch(&mdp, &policy, &mu, target, a.samples, &mut rng)?;
        let mut est = RatioEstimator::tabular(mdp.n_states(), target);
        let report = est.fit(&batch, a.steps, a.ratio_lr)?;
        let RatioModel::Table(fitted) = &est.model else { unreachable!("tabular estimator") };
        let worst = fitted.iter().zip(truth.iter()).map(|(f, t)| ((f - t) / t).abs()).fold(0.0, f64::max);
        let _ = writeln!(out, "{name}_exact = {}", fmt_vec(truth));
        let _ = writeln!(out, "{name}_fitted = {}", fmt_vec(fitted));
        let _ = writeln!(out, "{name}_max_rel_error = {worst:.6}");
        let _ = writeln!(out, "{name}_loss = {:.6e} -> {:.6e}", report.initial_loss, report.final_loss);
    }
    print!("{out}");
    Ok(())
}
