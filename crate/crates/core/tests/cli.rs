use natgrad::harness::{read_records, EPISODE_HEADER};
use std::path::Path;
use std::process::{Command, Output};

fn natgrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_natgrad")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn train_cartpole(out: &Path, seed: &str) -> Output {
    natgrad(&["train", "--algo", "nac", "--env", "cartpole", "--episodes", "5", "--seed", seed, "--out", out.to_str().unwrap()])
}

#[test]
fn train_writes_one_row_per_episode_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(train_cartpole(&a, "1").status.code(), Some(0));
    assert_eq!(train_cartpole(&b, "1").status.code(), Some(0));
    let csv_a = std::fs::read(a.join("episodes.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("episodes.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().next(), Some(EPISODE_HEADER));
    assert_eq!(read_records(&a.join("episodes.csv")).unwrap().len(), 5);
    for f in ["policy.txt", "final_policy.txt", "value.txt", "config.txt", "manifest.txt"] {
        assert!(a.join(f).exists(), "{f}");
    }
}

#[test]
fn missing_env_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = natgrad(&["train", "--algo", "nac", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn bad_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["train", "--algo", "nac", "--env", "pinball", "--out", out],
        vec!["train", "--algo", "sarsa", "--env", "cartpole", "--out", out],
        vec!["train", "--algo", "nac", "--env", "cartpole", "--schedule", "poly:0.9:0.6", "--out", out],
        vec!["train", "--algo", "nac", "--env", "cartpole", "--set", "no_such_key=1", "--out", out],
        vec!["oracle", "--env", "cartpole"],
        vec!["oracle", "--env", "what"],
        vec!["eval", "--params", "/definitely/not/here.txt", "--env", "cartpole"],
    ] {
        assert_eq!(natgrad(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# test run\nalgo = ac\nenv = chain:3:1\nepisodes = 7\n").unwrap();
    let out = dir.path().join("out");
    let o = natgrad(&["train", "--config", cfg.to_str().unwrap(), "--episodes", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_records(&out.join("episodes.csv")).unwrap().len(), 4);
    let saved = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(saved.contains("algo = ac") && saved.contains("episodes = 4"));
}

#[test]
fn eval_prints_summary_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(train_cartpole(&run, "2").status.code(), Some(0));
    let o = natgrad(&["eval", "--params", run.to_str().unwrap(), "--episodes", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    let line = line.trim();
    let parts: Vec<&str> = line.split(' ').collect();
    assert_eq!(parts.len(), 3, "{line}");
    assert!(parts[0].starts_with("mean="));
    assert_eq!(parts[1], "std=0.00");
    assert_eq!(parts[2], "episodes=1");
    let csv = std::fs::read_to_string(run.join("eval.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    // a policy for a different observation size is rejected
    let o = natgrad(&["eval", "--params", run.join("policy.txt").to_str().unwrap(), "--env", "mountaincar"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_sweeps_write_isolated_directories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = natgrad(&["train", "--algo", "nac", "--env", "chain:3:2", "--episodes", "3", "--seeds", "4,5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for s in [4, 5] {
        assert_eq!(read_records(&out.join(format!("seed-{s}/episodes.csv"))).unwrap().len(), 3);
    }
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seeds = 4,5"), "{manifest}");
}

#[test]
fn compare_run_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let sweep = dir.path().join("sweep");
    let out = dir.path().join("cmp");
    let o = natgrad(&["train", "--algo", "ac", "--env", "chain:3:1", "--episodes", "6", "--out", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = natgrad(&[
        "compare",
        run.to_str().unwrap(),
        run.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threshold",
        "1e9",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let combined = std::fs::read_to_string(out.join("combined.csv")).unwrap();
    let mut lines = combined.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 7);
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        // identical medians, and a single seed has a zero-width band
        assert_eq!(cols[1..4], cols[4..7]);
        assert!(cols[1] == cols[2] && cols[2] == cols[3], "{line}");
    }
    assert!(natgrad::harness::compare::is_well_formed_svg(&std::fs::read_to_string(out.join("plot.svg")).unwrap()));
    assert!(stdout(&o).contains("first_episode=never"));

    // seed sweeps are aggregated into a band
    let o = natgrad(&["train", "--algo", "ac", "--env", "chain:3:1", "--episodes", "6", "--seeds", "1,2,3", "--out", sweep.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = natgrad(&["compare", sweep.to_str().unwrap(), sweep.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    let o = natgrad(&["compare", run.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_rejects_mismatched_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, n) in [(&a, "3"), (&b, "4")] {
        let o = natgrad(&["train", "--algo", "ac", "--env", "chain:3:1", "--episodes", n, "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let o = natgrad(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_reports_exact_quantities() {
    let o = natgrad(&["oracle", "--env", "chain:1:3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let field = |name: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{name} = "))).unwrap();
        line.split(" = ").nth(1).unwrap().parse().unwrap()
    };
    assert_eq!(field("grad_norm"), 0.0);

    for env in ["chain:3:1", "chain:6:17"] {
        let o = natgrad(&["oracle", "--env", env, "--seed", "5"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        let line = text.lines().find(|l| l.starts_with("projection_residual = ")).unwrap();
        let r: f64 = line.split(" = ").nth(1).unwrap().parse().unwrap();
        assert!(r <= 1e-8, "{r}");
        for key in ["J = ", "fisher_eigenvalues = ", "x_star = ", "K2 = ", "K6 = ", "V = ", "d_visit = "] {
            assert!(text.contains(key), "{key}");
        }
    }
}

#[test]
fn ratio_test_reports_small_errors() {
    let o = natgrad(&["ratio-test", "--env", "chain:3:1", "--samples", "4000", "--steps", "1500"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in ["w_hat_max_rel_error", "w_max_rel_error"] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        let e: f64 = line.split(" = ").nth(1).unwrap().parse().unwrap();
        assert!(e < 0.1, "{name} {e}");
    }
}

#[test]
fn divergence_exits_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("boom");
    let o = natgrad(&["train", "--algo", "ac", "--env", "cartpole", "--episodes", "3", "--actor-lr", "1e9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let diag = std::fs::read_to_string(out.join("diagnostic.txt")).unwrap();
    assert!(diag.contains("divergence"), "{diag}");
    assert!(out.join("episodes.csv").exists());
}
