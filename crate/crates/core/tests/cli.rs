use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use itersup::mc_sup::TailEstimate;
use itersup::tail_fit::synthetic_estimate;
use itersup::weibull::WeibullTail;

fn itersup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itersup")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const BASELINE: &str = r#"
seed = 1

[simulate_tail]
x = { kind = "fbm", hurst = 0.5 }
y = { kind = "linear", slope = 1.0 }
thresholds = [1.0, 2.0]
n_reps = 20000
mesh = 0.0009765625
"#;

#[test]
fn simulate_tail_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, BASELINE).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = itersup(&["simulate-tail", "--config", s(&cfg), "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let tail_a = fs::read(a.join("tail.csv")).unwrap();
    assert_eq!(tail_a, fs::read(b.join("tail.csv")).unwrap());

    let est = TailEstimate::read_csv(tail_a.as_slice()).unwrap();
    let (p, se) = (est.p_hat[1], est.std_err[1]);
    // reflection principle, less a small grid bias
    assert!((p - 0.045_500).abs() < 3.0 * se + 0.002, "{p} ± {se}");

    let ma: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let mb: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["config_digest"], mb["config_digest"]);
    assert_eq!(ma["seed"], 1);
    assert_eq!(ma["config"]["params"]["n_reps"], 20000);

    // a flag override changes the digest
    let c = dir.path().join("c");
    assert!(itersup(&["simulate-tail", "--config", s(&cfg), "--seed", "2", "--reps", "100", "--out", s(&c)]).status.success());
    let mc: serde_json::Value = serde_json::from_slice(&fs::read(c.join("manifest.json")).unwrap()).unwrap();
    assert_ne!(ma["config_digest"], mc["config_digest"]);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, BASELINE.replace("mesh = 0.0009765625", "mesh = 0.0")).unwrap();
    let o = itersup(&["simulate-tail", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mesh"));

    fs::write(&cfg, "seed = 1\n").unwrap();
    assert_eq!(itersup(&["simulate-tail", "--config", s(&cfg)]).status.code(), Some(2));

    let o = itersup(&["asym", "iterated-fbm", "--h2", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

fn write_synthetic(path: &Path, tail: &WeibullTail, u: &[f64], n: u64, seed: u64) {
    let est = synthetic_estimate(tail, u, n, seed).unwrap();
    est.write_csv(fs::File::create(path).unwrap()).unwrap();
}

fn verdict(dir: &Path, tail_csv: &Path, pred: &WeibullTail) -> String {
    let out = dir.join(tail_csv.file_stem().unwrap());
    let (a, b, g, c) = (pred.alpha.to_string(), pred.beta.to_string(), pred.gamma.to_string(), pred.big_c.to_string());
    let o = itersup(&[
        "fit", "--tail", s(tail_csv), "--alpha", &a, "--beta", &b, "--gamma", &g, "--C", &c, "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert!(out.join("fit_summary.csv").exists());
    report["verdict"].as_str().unwrap().to_string()
}

#[test]
fn fit_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let truth = WeibullTail::new(4.0 / 3.0, 0.944_940_787_421_154_9, -2.0 / 3.0, 0.820_800_786_370_665_5).unwrap();
    let u = [2.0, 2.5, 3.0, 3.5, 4.0];

    let good = dir.path().join("good.csv");
    write_synthetic(&good, &truth, &u, 1_000_000, 1);
    assert_eq!(verdict(dir.path(), &good, &truth), "CONSISTENT");

    let wrong = WeibullTail { beta: 0.8, ..truth };
    assert_eq!(verdict(dir.path(), &good, &wrong), "INCONSISTENT");

    let sparse = dir.path().join("sparse.csv");
    write_synthetic(&sparse, &truth, &u[..2], 1_000_000, 1);
    assert_eq!(verdict(dir.path(), &sparse, &truth), "INCONCLUSIVE");
}

#[test]
fn malformed_tail_csv_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "u,p_hat\n1,nope\n").unwrap();
    let o = itersup(&["fit", "--tail", s(&bad), "--alpha", "2", "--beta", "0.5", "--gamma", "-1", "--C", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let tail = dir.path().join("t.csv");
    write_synthetic(&tail, &WeibullTail::new(2.0, 0.5, -1.0, 0.8).unwrap(), &[1.0, 2.0, 3.0], 10_000, 2);
    let root = dir.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_itersup"))
        .env("ITERSUP_OUTPUT_ROOT", &root)
        .args(["fit", "--tail", s(&tail), "--alpha", "2", "--beta", "0.5", "--gamma", "-1", "--C", "0.8"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let runs: Vec<_> = fs::read_dir(&root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    assert!(runs[0].file_name().unwrap().to_str().unwrap().starts_with("fit-"));
    assert!(runs[0].join("manifest.json").exists());
}

#[test]
fn pickands_and_long_limit_commands() {
    let o = itersup(&["pickands", "--alpha", "2"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.564_189_583_547_756_3).abs() < 1e-15);
    assert_eq!(v["is_exact"], true);

    let o = itersup(&["long-limit", "horizon", "--kind", "stat-inc", "--hx", "0.5", "--hy", "0.5", "--u", "1,2"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v[1]["horizon"].as_f64().unwrap() - 16.0).abs() < 1e-9);

    let o = itersup(&["long-limit", "strong", "--r", "0.5", "--span", "fixed", "--T", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.487_571_354_375_912_9).abs() < 1e-12);
}

#[test]
fn verify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("v.toml");
    fs::write(
        &cfg,
        r#"
seed = 4

[verify]
x = { kind = "fbm", hurst = 0.5 }
y = { kind = "fbm", hurst = 0.5 }
u_grid = [0.5, 1.0, 2.0]
n_reps = 400
mesh_x = 0.0078125
y_steps = 128
node_budget = 1000
predicted = { kind = "value", value = 0.5 }

[verify.horizon]
flavor = "stat_inc"
sigma_x = { h = 0.5 }
sigma_y = { h = 0.5 }
"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = itersup(&["verify", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("limit.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "u,p_hat,std_err,predicted");
    // h(2) = 16 needs 2048 outer nodes, over the budget
    assert_eq!(lines[3], "2,,,0.5");
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("limit.json")).unwrap()).unwrap();
    assert_eq!(report["rows"][0]["pre_asymptotic"], true);
    assert_eq!(report["rows"][2]["status"], "SKIPPED");
}

#[test]
fn quick_selftest_passes() {
    let o = itersup(&["selftest", "--quick"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 6);
}
