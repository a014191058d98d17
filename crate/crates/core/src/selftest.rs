//! The acceptance checks, shared by `itersup selftest` and the test suite.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fixtures;
use crate::long_time::{verify_long_limit, HorizonSpec, LimitEstimate, Scale, VerifyConfig};
use crate::mc_sup::{estimate_tail, sup_iterated, Mesh, SupMode, TailRequest};
use crate::paths::{fgn_autocovariance, simulate_fgn, Covariance, ProcessSpec, RngStream, SamplingMethod};
use crate::pickands::{pickands_constant, PickandsConfig};
use crate::tail_fit::{fit_beta_given_alpha, synthetic_estimate};
use crate::weibull::{
    fbm_randomized_sup, fbm_sup_unit_interval, iterated_fbm_sup, normal_upper_tail, randomized_sup_transform,
    PickandsValue, PowerLawVariance, Strictness, WeibullTail,
};

pub const CRITERIA: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Criteria cheap enough for `selftest --quick`.
pub const QUICK: [u8; 6] = [1, 2, 4, 5, 9, 10];

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub fn name(id: u8) -> &'static str {
    match id {
        1 => "pipeline identity",
        2 => "iterated-BM constant",
        3 => "Brownian baseline",
        4 => "fGn exactness",
        5 => "range identity",
        6 => "Pickands self-check",
        7 => "iterated-BM tail slope",
        8 => "long-time stationary limit",
        9 => "determinism",
        10 => "round-trip fit coverage",
        _ => "unknown",
    }
}

/// Runs one criterion; errors count as failures.
pub fn run_criterion(id: u8) -> Outcome {
    let start = Instant::now();
    let result = match id {
        1 => pipeline_identity(),
        2 => iterated_bm_constant(),
        3 => brownian_baseline(),
        4 => fgn_exactness(),
        5 => range_identity(),
        6 => pickands_self_check(),
        7 => iterated_bm_slope(),
        8 => long_time_stationary(),
        9 => determinism(),
        10 => fit_coverage(),
        _ => Err(Error::Config(format!("no criterion {id}"))),
    };
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome { id, name: name(id), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

pub fn run(quick: bool) -> Vec<Outcome> {
    let ids: &[u8] = if quick { &QUICK } else { &CRITERIA };
    ids.iter()
        .map(|&id| {
            let o = run_criterion(id);
            log::info!("{o}");
            o
        })
        .collect()
}

type Check = Result<(bool, String)>;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn pipeline_identity() -> Check {
    let start = Instant::now();
    let hs = [0.3, 0.5, 0.7, 0.9, 1.0];
    // arbitrary injected constants; rows that need them are compared as well
    let p = |h: f64| (h < 0.5).then(|| PickandsValue::estimated(1.0 + h));
    let mut worst_abg: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    let mut cases = 0;
    for &h1 in &hs {
        for &h2 in &hs {
            for t in [0.5, 1.0, 2.0] {
                let table = iterated_fbm_sup(h1, h2, t, p(h1), p(h2))?.tail;
                let unit = fbm_sup_unit_interval(h1, p(h1))?.tail;
                let composed = fbm_randomized_sup(h2, &unit, &unit, p(h2))?.tail.rescaled(t.powf(h1 * h2))?;
                worst_abg = worst_abg
                    .max(rel(table.alpha, composed.alpha))
                    .max(rel(table.beta, composed.beta))
                    .max(rel(table.gamma, composed.gamma));
                worst_c = worst_c.max(rel(table.big_c, composed.big_c));
                cases += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst_abg <= 1e-10 && worst_c <= 1e-10 && secs < 1.0,
        format!("{cases} cases, max rel err (α,β,γ) {worst_abg:.1e}, C {worst_c:.1e}, {secs:.3} s"),
    ))
}

fn iterated_bm_constant() -> Check {
    let mut out = Vec::new();
    let code = crate::cli::run(["itersup", "asym", "iterated-fbm", "--h1", ".5", "--h2", ".5", "--T", "1"], &mut out);
    if code != 0 {
        return Ok((false, format!("asym exited with {code}")));
    }
    let v: serde_json::Value = serde_json::from_slice(&out)?;
    let get = |k: &str| v.get(k).and_then(|x| x.as_f64()).unwrap_or(f64::NAN);
    let (beta, c) = (get("beta"), get("C"));
    // the other route: Corollary transform of the combined unit-interval tails
    let unit = WeibullTail::new(2.0, 0.5, -1.0, 4.0 / (2.0 * std::f64::consts::PI).sqrt())?;
    let corollary = randomized_sup_transform(&unit, &PowerLawVariance::new(1.0, 1.0)?, Strictness::Formal)?.tail;
    let beta_exact = 3.0 * 2f64.powf(-5.0 / 3.0);
    let ok = rel(beta, beta_exact) < 1e-12
        && (c - fixtures::ITERATED_BM_C).abs() <= 1e-4
        && (corollary.big_c - c).abs() <= 1e-4
        && rel(corollary.beta, beta) < 1e-12;
    Ok((ok, format!("β = {beta:.10} (exact {beta_exact:.10}), C = {c:.7}, corollary route C = {:.7}", corollary.big_c)))
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

fn brownian_baseline() -> Check {
    let start = Instant::now();
    let req = TailRequest::new(1.0, vec![2.0], 100_000, Mesh::uniform(2f64.powi(-12)), 1);
    let est = single_thread(|| estimate_tail(&ProcessSpec::brownian(), &ProcessSpec::identity(), &req))??;
    let secs = start.elapsed().as_secs_f64();
    let exact = 2.0 * normal_upper_tail(2.0);
    let (p, se) = (est.p_hat[0], est.std_err[0]);
    Ok((
        (p - exact).abs() <= 3.0 * se && secs < 120.0,
        format!("p̂ = {p:.6} ± {se:.2e} vs 2Ψ(2) = {exact:.6} ({:.2} SE), single-threaded {secs:.1} s", (p - exact) / se),
    ))
}

/// Exact standard error of `(1/m) Σ x_i x_{i+1}` for a zero-mean stationary
/// Gaussian sequence (Isserlis).
fn lag_one_se(gamma: &dyn Fn(usize) -> f64, n: usize) -> f64 {
    let m = (n - 1) as f64;
    let g = |d: i64| gamma(d.unsigned_abs() as usize);
    let mut var = 0.0;
    for d in -(n as i64 - 2)..=(n as i64 - 2) {
        var += (m - d.abs() as f64) * (g(d).powi(2) + g(d + 1) * g(d - 1));
    }
    (var / (m * m)).sqrt()
}

fn fgn_exactness() -> Check {
    let n = 1 << 14;
    let s = simulate_fgn(0.7, n, 1.0, &mut RngStream::new(1, 0).rng())?;
    let x = &s.increments;
    let lag1 = x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64;
    let target = fgn_autocovariance(0.7, 1.0, 1);
    let se = lag_one_se(&|k| fgn_autocovariance(0.7, 1.0, k), n);
    Ok((
        s.method == SamplingMethod::CirculantEmbedding && (lag1 - target).abs() <= 3.0 * se,
        format!("γ̂(1) = {lag1:.6} vs {target:.6} (SE {se:.4}), method {:?}", s.method),
    ))
}

fn range_identity() -> Check {
    let bm = ProcessSpec::brownian();
    let mut medians = Vec::new();
    for k in 8..=12 {
        let mesh = Mesh::uniform(2f64.powi(-k));
        let mut d = Vec::with_capacity(100);
        for i in 0..100 {
            let a = sup_iterated(&bm, &bm, 1.0, mesh, &mut RngStream::new(5, i).rng(), SupMode::RangeReduction)?;
            let b = sup_iterated(&bm, &bm, 1.0, mesh, &mut RngStream::new(5, i).rng(), SupMode::DirectComposition)?;
            d.push((a.value - b.value).abs());
        }
        d.sort_by(f64::total_cmp);
        medians.push(0.5 * (d[49] + d[50]));
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let last = *medians.last().unwrap_or(&f64::NAN);
    let list: Vec<String> = medians.iter().map(|m| format!("{m:.4}")).collect();
    Ok((decreasing && last < 0.01, format!("median |RANGE - DIRECT| over mesh 2^-8..2^-12: {}", list.join(", "))))
}

fn pickands_self_check() -> Check {
    let start = Instant::now();
    let cfg = PickandsConfig { force_estimate: true, seed: 1, ..PickandsConfig::default() };
    let h1 = pickands_constant(1.0, &cfg)?;
    let h2 = pickands_constant(2.0, &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let target2 = 1.0 / std::f64::consts::PI.sqrt();
    let ok = (0.9..=1.1).contains(&h1.value) && rel(h2.value, target2) <= 0.1 && secs < 600.0;
    Ok((
        ok,
        format!(
            "H_1 ≈ {:.4} ± {:.4}, H_2 ≈ {:.4} ± {:.4} (1/√π = {target2:.4}), {secs:.0} s",
            h1.value, h1.std_err, h2.value, h2.std_err
        ),
    ))
}

fn iterated_bm_slope() -> Check {
    let table = iterated_fbm_sup(0.5, 0.5, 1.0, None, None)?.tail;
    let bm = ProcessSpec::brownian();
    let req = TailRequest::new(1.0, vec![1.5, 2.0, 2.5, 3.0], 1_000_000, Mesh::uniform(2f64.powi(-8)), 1);
    let est = estimate_tail(&bm, &bm, &req)?;
    let fit = fit_beta_given_alpha(&est, table.alpha, table.gamma, Some(table.big_c))?;
    Ok((
        (0.75..=1.05).contains(&fit.beta_hat),
        format!("β̂ = {:.4} ± {:.4} (table β = {:.4}), band [0.75, 1.05]", fit.beta_hat, fit.std_err, table.beta),
    ))
}

fn long_time_stationary() -> Check {
    let (c, alpha) = (0.5, 2.0);
    let x = ProcessSpec::Stationary { covariance: Covariance::PowerExponential { c, alpha } };
    let spec = HorizonSpec::StationaryGaussY {
        big_c: c,
        alpha,
        pickands: 1.0 / std::f64::consts::PI.sqrt(),
        sigma_y: Scale::brownian(),
    };
    let cfg = VerifyConfig { n_reps: 20_000, mesh_x: 0.05, y_steps: 1 << 14, seed: 1, node_budget: 1 << 22 };
    let predicted = LimitEstimate { value: fixtures::BM_RANGE_LAPLACE_COMPLEMENT, std_err: 0.0, n_reps: 0 };
    let report = verify_long_limit(&x, &ProcessSpec::brownian(), &spec, &[2.0], &cfg, predicted)?;
    let row = &report.rows[0];
    let (p, se) = (row.p_hat.unwrap_or(f64::NAN), row.std_err.unwrap_or(f64::NAN));
    Ok((
        (p - predicted.value).abs() <= 3.0 * se,
        format!(
            "P̂(u=2, h={:.0}) = {p:.4} ± {se:.4} vs 1 - E e^-T = {:.4} ({:.1} SE)",
            row.horizon,
            predicted.value,
            (p - predicted.value) / se
        ),
    ))
}

fn fit_coverage() -> Check {
    let truth = WeibullTail::new(4.0 / 3.0, 0.9449, -2.0 / 3.0, 0.8208)?;
    let u = [2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0];
    let mut covered = 0;
    for seed in 0..100 {
        let est = synthetic_estimate(&truth, &u, 1_000_000, seed)?;
        let fit = fit_beta_given_alpha(&est, truth.alpha, truth.gamma, Some(truth.big_c))?;
        covered += fit.ci.contains(truth.beta) as usize;
    }
    Ok((covered >= 90, format!("{covered}/100 intervals cover β = {}", truth.beta)))
}

fn scratch_dir(tag: &str) -> Result<PathBuf> {
    let dir = std::env::temp_dir().join(format!("itersup-selftest-{}-{tag}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

const DET_SIMULATE: &str = r#"
seed = 7

[simulate_tail]
x = { kind = "fbm", hurst = 0.7 }
y = { kind = "fbm", hurst = 0.5 }
horizon = 1.0
thresholds = [0.5, 1.0, 1.5]
n_reps = 2000
mesh = 0.0078125
"#;

const DET_SPLITTING: &str = r#"
seed = 7

[simulate_tail]
x = { kind = "fbm", hurst = 0.5 }
y = { kind = "linear", slope = 1.0 }
horizon = 1.0
thresholds = [1.0, 2.0]
n_reps = 200
mesh = 0.00390625
method = "splitting"
"#;

const DET_VERIFY: &str = r#"
seed = 7

[verify]
x = { kind = "fbm", hurst = 0.5 }
y = { kind = "fbm", hurst = 0.5 }
u_grid = [0.5, 1.0]
n_reps = 500
mesh_x = 0.0078125
y_steps = 256
node_budget = 1000000
predicted = { kind = "value", value = 0.5 }

[verify.horizon]
flavor = "stat_inc"
sigma_x = { d = 1.0, h = 0.5 }
sigma_y = { d = 1.0, h = 0.5 }
"#;

/// Runs a command at several thread counts and compares the named output
/// files (or stdout when `files` is empty) byte for byte.
fn same_outputs(base: &Path, tag: &str, args: &[&str], files: &[&str]) -> Result<bool> {
    let mut seen: Option<Vec<Vec<u8>>> = None;
    for threads in [1, 4, 8] {
        let out_dir = base.join(format!("{tag}-{threads}"));
        let mut argv: Vec<String> = vec!["itersup".into(), "--threads".into(), threads.to_string()];
        argv.extend(args.iter().map(|s| s.to_string()));
        if !files.is_empty() {
            argv.push("--out".into());
            argv.push(out_dir.display().to_string());
        }
        let mut stdout = Vec::new();
        let code = crate::cli::run(argv, &mut stdout);
        if code != 0 {
            return Err(Error::Config(format!("{tag} exited with {code}")));
        }
        let blobs = if files.is_empty() {
            vec![stdout]
        } else {
            files.iter().map(|f| std::fs::read(out_dir.join(f))).collect::<std::io::Result<_>>()?
        };
        match &seen {
            None => seen = Some(blobs),
            Some(prev) if *prev != blobs => return Ok(false),
            Some(_) => {}
        }
    }
    Ok(true)
}

fn determinism() -> Check {
    let base = scratch_dir("det")?;
    let write = |name: &str, text: &str| -> Result<String> {
        let p = base.join(name);
        std::fs::write(&p, text)?;
        Ok(p.display().to_string())
    };
    let sim = write("sim.toml", DET_SIMULATE)?;
    let split = write("split.toml", DET_SPLITTING)?;
    let verify = write("verify.toml", DET_VERIFY)?;
    let tail_csv = base.join("fit-input.csv");
    let synthetic = synthetic_estimate(&WeibullTail::new(2.0, 0.5, -1.0, 0.8)?, &[1.5, 2.0, 2.5, 3.0], 100_000, 3)?;
    synthetic.write_csv(std::fs::File::create(&tail_csv)?)?;
    let tail_arg = tail_csv.display().to_string();

    let runs: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        ("asym", vec!["asym", "iterated-fbm", "--h1", "0.7", "--h2", "0.6", "--T", "2"], vec![]),
        ("simulate", vec!["simulate-tail", "--config", &sim], vec!["tail.csv"]),
        ("splitting", vec!["simulate-tail", "--config", &split], vec!["tail.csv"]),
        ("fit", vec!["fit", "--tail", &tail_arg, "--alpha", "2", "--beta", "0.5", "--gamma", "-1", "--C", "0.8"], vec!["fit.json"]),
        ("pickands", vec!["pickands", "--alpha", "1.5", "--estimate", "--horizon", "5", "--reps", "300", "--mesh", "0.03125", "--seed", "2"], vec!["pickands.json"]),
        ("limit-l", vec!["long-limit", "l", "--alpha-x", "1", "--alpha-y", "1", "--reps", "500", "--mesh", "0.0078125", "--seed", "2"], vec!["limit.json"]),
        ("limit-strong", vec!["long-limit", "strong", "--r", "0.5", "--span", "bm-range", "--reps", "500", "--mesh", "0.0078125", "--seed", "2"], vec!["limit.json"]),
        ("verify", vec!["verify", "--config", &verify], vec!["limit.csv", "limit.json"]),
    ];
    let mut failed = Vec::new();
    for (tag, args, files) in &runs {
        if !same_outputs(&base, tag, args, files)? {
            failed.push(*tag);
        }
    }
    let _ = std::fs::remove_dir_all(&base);
    Ok((
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} commands byte-identical at 1, 4, 8 threads", runs.len())
        } else {
            format!("outputs differ for {}", failed.join(", "))
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_one_se_for_white_noise() {
        // iid unit variance: Var = 1/(n-1)
        let se = lag_one_se(&|k| if k == 0 { 1.0 } else { 0.0 }, 101);
        assert!((se - 0.1).abs() < 1e-12);
    }

    #[test]
    fn outcome_line() {
        let o = Outcome { id: 3, name: name(3), passed: true, detail: "ok".into(), seconds: 1.25 };
        assert_eq!(o.to_string(), "[PASS] criterion  3 Brownian baseline: ok (1.2 s)");
    }
}
