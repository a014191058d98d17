//! The `itersup` command line: argument parsing, config resolution, output
//! files and run manifests.
//!
//! [`run`] is the whole program minus logger setup, so tests can drive it
//! in-process and capture stdout.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::long_time::{
    horizon, limit_l, limit_strong_dependence, limit_strong_dependence_mc, verify_long_limit, HorizonSpec,
    LimitEstimate, McConfig, Scale, SpanLaw, VerifyConfig,
};
use crate::mc_sup::{
    estimate_tail_splitting, sample_sups, tail_from_sups, Mesh, SplittingRequest, TailEstimate, TailRequest,
};
use crate::paths::{Covariance, ProcessSpec, RngStream, VarianceFn};
use crate::pickands::{exact_pickands, pickands_constant, PickandsConfig, PickandsMethod};
use crate::tail_fit::compare_prediction;
use crate::weibull::{
    fbm_randomized_sup, fbm_sup_unit_interval, iterated_fbm_sup, randomized_sup_transform,
    stationary_sup_asymptotic, PickandsValue, PowerLawVariance, Provenance, Strictness, TailParams, WeibullTail,
};

/// Overrides the default output root (`./itersup-out`).
pub const OUTPUT_ROOT_ENV: &str = "ITERSUP_OUTPUT_ROOT";

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "itersup", version, about = "Supremum tails of iterated Gaussian processes")]
struct Cli {
    /// Worker threads; defaults to the config value, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form tail parameters.
    #[command(subcommand)]
    Asym(AsymCommand),
    /// Crude or splitting Monte Carlo estimate of the supremum tail.
    SimulateTail(SimulateArgs),
    /// Compare a tail estimate with a predicted Weibull tail.
    Fit(FitArgs),
    /// Pickands constant, exact or estimated.
    Pickands(PickandsArgs),
    /// Long-time limits and horizon functions.
    #[command(subcommand)]
    LongLimit(LongCommand),
    /// Empirical approach to a long-time limit along a threshold grid.
    Verify(VerifyArgs),
    /// Run the acceptance checks.
    Selftest {
        /// Only the fast checks.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Subcommand)]
enum AsymCommand {
    /// Randomized supremum of a stationary-increments process.
    Corollary {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long = "C")]
        big_c: f64,
        #[arg(long = "D", default_value_t = 1.0)]
        big_d: f64,
        #[arg(long)]
        alpha_inf: f64,
        /// Reject variance laws outside the asymptotic regime.
        #[arg(long)]
        strict: bool,
    },
    /// fBm over the range of a process with the given extreme tails.
    Fbm {
        #[arg(long)]
        h: f64,
        /// Tail of the supremum, as `alpha,beta,gamma,C`.
        #[arg(long, value_parser = parse_tail)]
        sup_tail: WeibullTail,
        /// Tail of minus the infimum; defaults to the supremum tail.
        #[arg(long, value_parser = parse_tail)]
        inf_tail: Option<WeibullTail>,
        #[arg(long)]
        pickands: Option<f64>,
        #[arg(long)]
        estimate_pickands: bool,
    },
    /// Supremum of fBm on the unit interval.
    FbmUnit {
        #[arg(long)]
        h: f64,
        #[arg(long)]
        pickands: Option<f64>,
        #[arg(long)]
        estimate_pickands: bool,
    },
    /// Iterated fBm `B_{h2}(B_{h1}(s))` on `[0, T]`.
    IteratedFbm {
        #[arg(long)]
        h1: f64,
        #[arg(long)]
        h2: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        big_t: f64,
        #[arg(long)]
        pickands_h1: Option<f64>,
        #[arg(long)]
        pickands_h2: Option<f64>,
        /// Estimate missing constants by simulation (slow).
        #[arg(long)]
        estimate_pickands: bool,
    },
    /// Stationary outer process with a random span of mean `--mean-span`.
    Stationary {
        #[arg(long)]
        mean_span: f64,
        #[arg(long = "C")]
        big_c: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        pickands: Option<f64>,
        /// Also evaluate the asymptotic at these thresholds.
        #[arg(long, value_delimiter = ',')]
        u: Vec<f64>,
    },
}

fn parse_tail(s: &str) -> std::result::Result<WeibullTail, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != 4 {
        return Err(format!("expected alpha,beta,gamma,C, got {} values", v.len()));
    }
    WeibullTail::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
    /// Sets both meshes.
    #[arg(long)]
    mesh: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every replication's supremum to `sups.csv` (crude only).
    #[arg(long)]
    dump_sups: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// A `tail.csv` written by `simulate-tail`.
    #[arg(long)]
    tail: PathBuf,
    /// JSON file with `alpha, beta, gamma, C` (the output of `asym`).
    #[arg(long, conflicts_with_all = ["alpha", "beta", "gamma", "big_c"])]
    prediction: Option<PathBuf>,
    #[arg(long, requires_all = ["beta", "gamma", "big_c"])]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long = "C")]
    big_c: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PickandsArgs {
    #[arg(long)]
    alpha: f64,
    /// Simulate even when the value is known exactly.
    #[arg(long)]
    estimate: bool,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    mesh: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    ChangeOfMeasure,
    Crude,
}

#[derive(Debug, Args, Clone)]
struct McArgs {
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long, default_value_t = 1.0 / 1024.0)]
    mesh: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum LongCommand {
    /// `P(sup of B_{αx/2} over the range of B_{αy/2} on [0,1] > threshold)`.
    L {
        #[arg(long)]
        alpha_x: f64,
        #[arg(long)]
        alpha_y: f64,
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// `1 - E exp(-T exp(-r + √(2r) N))`.
    Strong {
        #[arg(long)]
        r: f64,
        #[arg(long, value_enum, default_value = "bm-range")]
        span: SpanArg,
        /// Hurst index for `fbm-range`.
        #[arg(long, default_value_t = 0.5)]
        hurst: f64,
        /// Span for `fixed`, range horizon otherwise.
        #[arg(long = "T", default_value_t = 1.0)]
        big_t: f64,
        /// Plain Monte Carlo in both factors instead of quadrature.
        #[arg(long)]
        plain_mc: bool,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Horizon function `h(u)`.
    Horizon {
        #[arg(long, value_enum)]
        kind: HorizonKind,
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        dx: f64,
        #[arg(long)]
        hx: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        dy: f64,
        #[arg(long)]
        hy: Option<f64>,
        #[arg(long = "C")]
        big_c: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        pickands: Option<f64>,
        #[arg(long)]
        lambda_y: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpanArg {
    BmRange,
    FbmRange,
    Fixed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HorizonKind {
    StatInc,
    StationaryGaussY,
    StationarySsY,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A process as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessConfig {
    Fbm { hurst: f64 },
    /// Stationary increments with `σ²(t) = d t^{alpha_inf}`.
    PowerVariance { d: f64, alpha_inf: f64 },
    /// Stationary with `r(t) = exp(-c |t|^alpha)`.
    PowerExponential { c: f64, alpha: f64 },
    Linear { slope: f64 },
}

impl ProcessConfig {
    pub fn to_spec(&self) -> Result<ProcessSpec> {
        let spec = match *self {
            ProcessConfig::Fbm { hurst } => ProcessSpec::Fbm { hurst },
            ProcessConfig::PowerVariance { d, alpha_inf } => ProcessSpec::StationaryIncrements {
                variance: VarianceFn::PowerLaw(PowerLawVariance::new(d, alpha_inf).map_err(config_err)?),
            },
            ProcessConfig::PowerExponential { c, alpha } => {
                ProcessSpec::Stationary { covariance: Covariance::PowerExponential { c, alpha } }
            }
            ProcessConfig::Linear { slope } => ProcessSpec::Linear { slope },
        };
        spec.validate().map_err(config_err)?;
        Ok(spec)
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    #[default]
    Crude,
    Splitting,
}

/// `[simulate_tail]` section; every field but `x`, `y` and `thresholds` has
/// a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateTailSection {
    pub x: ProcessConfig,
    pub y: ProcessConfig,
    #[serde(default = "one")]
    pub horizon: f64,
    /// Ascending; for splitting these are the levels.
    pub thresholds: Vec<f64>,
    /// Replications (crude) or particles per level (splitting).
    #[serde(default = "default_reps")]
    pub n_reps: u64,
    /// Sets both meshes unless `mesh_x` / `mesh_y` are given.
    #[serde(default = "default_mesh")]
    pub mesh: f64,
    pub mesh_x: Option<f64>,
    pub mesh_y: Option<f64>,
    #[serde(default)]
    pub method: TailMethod,
    #[serde(default = "default_meta_reps")]
    pub meta_reps: usize,
    pub shared_grid_half_width: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn default_reps() -> u64 {
    10_000
}
fn default_mesh() -> f64 {
    1.0 / 1024.0
}
fn default_meta_reps() -> usize {
    crate::mc_sup::MIN_META_REPS
}
fn default_y_steps() -> usize {
    4096
}
fn default_node_budget() -> u64 {
    1 << 24
}

/// `σ(t) = √d t^h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerScale {
    #[serde(default = "one")]
    pub d: f64,
    pub h: f64,
}

impl From<PowerScale> for Scale {
    fn from(p: PowerScale) -> Self {
        Scale::Power { d: p.d, h: p.h }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "snake_case")]
pub enum HorizonConfig {
    StatInc { sigma_x: PowerScale, sigma_y: PowerScale },
    /// `pickands` defaults to the exact value when one is known.
    StationaryGaussY { c: f64, alpha: f64, pickands: Option<f64>, sigma_y: PowerScale },
    StationarySsY { c: f64, alpha: f64, pickands: Option<f64>, lambda_y: f64 },
}

fn pickands_or_exact(p: Option<f64>, alpha: f64) -> Result<f64> {
    p.or_else(|| exact_pickands(alpha))
        .ok_or_else(|| Error::Config(format!("no exact Pickands constant for alpha = {alpha}; set `pickands`")))
}

impl HorizonConfig {
    pub fn to_spec(&self) -> Result<HorizonSpec> {
        Ok(match *self {
            HorizonConfig::StatInc { sigma_x, sigma_y } => {
                HorizonSpec::StatInc { sigma_x: sigma_x.into(), sigma_y: sigma_y.into() }
            }
            HorizonConfig::StationaryGaussY { c, alpha, pickands, sigma_y } => HorizonSpec::StationaryGaussY {
                big_c: c,
                alpha,
                pickands: pickands_or_exact(pickands, alpha)?,
                sigma_y: sigma_y.into(),
            },
            HorizonConfig::StationarySsY { c, alpha, pickands, lambda_y } => HorizonSpec::StationarySsY {
                big_c: c,
                alpha,
                pickands: pickands_or_exact(pickands, alpha)?,
                lambda_y,
            },
        })
    }
}

/// Where the predicted limit comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictedConfig {
    Value {
        value: f64,
        #[serde(default)]
        std_err: f64,
    },
    /// `L(alpha_x, alpha_y)` by simulation.
    LimitL { alpha_x: f64, alpha_y: f64, n_reps: u64, mesh: f64 },
    /// Strong-dependence limit with the range of fBm(`hurst`) on `[0,1]` as span.
    Strong {
        r: f64,
        #[serde(default = "half")]
        hurst: f64,
        n_reps: u64,
        mesh: f64,
    },
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub x: ProcessConfig,
    pub y: ProcessConfig,
    pub u_grid: Vec<f64>,
    #[serde(default = "default_reps")]
    pub n_reps: u64,
    pub mesh_x: f64,
    /// Inner grid steps on `[0, h(u)]`.
    #[serde(default = "default_y_steps")]
    pub y_steps: usize,
    #[serde(default = "default_node_budget")]
    pub node_budget: u64,
    pub horizon: HorizonConfig,
    pub predicted: PredictedConfig,
}

/// A config file: global keys plus one flat section per command.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub simulate_tail: Option<SimulateTailSection>,
    pub verify: Option<VerifySection>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// What a run depends on; its digest goes into the manifest.
#[derive(Debug, Clone, Serialize)]
struct Resolved<T: Serialize> {
    command: &'static str,
    seed: u64,
    params: T,
}

impl<T: Serialize> Resolved<T> {
    fn digest(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Written next to every result; with the same `config` and `seed` the
/// numeric outputs are reproduced bit for bit at any thread count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the resolved config as compact JSON.
    pub config_digest: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub threads: usize,
    pub module_versions: BTreeMap<String, String>,
    pub config: serde_json::Value,
}

const MODULES: [&str; 7] = ["weibull", "paths", "mc_sup", "pickands", "tail_fit", "long_time", "cli"];

impl RunManifest {
    fn new<T: Serialize>(resolved: &Resolved<T>) -> Result<Self> {
        Ok(Self {
            command: resolved.command.to_string(),
            seed: resolved.seed,
            config_digest: resolved.digest()?,
            tool_version: VERSION.to_string(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            threads: rayon::current_num_threads(),
            module_versions: MODULES.iter().map(|m| (m.to_string(), VERSION.to_string())).collect(),
            config: serde_json::to_value(resolved)?,
        })
    }
}

fn output_dir<T: Serialize>(explicit: Option<PathBuf>, resolved: &Resolved<T>) -> Result<PathBuf> {
    let dir = match explicit {
        Some(d) => d,
        None => {
            let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| "itersup-out".into());
            root.join(format!("{}-{}", resolved.command, &resolved.digest()?[..12]))
        }
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_outputs<T: Serialize>(dir: &Path, resolved: &Resolved<T>) -> Result<()> {
    write_json(&dir.join("manifest.json"), &RunManifest::new(resolved)?)
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code: 0 on success, 2 for usage and config errors, 1
/// for anything else.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    2
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    // the config may carry a thread count, so peek at it first
    let config_threads = match &cli.command {
        Command::SimulateTail(SimulateArgs { config, .. }) | Command::Verify(VerifyArgs { config, .. }) => {
            ConfigFile::load(config)?.threads
        }
        _ => None,
    };
    match cli.threads.or(config_threads) {
        Some(0) => Err(Error::Config("thread count must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            // stdout is not Send; collect and forward
            let mut buf = Vec::new();
            let code = pool.install(|| dispatch(cli.command, &mut buf));
            out.write_all(&buf)?;
            code
        }
        None => dispatch(cli.command, out),
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Asym(a) => cmd_asym(a, out),
        Command::SimulateTail(a) => cmd_simulate_tail(a, out),
        Command::Fit(a) => cmd_fit(a, out),
        Command::Pickands(a) => cmd_pickands(a, out),
        Command::LongLimit(a) => cmd_long_limit(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Selftest { quick } => cmd_selftest(quick, out),
    }
}

/// A supplied constant, else the exact one, else (if allowed) an estimate.
fn resolve_pickands(supplied: Option<f64>, hurst: f64, estimate: bool) -> Result<Option<PickandsValue>> {
    if let Some(v) = supplied {
        return Ok(Some(PickandsValue::exact(v)));
    }
    if hurst >= 0.5 {
        return Ok(None);
    }
    let alpha = 2.0 * hurst;
    if let Some(v) = exact_pickands(alpha) {
        return Ok(Some(PickandsValue::exact(v)));
    }
    if estimate {
        log::info!("estimating H_{alpha} by simulation");
        let est = pickands_constant(alpha, &PickandsConfig::default())?;
        return Ok(Some(PickandsValue::estimated(est.value)));
    }
    Ok(None)
}

#[derive(Serialize)]
struct StationaryOutput {
    #[serde(flatten)]
    params: TailParams,
    values: Vec<ThresholdValue>,
}

#[derive(Serialize)]
struct ThresholdValue {
    u: f64,
    value: f64,
}

fn cmd_asym(cmd: AsymCommand, out: &mut dyn Write) -> Result<i32> {
    let params = match cmd {
        AsymCommand::Corollary { alpha, beta, gamma, big_c, big_d, alpha_inf, strict } => {
            let t = WeibullTail::new(alpha, beta, gamma, big_c)?;
            let v = PowerLawVariance::new(big_d, alpha_inf)?;
            let strictness = if strict { Strictness::Strict } else { Strictness::Formal };
            randomized_sup_transform(&t, &v, strictness)?
        }
        AsymCommand::Fbm { h, sup_tail, inf_tail, pickands, estimate_pickands } => {
            let p = resolve_pickands(pickands, h, estimate_pickands)?;
            fbm_randomized_sup(h, &sup_tail, &inf_tail.unwrap_or(sup_tail), p)?
        }
        AsymCommand::FbmUnit { h, pickands, estimate_pickands } => {
            fbm_sup_unit_interval(h, resolve_pickands(pickands, h, estimate_pickands)?)?
        }
        AsymCommand::IteratedFbm { h1, h2, big_t, pickands_h1, pickands_h2, estimate_pickands } => {
            let p1 = resolve_pickands(pickands_h1, h1, estimate_pickands)?;
            let p2 = resolve_pickands(pickands_h2, h2, estimate_pickands)?;
            iterated_fbm_sup(h1, h2, big_t, p1, p2)?
        }
        AsymCommand::Stationary { mean_span, big_c, alpha, pickands, u } => {
            let h = pickands_or_exact(pickands, alpha)?;
            let values = u
                .iter()
                .map(|&u| Ok(ThresholdValue { u, value: stationary_sup_asymptotic(mean_span, big_c, alpha, h, u)? }))
                .collect::<Result<Vec<_>>>()?;
            // E(T) C^{1/α} H u^{2/α} Ψ(u) ~ W(2, 1/2, 2/α - 1, E(T) C^{1/α} H / √(2π))
            let c = mean_span * big_c.powf(1.0 / alpha) * h / (2.0 * std::f64::consts::PI).sqrt();
            let mut provenance = Provenance::new("stationary");
            provenance.estimated_constant = pickands.is_some() && exact_pickands(alpha).is_none();
            if !(mean_span > 0.0) {
                return Err(Error::Domain("mean span must be positive for a Weibull form".into()));
            }
            let params = TailParams { tail: WeibullTail::new(2.0, 0.5, 2.0 / alpha - 1.0, c)?, provenance };
            print_json(out, &StationaryOutput { params, values })?;
            return Ok(0);
        }
    };
    print_json(out, &params)?;
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
struct SimulateParams {
    x: ProcessConfig,
    y: ProcessConfig,
    horizon: f64,
    thresholds: Vec<f64>,
    n_reps: u64,
    mesh: Mesh,
    method: TailMethod,
    meta_reps: usize,
    shared_grid_half_width: Option<f64>,
}

fn check_mesh(name: &str, m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {m}")))
    }
}

fn cmd_simulate_tail(a: SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let file = ConfigFile::load(&a.config)?;
    let s = file
        .simulate_tail
        .ok_or_else(|| Error::Config(format!("{} has no [simulate_tail] section", a.config.display())))?;
    let base_mesh = a.mesh.unwrap_or(s.mesh);
    let mesh = if a.mesh.is_some() {
        Mesh::uniform(base_mesh)
    } else {
        Mesh { x: s.mesh_x.unwrap_or(base_mesh), y: s.mesh_y.unwrap_or(base_mesh) }
    };
    check_mesh("mesh_x", mesh.x)?;
    check_mesh("mesh_y", mesh.y)?;
    let resolved = Resolved {
        command: "simulate-tail",
        seed: a.seed.unwrap_or(file.seed),
        params: SimulateParams {
            x: s.x,
            y: s.y,
            horizon: s.horizon,
            thresholds: s.thresholds,
            n_reps: a.reps.unwrap_or(s.n_reps),
            mesh,
            method: s.method,
            meta_reps: s.meta_reps,
            shared_grid_half_width: s.shared_grid_half_width,
        },
    };
    let p = &resolved.params;
    let (x, y) = (p.x.to_spec()?, p.y.to_spec()?);
    let dir = output_dir(a.out.or(file.out_dir), &resolved)?;

    let est = match p.method {
        TailMethod::Crude => {
            let req = TailRequest {
                shared_grid_half_width: p.shared_grid_half_width,
                ..TailRequest::new(p.horizon, p.thresholds.clone(), p.n_reps, p.mesh, resolved.seed)
            };
            req.validate().map_err(config_err)?;
            let sups = sample_sups(&x, &y, &req)?;
            if a.dump_sups {
                let mut w = BufWriter::new(File::create(dir.join("sups.csv"))?);
                writeln!(w, "rep,sup")?;
                for (i, v) in sups.iter().enumerate() {
                    writeln!(w, "{i},{v}")?;
                }
                w.flush()?;
            }
            tail_from_sups(&sups, &req.thresholds, req.mesh.x)
        }
        TailMethod::Splitting => {
            if a.dump_sups {
                log::warn!("--dump-sups has no effect with splitting");
            }
            let req = SplittingRequest {
                horizon: p.horizon,
                levels: p.thresholds.clone(),
                n_per_level: p.n_reps as usize,
                mesh: p.mesh,
                seed: resolved.seed,
                meta_reps: p.meta_reps,
            };
            estimate_tail_splitting(&x, &y, &req)?
        }
    };
    est.write_csv(BufWriter::new(File::create(dir.join("tail.csv"))?))?;
    write_outputs(&dir, &resolved)?;
    for ((u, p), se) in est.thresholds.iter().zip(&est.p_hat).zip(&est.std_err) {
        writeln!(out, "u={u} p_hat={p:e} std_err={se:e}")?;
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
struct FitParams {
    tail_sha256: String,
    predicted: WeibullTail,
}

fn cmd_fit(a: FitArgs, out: &mut dyn Write) -> Result<i32> {
    let bytes = fs::read(&a.tail)?;
    let est = TailEstimate::read_csv(bytes.as_slice())?;
    let predicted = match (&a.prediction, a.alpha, a.beta, a.gamma, a.big_c) {
        (Some(path), ..) => {
            let v: serde_json::Value = serde_json::from_slice(&fs::read(path)?)?;
            let get = |k: &str| {
                v.get(k)
                    .and_then(|x| x.as_f64())
                    .ok_or_else(|| Error::Parse(format!("{}: missing number `{k}`", path.display())))
            };
            WeibullTail::new(get("alpha")?, get("beta")?, get("gamma")?, get("C")?)?
        }
        (None, Some(al), Some(b), Some(g), Some(c)) => WeibullTail::new(al, b, g, c)?,
        _ => return Err(Error::Config("give --prediction or all of --alpha --beta --gamma --C".into())),
    };
    let resolved = Resolved {
        command: "fit",
        seed: 0,
        params: FitParams { tail_sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(), predicted },
    };
    let report = compare_prediction(&est, &predicted)?;
    let dir = output_dir(a.out, &resolved)?;
    write_json(&dir.join("fit.json"), &report)?;
    let mut w = BufWriter::new(File::create(dir.join("fit_summary.csv"))?);
    report.write_summary_csv(&mut w, true)?;
    w.flush()?;
    write_outputs(&dir, &resolved)?;
    writeln!(out, "verdict: {}", serde_json::to_value(report.verdict)?.as_str().unwrap_or("?"))?;
    if let Some(b) = report.beta_hat {
        writeln!(out, "beta_hat: {} [{}, {}]", b.beta_hat, b.ci.lo, b.ci.hi)?;
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
struct PickandsParams {
    alpha: f64,
    config: PickandsConfig,
}

fn cmd_pickands(a: PickandsArgs, out: &mut dyn Write) -> Result<i32> {
    let d = PickandsConfig::default();
    let cfg = PickandsConfig {
        horizon: a.horizon.unwrap_or(d.horizon),
        n_reps: a.reps.unwrap_or(d.n_reps),
        mesh: a.mesh.unwrap_or(d.mesh),
        seed: a.seed.unwrap_or(d.seed),
        method: match a.method {
            Some(MethodArg::Crude) => PickandsMethod::Crude,
            Some(MethodArg::ChangeOfMeasure) | None => PickandsMethod::ChangeOfMeasure,
        },
        force_estimate: a.estimate,
    };
    check_mesh("mesh", cfg.mesh)?;
    let est = pickands_constant(a.alpha, &cfg)?;
    print_json(out, &est)?;
    if let Some(dir) = a.out {
        let resolved = Resolved { command: "pickands", seed: cfg.seed, params: PickandsParams { alpha: a.alpha, config: cfg } };
        let dir = output_dir(Some(dir), &resolved)?;
        write_json(&dir.join("pickands.json"), &est)?;
        write_outputs(&dir, &resolved)?;
    }
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "limit", rename_all = "snake_case")]
enum LimitParams {
    L { alpha_x: f64, alpha_y: f64, threshold: f64, n_reps: u64, mesh: f64 },
    Strong { r: f64, span: String, hurst: f64, big_t: f64, plain_mc: bool, n_reps: u64, mesh: f64 },
}

#[derive(Serialize)]
struct HorizonRow {
    u: f64,
    horizon: f64,
}

fn cmd_long_limit(cmd: LongCommand, out: &mut dyn Write) -> Result<i32> {
    let (resolved, est, dir) = match cmd {
        LongCommand::L { alpha_x, alpha_y, threshold, mc, out: dir } => {
            check_mesh("mesh", mc.mesh)?;
            let cfg = McConfig { n_reps: mc.reps, mesh: Mesh::uniform(mc.mesh), seed: mc.seed };
            let est = limit_l(alpha_x, alpha_y, threshold, &cfg)?;
            let params = LimitParams::L { alpha_x, alpha_y, threshold, n_reps: mc.reps, mesh: mc.mesh };
            (Resolved { command: "long-limit", seed: mc.seed, params }, est, dir)
        }
        LongCommand::Strong { r, span, hurst, big_t, plain_mc, mc, out: dir } => {
            check_mesh("mesh", mc.mesh)?;
            let cfg = McConfig { n_reps: mc.reps, mesh: Mesh::uniform(mc.mesh), seed: mc.seed };
            let law = match span {
                SpanArg::BmRange => SpanLaw::FbmRange { hurst: 0.5, horizon: big_t },
                SpanArg::FbmRange => SpanLaw::FbmRange { hurst, horizon: big_t },
                SpanArg::Fixed => SpanLaw::Deterministic(big_t),
            };
            let est = if plain_mc {
                limit_strong_dependence_mc(r, &law, &cfg)?
            } else {
                limit_strong_dependence(r, &law, &cfg)?
            };
            let span = format!("{span:?}");
            let params = LimitParams::Strong { r, span, hurst, big_t, plain_mc, n_reps: mc.reps, mesh: mc.mesh };
            (Resolved { command: "long-limit", seed: mc.seed, params }, est, dir)
        }
        LongCommand::Horizon { kind, u, dx, hx, dy, hy, big_c, alpha, pickands, lambda_y } => {
            let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Config(format!("--{name} is required")));
            let spec = match kind {
                HorizonKind::StatInc => HorizonSpec::StatInc {
                    sigma_x: Scale::Power { d: dx, h: need(hx, "hx")? },
                    sigma_y: Scale::Power { d: dy, h: need(hy, "hy")? },
                },
                HorizonKind::StationaryGaussY => {
                    let alpha = need(alpha, "alpha")?;
                    HorizonSpec::StationaryGaussY {
                        big_c: need(big_c, "C")?,
                        alpha,
                        pickands: pickands_or_exact(pickands, alpha)?,
                        sigma_y: Scale::Power { d: dy, h: need(hy, "hy")? },
                    }
                }
                HorizonKind::StationarySsY => {
                    let alpha = need(alpha, "alpha")?;
                    HorizonSpec::StationarySsY {
                        big_c: need(big_c, "C")?,
                        alpha,
                        pickands: pickands_or_exact(pickands, alpha)?,
                        lambda_y: need(lambda_y, "lambda-y")?,
                    }
                }
            };
            let rows = u
                .iter()
                .map(|&u| Ok(HorizonRow { u, horizon: horizon(&spec, u)? }))
                .collect::<Result<Vec<_>>>()?;
            print_json(out, &rows)?;
            return Ok(0);
        }
    };
    print_json(out, &est)?;
    if let Some(dir) = dir {
        let dir = output_dir(Some(dir), &resolved)?;
        write_json(&dir.join("limit.json"), &est)?;
        write_outputs(&dir, &resolved)?;
    }
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
struct VerifyParams {
    section: VerifySection,
}

fn predicted_limit(p: &PredictedConfig, seed: u64) -> Result<LimitEstimate> {
    let seed = RngStream::new(seed, u64::MAX).child(0).seed;
    match *p {
        PredictedConfig::Value { value, std_err } => Ok(LimitEstimate { value, std_err, n_reps: 0 }),
        PredictedConfig::LimitL { alpha_x, alpha_y, n_reps, mesh } => {
            check_mesh("predicted.mesh", mesh)?;
            limit_l(alpha_x, alpha_y, 1.0, &McConfig { n_reps, mesh: Mesh::uniform(mesh), seed })
        }
        PredictedConfig::Strong { r, hurst, n_reps, mesh } => {
            check_mesh("predicted.mesh", mesh)?;
            let cfg = McConfig { n_reps, mesh: Mesh::uniform(mesh), seed };
            limit_strong_dependence(r, &SpanLaw::FbmRange { hurst, horizon: 1.0 }, &cfg)
        }
    }
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let file = ConfigFile::load(&a.config)?;
    let mut section = file
        .verify
        .ok_or_else(|| Error::Config(format!("{} has no [verify] section", a.config.display())))?;
    if let Some(r) = a.reps {
        section.n_reps = r;
    }
    check_mesh("mesh_x", section.mesh_x)?;
    if section.y_steps == 0 || section.n_reps == 0 || section.u_grid.is_empty() {
        return Err(Error::Config("need y_steps, n_reps and u_grid to be nonempty".into()));
    }
    let resolved = Resolved { command: "verify", seed: a.seed.unwrap_or(file.seed), params: VerifyParams { section } };
    let s = &resolved.params.section;
    let (x, y) = (s.x.to_spec()?, s.y.to_spec()?);
    let spec = s.horizon.to_spec()?;
    let predicted = predicted_limit(&s.predicted, resolved.seed)?;
    let cfg = VerifyConfig {
        n_reps: s.n_reps,
        mesh_x: s.mesh_x,
        y_steps: s.y_steps,
        seed: resolved.seed,
        node_budget: s.node_budget,
    };
    let report = verify_long_limit(&x, &y, &spec, &s.u_grid, &cfg, predicted)?;
    let dir = output_dir(a.out.or(file.out_dir), &resolved)?;
    write_json(&dir.join("limit.json"), &report)?;
    let mut w = BufWriter::new(File::create(dir.join("limit.csv"))?);
    report.write_csv(&mut w)?;
    w.flush()?;
    write_outputs(&dir, &resolved)?;
    for row in &report.rows {
        match (row.p_hat, row.std_err) {
            (Some(p), Some(se)) => writeln!(out, "u={} h={:.6e} p_hat={p:.6} std_err={se:.2e}", row.u, row.horizon)?,
            _ => writeln!(out, "u={} h={:.6e} skipped", row.u, row.horizon)?,
        }
    }
    writeln!(out, "predicted={:.6} agreement={}", report.predicted.value, report.agreement)?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(0)
}

fn cmd_selftest(quick: bool, out: &mut dyn Write) -> Result<i32> {
    let outcomes = crate::selftest::run(quick);
    for o in &outcomes {
        writeln!(out, "{o}")?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    writeln!(out, "{} of {} criteria passed", outcomes.len() - failed, outcomes.len())?;
    Ok(if failed == 0 { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let mut argv = vec!["itersup"];
        argv.extend_from_slice(args);
        let code = run(argv, &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn asym_iterated_brownian() {
        let (code, text) = run_capture(&["asym", "iterated-fbm", "--h1", "0.5", "--h2", "0.5", "--T", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!((v["alpha"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!((v["beta"].as_f64().unwrap() - 0.944_941).abs() < 1e-6);
        assert!((v["gamma"].as_f64().unwrap() + 2.0 / 3.0).abs() < 1e-12);
        assert!((v["C"].as_f64().unwrap() - 0.820_800).abs() < 1e-6);
    }

    #[test]
    fn asym_fbm_unit_smooth() {
        let (code, text) = run_capture(&["asym", "fbm-unit", "--h", "0.75"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["alpha"].as_f64(), Some(2.0));
        assert!((v["C"].as_f64().unwrap() - 0.398_942).abs() < 1e-6);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_capture(&["asym", "iterated-fbm", "--h1", "0.5"]).0, 2);
        assert_eq!(run_capture(&["nope"]).0, 2);
    }

    #[test]
    fn missing_pickands_exits_one() {
        assert_eq!(run_capture(&["asym", "fbm-unit", "--h", "0.3"]).0, 1);
        let (code, _) = run_capture(&["asym", "fbm-unit", "--h", "0.3", "--pickands", "1.2"]);
        assert_eq!(code, 0);
    }

    #[test]
    fn pickands_exact_is_flagged() {
        let (code, text) = run_capture(&["pickands", "--alpha", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["value"].as_f64(), Some(1.0));
        assert_eq!(v["is_exact"].as_bool(), Some(true));
    }

    #[test]
    fn stationary_weibull_form_matches_value() {
        let (code, text) = run_capture(&[
            "asym", "stationary", "--mean-span", "1", "--C", "1", "--alpha", "2", "--u", "3",
        ]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let value = v["values"][0]["value"].as_f64().unwrap();
        // (3/√π) Ψ(3), evaluated independently
        assert!((value / 0.002_284_795_224_891_955 - 1.0).abs() < 1e-12, "{value}");
        let w = WeibullTail::new(2.0, 0.5, 0.0, v["C"].as_f64().unwrap()).unwrap();
        // Mills ratio correction at u = 3 is about 10%
        assert!((w.eval(3.0).unwrap() / value - 1.0).abs() < 0.15);
    }

    #[test]
    fn config_parses_and_rejects_unknown_keys() {
        let cfg = ConfigFile::parse(
            "seed = 3\n[simulate_tail]\nx = { kind = \"fbm\", hurst = 0.5 }\ny = { kind = \"linear\", slope = 1.0 }\nthresholds = [1.0]\n",
        )
        .unwrap();
        let s = cfg.simulate_tail.unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(s.n_reps, 10_000);
        assert_eq!(s.method, TailMethod::Crude);
        assert!(ConfigFile::parse("bogus = 1").is_err());
    }

    #[test]
    fn digest_is_pure() {
        let r = |seed| Resolved { command: "x", seed, params: vec![1.0, 2.0] };
        assert_eq!(r(1).digest().unwrap(), r(1).digest().unwrap());
        assert_ne!(r(1).digest().unwrap(), r(2).digest().unwrap());
        assert_eq!(r(1).digest().unwrap().len(), 64);
    }

    #[test]
    fn zero_mesh_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(
            &path,
            "[simulate_tail]\nx = { kind = \"fbm\", hurst = 0.5 }\ny = { kind = \"fbm\", hurst = 0.5 }\nthresholds = [1.0]\nmesh = 0.0\n",
        )
        .unwrap();
        let out = dir.path().join("out");
        let (code, _) = run_capture(&["simulate-tail", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, 2);
    }
}
