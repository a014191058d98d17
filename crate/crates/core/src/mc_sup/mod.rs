//! Monte Carlo estimation of `P(sup_{s∈[0,T]} X(Y(s)) > u)`.
//!
//! By the intermediate value property the sup of `X∘Y` over `[0,T]` equals
//! the sup of `X` over `[inf Y, sup Y]`, so each replication draws the range
//! of `Y` first and then `X` on that interval only.

mod splitting;

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::paths::{ProcessSpec, RngStream, StreamRng};

pub use splitting::{estimate_tail_splitting, SplittingRequest, MIN_META_REPS};

/// Extremes of the inner process over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeSample {
    pub min_y: f64,
    pub max_y: f64,
}

impl RangeSample {
    pub fn span(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// Grid steps for the outer (`x`) and inner (`y`) processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub x: f64,
    pub y: f64,
}

impl Mesh {
    pub fn uniform(step: f64) -> Self {
        Self { x: step, y: step }
    }

    pub fn halved(&self) -> Self {
        Self { x: self.x / 2.0, y: self.y / 2.0 }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.x > 0.0 && self.y > 0.0 && self.x.is_finite() && self.y.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("mesh must be positive, got x={}, y={}", self.x, self.y)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SupMode {
    #[default]
    RangeReduction,
    /// Evaluates `X` at every `Y(s_i)` by linear interpolation; kept only to
    /// cross-check the range identity.
    DirectComposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimatorKind {
    Crude,
    Splitting,
}

impl EstimatorKind {
    fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Crude => "CRUDE",
            EstimatorKind::Splitting => "SPLITTING",
        }
    }
}

/// One draw of the iterated sup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupDraw {
    pub value: f64,
    pub range: RangeSample,
    /// Direct composition only: some step of `Y` jumped over more than one
    /// cell of the `X` grid.
    pub coarse_interpolation: bool,
}

/// Min and max of `Y` on the grid of `[0, horizon]`.
pub fn sample_range(y: &ProcessSpec, horizon: f64, mesh: f64, rng: &mut StreamRng) -> Result<RangeSample> {
    let path = y.sample_path(horizon, mesh, rng)?;
    let mut min_y = path.min();
    let mut max_y = path.max();
    if y.is_anchored() {
        // guards against custom samplers that drift off the anchor by rounding
        min_y = min_y.min(0.0);
        max_y = max_y.max(0.0);
    }
    Ok(RangeSample { min_y, max_y })
}

/// One replication of `sup_{s∈[0,T]} X(Y(s))`.
///
/// Both modes consume the stream identically (first `Y`, then `X` on the
/// grid covering the range), so the two are coupled on a shared stream.
pub fn sup_iterated(
    x: &ProcessSpec,
    y: &ProcessSpec,
    horizon: f64,
    mesh: Mesh,
    rng: &mut StreamRng,
    mode: SupMode,
) -> Result<SupDraw> {
    let path_y = y.sample_path(horizon, mesh.y, rng)?;
    let range = RangeSample { min_y: path_y.min(), max_y: path_y.max() };
    let path_x = x.sample_interval(range.min_y, range.max_y, mesh.x, rng)?;
    match mode {
        SupMode::RangeReduction => Ok(SupDraw {
            value: path_x.sup_over(range.min_y, range.max_y),
            range,
            coarse_interpolation: false,
        }),
        SupMode::DirectComposition => {
            let value = path_y
                .values
                .iter()
                .map(|&v| path_x.interpolate(v))
                .fold(f64::NEG_INFINITY, f64::max);
            let coarse = path_y.values.windows(2).any(|w| (w[1] - w[0]).abs() > mesh.x);
            Ok(SupDraw { value, range, coarse_interpolation: coarse })
        }
    }
}

/// Crude Monte Carlo request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRequest {
    pub horizon: f64,
    pub thresholds: Vec<f64>,
    pub n_reps: u64,
    pub mesh: Mesh,
    pub seed: u64,
    /// Simulate `X` once per replication on `[-w, w]` instead of on the
    /// sampled range; memory per worker is `(2w / mesh.x + 1)` doubles plus
    /// an FFT buffer of twice that. Ranges that do not fit fall back to the
    /// exact range.
    #[serde(default)]
    pub shared_grid_half_width: Option<f64>,
}

impl TailRequest {
    pub fn new(horizon: f64, thresholds: Vec<f64>, n_reps: u64, mesh: Mesh, seed: u64) -> Self {
        Self { horizon, thresholds, n_reps, mesh, seed, shared_grid_half_width: None }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.n_reps == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        validate_thresholds(&self.thresholds)
    }
}

pub(crate) fn validate_thresholds(u: &[f64]) -> Result<()> {
    if u.is_empty() {
        return Err(Error::Config("need at least one threshold".into()));
    }
    if u.iter().any(|v| !v.is_finite()) || u.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("thresholds must be finite and strictly ascending".into()));
    }
    Ok(())
}

/// Tail probabilities at several thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub thresholds: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_reps: u64,
    /// Step of the outer grid.
    pub mesh: f64,
    pub method: EstimatorKind,
    /// False when sampling noise made `p_hat` increase somewhere in `u`.
    pub monotone: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Fewer expected hits than this and a threshold is considered unreliable.
pub const MIN_HITS: f64 = 20.0;

#[derive(Serialize, Deserialize)]
struct CsvRow {
    u: f64,
    p_hat: f64,
    std_err: f64,
    n_reps: u64,
    mesh: f64,
    method: String,
}

impl TailEstimate {
    pub(crate) fn from_parts(
        thresholds: Vec<f64>,
        p_hat: Vec<f64>,
        std_err: Vec<f64>,
        n_reps: u64,
        mesh: f64,
        method: EstimatorKind,
    ) -> Self {
        let monotone = p_hat.windows(2).all(|w| w[1] <= w[0]);
        let mut warnings = Vec::new();
        // splitting estimates are not hit counts
        for (u, p) in thresholds.iter().zip(&p_hat).filter(|_| method == EstimatorKind::Crude) {
            if p * (n_reps as f64) < MIN_HITS {
                let msg = format!("u={u}: p_hat*n_reps = {:.1} < {MIN_HITS}, tail estimate unreliable", p * n_reps as f64);
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        if !monotone {
            warnings.push("p_hat is not nonincreasing in u".into());
        }
        Self { thresholds, p_hat, std_err, n_reps, mesh, method, monotone, warnings }
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// CSV with header `u,p_hat,std_err,n_reps,mesh,method`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.len() {
            w.serialize(CsvRow {
                u: self.thresholds[i],
                p_hat: self.p_hat[i],
                std_err: self.std_err[i],
                n_reps: self.n_reps,
                mesh: self.mesh,
                method: self.method.as_str().into(),
            })
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: CsvRow = row.map_err(csv_err)?;
            rows.push(row);
        }
        let first = rows.first().ok_or_else(|| Error::Parse("tail CSV has no rows".into()))?;
        let method = match first.method.as_str() {
            "CRUDE" => EstimatorKind::Crude,
            "SPLITTING" => EstimatorKind::Splitting,
            other => return Err(Error::Parse(format!("unknown method {other:?}"))),
        };
        let (n_reps, mesh) = (first.n_reps, first.mesh);
        for r in &rows {
            if !(0.0..=1.0).contains(&r.p_hat) || !(r.std_err >= 0.0) {
                return Err(Error::Parse(format!("row u={} has p_hat or std_err out of range", r.u)));
            }
        }
        let u: Vec<f64> = rows.iter().map(|r| r.u).collect();
        validate_thresholds(&u).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self::from_parts(
            u,
            rows.iter().map(|r| r.p_hat).collect(),
            rows.iter().map(|r| r.std_err).collect(),
            n_reps,
            mesh,
            method,
        ))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Draws replication `i` of the sup; the stream depends only on `(seed, i)`.
fn replicate(x: &ProcessSpec, y: &ProcessSpec, req: &TailRequest, i: u64) -> Result<f64> {
    let mut rng = RngStream::new(req.seed, i).rng();
    let Some(w) = req.shared_grid_half_width else {
        return Ok(sup_iterated(x, y, req.horizon, req.mesh, &mut rng, SupMode::RangeReduction)?.value);
    };
    let range = sample_range(y, req.horizon, req.mesh.y, &mut rng)?;
    let (a, b) = if range.min_y >= -w && range.max_y <= w { (-w, w) } else { (range.min_y, range.max_y) };
    let path = x.sample_interval(a, b, req.mesh.x, &mut rng)?;
    Ok(path.sup_over(range.min_y, range.max_y))
}

/// Sup draws of every replication, in replication order.
pub fn sample_sups(x: &ProcessSpec, y: &ProcessSpec, req: &TailRequest) -> Result<Vec<f64>> {
    req.validate()?;
    x.validate()?;
    y.validate()?;
    if let ProcessSpec::SelfSimilar { .. } | ProcessSpec::Linear { .. } = x {
        return Err(domain("outer process must be fBm, stationary-increments or stationary"));
    }
    (0..req.n_reps).into_par_iter().map(|i| replicate(x, y, req, i)).collect()
}

/// Crude Monte Carlo estimate; every threshold uses the same replications.
pub fn estimate_tail(x: &ProcessSpec, y: &ProcessSpec, req: &TailRequest) -> Result<TailEstimate> {
    let sups = sample_sups(x, y, req)?;
    Ok(tail_from_sups(&sups, &req.thresholds, req.mesh.x))
}

pub(crate) fn tail_from_sups(sups: &[f64], thresholds: &[f64], mesh: f64) -> TailEstimate {
    let n = sups.len() as f64;
    let p_hat: Vec<f64> = thresholds
        .iter()
        .map(|&u| sups.iter().filter(|&&s| s > u).count() as f64 / n)
        .collect();
    let std_err = p_hat.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    TailEstimate::from_parts(thresholds.to_vec(), p_hat, std_err, sups.len() as u64, mesh, EstimatorKind::Crude)
}

/// Outcome of [`estimate_tail_refined`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub estimate: TailEstimate,
    pub mesh: Mesh,
    pub stabilised: bool,
    pub rounds: usize,
}

/// Halves the mesh until no threshold moves by more than half its standard
/// error, or the next grid on `[0, T]` would exceed `max_nodes`.
pub fn estimate_tail_refined(
    x: &ProcessSpec,
    y: &ProcessSpec,
    req: &TailRequest,
    max_nodes: u64,
) -> Result<Refinement> {
    let mut req = req.clone();
    let mut current = estimate_tail(x, y, &req)?;
    let mut rounds = 1;
    loop {
        let next = req.mesh.halved();
        if req.horizon / next.y.min(next.x) > max_nodes as f64 {
            log::info!("mesh refinement stopped at the node cap ({max_nodes})");
            return Ok(Refinement { estimate: current, mesh: req.mesh, stabilised: false, rounds });
        }
        req.mesh = next;
        let refined = estimate_tail(x, y, &req)?;
        rounds += 1;
        let stable = refined
            .p_hat
            .iter()
            .zip(&current.p_hat)
            .zip(&refined.std_err)
            .all(|((a, b), se)| (a - b).abs() < 0.5 * se);
        current = refined;
        if stable {
            return Ok(Refinement { estimate: current, mesh: req.mesh, stabilised: true, rounds });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{Covariance, VarianceFn};
    use std::sync::Arc;

    #[test]
    fn zero_inner_path_gives_zero_range() {
        let y = ProcessSpec::StationaryIncrements { variance: VarianceFn::Custom(Arc::new(|_| 0.0)) };
        let r = sample_range(&y, 1.0, 0.1, &mut RngStream::new(1, 0).rng()).unwrap();
        assert_eq!(r, RangeSample { min_y: 0.0, max_y: 0.0 });
    }

    #[test]
    fn identity_inner_is_plain_sup() {
        let x = ProcessSpec::brownian();
        let y = ProcessSpec::identity();
        let mesh = Mesh::uniform(1.0 / 64.0);
        let d = sup_iterated(&x, &y, 1.0, mesh, &mut RngStream::new(4, 2).rng(), SupMode::RangeReduction).unwrap();
        let mut rng = RngStream::new(4, 2).rng();
        let _ = y.sample_path(1.0, mesh.y, &mut rng).unwrap();
        let px = x.sample_interval(0.0, 1.0, mesh.x, &mut rng).unwrap();
        assert_eq!(d.value, px.max());
        assert_eq!(d.range, RangeSample { min_y: 0.0, max_y: 1.0 });
    }

    #[test]
    fn modes_agree_for_identity_inner() {
        let x = ProcessSpec::brownian();
        let y = ProcessSpec::identity();
        let mesh = Mesh::uniform(1.0 / 128.0);
        for i in 0..20 {
            let a = sup_iterated(&x, &y, 1.0, mesh, &mut RngStream::new(8, i).rng(), SupMode::RangeReduction).unwrap();
            let b = sup_iterated(&x, &y, 1.0, mesh, &mut RngStream::new(8, i).rng(), SupMode::DirectComposition).unwrap();
            assert!((a.value - b.value).abs() < 1e-12);
            assert!(!b.coarse_interpolation);
        }
    }

    #[test]
    fn stationary_outer_without_anchor() {
        let x = ProcessSpec::Stationary { covariance: Covariance::PowerExponential { c: 0.5, alpha: 2.0 } };
        let req = TailRequest::new(1.0, vec![0.0, 1.0], 200, Mesh::uniform(0.05), 3);
        let est = estimate_tail(&x, &ProcessSpec::brownian(), &req).unwrap();
        assert!(est.p_hat[0] > est.p_hat[1]);
    }

    #[test]
    fn rejects_bad_requests() {
        let x = ProcessSpec::brownian();
        let mut req = TailRequest::new(1.0, vec![1.0, 2.0], 10, Mesh::uniform(0.0), 1);
        assert!(matches!(estimate_tail(&x, &x, &req), Err(Error::Config(_))));
        req.mesh = Mesh::uniform(0.1);
        req.thresholds = vec![2.0, 1.0];
        assert!(estimate_tail(&x, &x, &req).is_err());
        req.thresholds = vec![1.0];
        assert!(estimate_tail(&ProcessSpec::identity(), &x, &req).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let est = TailEstimate::from_parts(vec![1.0, 2.0], vec![0.5, 0.25], vec![0.01, 0.02], 1000, 0.125, EstimatorKind::Crude);
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("u,p_hat,std_err,n_reps,mesh,method\n1.0,0.5,0.01,1000,0.125,CRUDE\n"));
        assert_eq!(TailEstimate::read_csv(&buf[..]).unwrap(), est);
        assert!(TailEstimate::read_csv("u,p_hat\n1,0.5\n".as_bytes()).is_err());
    }

    #[test]
    fn sparse_thresholds_warn_and_shared_grid_runs() {
        let x = ProcessSpec::brownian();
        let mut req = TailRequest::new(1.0, vec![0.5, 5.0], 100, Mesh::uniform(1.0 / 32.0), 9);
        req.shared_grid_half_width = Some(2.0);
        let est = estimate_tail(&x, &x, &req).unwrap();
        assert_eq!(est.p_hat[1], 0.0);
        assert!(est.warnings.iter().any(|w| w.starts_with("u=5")));
    }
}
