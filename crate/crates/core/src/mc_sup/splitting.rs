//! Fixed-effort multilevel splitting on the running sup.
//!
//! Cloning a replication mid-path requires a finite Markov state. With a
//! Brownian outer process only the two grid nodes at each end of the
//! visited range matter for the future, so the state is finite whenever the
//! inner process is Brownian or a straight line.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{validate_thresholds, EstimatorKind, Mesh, TailEstimate};
use crate::error::{Error, Result};
use crate::paths::{ProcessSpec, RngStream, StreamRng, VarianceFn};

/// Independent repetitions of the whole splitting run used for the
/// standard error.
pub const MIN_META_REPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingRequest {
    pub horizon: f64,
    /// Ascending; the last one is the target threshold.
    pub levels: Vec<f64>,
    pub n_per_level: usize,
    pub mesh: Mesh,
    pub seed: u64,
    pub meta_reps: usize,
}

#[derive(Debug, Clone, Copy)]
enum Inner {
    Brownian { scale: f64 },
    Line { slope: f64 },
}

fn brownian_scale(spec: &ProcessSpec) -> Option<f64> {
    match spec {
        ProcessSpec::Fbm { hurst } if *hurst == 0.5 => Some(1.0),
        ProcessSpec::StationaryIncrements { variance: VarianceFn::PowerLaw(v) } if v.alpha_inf == 1.0 => {
            Some(v.big_d.sqrt())
        }
        _ => None,
    }
}

/// Ends of the outer grid: nodes `k` and `k ∓ 1` on each side.
#[derive(Debug, Clone, Copy)]
struct Edge {
    k: i64,
    inner: f64,
    outer: f64,
}

#[derive(Debug, Clone, Copy)]
struct State {
    step: usize,
    y: f64,
    min_y: f64,
    max_y: f64,
    left: Edge,
    right: Edge,
    sup: f64,
}

struct Dynamics {
    inner: Inner,
    x_scale: f64,
    dx: f64,
    dy: f64,
    n_steps: usize,
}

impl Dynamics {
    fn initial(&self, rng: &mut StreamRng) -> State {
        let sd = self.x_scale * self.dx.sqrt();
        let l: f64 = rng.sample(StandardNormal);
        let r: f64 = rng.sample(StandardNormal);
        State {
            step: 0,
            y: 0.0,
            min_y: 0.0,
            max_y: 0.0,
            left: Edge { k: -1, inner: 0.0, outer: sd * l },
            right: Edge { k: 1, inner: 0.0, outer: sd * r },
            sup: 0.0,
        }
    }

    /// Grows one end of the visited range to `reach >= 0` (distance from the
    /// origin on that side) and returns the sup of the interpolant over the
    /// new part.
    fn extend(&self, edge: &mut Edge, reach: f64, rng: &mut StreamRng) -> f64 {
        let sd = self.x_scale * self.dx.sqrt();
        let mut best = f64::NEG_INFINITY;
        let k = |e: &Edge| e.k.unsigned_abs() as f64 * self.dx;
        if k(edge) <= reach {
            best = best.max(edge.outer);
        }
        while k(edge) < reach {
            let z: f64 = rng.sample(StandardNormal);
            edge.inner = edge.outer;
            edge.outer += sd * z;
            edge.k += edge.k.signum();
            if k(edge) <= reach {
                best = best.max(edge.outer);
            }
        }
        let w = (reach - (k(edge) - self.dx)) / self.dx;
        best.max(edge.inner * (1.0 - w) + edge.outer * w)
    }

    /// Runs until the sup exceeds `level` (true) or the horizon ends (false).
    fn run(&self, state: &mut State, level: f64, rng: &mut StreamRng) -> bool {
        while state.sup <= level {
            if state.step == self.n_steps {
                return false;
            }
            state.step += 1;
            state.y = match self.inner {
                Inner::Brownian { scale } => state.y + scale * self.dy.sqrt() * rng.sample::<f64, _>(StandardNormal),
                Inner::Line { slope } => slope * state.step as f64 * self.dy,
            };
            if state.y > state.max_y {
                state.max_y = state.y;
                let s = self.extend(&mut state.right, state.y, rng);
                state.sup = state.sup.max(s);
            } else if state.y < state.min_y {
                state.min_y = state.y;
                let s = self.extend(&mut state.left, -state.y, rng);
                state.sup = state.sup.max(s);
            }
        }
        true
    }
}

/// Splitting estimate of `P(sup X(Y(s)) > u)` at every level, for
/// `X` Brownian and `Y` Brownian or linear.
pub fn estimate_tail_splitting(x: &ProcessSpec, y: &ProcessSpec, req: &SplittingRequest) -> Result<TailEstimate> {
    req.mesh.validate()?;
    validate_thresholds(&req.levels)?;
    if req.meta_reps < MIN_META_REPS {
        return Err(Error::Config(format!("splitting needs at least {MIN_META_REPS} meta repetitions")));
    }
    if req.n_per_level == 0 {
        return Err(Error::Config("need at least one particle per level".into()));
    }
    if !(req.horizon > 0.0) || !req.horizon.is_finite() {
        return Err(Error::Config(format!("horizon must be positive, got {}", req.horizon)));
    }
    let x_scale = brownian_scale(x)
        .ok_or_else(|| Error::Unsupported(format!("splitting needs a Brownian outer process, got {x:?}")))?;
    let inner = match (brownian_scale(y), y) {
        (Some(scale), _) => Inner::Brownian { scale },
        (None, ProcessSpec::Linear { slope }) => Inner::Line { slope: *slope },
        _ => {
            return Err(Error::Unsupported(format!(
                "splitting needs a Brownian or linear inner process, got {y:?}"
            )))
        }
    };
    let n_steps = ((req.horizon / req.mesh.y) - 1e-9).ceil().max(1.0) as usize;
    let dynamics = Dynamics { inner, x_scale, dx: req.mesh.x, dy: req.horizon / n_steps as f64, n_steps };

    let n_levels = req.levels.len();
    let mut runs = Vec::with_capacity(req.meta_reps);
    for meta in 0..req.meta_reps {
        runs.push(one_run(&dynamics, req, meta as u64)?);
    }
    let r = req.meta_reps as f64;
    let mut p_hat = Vec::with_capacity(n_levels);
    let mut std_err = Vec::with_capacity(n_levels);
    for j in 0..n_levels {
        let mean = runs.iter().map(|v| v[j]).sum::<f64>() / r;
        let var = runs.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (r - 1.0);
        p_hat.push(mean);
        std_err.push((var / r).sqrt());
    }
    Ok(TailEstimate::from_parts(
        req.levels.clone(),
        p_hat,
        std_err,
        (req.meta_reps * req.n_per_level) as u64,
        req.mesh.x,
        EstimatorKind::Splitting,
    ))
}

/// One splitting run; returns the running product at every level.
fn one_run(dynamics: &Dynamics, req: &SplittingRequest, meta: u64) -> Result<Vec<f64>> {
    let base = RngStream::new(req.seed, meta);
    let mut select = base.child(0).rng();
    let n = req.n_per_level;
    let mut entrance: Vec<State> = Vec::new();
    let mut product = 1.0;
    let mut out = Vec::with_capacity(req.levels.len());
    for (j, &level) in req.levels.iter().enumerate() {
        let starts: Vec<Option<usize>> = (0..n)
            .map(|_| (j > 0).then(|| select.random_range(0..entrance.len())))
            .collect();
        let stream = base.child(j as u64 + 1);
        let passed: Vec<State> = starts
            .into_par_iter()
            .enumerate()
            .filter_map(|(i, start)| {
                let mut rng = stream.child(i as u64).rng();
                let mut state = match start {
                    Some(s) => entrance[s],
                    None => dynamics.initial(&mut rng),
                };
                dynamics.run(&mut state, level, &mut rng).then_some(state)
            })
            .collect();
        if passed.is_empty() {
            let from = if j == 0 { f64::NEG_INFINITY } else { req.levels[j - 1] };
            return Err(Error::DegenerateLevel { level, from });
        }
        product *= passed.len() as f64 / n as f64;
        out.push(product);
        entrance = passed;
    }
    Ok(out)
}
