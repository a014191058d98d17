use std::io::Write;

use crate::error::{domain, Result};

/// A sample path on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Node where the model pins the value to zero, if any.
    pub anchor_index: Option<usize>,
}

impl PathGrid {
    pub fn new(times: Vec<f64>, values: Vec<f64>, anchor_index: Option<usize>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(domain(format!(
                "grid has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("grid times must be strictly increasing"));
        }
        if let Some(i) = anchor_index {
            if i >= times.len() {
                return Err(domain(format!("anchor index {i} out of range")));
            }
        }
        Ok(Self { times, values, anchor_index })
    }

    /// Uniform grid `k * mesh` for `k = k_lo..=k_hi`.
    pub(crate) fn uniform(k_lo: i64, mesh: f64, values: Vec<f64>, anchor: Option<usize>) -> Self {
        let times = (0..values.len()).map(|i| (k_lo + i as i64) as f64 * mesh).collect();
        Self { times, values, anchor_index: anchor }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Piecewise-linear interpolation, clamped to the end values outside the
    /// grid.
    pub fn interpolate(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let j = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        self.values[j - 1] * (1.0 - w) + self.values[j] * w
    }

    /// Supremum of the piecewise-linear interpolant over `[lo, hi]`.
    pub fn sup_over(&self, lo: f64, hi: f64) -> f64 {
        let mut best = self.interpolate(lo).max(self.interpolate(hi));
        let start = self.times.partition_point(|&s| s <= lo);
        for (t, v) in self.times[start..].iter().zip(&self.values[start..]) {
            if *t >= hi {
                break;
            }
            best = best.max(*v);
        }
        best
    }

    /// Writes the path as CSV with header `t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }
}
