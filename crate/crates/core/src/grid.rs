use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform measurement grid: `horizon` seconds starting at `start`, cut into
/// intervals of `interval` seconds. Interval `i` covers
/// `[start + i*interval, start + (i+1)*interval)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalGrid {
    /// Scenario-relative start time in seconds.
    pub start_s: f64,
    /// Total covered duration in seconds. Must be an exact multiple of `interval_s`.
    pub horizon_s: f64,
    /// Interval length in seconds.
    pub interval_s: f64,
}

impl IntervalGrid {
    pub fn new(start_s: f64, horizon_s: f64, interval_s: f64) -> Result<Self> {
        let grid = Self {
            start_s,
            horizon_s,
            interval_s,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.start_s.is_finite() || !self.horizon_s.is_finite() || !self.interval_s.is_finite()
        {
            return Err(Error::Config("grid fields must be finite".into()));
        }
        if self.interval_s <= 0.0 {
            return Err(Error::Config("interval length must be positive".into()));
        }
        if self.horizon_s < 0.0 {
            return Err(Error::Config("horizon must be non-negative".into()));
        }
        let n = self.horizon_s / self.interval_s;
        if (n - n.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "horizon {} is not a multiple of interval {}",
                self.horizon_s, self.interval_s
            )));
        }
        Ok(())
    }

    /// Number of intervals covered by the grid.
    pub fn num_intervals(&self) -> usize {
        (self.horizon_s / self.interval_s).round() as usize
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.horizon_s
    }

    /// True when `t` lies inside `[start, start + horizon)`.
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s()
    }

    /// Index of the interval containing `t`.
    pub fn interval_of(&self, t: f64) -> Result<usize> {
        if !self.contains(t) {
            return Err(Error::OutOfHorizon {
                t,
                start: self.start_s,
                end: self.end_s(),
            });
        }
        let idx = ((t - self.start_s) / self.interval_s).floor() as usize;
        // Guard against floating point landing exactly on the upper edge.
        Ok(idx.min(self.num_intervals().saturating_sub(1)))
    }

    /// Bounds `[lo, hi)` of interval `i`.
    pub fn interval_bounds(&self, i: usize) -> (f64, f64) {
        let lo = self.start_s + i as f64 * self.interval_s;
        (lo, lo + self.interval_s)
    }
}
