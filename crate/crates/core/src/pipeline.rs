//! Interval series derivation: spot flows from crossing events, route travel
//! times from entry/exit pairs, trailing smoothers, and token matching
//! between detection sets.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::IntervalGrid;
use crate::series::{SampledSeries, Unit};
use crate::types::{DetectionSet, Route, SpotId, VehicleTrace};

/// Spot flow per interval, veh/h: the number of crossings in the interval
/// scaled by 3600/T. Crossings outside the horizon are ignored. Flow is
/// defined for every interval; an empty interval is a zero, not a gap.
pub fn flow_series(crossing_times: &[f64], grid: &IntervalGrid) -> Result<SampledSeries> {
    let mut counts = vec![0u32; grid.num_intervals()];
    for &t in crossing_times {
        if grid.contains(t) {
            counts[grid.interval_of(t)?] += 1;
        }
    }
    let scale = 3600.0 / grid.interval_s;
    let values = counts.iter().map(|c| Some(*c as f64 * scale)).collect();
    SampledSeries::new(*grid, values, Unit::VehPerH)
}

/// Trailing moving average over the current and `k` preceding intervals.
/// The first `k` indices are a warm-up and stay missing. Inside a window,
/// missing inputs are skipped and the mean is taken over the present ones;
/// a window with no present inputs yields a missing output.
pub fn moving_average(series: &SampledSeries, k: usize) -> Result<SampledSeries> {
    let n = series.len();
    let mut values: Vec<Option<f64>> = vec![None; n];
    for i in k..n {
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for j in (i - k)..=i {
            if let Some(v) = series.get(j) {
                sum += v;
                cnt += 1;
            }
        }
        if cnt > 0 {
            values[i] = Some(sum / cnt as f64);
        }
    }
    SampledSeries::new(*series.grid(), values, series.unit())
}

/// Trailing weighted moving average with the same window and warm-up rules
/// as [`moving_average`]. Window entries where either the series value or
/// the weight is missing are skipped; the rest are renormalized by the sum
/// of their weights. A window whose usable weights sum to zero is missing.
pub fn weighted_moving_average(
    series: &SampledSeries,
    weights: &SampledSeries,
    k: usize,
) -> Result<SampledSeries> {
    series.same_grid(weights)?;
    let n = series.len();
    let mut values: Vec<Option<f64>> = vec![None; n];
    for i in k..n {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in (i - k)..=i {
            if let (Some(v), Some(w)) = (series.get(j), weights.get(j)) {
                num += w * v;
                den += w;
            }
        }
        if den > 0.0 {
            values[i] = Some(num / den);
        }
    }
    SampledSeries::new(*series.grid(), values, series.unit())
}

/// Which interval a traversal is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TravelTimeAssignment {
    /// Attribute to the interval containing the exit time (default).
    ByExit,
    /// Attribute to the interval containing the entry time.
    ByEntry,
}

/// Side information from travel-time aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeDiag {
    /// Traversals contributing to each interval.
    pub counts: Vec<u32>,
    /// Traversals whose anchor time fell outside the horizon.
    pub skipped_out_of_grid: usize,
    /// Records rejected because the exit did not come after the entry.
    pub rejected_nonpositive: usize,
}

/// Route travel time per interval, seconds: the mean of `t_out - t_in` over
/// traversals whose anchor time (exit by default) falls in the interval.
/// Intervals with no traversal are missing. Corrupted records with a
/// non-positive duration are rejected and tallied, not an error.
pub fn travel_time_series(
    pairs: &[(f64, f64)],
    grid: &IntervalGrid,
    assignment: TravelTimeAssignment,
) -> Result<(SampledSeries, TravelTimeDiag)> {
    let n = grid.num_intervals();
    let mut sums = vec![0.0f64; n];
    let mut counts = vec![0u32; n];
    let mut skipped = 0usize;
    let mut rejected = 0usize;
    for &(t_in, t_out) in pairs {
        if !(t_out > t_in) {
            rejected += 1;
            continue;
        }
        let anchor = match assignment {
            TravelTimeAssignment::ByExit => t_out,
            TravelTimeAssignment::ByEntry => t_in,
        };
        if !grid.contains(anchor) {
            skipped += 1;
            continue;
        }
        let i = grid.interval_of(anchor)?;
        sums[i] += t_out - t_in;
        counts[i] += 1;
    }
    let values = (0..n)
        .map(|i| {
            if counts[i] > 0 {
                Some(sums[i] / counts[i] as f64)
            } else {
                None
            }
        })
        .collect();
    let series = SampledSeries::new(*grid, values, Unit::Seconds)?;
    Ok((
        series,
        TravelTimeDiag {
            counts,
            skipped_out_of_grid: skipped,
            rejected_nonpositive: rejected,
        },
    ))
}

/// Entry/exit pairs from ground-truth traces of one route.
pub fn route_pairs(traces: &[VehicleTrace], route_id: u8) -> Vec<(f64, f64)> {
    traces
        .iter()
        .filter(|t| t.route_id == route_id)
        .map(|t| (t.t_in_s, t.t_out_s))
        .collect()
}

/// All crossing times of one spot in ground truth: entry times of routes
/// entering there plus exit times of routes leaving there.
pub fn spot_crossing_times(traces: &[VehicleTrace], routes: &[Route], spot: SpotId) -> Vec<f64> {
    let mut out = Vec::new();
    for tr in traces {
        let route = match routes.iter().find(|r| r.id == tr.route_id) {
            Some(r) => r,
            None => continue,
        };
        if route.entry_spot == spot {
            out.push(tr.t_in_s);
        } else if route.exit_spot == spot {
            out.push(tr.t_out_s);
        }
    }
    out
}

/// Sighting times of one detection set.
pub fn sighting_times(set: &DetectionSet) -> Vec<f64> {
    set.sightings.iter().map(|s| s.t_s).collect()
}

fn token_index(set: &DetectionSet) -> Result<BTreeMap<&str, Vec<f64>>> {
    let mut idx: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in &set.sightings {
        let token = s.token.as_deref().ok_or_else(|| {
            Error::Series(format!(
                "sensor {}: token matching needs tokenized sightings",
                set.sensor_id
            ))
        })?;
        idx.entry(token).or_default().push(s.t_s);
    }
    for times in idx.values_mut() {
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    Ok(idx)
}

/// Match tokenized entry sightings to the first strictly later sighting of
/// the same token at the exit sensor. Returns (entry, exit) time pairs
/// ordered by entry time.
pub fn match_route(entry: &DetectionSet, exit: &DetectionSet) -> Result<Vec<(f64, f64)>> {
    let exit_idx = token_index(exit)?;
    let mut pairs = Vec::new();
    for s in &entry.sightings {
        let token = s.token.as_deref().ok_or_else(|| {
            Error::Series(format!(
                "sensor {}: token matching needs tokenized sightings",
                entry.sensor_id
            ))
        })?;
        if let Some(times) = exit_idx.get(token) {
            let at = times.partition_point(|t| *t <= s.t_s);
            if at < times.len() {
                pairs.push((s.t_s, times[at]));
            }
        }
    }
    Ok(pairs)
}

/// How a series is smoothed: trailing window length and flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothingSpec {
    /// Preceding intervals included alongside the current one.
    pub k: usize,
    pub kind: SmoothingKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingKind {
    MovingAverage,
    WeightedMovingAverage,
}

impl SmoothingSpec {
    /// Apply this smoother. Weighted smoothing requires a weight series on
    /// the same grid.
    pub fn apply(
        &self,
        series: &SampledSeries,
        weights: Option<&SampledSeries>,
    ) -> Result<SampledSeries> {
        match self.kind {
            SmoothingKind::MovingAverage => moving_average(series, self.k),
            SmoothingKind::WeightedMovingAverage => {
                let w = weights.ok_or_else(|| {
                    Error::Config("weighted smoothing needs a weight series".into())
                })?;
                weighted_moving_average(series, w, self.k)
            }
        }
    }
}
