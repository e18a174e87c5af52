//! Synthetic ground-truth generator: a three-approach intersection area with
//! five signal controllers, Poisson arrivals against piecewise-linear demand
//! profiles, and a deterministic point-queue delay model. Produces vehicle
//! traces, loop detector logs, and signal phase logs.

mod engine;

pub use engine::{actuations, loop_logs, phase_log, point_queue_departures, simulate, Actuation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::IntervalGrid;
use crate::sensors::SensorParams;
use crate::types::{Approach, Route, RouteId, Spot, SpotId};

/// Signal phase seen by a route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Green,
    Red,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Green => "GREEN",
            Phase::Red => "RED",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "GREEN" => Ok(Phase::Green),
            "RED" => Ok(Phase::Red),
            other => Err(format!("unknown phase '{other}'")),
        }
    }
}

/// Fixed-time signal plan for one controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPlan {
    pub controller_id: String,
    pub cycle_s: f64,
    pub green_s: f64,
    pub offset_s: f64,
    pub served_routes: Vec<RouteId>,
    /// Discharge headway at the stop line during green, seconds per vehicle.
    pub saturation_headway_s: f64,
}

impl SignalPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.green_s > 0.0 && self.green_s < self.cycle_s) {
            return Err(Error::Config(format!(
                "controller {}: green must satisfy 0 < green < cycle",
                self.controller_id
            )));
        }
        if !(self.saturation_headway_s > 0.0) {
            return Err(Error::Config(format!(
                "controller {}: saturation headway must be positive",
                self.controller_id
            )));
        }
        Ok(())
    }

    /// True when the signal shows green at time `t`.
    pub fn is_green(&self, t: f64) -> bool {
        (t - self.offset_s).rem_euclid(self.cycle_s) < self.green_s
    }

    /// Earliest time `>= t` at which the signal is green.
    pub fn next_green(&self, t: f64) -> f64 {
        let phase = (t - self.offset_s).rem_euclid(self.cycle_s);
        if phase < self.green_s {
            t
        } else {
            t + (self.cycle_s - phase)
        }
    }
}

/// Loop detector placed along a route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub detector_id: String,
    pub route_id: RouteId,
    /// Fraction of the route at which the detector sits, in [0, 1].
    /// Position 1.0 is the stop bar; passage happens at the departure time.
    pub position: f64,
    /// Occupied duration the detector registers per passage, seconds.
    pub occupied_s_per_vehicle: f64,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.position) {
            return Err(Error::Config(format!(
                "detector {}: position must lie in [0, 1]",
                self.detector_id
            )));
        }
        if self.occupied_s_per_vehicle < 0.0 {
            return Err(Error::Config(format!(
                "detector {}: occupied duration must be non-negative",
                self.detector_id
            )));
        }
        Ok(())
    }
}

/// Aggregated loop detector measurement for one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub detector_id: String,
    pub interval_index: usize,
    pub count: u32,
    /// Percentage of the interval the detector was occupied, [0, 100].
    pub occupancy_pct: f64,
}

/// Signal phase transitions of one controller. The first entry is the phase
/// in force at (or before) the scenario start; later entries are onsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLog {
    pub controller_id: String,
    pub transitions: Vec<(f64, Phase)>,
}

impl PhaseLog {
    pub fn validate(&self) -> Result<()> {
        for w in self.transitions.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Series(format!(
                    "phase log {}: timestamps not strictly increasing",
                    self.controller_id
                )));
            }
            if w[1].1 == w[0].1 {
                return Err(Error::Series(format!(
                    "phase log {}: phases do not alternate",
                    self.controller_id
                )));
            }
        }
        Ok(())
    }

    /// Phase in force at time `t`. Transitions are half-open: a transition at
    /// `t0` applies from `t0` onward.
    pub fn phase_at(&self, t: f64) -> Option<Phase> {
        let idx = self.transitions.partition_point(|(ts, _)| *ts <= t);
        if idx == 0 {
            None
        } else {
            Some(self.transitions[idx - 1].1)
        }
    }
}

/// Piecewise-linear arrival rate profile for one route, veh/h over absolute
/// scenario time. Rates between breakpoints are linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub route_id: RouteId,
    /// Breakpoints as `[t_s, rate_veh_per_h]`, sorted by time.
    pub profile: Vec<(f64, f64)>,
}

impl DemandProfile {
    pub fn validate(&self, grid: &IntervalGrid) -> Result<()> {
        if self.profile.is_empty() {
            return Err(Error::Config(format!(
                "route {}: empty demand profile",
                self.route_id
            )));
        }
        for w in self.profile.windows(2) {
            if w[1].0 < w[0].0 {
                return Err(Error::Config(format!(
                    "route {}: demand breakpoints not sorted",
                    self.route_id
                )));
            }
        }
        for (_, r) in &self.profile {
            if !r.is_finite() || *r < 0.0 {
                return Err(Error::Config(format!(
                    "route {}: arrival rates must be non-negative",
                    self.route_id
                )));
            }
        }
        if grid.horizon_s > 0.0 {
            let first = self.profile.first().unwrap().0;
            let last = self.profile.last().unwrap().0;
            if first > grid.start_s || last < grid.end_s() {
                return Err(Error::Config(format!(
                    "route {}: demand profile does not cover the horizon",
                    self.route_id
                )));
            }
        }
        Ok(())
    }

    /// Interpolated arrival rate at `t`, veh/h.
    pub fn rate_at(&self, t: f64) -> f64 {
        let pts = &self.profile;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        if t >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let hi = pts.partition_point(|(ts, _)| *ts <= t);
        let (t0, r0) = pts[hi - 1];
        let (t1, r1) = pts[hi];
        if t1 == t0 {
            r1
        } else {
            r0 + (r1 - r0) * (t - t0) / (t1 - t0)
        }
    }

    pub fn max_rate(&self) -> f64 {
        self.profile.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }
}

/// Full scenario description consumed by `simulate` and the sensor layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub grid: IntervalGrid,
    pub spots: Vec<Spot>,
    pub routes: Vec<Route>,
    pub demand: Vec<DemandProfile>,
    pub signals: Vec<SignalPlan>,
    pub detectors: Vec<DetectorConfig>,
    pub sensors: SensorParams,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let mut spot_ids: Vec<SpotId> = self.spots.iter().map(|s| s.id).collect();
        spot_ids.sort_unstable();
        spot_ids.dedup();
        if spot_ids.len() != self.spots.len() {
            return Err(Error::Config("duplicate spot ids".into()));
        }
        let mut route_ids: Vec<RouteId> = self.routes.iter().map(|r| r.id).collect();
        route_ids.sort_unstable();
        route_ids.dedup();
        if route_ids.len() != self.routes.len() {
            return Err(Error::Config("duplicate route ids".into()));
        }
        for r in &self.routes {
            r.validate()?;
            if !spot_ids.contains(&r.entry_spot) || !spot_ids.contains(&r.exit_spot) {
                return Err(Error::Config(format!(
                    "route {} references an unknown spot",
                    r.id
                )));
            }
        }
        for d in &self.demand {
            d.validate(&self.grid)?;
            if !route_ids.contains(&d.route_id) {
                return Err(Error::Config(format!(
                    "demand profile references unknown route {}",
                    d.route_id
                )));
            }
        }
        for r in &self.routes {
            if !self.demand.iter().any(|d| d.route_id == r.id) {
                return Err(Error::Config(format!("route {} has no demand profile", r.id)));
            }
        }
        for p in &self.signals {
            p.validate()?;
            for sr in &p.served_routes {
                if !route_ids.contains(sr) {
                    return Err(Error::Config(format!(
                        "controller {} serves unknown route {}",
                        p.controller_id, sr
                    )));
                }
            }
        }
        for r in &self.routes {
            let servers = self
                .signals
                .iter()
                .filter(|p| p.served_routes.contains(&r.id))
                .count();
            if servers > 1 {
                return Err(Error::Config(format!(
                    "route {} is served by more than one controller",
                    r.id
                )));
            }
        }
        for d in &self.detectors {
            d.validate()?;
            if !route_ids.contains(&d.route_id) {
                return Err(Error::Config(format!(
                    "detector {} references unknown route {}",
                    d.detector_id, d.route_id
                )));
            }
        }
        let mut det_ids: Vec<&str> = self.detectors.iter().map(|d| d.detector_id.as_str()).collect();
        det_ids.sort_unstable();
        det_ids.dedup();
        if det_ids.len() != self.detectors.len() {
            return Err(Error::Config("duplicate detector ids".into()));
        }
        self.sensors.validate(&self.spots, &self.grid)?;
        Ok(())
    }

    pub fn route(&self, id: RouteId) -> Option<&Route> {
        self.routes.iter().find(|r| r.id == id)
    }

    pub fn plan_for_route(&self, id: RouteId) -> Option<&SignalPlan> {
        self.signals.iter().find(|p| p.served_routes.contains(&id))
    }

    /// Routes entering at `spot` paired with routes exiting there.
    pub fn spot_usage(&self, spot: SpotId) -> (Vec<RouteId>, Vec<RouteId>) {
        let entries = self
            .routes
            .iter()
            .filter(|r| r.entry_spot == spot)
            .map(|r| r.id)
            .collect();
        let exits = self
            .routes
            .iter()
            .filter(|r| r.exit_spot == spot)
            .map(|r| r.id)
            .collect();
        (entries, exits)
    }

    /// Built-in two-hour scenario: three approaches, six spots, six routes,
    /// five controllers, demand ramping to a peak around minute 105. Route 3
    /// briefly exceeds its discharge capacity near the peak so travel times
    /// show a pronounced hump before recovering.
    pub fn default_fixture() -> Self {
        let grid = IntervalGrid {
            start_s: 0.0,
            horizon_s: 7200.0,
            interval_s: 60.0,
        };
        let spot = |id, approach, label: &str| Spot {
            id,
            approach,
            label: label.to_string(),
        };
        let spots = vec![
            spot(1, Approach::WB, "west inbound"),
            spot(2, Approach::WB, "west outbound"),
            spot(3, Approach::EB, "east inbound"),
            spot(4, Approach::EB, "east outbound"),
            spot(5, Approach::NB, "north inbound"),
            spot(6, Approach::NB, "north outbound"),
        ];
        let route = |id, entry, exit, fft| Route {
            id,
            entry_spot: entry,
            exit_spot: exit,
            free_flow_time_s: fft,
        };
        let routes = vec![
            route(1, 1, 4, 95.0),
            route(2, 1, 6, 80.0),
            route(3, 3, 2, 110.0),
            route(4, 3, 6, 70.0),
            route(5, 5, 2, 85.0),
            route(6, 5, 4, 75.0),
        ];
        let ramp = |base: f64, peak: f64, tail: f64| {
            vec![(0.0, base), (6300.0, peak), (7200.0, tail)]
        };
        let demand = vec![
            DemandProfile { route_id: 1, profile: ramp(140.0, 340.0, 160.0) },
            DemandProfile { route_id: 2, profile: ramp(60.0, 140.0, 70.0) },
            DemandProfile { route_id: 3, profile: ramp(600.0, 790.0, 620.0) },
            DemandProfile { route_id: 4, profile: ramp(70.0, 150.0, 80.0) },
            DemandProfile { route_id: 5, profile: ramp(90.0, 190.0, 90.0) },
            DemandProfile { route_id: 6, profile: ramp(80.0, 170.0, 80.0) },
        ];
        let plan = |id: &str, cycle, green, offset, served: Vec<RouteId>| SignalPlan {
            controller_id: id.to_string(),
            cycle_s: cycle,
            green_s: green,
            offset_s: offset,
            served_routes: served,
            saturation_headway_s: 2.0,
        };
        let signals = vec![
            plan("K1", 80.0, 34.0, 0.0, vec![1]),
            plan("K2", 80.0, 26.0, 10.0, vec![2]),
            plan("K3", 120.0, 65.0, 5.0, vec![3]),
            plan("K4", 80.0, 30.0, 15.0, vec![4]),
            plan("K5", 80.0, 28.0, 20.0, vec![5, 6]),
        ];
        let mut detectors = Vec::new();
        for r in &routes {
            detectors.push(DetectorConfig {
                detector_id: format!("D{}s", r.id),
                route_id: r.id,
                position: 1.0,
                occupied_s_per_vehicle: 0.5,
            });
            detectors.push(DetectorConfig {
                detector_id: format!("D{}a", r.id),
                route_id: r.id,
                position: 0.35,
                occupied_s_per_vehicle: 0.5,
            });
        }
        let sensors = SensorParams::default_fixture(&spots);
        Self {
            seed: 42,
            grid,
            spots,
            routes,
            demand,
            signals,
            detectors,
            sensors,
        }
    }

    /// Copy of the scenario with every sensor made lossless: all detection
    /// probabilities 1 and post-processing (smoothing, bias, quantization)
    /// neutralized. Useful as a closure check: every derived series must then
    /// match ground truth exactly.
    pub fn with_perfect_sensors(mut self) -> Self {
        self.sensors = SensorParams::perfect(&self.spots);
        self
    }
}
