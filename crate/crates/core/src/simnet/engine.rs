//! Arrival generation and the point-queue delay model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::IntervalGrid;
use crate::simnet::{DemandProfile, Phase, PhaseLog, ScenarioConfig, SignalPlan};
use crate::types::{RouteId, VehicleTrace};

/// RNG stream offset for per-route arrival processes. Keeps arrival draws for
/// one route unaffected by changes to any other route's demand.
const ARRIVAL_STREAM_BASE: u64 = 10_000;

/// Round a timestamp to whole milliseconds.
pub fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

/// A single passage over a loop detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Actuation {
    pub detector_id: String,
    pub t_s: f64,
}

/// Everything the generator produces for one scenario run.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub traces: Vec<VehicleTrace>,
    pub loops: Vec<super::LoopRecord>,
    pub phases: Vec<PhaseLog>,
    pub warnings: Vec<String>,
}

/// Draw arrival times for one route over the scenario horizon from a
/// time-inhomogeneous Poisson process, by thinning against the profile's
/// maximum rate. Returns sorted times in `[start, end)`, not yet rounded.
pub fn arrivals(profile: &DemandProfile, grid: &IntervalGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lambda_max = profile.max_rate() / 3600.0;
    let mut out = Vec::new();
    if lambda_max <= 0.0 {
        return out;
    }
    let end = grid.end_s();
    let mut t = grid.start_s;
    loop {
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / lambda_max;
        if t >= end {
            break;
        }
        let accept: f64 = rng.gen();
        if accept * lambda_max < profile.rate_at(t) / 3600.0 {
            out.push(t);
        }
    }
    out
}

/// Departure times for a FIFO point queue at a signalized stop line.
///
/// `stop_arrivals` are the times vehicles reach the stop line, sorted
/// ascending. Each vehicle leaves at the earliest green instant that is at
/// least one saturation headway after the previous departure. Without a
/// signal plan the queue is unconstrained and vehicles pass through.
pub fn point_queue_departures(stop_arrivals: &[f64], plan: Option<&SignalPlan>) -> Vec<f64> {
    let plan = match plan {
        Some(p) => p,
        None => return stop_arrivals.to_vec(),
    };
    let mut out = Vec::with_capacity(stop_arrivals.len());
    let mut prev_dep = f64::NEG_INFINITY;
    for &arr in stop_arrivals {
        debug_assert!(arr >= *stop_arrivals.first().unwrap());
        let earliest = if prev_dep.is_finite() {
            arr.max(prev_dep + plan.saturation_headway_s)
        } else {
            arr
        };
        let dep = plan.next_green(earliest);
        out.push(dep);
        prev_dep = dep;
    }
    out
}

/// Run the generator: arrivals, signal delay, loop logs, and phase logs.
/// Fully determined by the scenario (including its seed).
pub fn simulate(cfg: &ScenarioConfig) -> crate::error::Result<SimOutput> {
    cfg.validate()?;
    let mut traces: Vec<VehicleTrace> = Vec::new();
    let mut warnings = Vec::new();

    let mut route_ids: Vec<RouteId> = cfg.routes.iter().map(|r| r.id).collect();
    route_ids.sort_unstable();

    for rid in route_ids {
        let route = cfg.route(rid).unwrap();
        let profile = cfg.demand.iter().find(|d| d.route_id == rid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(ARRIVAL_STREAM_BASE + rid as u64);

        let t_ins: Vec<f64> = arrivals(profile, &cfg.grid, &mut rng)
            .into_iter()
            .map(round_ms)
            .collect();
        let stop_arrivals: Vec<f64> = t_ins
            .iter()
            .map(|t| round_ms(t + route.free_flow_time_s))
            .collect();
        let plan = cfg.plan_for_route(rid);
        let departures = point_queue_departures(&stop_arrivals, plan);

        let mut max_delay = 0.0f64;
        for (seq, (&t_in, &dep)) in t_ins.iter().zip(departures.iter()).enumerate() {
            let t_out = round_ms(dep);
            max_delay = max_delay.max(t_out - round_ms(t_in + route.free_flow_time_s));
            traces.push(VehicleTrace {
                vehicle_id: format!("v{rid}-{seq:04}"),
                route_id: rid,
                t_in_s: t_in,
                t_out_s: t_out,
            });
        }
        if max_delay > 300.0 {
            warnings.push(format!(
                "route {rid}: max signal delay {max_delay:.1}s exceeds 300s; demand may exceed discharge capacity"
            ));
        }
    }

    traces.sort_by(|a, b| {
        a.t_in_s
            .partial_cmp(&b.t_in_s)
            .unwrap()
            .then(a.route_id.cmp(&b.route_id))
            .then(a.vehicle_id.cmp(&b.vehicle_id))
    });

    let loops = loop_logs(cfg, &traces);
    let phases = phase_log(cfg);
    Ok(SimOutput {
        traces,
        loops,
        phases,
        warnings,
    })
}

/// Time at which a vehicle passes a detector at fractional `position` along
/// its route. The stop bar (position 1.0) is crossed at the departure time;
/// upstream positions are reached in proportion to free-flow time.
pub fn crossing_time(trace: &VehicleTrace, free_flow_time_s: f64, position: f64) -> f64 {
    if position >= 1.0 {
        trace.t_out_s
    } else {
        round_ms(trace.t_in_s + position * free_flow_time_s)
    }
}

/// Aggregate per-interval loop detector logs from vehicle traces. Every
/// detector emits a record for every interval, zeros included.
pub fn loop_logs(cfg: &ScenarioConfig, traces: &[VehicleTrace]) -> Vec<super::LoopRecord> {
    let grid = &cfg.grid;
    let n = grid.num_intervals();
    let mut out = Vec::with_capacity(cfg.detectors.len() * n);
    for det in &cfg.detectors {
        let route = cfg.route(det.route_id).unwrap();
        let mut counts = vec![0u32; n];
        let mut occupied = vec![0.0f64; n];
        for tr in traces.iter().filter(|t| t.route_id == det.route_id) {
            let t_c = crossing_time(tr, route.free_flow_time_s, det.position);
            if grid.contains(t_c) {
                let i = grid.interval_of(t_c).unwrap();
                counts[i] += 1;
            }
            let span_end = t_c + det.occupied_s_per_vehicle;
            if span_end <= grid.start_s || t_c >= grid.end_s() {
                continue;
            }
            let mut i = grid.interval_of(t_c.max(grid.start_s)).unwrap();
            loop {
                let (a, b) = grid.interval_bounds(i);
                let overlap = (span_end.min(b) - t_c.max(a)).max(0.0);
                occupied[i] += overlap;
                if span_end <= b || i + 1 >= n {
                    break;
                }
                i += 1;
            }
        }
        for i in 0..n {
            let pct = (occupied[i] / grid.interval_s * 100.0).clamp(0.0, 100.0);
            out.push(super::LoopRecord {
                detector_id: det.detector_id.clone(),
                interval_index: i,
                count: counts[i],
                occupancy_pct: pct,
            });
        }
    }
    out
}

/// Individual detector passages within the horizon, sorted per detector by
/// time. Feeds headway-style features that need event-level data.
pub fn actuations(cfg: &ScenarioConfig, traces: &[VehicleTrace]) -> Vec<Actuation> {
    let mut out = Vec::new();
    for det in &cfg.detectors {
        let route = cfg.route(det.route_id).unwrap();
        let mut times: Vec<f64> = traces
            .iter()
            .filter(|t| t.route_id == det.route_id)
            .map(|t| crossing_time(t, route.free_flow_time_s, det.position))
            .filter(|t| cfg.grid.contains(*t))
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.extend(times.into_iter().map(|t_s| Actuation {
            detector_id: det.detector_id.clone(),
            t_s,
        }));
    }
    out
}

/// Phase transition logs for every controller over the horizon. The first
/// entry per controller is the change most recently in force at the scenario
/// start, so its timestamp may precede the horizon.
pub fn phase_log(cfg: &ScenarioConfig) -> Vec<PhaseLog> {
    let grid = &cfg.grid;
    let end = grid.end_s();
    let mut out = Vec::with_capacity(cfg.signals.len());
    for plan in &cfg.signals {
        // Change points are green onsets (offset + k*cycle) and green ends
        // (offset + k*cycle + green). Start one cycle early to find the
        // change in force at the horizon start.
        let mut transitions: Vec<(f64, Phase)> = Vec::new();
        let k0 = ((grid.start_s - plan.offset_s) / plan.cycle_s).floor() - 1.0;
        let mut k = k0;
        loop {
            let onset = plan.offset_s + k * plan.cycle_s;
            if onset >= end {
                break;
            }
            transitions.push((round_ms(onset), Phase::Green));
            transitions.push((round_ms(onset + plan.green_s), Phase::Red));
            k += 1.0;
        }
        let first_in_force = transitions
            .iter()
            .rposition(|(t, _)| *t <= grid.start_s)
            .unwrap_or(0);
        let kept: Vec<(f64, Phase)> = transitions
            .into_iter()
            .skip(first_in_force)
            .filter(|(t, _)| *t < end)
            .collect();
        let log = PhaseLog {
            controller_id: plan.controller_id.clone(),
            transitions: kept,
        };
        debug_assert!(log.validate().is_ok());
        out.push(log);
    }
    out
}
