//! Travel-time regression: feature extraction from detector and signal
//! data, least-squares fitting, and the sample/base/final model experiment.

mod experiment;
mod ols;

pub use experiment::{
    forward_select, prepare, run_experiment, ExperimentResult, ForwardSelection, ModelEval,
    PreparedData, SplitSpec,
};
pub use ols::{fit_ols, RegressionModel};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::IntervalGrid;
use crate::series::SampledSeries;
use crate::simnet::{Actuation, LoopRecord, Phase, PhaseLog, ScenarioConfig};
use crate::types::Route;

/// Raw per-interval quantity a feature is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSource {
    /// Mean probe-reported travel time of the interval, seconds.
    ProbeTt,
    /// Mean time gap between consecutive passages over a detector within
    /// one green window, seconds.
    HeadwayGreen,
    /// Detector passage count scaled to veh/h.
    ProgressedFlow,
    /// Mean detector occupancy, percent.
    AvgOccupancy,
    /// Number of phase onsets (green and red starts) of a controller in
    /// the interval.
    PhaseCount,
}

/// Final transform applied after window aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    None,
    /// `ln(x + 0.1)`; the offset keeps zero-valued inputs finite.
    Log,
}

impl std::fmt::Display for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Transform::None => "none",
            Transform::Log => "log",
        })
    }
}

impl Transform {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Transform::None => x,
            Transform::Log => (x + 0.1).ln(),
        }
    }
}

/// One regression feature: a raw source, a trailing aggregation window
/// (in samples, 1 = no aggregation), and a transform.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub source: FeatureSource,
    pub transform: Transform,
    pub window: usize,
    /// Detector ids feeding detector-based sources.
    pub detectors: Vec<String>,
    /// Controller id for signal-based sources.
    pub controller: Option<String>,
}

/// Data the extractor draws on.
pub struct FeatureInputs<'a> {
    pub grid: &'a IntervalGrid,
    pub loops: &'a [LoopRecord],
    pub actuations: &'a [Actuation],
    pub phases: &'a [PhaseLog],
    /// Raw per-interval mean probe travel times.
    pub probe_tt_s: &'a SampledSeries,
}

/// Extracted feature columns over the interval grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    /// One column per name, one entry per interval.
    pub columns: Vec<Vec<Option<f64>>>,
    pub num_intervals: usize,
}

impl FeatureMatrix {
    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }
}

fn loops_by_detector<'a>(
    loops: &'a [LoopRecord],
    wanted: &[String],
) -> BTreeMap<&'a str, Vec<&'a LoopRecord>> {
    let mut map: BTreeMap<&str, Vec<&LoopRecord>> = BTreeMap::new();
    for r in loops {
        if wanted.iter().any(|w| w == &r.detector_id) {
            map.entry(r.detector_id.as_str()).or_default().push(r);
        }
    }
    map
}

/// Index of the phase transition in force at `t`, when any.
fn transition_index(log: &PhaseLog, t: f64) -> Option<usize> {
    let idx = log.transitions.partition_point(|(ts, _)| *ts <= t);
    if idx == 0 {
        None
    } else {
        Some(idx - 1)
    }
}

fn raw_source_values(
    spec: &FeatureSpec,
    inputs: &FeatureInputs,
) -> Result<Vec<Option<f64>>> {
    let grid = inputs.grid;
    let n = grid.num_intervals();
    match spec.source {
        FeatureSource::ProbeTt => {
            if inputs.probe_tt_s.grid() != grid {
                return Err(Error::GridMismatch(
                    "probe travel-time series is on a different grid".into(),
                ));
            }
            Ok(inputs.probe_tt_s.values().to_vec())
        }
        FeatureSource::ProgressedFlow => {
            require_detectors(spec)?;
            let by_det = loops_by_detector(inputs.loops, &spec.detectors);
            check_detectors_found(spec, &by_det)?;
            let mut counts = vec![0u64; n];
            for recs in by_det.values() {
                for r in recs.iter() {
                    if r.interval_index < n {
                        counts[r.interval_index] += r.count as u64;
                    }
                }
            }
            let scale = 3600.0 / grid.interval_s;
            Ok(counts.iter().map(|c| Some(*c as f64 * scale)).collect())
        }
        FeatureSource::AvgOccupancy => {
            require_detectors(spec)?;
            let by_det = loops_by_detector(inputs.loops, &spec.detectors);
            check_detectors_found(spec, &by_det)?;
            let mut sums = vec![0.0f64; n];
            let mut cnts = vec![0u32; n];
            for recs in by_det.values() {
                for r in recs.iter() {
                    if r.interval_index < n {
                        sums[r.interval_index] += r.occupancy_pct;
                        cnts[r.interval_index] += 1;
                    }
                }
            }
            Ok((0..n)
                .map(|i| {
                    if cnts[i] > 0 {
                        Some(sums[i] / cnts[i] as f64)
                    } else {
                        None
                    }
                })
                .collect())
        }
        FeatureSource::HeadwayGreen => {
            require_detectors(spec)?;
            let controller = spec.controller.as_deref().ok_or_else(|| {
                Error::Config(format!("feature {}: headway needs a controller", spec.name))
            })?;
            let log = inputs
                .phases
                .iter()
                .find(|p| p.controller_id == controller)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "feature {}: controller {controller} has no phase log",
                        spec.name
                    ))
                })?;
            let mut sums = vec![0.0f64; n];
            let mut cnts = vec![0u32; n];
            for det in &spec.detectors {
                let times: Vec<f64> = inputs
                    .actuations
                    .iter()
                    .filter(|a| &a.detector_id == det)
                    .map(|a| a.t_s)
                    .collect();
                for w in times.windows(2) {
                    let (t1, t2) = (w[0], w[1]);
                    let i1 = transition_index(log, t1);
                    let i2 = transition_index(log, t2);
                    let same_green = match (i1, i2) {
                        (Some(a), Some(b)) => a == b && log.transitions[a].1 == Phase::Green,
                        _ => false,
                    };
                    if same_green && grid.contains(t2) {
                        let idx = grid.interval_of(t2)?;
                        sums[idx] += t2 - t1;
                        cnts[idx] += 1;
                    }
                }
            }
            Ok((0..n)
                .map(|i| {
                    if cnts[i] > 0 {
                        Some(sums[i] / cnts[i] as f64)
                    } else {
                        None
                    }
                })
                .collect())
        }
        FeatureSource::PhaseCount => {
            let controller = spec.controller.as_deref().ok_or_else(|| {
                Error::Config(format!(
                    "feature {}: phase count needs a controller",
                    spec.name
                ))
            })?;
            let log = inputs
                .phases
                .iter()
                .find(|p| p.controller_id == controller)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "feature {}: controller {controller} has no phase log",
                        spec.name
                    ))
                })?;
            let mut counts = vec![0u32; n];
            for (t, _phase) in &log.transitions {
                if grid.contains(*t) {
                    counts[grid.interval_of(*t)?] += 1;
                }
            }
            Ok(counts.iter().map(|c| Some(*c as f64)).collect())
        }
    }
}

fn require_detectors(spec: &FeatureSpec) -> Result<()> {
    if spec.detectors.is_empty() {
        return Err(Error::Config(format!(
            "feature {}: no detectors named",
            spec.name
        )));
    }
    Ok(())
}

fn check_detectors_found(
    spec: &FeatureSpec,
    by_det: &BTreeMap<&str, Vec<&LoopRecord>>,
) -> Result<()> {
    for d in &spec.detectors {
        if !by_det.contains_key(d.as_str()) {
            return Err(Error::Config(format!(
                "feature {}: detector {d} has no loop records",
                spec.name
            )));
        }
    }
    Ok(())
}

/// Trailing mean over the last `window` samples (present ones only), then
/// the transform. A window with no present samples stays missing.
fn aggregate(raw: &[Option<f64>], window: usize, transform: Transform) -> Vec<Option<f64>> {
    let w = window.max(1);
    (0..raw.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            let mut sum = 0.0;
            let mut cnt = 0usize;
            for v in raw[lo..=i].iter().flatten() {
                sum += v;
                cnt += 1;
            }
            if cnt > 0 {
                Some(transform.apply(sum / cnt as f64))
            } else {
                None
            }
        })
        .collect()
}

/// Build the feature matrix for a set of specs. Names must be unique.
pub fn extract_features(specs: &[FeatureSpec], inputs: &FeatureInputs) -> Result<FeatureMatrix> {
    let mut names: Vec<String> = Vec::with_capacity(specs.len());
    let mut columns = Vec::with_capacity(specs.len());
    for spec in specs {
        if names.contains(&spec.name) {
            return Err(Error::Config(format!(
                "duplicate feature name '{}'",
                spec.name
            )));
        }
        if spec.window == 0 {
            return Err(Error::Config(format!(
                "feature {}: window must be at least 1",
                spec.name
            )));
        }
        let raw = raw_source_values(spec, inputs)?;
        columns.push(aggregate(&raw, spec.window, spec.transform));
        names.push(spec.name.clone());
    }
    Ok(FeatureMatrix {
        names,
        columns,
        num_intervals: inputs.grid.num_intervals(),
    })
}

/// Default feature set for one route: the mandatory probe feature plus the
/// detector- and signal-based candidates the selector may add.
pub fn default_feature_specs(
    cfg: &ScenarioConfig,
    route: &Route,
) -> (FeatureSpec, Vec<FeatureSpec>) {
    let stop: Vec<String> = cfg
        .detectors
        .iter()
        .filter(|d| d.route_id == route.id && d.position >= 1.0)
        .map(|d| d.detector_id.clone())
        .collect();
    let advance: Vec<String> = cfg
        .detectors
        .iter()
        .filter(|d| d.route_id == route.id && d.position < 1.0)
        .map(|d| d.detector_id.clone())
        .collect();
    let controller = cfg
        .plan_for_route(route.id)
        .map(|p| p.controller_id.clone());
    let probe = FeatureSpec {
        name: "probe_tt".into(),
        source: FeatureSource::ProbeTt,
        transform: Transform::Log,
        window: 1,
        detectors: Vec::new(),
        controller: None,
    };
    let mut candidates = Vec::new();
    let mut push = |name: &str, source: FeatureSource, detectors: Vec<String>, ctrl: bool| {
        candidates.push(FeatureSpec {
            name: name.into(),
            source,
            transform: Transform::Log,
            window: 1,
            detectors,
            controller: if ctrl { controller.clone() } else { None },
        });
    };
    if !stop.is_empty() {
        if controller.is_some() {
            push("headway_green", FeatureSource::HeadwayGreen, stop.clone(), true);
        }
        push("flow_stop", FeatureSource::ProgressedFlow, stop.clone(), false);
        push("occ_stop", FeatureSource::AvgOccupancy, stop.clone(), false);
    }
    if !advance.is_empty() {
        push("flow_advance", FeatureSource::ProgressedFlow, advance.clone(), false);
        push("occ_advance", FeatureSource::AvgOccupancy, advance, false);
    }
    if controller.is_some() {
        push("phase_changes", FeatureSource::PhaseCount, Vec::new(), true);
    }
    (probe, candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Unit;

    fn grid(n: usize) -> IntervalGrid {
        IntervalGrid {
            start_s: 0.0,
            horizon_s: 60.0 * n as f64,
            interval_s: 60.0,
        }
    }

    fn probe_series(grid: &IntervalGrid, values: Vec<Option<f64>>) -> SampledSeries {
        SampledSeries::new(*grid, values, Unit::Seconds).unwrap()
    }

    #[test]
    fn headway_mean_within_one_green_window() {
        // Actuations at 0, 2, 4 inside one green: gaps 2 and 2, mean 2,
        // log-transformed to ln(2.1).
        let g = grid(1);
        let phases = vec![PhaseLog {
            controller_id: "K".into(),
            transitions: vec![(0.0, Phase::Green), (30.0, Phase::Red)],
        }];
        let actuations: Vec<Actuation> = [0.0, 2.0, 4.0]
            .iter()
            .map(|t| Actuation {
                detector_id: "D".into(),
                t_s: *t,
            })
            .collect();
        let probe = probe_series(&g, vec![None]);
        let inputs = FeatureInputs {
            grid: &g,
            loops: &[LoopRecord {
                detector_id: "D".into(),
                interval_index: 0,
                count: 3,
                occupancy_pct: 1.0,
            }],
            actuations: &actuations,
            phases: &phases,
            probe_tt_s: &probe,
        };
        let spec = FeatureSpec {
            name: "headway_green".into(),
            source: FeatureSource::HeadwayGreen,
            transform: Transform::Log,
            window: 1,
            detectors: vec!["D".into()],
            controller: Some("K".into()),
        };
        let m = extract_features(&[spec], &inputs).unwrap();
        let v = m.column("headway_green").unwrap()[0].unwrap();
        assert!((v - 2.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn headway_ignores_gaps_spanning_red() {
        // Green [0, 10), red from 10. Actuations at 8 and 12 straddle the
        // red onset; at 12 and 14 both fall in red. No usable gap.
        let g = grid(1);
        let phases = vec![PhaseLog {
            controller_id: "K".into(),
            transitions: vec![(0.0, Phase::Green), (10.0, Phase::Red)],
        }];
        let actuations: Vec<Actuation> = [8.0, 12.0, 14.0]
            .iter()
            .map(|t| Actuation {
                detector_id: "D".into(),
                t_s: *t,
            })
            .collect();
        let probe = probe_series(&g, vec![None]);
        let inputs = FeatureInputs {
            grid: &g,
            loops: &[LoopRecord {
                detector_id: "D".into(),
                interval_index: 0,
                count: 3,
                occupancy_pct: 1.0,
            }],
            actuations: &actuations,
            phases: &phases,
            probe_tt_s: &probe,
        };
        let spec = FeatureSpec {
            name: "hw".into(),
            source: FeatureSource::HeadwayGreen,
            transform: Transform::None,
            window: 1,
            detectors: vec!["D".into()],
            controller: Some("K".into()),
        };
        let m = extract_features(&[spec], &inputs).unwrap();
        assert_eq!(m.column("hw").unwrap()[0], None);
    }

    #[test]
    fn flow_and_occupancy_aggregate_loop_records() {
        let g = grid(2);
        let loops = vec![
            LoopRecord {
                detector_id: "A".into(),
                interval_index: 0,
                count: 2,
                occupancy_pct: 4.0,
            },
            LoopRecord {
                detector_id: "A".into(),
                interval_index: 1,
                count: 1,
                occupancy_pct: 2.0,
            },
            LoopRecord {
                detector_id: "B".into(),
                interval_index: 0,
                count: 1,
                occupancy_pct: 6.0,
            },
            LoopRecord {
                detector_id: "B".into(),
                interval_index: 1,
                count: 0,
                occupancy_pct: 0.0,
            },
        ];
        let probe = probe_series(&g, vec![None, None]);
        let inputs = FeatureInputs {
            grid: &g,
            loops: &loops,
            actuations: &[],
            phases: &[],
            probe_tt_s: &probe,
        };
        let specs = vec![
            FeatureSpec {
                name: "flow".into(),
                source: FeatureSource::ProgressedFlow,
                transform: Transform::None,
                window: 1,
                detectors: vec!["A".into(), "B".into()],
                controller: None,
            },
            FeatureSpec {
                name: "occ".into(),
                source: FeatureSource::AvgOccupancy,
                transform: Transform::None,
                window: 1,
                detectors: vec!["A".into(), "B".into()],
                controller: None,
            },
        ];
        let m = extract_features(&specs, &inputs).unwrap();
        // 3 and 1 passages over two detectors, scaled by 3600/60.
        assert_eq!(m.column("flow").unwrap(), &[Some(180.0), Some(60.0)]);
        assert_eq!(m.column("occ").unwrap(), &[Some(5.0), Some(1.0)]);
    }

    #[test]
    fn window_aggregation_precedes_transform() {
        let g = grid(3);
        let probe = probe_series(&g, vec![Some(10.0), Some(20.0), Some(30.0)]);
        let inputs = FeatureInputs {
            grid: &g,
            loops: &[],
            actuations: &[],
            phases: &[],
            probe_tt_s: &probe,
        };
        let spec = FeatureSpec {
            name: "p".into(),
            source: FeatureSource::ProbeTt,
            transform: Transform::Log,
            window: 2,
            detectors: Vec::new(),
            controller: None,
        };
        let m = extract_features(&[spec], &inputs).unwrap();
        let col = m.column("p").unwrap();
        // Means 10, 15, 25; transform applies after the mean.
        assert!((col[0].unwrap() - 10.1f64.ln()).abs() < 1e-12);
        assert!((col[1].unwrap() - 15.1f64.ln()).abs() < 1e-12);
        assert!((col[2].unwrap() - 25.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn missing_probe_values_stay_missing() {
        let g = grid(3);
        let probe = probe_series(&g, vec![None, Some(20.0), None]);
        let inputs = FeatureInputs {
            grid: &g,
            loops: &[],
            actuations: &[],
            phases: &[],
            probe_tt_s: &probe,
        };
        let spec = FeatureSpec {
            name: "p".into(),
            source: FeatureSource::ProbeTt,
            transform: Transform::None,
            window: 1,
            detectors: Vec::new(),
            controller: None,
        };
        let m = extract_features(&[spec], &inputs).unwrap();
        assert_eq!(m.column("p").unwrap(), &[None, Some(20.0), None]);
    }

    #[test]
    fn phase_changes_count_every_onset_per_interval() {
        let g = grid(2);
        let phases = vec![PhaseLog {
            controller_id: "K".into(),
            transitions: vec![
                (-10.0, Phase::Red),
                (5.0, Phase::Green),
                (25.0, Phase::Red),
                (45.0, Phase::Green),
                (65.0, Phase::Red),
                (105.0, Phase::Green),
            ],
        }];
        let probe = probe_series(&g, vec![None, None]);
        let inputs = FeatureInputs {
            grid: &g,
            loops: &[],
            actuations: &[],
            phases: &phases,
            probe_tt_s: &probe,
        };
        let spec = FeatureSpec {
            name: "gs".into(),
            source: FeatureSource::PhaseCount,
            transform: Transform::None,
            window: 1,
            detectors: Vec::new(),
            controller: Some("K".into()),
        };
        let m = extract_features(&[spec], &inputs).unwrap();
        // Onsets at 5 (G), 25 (R), 45 (G) in interval 0; 65 (R), 105 (G)
        // in interval 1. The pre-horizon onset at -10 is not counted.
        assert_eq!(m.column("gs").unwrap(), &[Some(3.0), Some(2.0)]);
    }

    #[test]
    fn default_specs_cover_route_detectors() {
        let cfg = ScenarioConfig::default_fixture();
        let route = cfg.route(3).unwrap();
        let (probe, candidates) = default_feature_specs(&cfg, route);
        assert_eq!(probe.name, "probe_tt");
        let names: Vec<&str> = candidates.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "headway_green",
                "flow_stop",
                "occ_stop",
                "flow_advance",
                "occ_advance",
                "phase_changes"
            ]
        );
        assert_eq!(probe.window, 1);
        for c in &candidates {
            assert_eq!(c.window, 1, "candidates are per-interval aggregates");
        }
    }
}
