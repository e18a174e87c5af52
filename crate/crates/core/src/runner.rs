//! Stage orchestration over one scenario: run the sensor emulators on ground
//! truth, derive every interval series, assemble the assessment report, and
//! run the travel-time estimation experiment.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::{mape, pcc, ReportRow, Source};
use crate::mlr::{
    default_feature_specs, extract_features, run_experiment, ExperimentResult, FeatureInputs,
    FeatureSpec, SplitSpec,
};
use crate::pipeline::{
    flow_series, match_route, moving_average, route_pairs, sighting_times, spot_crossing_times,
    travel_time_series, weighted_moving_average, TravelTimeAssignment, TravelTimeDiag,
};
use crate::sensors::{
    aggregate_feed, counting_sensors, mac_sensors, matching_rate, plate_sensors, probe_sample,
};
use crate::series::SampledSeries;
use crate::simnet::{actuations, LoopRecord, PhaseLog, ScenarioConfig};
use crate::types::{DetectionSet, Route, RouteId, SpotId, VehicleTrace};

/// Options shared by the derivation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOptions {
    /// Trailing smoothing window: the current interval plus `k` predecessors.
    pub k: usize,
    /// Probe reporting rate; None keeps the scenario's configured rate.
    pub probe_rate: Option<f64>,
    /// Interval attribution of traversals.
    pub assignment: TravelTimeAssignment,
}

impl Default for StageOptions {
    fn default() -> Self {
        Self {
            k: 10,
            probe_rate: None,
            assignment: TravelTimeAssignment::ByExit,
        }
    }
}

/// Everything the derivation stage produces.
#[derive(Debug, Clone)]
pub struct DeriveOutput {
    /// Counting, plate, and address detection sets, in that family order.
    pub detections: Vec<DetectionSet>,
    /// The probe subsample of the ground-truth traces.
    pub probe_traces: Vec<VehicleTrace>,
    /// Every derived interval series, keyed by series id.
    pub series: BTreeMap<String, SampledSeries>,
    /// Diagnostics tallies, in a fixed row order.
    pub diagnostics: Vec<(String, String)>,
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt(x),
        None => "NA".to_string(),
    }
}

fn find_set<'a>(sets: &'a [DetectionSet], id: &str) -> &'a DetectionSet {
    sets.iter()
        .find(|s| s.sensor_id == id)
        .expect("sensor set built in this stage")
}

fn sorted_spots(cfg: &ScenarioConfig) -> Vec<SpotId> {
    let mut ids: Vec<SpotId> = cfg.spots.iter().map(|s| s.id).collect();
    ids.sort_unstable();
    ids
}

fn sorted_routes(cfg: &ScenarioConfig) -> Vec<&Route> {
    let mut routes: Vec<&Route> = cfg.routes.iter().collect();
    routes.sort_by_key(|r| r.id);
    routes
}

fn push_tt_diag(diag: &mut Vec<(String, String)>, label: &str, pairs: usize, d: &TravelTimeDiag) {
    diag.push((format!("{label}.pairs"), pairs.to_string()));
    diag.push((
        format!("{label}.rejected_nonpositive"),
        d.rejected_nonpositive.to_string(),
    ));
    diag.push((
        format!("{label}.skipped_out_of_grid"),
        d.skipped_out_of_grid.to_string(),
    ));
}

/// Run every sensor emulator and derive the full series set: per-spot flows
/// and matching rates for ground truth and both camera families, per-route
/// travel times for ground truth, plate matching, address matching (with the
/// vendor-side pre-smoothing), the aggregate feed, and the probe sample.
pub fn derive_all(
    cfg: &ScenarioConfig,
    traces: &[VehicleTrace],
    opts: &StageOptions,
) -> Result<DeriveOutput> {
    let grid = &cfg.grid;
    let params = &cfg.sensors;
    let probe_rate = opts.probe_rate.unwrap_or(params.probe_rate);
    if !(0.0..=1.0).contains(&probe_rate) {
        return Err(Error::Config("probe rate must lie in [0, 1]".into()));
    }

    let counting = counting_sensors(
        traces,
        &cfg.routes,
        &cfg.spots,
        params.count_detect_prob,
        cfg.seed,
    );
    let plates = plate_sensors(traces, &cfg.routes, &cfg.spots, params, cfg.seed);
    let macs = mac_sensors(
        traces,
        &cfg.routes,
        &cfg.spots,
        params.mac_penetration,
        cfg.seed,
    );
    let probes = probe_sample(traces, probe_rate, cfg.seed);

    let mut series: BTreeMap<String, SampledSeries> = BTreeMap::new();
    let mut diag: Vec<(String, String)> = Vec::new();
    diag.push(("traces.count".into(), traces.len().to_string()));
    diag.push(("probe.rate".into(), fmt(probe_rate)));
    diag.push(("probe.count".into(), probes.len().to_string()));

    // Per-spot flows and matching rates.
    for s in sorted_spots(cfg) {
        let q_truth = flow_series(&spot_crossing_times(traces, &cfg.routes, s), grid)?;
        let q_truth_ma = moving_average(&q_truth, opts.k)?;
        let lp = find_set(&plates, &format!("LP{s}"));
        let tc = find_set(&counting, &format!("C{s}"));
        let q_lp = flow_series(&sighting_times(lp), grid)?;
        let q_lp_ma = moving_average(&q_lp, opts.k)?;
        let q_tc = flow_series(&sighting_times(tc), grid)?;
        let q_tc_ma = moving_average(&q_tc, opts.k)?;
        let (match_lp, match_lp_avg) = matching_rate(lp, traces, &cfg.routes, s, grid)?;
        let (match_tc, match_tc_avg) = matching_rate(tc, traces, &cfg.routes, s, grid)?;
        diag.push((format!("match{s}_lp.avg_pct"), fmt_opt(match_lp_avg)));
        diag.push((format!("match{s}_tc.avg_pct"), fmt_opt(match_tc_avg)));
        series.insert(format!("q{s}_truth"), q_truth);
        series.insert(format!("q{s}_truth_ma"), q_truth_ma);
        series.insert(format!("q{s}_lp"), q_lp);
        series.insert(format!("q{s}_lp_ma"), q_lp_ma);
        series.insert(format!("q{s}_tc"), q_tc);
        series.insert(format!("q{s}_tc_ma"), q_tc_ma);
        series.insert(format!("match{s}_lp"), match_lp);
        series.insert(format!("match{s}_tc"), match_tc);
    }

    // Per-route travel times.
    for route in sorted_routes(cfg) {
        let r = route.id;
        let e = route.entry_spot;
        let x = route.exit_spot;
        let weight_of = |series: &BTreeMap<String, SampledSeries>, id: String| {
            series.get(&id).expect("spot series derived above").clone()
        };

        let truth_pairs = route_pairs(traces, r);
        let (tt_truth, d_truth) = travel_time_series(&truth_pairs, grid, opts.assignment)?;
        push_tt_diag(&mut diag, &format!("tt{r}_truth"), truth_pairs.len(), &d_truth);
        let w_truth = weight_of(&series, format!("q{e}_truth_ma"));
        let tt_truth_wma = weighted_moving_average(&tt_truth, &w_truth, opts.k)?;

        let lp_pairs = match_route(
            find_set(&plates, &format!("LP{e}")),
            find_set(&plates, &format!("LP{x}")),
        )?;
        let (tt_lp, d_lp) = travel_time_series(&lp_pairs, grid, opts.assignment)?;
        push_tt_diag(&mut diag, &format!("tt{r}_lp"), lp_pairs.len(), &d_lp);
        let w_lp = weight_of(&series, format!("q{e}_lp_ma"));
        let tt_lp_wma = weighted_moving_average(&tt_lp, &w_lp, opts.k)?;

        let mac_pairs = match_route(
            find_set(&macs, &format!("MAC{e}")),
            find_set(&macs, &format!("MAC{x}")),
        )?;
        let (tt_mac_raw, d_mac) = travel_time_series(&mac_pairs, grid, opts.assignment)?;
        push_tt_diag(&mut diag, &format!("tt{r}_tc"), mac_pairs.len(), &d_mac);
        // The address-matching vendor smooths on the device before export.
        let tt_tc = moving_average(&tt_mac_raw, params.mac_smoothing_k)?;
        let w_tc = weight_of(&series, format!("q{e}_tc_ma"));
        let tt_tc_wma = weighted_moving_average(&tt_tc, &w_tc, opts.k)?;

        let tt_g = aggregate_feed(&tt_truth_wma, params)?;

        let probe_pairs = route_pairs(&probes, r);
        let (tt_probe, d_probe) = travel_time_series(&probe_pairs, grid, opts.assignment)?;
        push_tt_diag(&mut diag, &format!("tt{r}_probe"), probe_pairs.len(), &d_probe);
        let q_probe = flow_series(&spot_crossing_times(&probes, &cfg.routes, e), grid)?;
        let w_probe = moving_average(&q_probe, opts.k)?;
        let tt_probe_wma = weighted_moving_average(&tt_probe, &w_probe, opts.k)?;

        series.insert(format!("tt{r}_truth"), tt_truth);
        series.insert(format!("tt{r}_truth_wma"), tt_truth_wma);
        series.insert(format!("tt{r}_lp"), tt_lp);
        series.insert(format!("tt{r}_lp_wma"), tt_lp_wma);
        series.insert(format!("tt{r}_tc"), tt_tc);
        series.insert(format!("tt{r}_tc_wma"), tt_tc_wma);
        series.insert(format!("tt{r}_g"), tt_g);
        series.insert(format!("tt{r}_probe"), tt_probe);
        series.insert(format!("tt{r}_probe_wma"), tt_probe_wma);
    }

    for (id, s) in &series {
        diag.push((format!("series.{id}.missing"), s.missing_count().to_string()));
    }

    let mut detections = counting;
    detections.extend(plates);
    detections.extend(macs);
    Ok(DeriveOutput {
        detections,
        probe_traces: probes,
        series,
        diagnostics: diag,
    })
}

fn need<'a>(
    series: &'a BTreeMap<String, SampledSeries>,
    id: &str,
) -> Result<&'a SampledSeries> {
    series
        .get(id)
        .ok_or_else(|| Error::Series(format!("series '{id}' missing from the series file")))
}

fn avg_pct(series: &SampledSeries) -> Option<f64> {
    let defined: Vec<f64> = series.values().iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64 * 100.0)
    }
}

fn report_row(
    quantity: &str,
    source: Source,
    truth: &SampledSeries,
    derived: &SampledSeries,
    match_rate: Option<f64>,
) -> Result<(ReportRow, usize)> {
    let (rho, n) = pcc(truth, derived)?;
    let m = mape(truth, derived)?;
    Ok((
        ReportRow {
            quantity: quantity.to_string(),
            source,
            rho,
            mape_pct: m.mape_pct,
            match_rate_pct: match_rate,
            n_samples: n,
        },
        m.n_zero_excluded,
    ))
}

/// Assemble the assessment report from derived series: smoothed flows and
/// matching rates per spot for both camera families, smoothed travel times
/// per route for plates, address matching, and the aggregate feed. Returns
/// the rows in report order plus the metadata rows (zero-exclusion tallies).
pub fn assess(
    series: &BTreeMap<String, SampledSeries>,
    spots: &[SpotId],
    routes: &[RouteId],
) -> Result<(Vec<ReportRow>, Vec<(String, String)>)> {
    let mut rows = Vec::new();
    let mut meta: Vec<(String, String)> = vec![(
        "rule.mape_zero_exclusion".into(),
        "intervals with a zero reference are excluded from mape_pct and tallied below".into(),
    )];
    let mut tally = |row: (ReportRow, usize), meta: &mut Vec<(String, String)>| {
        meta.push((
            format!("zero_excluded.{}.{}", row.0.quantity, row.0.source),
            row.1.to_string(),
        ));
        rows.push(row.0);
    };

    for &s in spots {
        let truth = need(series, &format!("q{s}_truth_ma"))?;
        let quantity = format!("q{s}");
        let lp = need(series, &format!("q{s}_lp_ma"))?;
        let lp_match = avg_pct(need(series, &format!("match{s}_lp"))?);
        tally(report_row(&quantity, Source::Lp, truth, lp, lp_match)?, &mut meta);
        let tc = need(series, &format!("q{s}_tc_ma"))?;
        let tc_match = avg_pct(need(series, &format!("match{s}_tc"))?);
        tally(report_row(&quantity, Source::Tc, truth, tc, tc_match)?, &mut meta);
    }
    for &r in routes {
        let truth = need(series, &format!("tt{r}_truth_wma"))?;
        let quantity = format!("tt{r}");
        let lp = need(series, &format!("tt{r}_lp_wma"))?;
        tally(report_row(&quantity, Source::Lp, truth, lp, None)?, &mut meta);
        let tc = need(series, &format!("tt{r}_tc_wma"))?;
        tally(report_row(&quantity, Source::Tc, truth, tc, None)?, &mut meta);
        let g = need(series, &format!("tt{r}_g"))?;
        tally(report_row(&quantity, Source::G, truth, g, None)?, &mut meta);
    }
    Ok((rows, meta))
}

/// Options of the estimation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub route_id: RouteId,
    pub split: SplitSpec,
    /// Smoothing window of the presentation overlay.
    pub k: usize,
    /// Probe reporting rate; None uses the probe series derived earlier.
    pub probe_rate: Option<f64>,
}

/// Everything the estimation stage produces.
#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub result: ExperimentResult,
    /// Feature name -> transform label, for the model file.
    pub feature_transforms: Vec<(String, String)>,
    /// Smoothed curves `truth`, `sample`, `base`, `final` for plotting.
    pub overlay: BTreeMap<String, SampledSeries>,
    pub diagnostics: Vec<(String, String)>,
}

/// Run the travel-time estimation experiment for one route: extract detector,
/// signal, and probe features, fit the probe-only base model and the forward-
/// selected final model on the training period, and evaluate all three
/// variants on the held-out tail.
pub fn estimate(
    cfg: &ScenarioConfig,
    traces: &[VehicleTrace],
    loops: &[LoopRecord],
    phases: &[PhaseLog],
    series: &BTreeMap<String, SampledSeries>,
    opts: &EstimateOptions,
) -> Result<EstimateOutput> {
    let route = cfg
        .route(opts.route_id)
        .ok_or_else(|| Error::Config(format!("unknown route {}", opts.route_id)))?;
    let r = route.id;
    let response_raw = need(series, &format!("tt{r}_truth"))?;

    // The probe series: reuse the derived one, or resample at an overridden
    // rate from the same coupled stream.
    let (probe_raw, probe_wma) = match opts.probe_rate {
        None => (
            need(series, &format!("tt{r}_probe"))?.clone(),
            need(series, &format!("tt{r}_probe_wma"))?.clone(),
        ),
        Some(rate) => {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config("probe rate must lie in [0, 1]".into()));
            }
            let probes = probe_sample(traces, rate, cfg.seed);
            let pairs = route_pairs(&probes, r);
            let (raw, _) =
                travel_time_series(&pairs, &cfg.grid, TravelTimeAssignment::ByExit)?;
            let q_probe = flow_series(
                &spot_crossing_times(&probes, &cfg.routes, route.entry_spot),
                &cfg.grid,
            )?;
            let w = moving_average(&q_probe, opts.k)?;
            let wma = weighted_moving_average(&raw, &w, opts.k)?;
            (raw, wma)
        }
    };

    let acts = actuations(cfg, traces);
    let (probe_spec, candidates) = default_feature_specs(cfg, route);
    let mut specs: Vec<FeatureSpec> = vec![probe_spec.clone()];
    specs.extend(candidates.iter().cloned());
    let feature_transforms: Vec<(String, String)> = specs
        .iter()
        .map(|s| (s.name.clone(), s.transform.to_string()))
        .collect();
    let inputs = FeatureInputs {
        grid: &cfg.grid,
        loops,
        actuations: &acts,
        phases,
        probe_tt_s: &probe_raw,
    };
    let matrix = extract_features(&specs, &inputs)?;
    let candidate_names: Vec<String> = candidates.iter().map(|c| c.name.clone()).collect();
    let result = run_experiment(
        r,
        &matrix,
        response_raw,
        &probe_wma,
        &opts.split,
        &probe_spec.name,
        &candidate_names,
    )?;

    let truth_wma = need(series, &format!("tt{r}_truth_wma"))?.clone();
    let w_truth = need(series, &format!("q{}_truth_ma", route.entry_spot))?;
    let base_wma = weighted_moving_average(&result.predictions_base, w_truth, opts.k)?;
    let final_wma = weighted_moving_average(&result.predictions_final, w_truth, opts.k)?;
    let mut overlay = BTreeMap::new();
    overlay.insert("truth".to_string(), truth_wma);
    overlay.insert("sample".to_string(), probe_wma);
    overlay.insert("base".to_string(), base_wma);
    overlay.insert("final".to_string(), final_wma);

    let mut diag: Vec<(String, String)> = Vec::new();
    diag.push(("route".into(), r.to_string()));
    diag.push(("split.train_frac".into(), fmt(opts.split.train_frac)));
    diag.push(("train.count".into(), result.n_train.to_string()));
    diag.push(("test.count".into(), result.n_test.to_string()));
    diag.push((
        "features.dropped".into(),
        if result.dropped_features.is_empty() {
            "none".to_string()
        } else {
            result.dropped_features.join(";")
        },
    ));
    for (i, step) in result.steps.iter().enumerate() {
        diag.push((format!("selection.step{}.added", i + 1), step.added.clone()));
        diag.push((format!("selection.step{}.adj_r2", i + 1), fmt(step.adj_r2)));
    }
    diag.push((
        "model.base.features".into(),
        result.base_model.feature_names.join("+"),
    ));
    diag.push((
        "model.base.residual_std".into(),
        fmt(result.base_model.residual_std),
    ));
    diag.push((
        "model.final.features".into(),
        result.final_model.feature_names.join("+"),
    ));
    diag.push((
        "model.final.residual_std".into(),
        fmt(result.final_model.residual_std),
    ));

    Ok(EstimateOutput {
        result,
        feature_transforms,
        overlay,
        diagnostics: diag,
    })
}
