//! The five pipeline commands. Each one reads its upstream artifacts from
//! the run directory, writes its own artifacts there, and refreshes the run
//! manifest so on-disk digests always match.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tse_core::error::{Error, Result};
use tse_core::io;
use tse_core::mlr::SplitSpec;
use tse_core::pipeline::TravelTimeAssignment;
use tse_core::runner::{self, EstimateOptions, StageOptions};
use tse_core::series::SampledSeries;
use tse_core::simnet::{self, ScenarioConfig};
use tse_core::types::{RouteId, SpotId};

use crate::manifest::RunManifest;

/// Error unless the file exists; names the file so a missing upstream
/// artifact is diagnosable without opening the run directory.
fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

fn read_config_file(path: &Path) -> Result<ScenarioConfig> {
    require(path)?;
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        msg: e.to_string(),
    })
}

/// Scenario from `--config` (the built-in one when omitted), with the seed
/// override applied before validation.
fn load_config(config: Option<&Path>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = match config {
        None => ScenarioConfig::default_fixture(),
        Some(p) => read_config_file(p)?,
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn scenario_path(out: &Path) -> PathBuf {
    out.join("scenario.json")
}

/// The effective scenario of an existing run directory.
fn load_run_scenario(out: &Path) -> Result<ScenarioConfig> {
    let cfg = read_config_file(&scenario_path(out))?;
    cfg.validate()?;
    Ok(cfg)
}

fn finish_manifest(out: &Path, out_str: &str, seed: u64, written: &[&str]) -> Result<()> {
    let mut manifest = RunManifest::load_or_create(out, out_str, seed)?;
    for name in written {
        manifest.record(out, name)?;
    }
    manifest.save(out)
}

/// Generate ground truth for one scenario: vehicle traces, loop detector
/// records, and signal phase logs, plus the effective scenario itself and
/// a manifest of the three datasets.
pub fn simulate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = load_config(config, seed)?;
    std::fs::create_dir_all(out)?;

    let text = serde_json::to_string_pretty(&cfg)
        .map_err(|e| Error::Config(format!("scenario serialization failed: {e}")))?;
    std::fs::write(scenario_path(out), text + "\n")?;

    let sim = simnet::simulate(&cfg)?;
    for w in &sim.warnings {
        eprintln!("warning: {w}");
    }
    io::write_traces(&out.join("traces.csv"), &sim.traces)?;
    io::write_loops(&out.join("loops.csv"), &sim.loops)?;
    io::write_phases(&out.join("phases.csv"), &sim.phases)?;

    let mut manifest = RunManifest::create(out, &out.display().to_string(), cfg.seed)?;
    for name in ["traces.csv", "loops.csv", "phases.csv"] {
        manifest.record(out, name)?;
    }
    manifest.save(out)?;

    println!(
        "simulate: seed {} -> {} traces, {} loop records, {} phase logs in {}",
        cfg.seed,
        sim.traces.len(),
        sim.loops.len(),
        sim.phases.len(),
        out.display()
    );
    Ok(())
}

/// Run every sensor emulator over the ground truth and derive the full set
/// of interval series (flows, matching rates, travel times) plus a
/// diagnostics file of tallies.
pub fn derive(out: &Path, k: usize, probe_rate: Option<f64>, tt_by_entry: bool) -> Result<()> {
    let cfg = load_run_scenario(out)?;
    let traces_path = out.join("traces.csv");
    require(&traces_path)?;
    let traces = io::read_traces(&traces_path)?;

    let opts = StageOptions {
        k,
        probe_rate,
        assignment: if tt_by_entry {
            TravelTimeAssignment::ByEntry
        } else {
            TravelTimeAssignment::ByExit
        },
    };
    let derived = runner::derive_all(&cfg, &traces, &opts)?;

    io::write_detections(&out.join("detections.csv"), &derived.detections)?;
    io::write_traces(&out.join("probe_traces.csv"), &derived.probe_traces)?;
    io::write_series(&out.join("series.csv"), &derived.series)?;
    io::write_kv(&out.join("derive_report.csv"), &derived.diagnostics)?;

    finish_manifest(
        out,
        &out.display().to_string(),
        cfg.seed,
        &[
            "detections.csv",
            "probe_traces.csv",
            "series.csv",
            "derive_report.csv",
        ],
    )?;

    println!(
        "derive: {} detection sets, {} probe traces, {} series in {}",
        derived.detections.len(),
        derived.probe_traces.len(),
        derived.series.len(),
        out.display()
    );
    Ok(())
}

fn sorted_spot_ids(cfg: &ScenarioConfig) -> Vec<SpotId> {
    let mut ids: Vec<SpotId> = cfg.spots.iter().map(|s| s.id).collect();
    ids.sort_unstable();
    ids
}

fn sorted_route_ids(cfg: &ScenarioConfig) -> Vec<RouteId> {
    let mut ids: Vec<RouteId> = cfg.routes.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    ids
}

/// Score every sensing chain against ground truth: correlation, MAPE, and
/// matching rate per quantity and source, plus the zero-exclusion tallies
/// in a metadata file.
pub fn assess(out: &Path) -> Result<()> {
    let cfg = load_run_scenario(out)?;
    let series_path = out.join("series.csv");
    require(&series_path)?;
    let series = io::read_series(&series_path, &cfg.grid)?;

    let (rows, meta) = runner::assess(&series, &sorted_spot_ids(&cfg), &sorted_route_ids(&cfg))?;
    io::write_report(&out.join("report.csv"), &rows)?;
    io::write_kv(&out.join("report_meta.csv"), &meta)?;

    finish_manifest(
        out,
        &out.display().to_string(),
        cfg.seed,
        &["report.csv", "report_meta.csv"],
    )?;

    println!("assess: {} report rows in {}", rows.len(), out.display());
    Ok(())
}

/// Fit the probe-only base model and the forward-selected final model for
/// one route, evaluate raw sample / base / final on the held-out tail, and
/// write the model, the evaluation table, and the plotting overlay.
pub fn estimate(out: &Path, route: RouteId, k: usize, probe_rate: Option<f64>) -> Result<()> {
    let cfg = load_run_scenario(out)?;
    for name in ["traces.csv", "loops.csv", "phases.csv", "series.csv"] {
        require(&out.join(name))?;
    }
    let traces = io::read_traces(&out.join("traces.csv"))?;
    let loops = io::read_loops(&out.join("loops.csv"))?;
    let phases = io::read_phases(&out.join("phases.csv"))?;
    let series = io::read_series(&out.join("series.csv"), &cfg.grid)?;

    let opts = EstimateOptions {
        route_id: route,
        split: SplitSpec::default(),
        k,
        probe_rate,
    };
    let est = runner::estimate(&cfg, &traces, &loops, &phases, &series, &opts)?;

    let transforms: BTreeMap<&str, &str> = est
        .feature_transforms
        .iter()
        .map(|(name, label)| (name.as_str(), label.as_str()))
        .collect();
    let transform_of =
        |name: &str| -> String { transforms.get(name).copied().unwrap_or("none").to_string() };
    io::write_model(
        &out.join("model.csv"),
        route,
        &est.result.final_model,
        &transform_of,
    )?;
    io::write_experiment_report(&out.join("experiment_report.csv"), route, &est.result.evals)?;
    io::write_series(&out.join("estimate_series.csv"), &est.overlay)?;
    io::write_kv(&out.join("estimate_meta.csv"), &est.diagnostics)?;

    finish_manifest(
        out,
        &out.display().to_string(),
        cfg.seed,
        &[
            "model.csv",
            "experiment_report.csv",
            "estimate_series.csv",
            "estimate_meta.csv",
        ],
    )?;

    let brief: Vec<String> = est
        .result
        .evals
        .iter()
        .map(|e| {
            let m = e
                .mape_pct
                .map(|v| format!("{v:.2}%"))
                .unwrap_or_else(|| "NA".to_string());
            format!("{} mape {m}", e.model_name)
        })
        .collect();
    println!(
        "estimate: route {route} -> {} in {}",
        brief.join(", "),
        out.display()
    );
    Ok(())
}

fn select_series(
    series: &BTreeMap<String, SampledSeries>,
    keep: impl Fn(&str) -> bool,
) -> BTreeMap<String, SampledSeries> {
    series
        .iter()
        .filter(|(id, _)| keep(id))
        .map(|(id, s)| (id.clone(), s.clone()))
        .collect()
}

/// Emit one tidy CSV per figure family — smoothed flow comparison, matching
/// rates, smoothed travel-time comparison, and (when an estimation run
/// exists) the estimation overlay — all in the interval-series schema.
pub fn plotdata(out: &Path) -> Result<()> {
    let cfg = load_run_scenario(out)?;
    let series_path = out.join("series.csv");
    require(&series_path)?;
    let series = io::read_series(&series_path, &cfg.grid)?;

    let flow = select_series(&series, |id| id.starts_with('q') && id.ends_with("_ma"));
    let matching = select_series(&series, |id| id.starts_with("match"));
    let tt = select_series(&series, |id| {
        id.starts_with("tt")
            && (id.ends_with("_truth_wma")
                || id.ends_with("_lp_wma")
                || id.ends_with("_tc_wma")
                || id.ends_with("_g"))
    });
    io::write_series(&out.join("plot_flow.csv"), &flow)?;
    io::write_series(&out.join("plot_matching.csv"), &matching)?;
    io::write_series(&out.join("plot_tt.csv"), &tt)?;
    let mut written = vec!["plot_flow.csv", "plot_matching.csv", "plot_tt.csv"];

    let overlay_path = out.join("estimate_series.csv");
    if overlay_path.exists() {
        let overlay = io::read_series(&overlay_path, &cfg.grid)?;
        io::write_series(&out.join("plot_estimation.csv"), &overlay)?;
        written.push("plot_estimation.csv");
    }

    finish_manifest(out, &out.display().to_string(), cfg.seed, &written)?;

    println!(
        "plotdata: {} figure files in {}",
        written.len(),
        out.display()
    );
    Ok(())
}
