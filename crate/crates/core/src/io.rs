//! CSV readers and writers for every dataset the toolchain exchanges.
//!
//! All files carry a header row, use `.` as the decimal separator, and mark
//! missing values with the literal `NA`. Floats are written in Rust's
//! shortest round-trip form so that write/read/write cycles are
//! byte-identical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use csv::StringRecord;

use crate::error::{Error, Result};
use crate::grid::IntervalGrid;
use crate::metrics::{ReportRow, Source};
use crate::series::{SampledSeries, Unit};
use crate::simnet::{LoopRecord, Phase, PhaseLog};
use crate::types::{DetectionSet, SensorKind, Sighting, VehicleTrace};

const TRACES_HEADER: [&str; 4] = ["vehicle_id", "route_id", "t_in_s", "t_out_s"];
const DETECTIONS_HEADER: [&str; 5] = ["sensor_id", "kind", "spot_id", "token", "t_s"];
const SERIES_HEADER: [&str; 4] = ["series_id", "interval_index", "value", "unit"];
const LOOPS_HEADER: [&str; 4] = ["detector_id", "interval_index", "count", "occupancy_pct"];
const PHASES_HEADER: [&str; 3] = ["controller_id", "t_s", "phase"];
const REPORT_HEADER: [&str; 6] = [
    "quantity",
    "source",
    "rho",
    "mape_pct",
    "match_rate_pct",
    "n_samples",
];

fn reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(BufReader::new(file)))
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path)?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file)))
}

fn check_header(
    path: &Path,
    rdr: &mut csv::Reader<BufReader<File>>,
    expected: &[&str],
) -> Result<()> {
    let headers = rdr.headers().map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        msg: format!("cannot read header: {e}"),
    })?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            msg: format!("header {:?} does not match expected {:?}", got, expected),
        });
    }
    Ok(())
}

fn line_of(record: &StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    what: &str,
    path: &Path,
    line: u64,
) -> Result<T> {
    field.parse::<T>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("cannot parse {what} from '{field}'"),
    })
}

fn next_record(
    path: &Path,
    item: std::result::Result<StringRecord, csv::Error>,
) -> Result<StringRecord> {
    item.map_err(|e| {
        let line = e
            .position()
            .map(|p| p.line())
            .unwrap_or(0);
        Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.to_string(),
        }
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt_f64(x),
        None => "NA".to_string(),
    }
}

fn parse_opt_f64(field: &str, what: &str, path: &Path, line: u64) -> Result<Option<f64>> {
    if field == "NA" {
        Ok(None)
    } else {
        Ok(Some(parse_field(field, what, path, line)?))
    }
}

// ---- vehicle traces ----

pub fn write_traces(path: &Path, traces: &[VehicleTrace]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRACES_HEADER)?;
    for t in traces {
        w.write_record([
            t.vehicle_id.as_str(),
            &t.route_id.to_string(),
            &fmt_f64(t.t_in_s),
            &fmt_f64(t.t_out_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_traces(path: &Path) -> Result<Vec<VehicleTrace>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &TRACES_HEADER)?;
    let mut out = Vec::new();
    for item in rdr.records() {
        let rec = next_record(path, item)?;
        let line = line_of(&rec);
        let t_in_s: f64 = parse_field(&rec[2], "t_in_s", path, line)?;
        let t_out_s: f64 = parse_field(&rec[3], "t_out_s", path, line)?;
        if !t_in_s.is_finite() || !t_out_s.is_finite() || t_out_s <= t_in_s {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("invalid trace times: in {t_in_s}, out {t_out_s}"),
            });
        }
        out.push(VehicleTrace {
            vehicle_id: rec[0].to_string(),
            route_id: parse_field(&rec[1], "route_id", path, line)?,
            t_in_s,
            t_out_s,
        });
    }
    Ok(out)
}

// ---- detections ----

pub fn write_detections(path: &Path, sets: &[DetectionSet]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(DETECTIONS_HEADER)?;
    for set in sets {
        for s in &set.sightings {
            w.write_record([
                set.sensor_id.as_str(),
                &set.kind.to_string(),
                &s.spot_id.to_string(),
                s.token.as_deref().unwrap_or(""),
                &fmt_f64(s.t_s),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read detection sets grouped by sensor id, in order of first appearance.
/// Every row of one sensor must carry the same kind, and tokens must be
/// present exactly when the kind is token-bearing.
pub fn read_detections(path: &Path) -> Result<Vec<DetectionSet>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &DETECTIONS_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut sets: BTreeMap<String, DetectionSet> = BTreeMap::new();
    for item in rdr.records() {
        let rec = next_record(path, item)?;
        let line = line_of(&rec);
        let sensor_id = rec[0].to_string();
        let kind: SensorKind =
            rec[1].parse().map_err(|e: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: e,
            })?;
        let token = if rec[3].is_empty() {
            None
        } else {
            Some(rec[3].to_string())
        };
        match (kind, &token) {
            (SensorKind::CountOnly, Some(_)) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("sensor {sensor_id}: count_only sighting carries a token"),
                });
            }
            (SensorKind::Plate | SensorKind::Mac, None) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("sensor {sensor_id}: {kind} sighting lacks a token"),
                });
            }
            _ => {}
        }
        let sighting = Sighting {
            spot_id: parse_field(&rec[2], "spot_id", path, line)?,
            token,
            t_s: parse_field(&rec[4], "t_s", path, line)?,
        };
        match sets.get_mut(&sensor_id) {
            Some(set) => {
                if set.kind != kind {
                    return Err(Error::Schema {
                        path: path.to_path_buf(),
                        msg: format!(
                            "sensor {sensor_id} mixes kinds {} and {kind}",
                            set.kind
                        ),
                    });
                }
                set.sightings.push(sighting);
            }
            None => {
                order.push(sensor_id.clone());
                sets.insert(
                    sensor_id.clone(),
                    DetectionSet {
                        sensor_id,
                        kind,
                        sightings: vec![sighting],
                    },
                );
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|id| sets.remove(&id).unwrap())
        .collect())
}

// ---- interval series ----

/// Write a collection of series. Rows are grouped by series id (sorted) and
/// every interval index appears explicitly, missing values as `NA`.
pub fn write_series(path: &Path, series: &BTreeMap<String, SampledSeries>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SERIES_HEADER)?;
    for (id, s) in series {
        let unit = s.unit().to_string();
        for i in 0..s.len() {
            w.write_record([
                id.as_str(),
                &i.to_string(),
                &fmt_opt(s.get(i)),
                &unit,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read series back onto a known grid. Each series must cover every interval
/// index exactly once and use one unit throughout.
pub fn read_series(path: &Path, grid: &IntervalGrid) -> Result<BTreeMap<String, SampledSeries>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &SERIES_HEADER)?;
    struct Partial {
        unit: Unit,
        rows: Vec<(usize, Option<f64>)>,
    }
    let mut partials: BTreeMap<String, Partial> = BTreeMap::new();
    for item in rdr.records() {
        let rec = next_record(path, item)?;
        let line = line_of(&rec);
        let id = rec[0].to_string();
        let idx: usize = parse_field(&rec[1], "interval_index", path, line)?;
        let value = parse_opt_f64(&rec[2], "value", path, line)?;
        let unit: Unit = rec[3].parse().map_err(|e: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e,
        })?;
        match partials.get_mut(&id) {
            Some(p) => {
                if p.unit != unit {
                    return Err(Error::Schema {
                        path: path.to_path_buf(),
                        msg: format!("series {id} mixes units {} and {unit}", p.unit),
                    });
                }
                p.rows.push((idx, value));
            }
            None => {
                partials.insert(
                    id,
                    Partial {
                        unit,
                        rows: vec![(idx, value)],
                    },
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    for (id, mut p) in partials {
        p.rows.sort_by_key(|(i, _)| *i);
        let n = grid.num_intervals();
        if p.rows.len() != n || p.rows.iter().enumerate().any(|(want, (got, _))| want != *got) {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                msg: format!(
                    "series {id}: expected every interval index 0..{} exactly once",
                    n.saturating_sub(1)
                ),
            });
        }
        let values = p.rows.into_iter().map(|(_, v)| v).collect();
        let series = SampledSeries::new(*grid, values, p.unit)?;
        out.insert(id, series);
    }
    Ok(out)
}

// ---- loop detector logs ----

pub fn write_loops(path: &Path, records: &[LoopRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(LOOPS_HEADER)?;
    for r in records {
        w.write_record([
            r.detector_id.as_str(),
            &r.interval_index.to_string(),
            &r.count.to_string(),
            &fmt_f64(r.occupancy_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_loops(path: &Path) -> Result<Vec<LoopRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &LOOPS_HEADER)?;
    let mut out = Vec::new();
    for item in rdr.records() {
        let rec = next_record(path, item)?;
        let line = line_of(&rec);
        let occupancy_pct: f64 = parse_field(&rec[3], "occupancy_pct", path, line)?;
        if !(0.0..=100.0).contains(&occupancy_pct) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("occupancy {occupancy_pct} outside [0, 100]"),
            });
        }
        out.push(LoopRecord {
            detector_id: rec[0].to_string(),
            interval_index: parse_field(&rec[1], "interval_index", path, line)?,
            count: parse_field(&rec[2], "count", path, line)?,
            occupancy_pct,
        });
    }
    Ok(out)
}

// ---- signal phase logs ----

pub fn write_phases(path: &Path, logs: &[PhaseLog]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(PHASES_HEADER)?;
    for log in logs {
        for (t, phase) in &log.transitions {
            w.write_record([
                log.controller_id.as_str(),
                &fmt_f64(*t),
                &phase.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_phases(path: &Path) -> Result<Vec<PhaseLog>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &PHASES_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut logs: BTreeMap<String, PhaseLog> = BTreeMap::new();
    for item in rdr.records() {
        let rec = next_record(path, item)?;
        let line = line_of(&rec);
        let controller_id = rec[0].to_string();
        let t: f64 = parse_field(&rec[1], "t_s", path, line)?;
        let phase: Phase = rec[2].parse().map_err(|e: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e,
        })?;
        match logs.get_mut(&controller_id) {
            Some(log) => log.transitions.push((t, phase)),
            None => {
                order.push(controller_id.clone());
                logs.insert(
                    controller_id.clone(),
                    PhaseLog {
                        controller_id,
                        transitions: vec![(t, phase)],
                    },
                );
            }
        }
    }
    let out: Vec<PhaseLog> = order
        .into_iter()
        .map(|id| logs.remove(&id).unwrap())
        .collect();
    for log in &out {
        log.validate().map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    }
    Ok(out)
}

// ---- assessment report ----

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.quantity.as_str(),
            &r.source.to_string(),
            &fmt_opt(r.rho),
            &fmt_opt(r.mape_pct),
            &fmt_opt(r.match_rate_pct),
            &r.n_samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &REPORT_HEADER)?;
    let mut out = Vec::new();
    for item in rdr.records() {
        let rec = next_record(path, item)?;
        let line = line_of(&rec);
        let source: Source = rec[1].parse().map_err(|e: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e,
        })?;
        out.push(ReportRow {
            quantity: rec[0].to_string(),
            source,
            rho: parse_opt_f64(&rec[2], "rho", path, line)?,
            mape_pct: parse_opt_f64(&rec[3], "mape_pct", path, line)?,
            match_rate_pct: parse_opt_f64(&rec[4], "match_rate_pct", path, line)?,
            n_samples: parse_field(&rec[5], "n_samples", path, line)?,
        });
    }
    Ok(out)
}

// ---- fitted models and experiment summaries ----

const MODEL_HEADER: [&str; 4] = ["route_id", "feature", "coefficient", "transform"];
const EXPERIMENT_HEADER: [&str; 6] = [
    "route_id",
    "model",
    "adj_r2",
    "mape_pct",
    "n_train",
    "n_test",
];

/// One coefficient row of a fitted model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRow {
    pub route_id: u8,
    pub feature: String,
    pub coefficient: f64,
    pub transform: String,
}

/// Write a fitted model, intercept first. `transform_of` maps feature names
/// to the transform label recorded alongside each coefficient.
pub fn write_model(
    path: &Path,
    route_id: u8,
    model: &crate::mlr::RegressionModel,
    transform_of: &dyn Fn(&str) -> String,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(MODEL_HEADER)?;
    w.write_record([
        &route_id.to_string(),
        "intercept",
        &fmt_f64(model.intercept),
        "none",
    ])?;
    for (name, coef) in model.feature_names.iter().zip(model.coefficients.iter()) {
        w.write_record([
            &route_id.to_string(),
            name,
            &fmt_f64(*coef),
            &transform_of(name),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<Vec<ModelRow>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &MODEL_HEADER)?;
    let mut out = Vec::new();
    for item in rdr.records() {
        let rec = next_record(path, item)?;
        let line = line_of(&rec);
        out.push(ModelRow {
            route_id: parse_field(&rec[0], "route_id", path, line)?,
            feature: rec[1].to_string(),
            coefficient: parse_field(&rec[2], "coefficient", path, line)?,
            transform: rec[3].to_string(),
        });
    }
    Ok(out)
}

/// One model-comparison row of an experiment summary file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub route_id: u8,
    pub model: String,
    pub adj_r2: Option<f64>,
    pub mape_pct: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

pub fn write_experiment_report(
    path: &Path,
    route_id: u8,
    evals: &[crate::mlr::ModelEval],
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EXPERIMENT_HEADER)?;
    for e in evals {
        w.write_record([
            &route_id.to_string(),
            e.model_name.as_str(),
            &fmt_opt(e.adj_r2),
            &fmt_opt(e.mape_pct),
            &e.n_train.to_string(),
            &e.n_test.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_experiment_report(path: &Path) -> Result<Vec<ExperimentRow>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &EXPERIMENT_HEADER)?;
    let mut out = Vec::new();
    for item in rdr.records() {
        let rec = next_record(path, item)?;
        let line = line_of(&rec);
        out.push(ExperimentRow {
            route_id: parse_field(&rec[0], "route_id", path, line)?,
            model: rec[1].to_string(),
            adj_r2: parse_opt_f64(&rec[2], "adj_r2", path, line)?,
            mape_pct: parse_opt_f64(&rec[3], "mape_pct", path, line)?,
            n_train: parse_field(&rec[4], "n_train", path, line)?,
            n_test: parse_field(&rec[5], "n_test", path, line)?,
        });
    }
    Ok(out)
}

/// Write a two-column key/value diagnostics file.
pub fn write_kv(path: &Path, rows: &[(String, String)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["key", "value"])?;
    for (k, v) in rows {
        w.write_record([k.as_str(), v.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
