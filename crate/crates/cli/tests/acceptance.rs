//! Release gate: one test per shipping criterion. Every test prints a
//! `[PASS] criterion N` line on success (visible with `--nocapture`); a
//! failed assertion names the criterion it belongs to.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use tse_core::grid::IntervalGrid;
use tse_core::metrics::{mape, pcc, r2_and_adj, Source};
use tse_core::mlr::{fit_ols, SplitSpec, Transform};
use tse_core::pipeline::{
    flow_series, moving_average, travel_time_series, weighted_moving_average,
    TravelTimeAssignment,
};
use tse_core::runner::{assess, derive_all, estimate, EstimateOptions, StageOptions};
use tse_core::series::{SampledSeries, Unit};
use tse_core::simnet::{simulate, ScenarioConfig};
use tse_core::types::{RouteId, SpotId};

fn spot_ids(cfg: &ScenarioConfig) -> Vec<SpotId> {
    let mut ids: Vec<SpotId> = cfg.spots.iter().map(|s| s.id).collect();
    ids.sort_unstable();
    ids
}

fn route_ids(cfg: &ScenarioConfig) -> Vec<RouteId> {
    let mut ids: Vec<RouteId> = cfg.routes.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    ids
}

// ---- criterion 1: lossless sensing closes the loop ----

#[test]
fn criterion_1_perfect_sensors_reach_unit_correlation_and_zero_error() {
    let started = Instant::now();
    let cfg = ScenarioConfig::default_fixture().with_perfect_sensors();
    assert!(
        (cfg.grid.horizon_s - 7200.0).abs() < 1e-9,
        "criterion 1 expects the 120-minute scenario"
    );
    let sim = simulate(&cfg).expect("criterion 1: simulate");
    assert!(
        sim.traces.len() >= 2000,
        "criterion 1 expects a ~2000-vehicle scenario, got {}",
        sim.traces.len()
    );
    let derived = derive_all(&cfg, &sim.traces, &StageOptions::default())
        .expect("criterion 1: derive");
    let (rows, _) = assess(&derived.series, &spot_ids(&cfg), &route_ids(&cfg))
        .expect("criterion 1: assess");
    assert_eq!(rows.len(), 2 * cfg.spots.len() + 3 * cfg.routes.len());
    for row in &rows {
        let rho = row.rho.unwrap_or_else(|| {
            panic!("criterion 1: {} {} has undefined rho", row.quantity, row.source)
        });
        let m = row.mape_pct.unwrap_or_else(|| {
            panic!("criterion 1: {} {} has undefined mape", row.quantity, row.source)
        });
        assert!(
            (rho - 1.0).abs() < 1e-9,
            "criterion 1: {} {}: rho {rho} != 1 within 1e-9",
            row.quantity,
            row.source
        );
        assert!(
            m.abs() < 1e-9,
            "criterion 1: {} {}: mape {m} != 0 within 1e-9",
            row.quantity,
            row.source
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "criterion 1: runtime {elapsed:?} exceeds 10 s"
    );
    println!(
        "[PASS] criterion 1: {} assessment rows at rho=1.000, MAPE=0 within 1e-9 \
         ({} vehicles, {:.2?})",
        rows.len(),
        sim.traces.len(),
        elapsed
    );
}

// ---- criterion 2: derivation matches brute-force references exactly ----

fn slow_interval(grid: &IntervalGrid, t: f64) -> Option<usize> {
    (0..grid.num_intervals()).find(|&i| {
        let lo = grid.start_s + i as f64 * grid.interval_s;
        t >= lo && t < lo + grid.interval_s
    })
}

fn slow_flow(times: &[f64], grid: &IntervalGrid) -> Vec<Option<f64>> {
    let mut counts = vec![0u32; grid.num_intervals()];
    for &t in times {
        if let Some(i) = slow_interval(grid, t) {
            counts[i] += 1;
        }
    }
    counts
        .iter()
        .map(|c| Some(*c as f64 * 3600.0 / grid.interval_s))
        .collect()
}

fn slow_ma(values: &[Option<f64>], k: usize) -> Vec<Option<f64>> {
    (0..values.len())
        .map(|i| {
            if i < k {
                return None;
            }
            let present: Vec<f64> = values[i - k..=i].iter().flatten().copied().collect();
            if present.is_empty() {
                None
            } else {
                Some(present.iter().sum::<f64>() / present.len() as f64)
            }
        })
        .collect()
}

fn slow_wma(values: &[Option<f64>], weights: &[Option<f64>], k: usize) -> Vec<Option<f64>> {
    (0..values.len())
        .map(|i| {
            if i < k {
                return None;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for j in i - k..=i {
                if let (Some(v), Some(w)) = (values[j], weights[j]) {
                    num += w * v;
                    den += w;
                }
            }
            if den > 0.0 {
                Some(num / den)
            } else {
                None
            }
        })
        .collect()
}

fn slow_travel_time(pairs: &[(f64, f64)], grid: &IntervalGrid, by_entry: bool) -> Vec<Option<f64>> {
    let n = grid.num_intervals();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0u32; n];
    for &(t_in, t_out) in pairs {
        if !(t_out > t_in) {
            continue;
        }
        let anchor = if by_entry { t_in } else { t_out };
        if let Some(i) = slow_interval(grid, anchor) {
            sums[i] += t_out - t_in;
            counts[i] += 1;
        }
    }
    (0..n)
        .map(|i| (counts[i] > 0).then(|| sums[i] / counts[i] as f64))
        .collect()
}

#[test]
fn criterion_2_derivation_equations_match_brute_force_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(7_001);
    let fixtures = 120usize;
    for case in 0..fixtures {
        let interval = *[30.0, 60.0, 120.0].iter().nth(rng.gen_range(0..3)).unwrap();
        let grid = IntervalGrid {
            start_s: if rng.gen_bool(0.5) { 0.0 } else { 240.0 },
            horizon_s: interval * rng.gen_range(5..30) as f64,
            interval_s: interval,
        };
        let n = grid.num_intervals();

        // Interval flows from raw crossing times, some falling outside.
        let times: Vec<f64> = (0..rng.gen_range(0..300))
            .map(|_| grid.start_s - 90.0 + rng.gen_range(0.0..grid.horizon_s + 200.0))
            .collect();
        let flows = flow_series(&times, &grid).expect("criterion 2: flow");
        assert_eq!(
            flows.values(),
            slow_flow(&times, &grid).as_slice(),
            "criterion 2: flow mismatch on fixture {case}"
        );

        // Plain and weighted trailing averages on gappy series.
        let gappy = |rng: &mut ChaCha8Rng, unit: Unit| -> SampledSeries {
            let values: Vec<Option<f64>> = (0..n)
                .map(|_| (!rng.gen_bool(0.25)).then(|| rng.gen_range(1.0..500.0)))
                .collect();
            SampledSeries::new(grid, values, unit).unwrap()
        };
        let k = rng.gen_range(0..6);
        let series = gappy(&mut rng, Unit::Seconds);
        let smoothed = moving_average(&series, k).expect("criterion 2: ma");
        assert_eq!(
            smoothed.values(),
            slow_ma(series.values(), k).as_slice(),
            "criterion 2: moving average mismatch on fixture {case}"
        );
        let weights = gappy(&mut rng, Unit::VehPerH);
        let weighted =
            weighted_moving_average(&series, &weights, k).expect("criterion 2: wma");
        assert_eq!(
            weighted.values(),
            slow_wma(series.values(), weights.values(), k).as_slice(),
            "criterion 2: weighted average mismatch on fixture {case}"
        );

        // Interval travel times from entry/exit pairs, both attributions,
        // with a few corrupted (non-positive) durations thrown in.
        let pairs: Vec<(f64, f64)> = (0..rng.gen_range(0..200))
            .map(|_| {
                let t_in = grid.start_s - 40.0 + rng.gen_range(0.0..grid.horizon_s + 80.0);
                let dur = if rng.gen_bool(0.05) {
                    -rng.gen_range(0.0..20.0)
                } else {
                    rng.gen_range(1.0..400.0)
                };
                (t_in, t_in + dur)
            })
            .collect();
        let by_entry = case % 2 == 0;
        let assignment = if by_entry {
            TravelTimeAssignment::ByEntry
        } else {
            TravelTimeAssignment::ByExit
        };
        let (tt, _) =
            travel_time_series(&pairs, &grid, assignment).expect("criterion 2: travel time");
        assert_eq!(
            tt.values(),
            slow_travel_time(&pairs, &grid, by_entry).as_slice(),
            "criterion 2: travel time mismatch on fixture {case}"
        );
    }
    println!("[PASS] criterion 2: flows, smoothers, and interval travel times match brute-force references exactly on {fixtures} random fixtures");
}

// ---- criterion 3: least squares against independent references ----

/// Solve the normal equations (X'X)b = X'y by Gauss-Jordan elimination;
/// independent of the decomposition used by the library.
fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = rows.len();
    let p = rows[0].len();
    let m = p + 1;
    let x = |i: usize, j: usize| if j == 0 { 1.0 } else { rows[i][j - 1] };
    let mut a = vec![vec![0.0f64; m + 1]; m];
    for r in 0..m {
        for c in 0..m {
            a[r][c] = (0..n).map(|i| x(i, r) * x(i, c)).sum();
        }
        a[r][m] = (0..n).map(|i| x(i, r) * y[i]).sum();
    }
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for c in col..=m {
            a[col][c] /= d;
        }
        for r in 0..m {
            if r != col {
                let f = a[r][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..m).map(|r| a[r][m]).collect()
}

#[test]
fn criterion_3_least_squares_recovers_and_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7_003);
    let fixtures = 100usize;
    for case in 0..fixtures {
        let n = rng.gen_range(12..80);
        let p = rng.gen_range(1..5);
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-10.0..10.0)).collect())
            .collect();

        // Noiseless: exact recovery within 1e-9.
        let beta0: f64 = rng.gen_range(-5.0..5.0);
        let betas: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let clean: Vec<f64> = rows
            .iter()
            .map(|r| beta0 + r.iter().zip(&betas).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let model = fit_ols(&names, &rows, &clean, Transform::None).unwrap();
        assert!(
            (model.intercept - beta0).abs() < 1e-9,
            "criterion 3: intercept off on noiseless fixture {case}"
        );
        for (est, truth) in model.coefficients.iter().zip(&betas) {
            assert!(
                (est - truth).abs() < 1e-9,
                "criterion 3: coefficient {est} vs {truth} on noiseless fixture {case}"
            );
        }

        // Noisy: agreement with the normal-equations solution within 1e-6.
        let noisy: Vec<f64> = clean
            .iter()
            .map(|v| v + rng.gen_range(-4.0..4.0))
            .collect();
        let model = fit_ols(&names, &rows, &noisy, Transform::None).unwrap();
        let reference = normal_equations(&rows, &noisy);
        assert!(
            (model.intercept - reference[0]).abs() < 1e-6,
            "criterion 3: intercept {} vs reference {} on noisy fixture {case}",
            model.intercept,
            reference[0]
        );
        for (j, est) in model.coefficients.iter().enumerate() {
            assert!(
                (est - reference[j + 1]).abs() < 1e-6,
                "criterion 3: beta{j} {est} vs reference {} on noisy fixture {case}",
                reference[j + 1]
            );
        }
    }
    println!("[PASS] criterion 3: least squares exact within 1e-9 on noiseless and within 1e-6 of normal equations on noisy data ({fixtures} fixtures each)");
}

// ---- criterion 4: sample / base / final ordering over ten seeds ----

#[test]
fn criterion_4_estimation_report_orders_sample_base_final_across_seeds() {
    let started = Instant::now();
    let seeds: Vec<u64> = (1..=10).collect();
    let mut ordered = 0usize;
    let mut adj_improved = 0usize;
    let mut lines = Vec::new();
    for &seed in &seeds {
        let mut cfg = ScenarioConfig::default_fixture();
        cfg.seed = seed;
        assert!(
            (cfg.sensors.probe_rate - 0.05).abs() < 1e-12,
            "criterion 4 runs at the default 5% probe rate"
        );
        let sim = simulate(&cfg).expect("criterion 4: simulate");
        let derived = derive_all(&cfg, &sim.traces, &StageOptions::default())
            .expect("criterion 4: derive");
        let opts = EstimateOptions {
            route_id: 3,
            split: SplitSpec::default(),
            k: 10,
            probe_rate: None,
        };
        let out = estimate(&cfg, &sim.traces, &sim.loops, &sim.phases, &derived.series, &opts)
            .expect("criterion 4: estimate");
        let evals = &out.result.evals;
        assert_eq!(evals[0].model_name, "sample");
        assert_eq!(evals[1].model_name, "base");
        assert_eq!(evals[2].model_name, "final");
        let sample = evals[0].mape_pct.expect("sample mape");
        let base = evals[1].mape_pct.expect("base mape");
        let fin = evals[2].mape_pct.expect("final mape");
        let adj_base = evals[1].adj_r2.expect("base adj r2");
        let adj_final = evals[2].adj_r2.expect("final adj r2");
        if sample >= base && base >= fin {
            ordered += 1;
        }
        if adj_final > adj_base {
            adj_improved += 1;
        }
        lines.push(format!(
            "seed {seed}: {sample:.2}% / {base:.2}% / {fin:.2}%, adjR2 {adj_base:.3} -> {adj_final:.3}"
        ));
    }
    let elapsed = started.elapsed();
    for line in &lines {
        println!("  {line}");
    }
    assert!(
        ordered >= 8,
        "criterion 4: sample >= base >= final held in only {ordered}/10 seeds"
    );
    assert!(
        adj_improved >= 9,
        "criterion 4: final adjR2 beat base adjR2 in only {adj_improved}/10 seeds"
    );
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "criterion 4: runtime {elapsed:?} exceeds 60 s"
    );
    println!(
        "[PASS] criterion 4: sample >= base >= final in {ordered}/10 seeds, \
         final adjR2 > base adjR2 in {adj_improved}/10 seeds ({elapsed:.2?})"
    );
}

// ---- criterion 5: degrading plate recognition never helps flow accuracy ----

#[test]
fn criterion_5_halving_plate_recognition_never_reduces_flow_error() {
    let mut comparisons = 0usize;
    for seed in [11u64, 23, 42] {
        let mut full = ScenarioConfig::default_fixture();
        full.seed = seed;
        full.sensors.plate_base_prob = 1.0;
        full.sensors.plate_windows.clear();
        let mut half = full.clone();
        half.sensors.plate_base_prob = 0.5;

        // Coupled runs: identical traffic, identical sensor draws, only the
        // acceptance threshold moves.
        let traces = simulate(&full).expect("criterion 5: simulate").traces;
        let opts = StageOptions::default();
        let derived_full = derive_all(&full, &traces, &opts).unwrap();
        let derived_half = derive_all(&half, &traces, &opts).unwrap();
        let spots = spot_ids(&full);
        let routes = route_ids(&full);
        let (rows_full, _) = assess(&derived_full.series, &spots, &routes).unwrap();
        let (rows_half, _) = assess(&derived_half.series, &spots, &routes).unwrap();
        for s in &spots {
            let quantity = format!("q{s}");
            let pick = |rows: &[tse_core::metrics::ReportRow]| -> f64 {
                rows.iter()
                    .find(|r| r.quantity == quantity && r.source == Source::Lp)
                    .and_then(|r| r.mape_pct)
                    .unwrap_or_else(|| panic!("criterion 5: no plate flow mape for {quantity}"))
            };
            let err_full = pick(&rows_full);
            let err_half = pick(&rows_half);
            assert!(
                err_half >= err_full - 1e-12,
                "criterion 5: seed {seed} {quantity}: flow MAPE fell from {err_full} to {err_half} when recognition degraded"
            );
            comparisons += 1;
        }
    }
    println!("[PASS] criterion 5: plate recognition 1.0 -> 0.5 never reduced flow MAPE ({comparisons} spot comparisons over 3 coupled seeds)");
}

// ---- criterion 6: metric identities over generated cases ----

#[test]
fn criterion_6_metric_properties_hold_over_a_thousand_cases() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7_006);
    let grid = |n: usize| IntervalGrid {
        start_s: 0.0,
        horizon_s: 60.0 * n as f64,
        interval_s: 60.0,
    };
    let random_series = |rng: &mut ChaCha8Rng, n: usize| -> SampledSeries {
        let values: Vec<Option<f64>> = (0..n)
            .map(|_| (!rng.gen_bool(0.2)).then(|| rng.gen_range(1.0..300.0)))
            .collect();
        SampledSeries::new(grid(n), values, Unit::Seconds).unwrap()
    };
    let mut cases = 0usize;

    // Correlation: symmetric, bounded, one on itself, unchanged by a
    // positive affine rescaling of either side.
    for _ in 0..600 {
        let n = rng.gen_range(3..40);
        let a = random_series(&mut rng, n);
        let b = random_series(&mut rng, n);
        let (rab, nab) = pcc(&a, &b).unwrap();
        let (rba, nba) = pcc(&b, &a).unwrap();
        assert_eq!(rab, rba, "criterion 6: correlation is not symmetric");
        assert_eq!(nab, nba);
        if let Some(r) = rab {
            assert!(
                (-1.0 - 1e-12..=1.0 + 1e-12).contains(&r),
                "criterion 6: correlation {r} out of bounds"
            );
        }
        let (rself, _) = pcc(&a, &a).unwrap();
        if let Some(r) = rself {
            assert!(
                (r - 1.0).abs() < 1e-12,
                "criterion 6: self-correlation {r}"
            );
        }
        let alpha = rng.gen_range(0.1..5.0);
        let beta = rng.gen_range(-50.0..50.0);
        let scaled_values: Vec<Option<f64>> = a
            .values()
            .iter()
            .map(|v| v.map(|x| alpha * x + beta))
            .collect();
        let scaled =
            SampledSeries::new(*a.grid(), scaled_values, Unit::Dimensionless).unwrap();
        let (rsb, _) = pcc(&scaled, &b).unwrap();
        match (rab, rsb) {
            (Some(x), Some(y)) => assert!(
                (x - y).abs() < 1e-9,
                "criterion 6: correlation moved under rescaling: {x} vs {y}"
            ),
            (x, y) => assert_eq!(x.is_some(), y.is_some()),
        }
        cases += 1;
    }

    // Percentage error: invariant under a common positive rescaling.
    for _ in 0..250 {
        let n = rng.gen_range(2..40);
        let truth = random_series(&mut rng, n);
        let est = random_series(&mut rng, n);
        let c = rng.gen_range(0.05..20.0);
        let scale = |s: &SampledSeries| {
            let values: Vec<Option<f64>> =
                s.values().iter().map(|v| v.map(|x| c * x)).collect();
            SampledSeries::new(*s.grid(), values, Unit::Seconds).unwrap()
        };
        let plain = mape(&truth, &est).unwrap();
        let scaled = mape(&scale(&truth), &scale(&est)).unwrap();
        assert_eq!(plain.n_used, scaled.n_used);
        match (plain.mape_pct, scaled.mape_pct) {
            (Some(x), Some(y)) => assert!(
                (x - y).abs() < 1e-9 * x.max(1.0),
                "criterion 6: mape moved under rescaling: {x} vs {y}"
            ),
            (x, y) => assert_eq!(x.is_some(), y.is_some()),
        }
        cases += 1;
    }

    // Adjusted coefficient of determination never beats the raw one.
    for _ in 0..250 {
        let n = rng.gen_range(4..60);
        let p = rng.gen_range(1..4.min(n - 2));
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let yhat: Vec<f64> = y.iter().map(|v| v + rng.gen_range(-3.0..3.0)).collect();
        let (r2, adj) = r2_and_adj(&y, &yhat, p);
        if let (Some(r2), Some(adj)) = (r2, adj) {
            assert!(adj <= r2 + 1e-12, "criterion 6: adj {adj} > r2 {r2}");
        }
        cases += 1;
    }

    let elapsed = started.elapsed();
    assert!(cases >= 1000, "criterion 6: only {cases} generated cases");
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "criterion 6: runtime {elapsed:?} exceeds 30 s"
    );
    println!("[PASS] criterion 6: metric identities held over {cases} generated cases ({elapsed:.2?})");
}

// ---- criterion 7: frozen aggregate feed reports an undefined correlation ----

#[test]
fn criterion_7_vanishing_smoothing_factor_yields_na_correlation() {
    let mut cfg = ScenarioConfig::default_fixture();
    cfg.sensors.aggregate_alpha = 1e-9;
    let sim = simulate(&cfg).expect("criterion 7: simulate");
    let derived =
        derive_all(&cfg, &sim.traces, &StageOptions::default()).expect("criterion 7: derive");
    let (rows, _) = assess(&derived.series, &spot_ids(&cfg), &route_ids(&cfg)).unwrap();
    let mut checked = 0usize;
    for row in rows.iter().filter(|r| r.source == Source::G) {
        assert!(
            row.rho.is_none(),
            "criterion 7: {} aggregate row has rho {:?}, expected NA",
            row.quantity,
            row.rho
        );
        checked += 1;
    }
    assert_eq!(checked, cfg.routes.len(), "criterion 7: aggregate rows missing");

    // The written report spells the undefined correlation as NA.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    tse_core::io::write_report(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let na_rows = text
        .lines()
        .filter(|l| l.contains(",G,NA,"))
        .count();
    assert_eq!(
        na_rows, checked,
        "criterion 7: report file does not spell the frozen feed's rho as NA"
    );
    println!("[PASS] criterion 7: alpha -> 0 froze the aggregate feed and all {checked} aggregate report rows carry rho = NA");
}

// ---- criterion 8: the command line pipeline is bit-reproducible ----

fn run_stage(bin: &str, out: &Path, stage: &str) {
    let status = Command::new(bin)
        .arg("--seed")
        .arg("42")
        .arg("--out")
        .arg(out)
        .arg(stage)
        .status()
        .expect("criterion 8: spawn");
    assert!(status.success(), "criterion 8: {stage} failed in {out:?}");
}

fn digest_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let bytes = std::fs::read(entry.path()).unwrap();
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        out.insert(entry.file_name().to_string_lossy().into_owned(), hex);
    }
    out
}

#[test]
fn criterion_8_identical_invocations_produce_identical_artifacts() {
    let bin = env!("CARGO_BIN_EXE_tse");
    let root = tempfile::tempdir().unwrap();
    let stages = ["simulate", "derive", "assess", "estimate", "plotdata"];

    // Literally identical invocations: the same pipeline run twice into the
    // same directory must leave every artifact digest-identical.
    let a = root.path().join("a");
    for stage in stages {
        run_stage(bin, &a, stage);
    }
    let first = digest_dir(&a);
    for stage in stages {
        run_stage(bin, &a, stage);
    }
    let second = digest_dir(&a);
    assert_eq!(
        first.keys().collect::<Vec<_>>(),
        second.keys().collect::<Vec<_>>(),
        "criterion 8: artifact sets differ between identical invocations"
    );
    for (name, hash) in &first {
        assert_eq!(
            hash,
            second.get(name).unwrap(),
            "criterion 8: {name} differs between identical invocations"
        );
    }
    assert!(
        first.len() >= 17,
        "criterion 8: expected the full artifact set, found {}",
        first.len()
    );

    // The data artifacts are also reproducible across run directories; only
    // the manifest names its own directory.
    let b = root.path().join("b");
    for stage in stages {
        run_stage(bin, &b, stage);
    }
    let other = digest_dir(&b);
    for (name, hash) in &first {
        if name == "run_manifest.json" {
            continue;
        }
        assert_eq!(
            hash,
            other.get(name).unwrap_or_else(|| panic!("criterion 8: {name} missing")),
            "criterion 8: {name} differs across run directories"
        );
    }
    println!(
        "[PASS] criterion 8: identical invocations left all {} artifacts digest-identical \
         (and data artifacts reproduce across directories)",
        first.len()
    );
}
