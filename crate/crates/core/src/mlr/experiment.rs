//! Chronological train/test split, forward feature selection, and the
//! three-model comparison (raw sample, probe-only base, selected final).

use crate::error::{Error, Result};
use crate::metrics::mape_slices;
use crate::mlr::ols::{fit_ols, RegressionModel};
use crate::mlr::{FeatureMatrix, Transform};
use crate::series::{SampledSeries, Unit};
use crate::types::RouteId;

/// Chronological split: the first `train_frac` of usable intervals train the
/// model, the rest evaluate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_frac: 0.7 }
    }
}

/// Feature rows restricted to intervals with a known response, with missing
/// feature values imputed by their training-period means.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Log-transformed response.
    pub y_log: Vec<f64>,
    /// Raw response, seconds.
    pub y_raw: Vec<f64>,
    /// Interval index of each row.
    pub intervals: Vec<usize>,
    pub n_train: usize,
    /// Features dropped because they had no value in the training period.
    pub dropped_features: Vec<String>,
}

impl PreparedData {
    pub fn n_test(&self) -> usize {
        self.rows.len() - self.n_train
    }

    fn subset_rows(&self, names: &[String], lo: usize, hi: usize) -> Vec<Vec<f64>> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.names.iter().position(|x| x == n).unwrap())
            .collect();
        self.rows[lo..hi]
            .iter()
            .map(|r| idx.iter().map(|i| r[*i]).collect())
            .collect()
    }
}

/// Restrict the feature matrix to intervals with a present response, split
/// chronologically, and impute gaps with training means.
pub fn prepare(
    matrix: &FeatureMatrix,
    response_raw: &SampledSeries,
    split: &SplitSpec,
) -> Result<PreparedData> {
    if !(split.train_frac > 0.0 && split.train_frac < 1.0) {
        return Err(Error::Config("train fraction must lie in (0, 1)".into()));
    }
    if matrix.num_intervals != response_raw.len() {
        return Err(Error::GridMismatch(
            "feature matrix and response cover different interval counts".into(),
        ));
    }
    if response_raw.unit() != Unit::Seconds {
        return Err(Error::Series("response must be a travel-time series".into()));
    }
    let usable: Vec<usize> = response_raw.present_indices().collect();
    let n = usable.len();
    let n_train = (split.train_frac * n as f64).floor() as usize;
    if n_train < 2 || n_train >= n {
        return Err(Error::InsufficientData(format!(
            "{n} usable intervals split into {n_train} train leaves no room to fit and test"
        )));
    }

    let mut names = Vec::new();
    let mut kept_cols: Vec<Vec<Option<f64>>> = Vec::new();
    let mut dropped = Vec::new();
    for (name, col) in matrix.names.iter().zip(matrix.columns.iter()) {
        let train_vals: Vec<f64> = usable[..n_train]
            .iter()
            .filter_map(|i| col[*i])
            .collect();
        if train_vals.is_empty() {
            dropped.push(name.clone());
            continue;
        }
        let mean = train_vals.iter().sum::<f64>() / train_vals.len() as f64;
        let filled: Vec<Option<f64>> = usable
            .iter()
            .map(|i| Some(col[*i].unwrap_or(mean)))
            .collect();
        names.push(name.clone());
        kept_cols.push(filled);
    }

    let rows: Vec<Vec<f64>> = (0..n)
        .map(|r| kept_cols.iter().map(|c| c[r].unwrap()).collect())
        .collect();
    let y_raw: Vec<f64> = usable.iter().map(|i| response_raw.get(*i).unwrap()).collect();
    let y_log: Vec<f64> = y_raw.iter().map(|v| v.ln()).collect();
    Ok(PreparedData {
        names,
        rows,
        y_log,
        y_raw,
        intervals: usable,
        n_train,
        dropped_features: dropped,
    })
}

/// Fit a model on the training slice using the named features, dropping any
/// that are constant over the training period (they carry no information
/// and collide with the intercept). Training diagnostics live on the
/// returned model.
fn fit_subset(data: &PreparedData, wanted: &[String]) -> Result<RegressionModel> {
    let mut used: Vec<String> = Vec::new();
    for name in wanted {
        let idx = data
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
        let first = data.rows[0][idx];
        let constant = data.rows[..data.n_train].iter().all(|r| r[idx] == first);
        if !constant {
            used.push(name.clone());
        }
    }
    let train_rows = data.subset_rows(&used, 0, data.n_train);
    let y_train = &data.y_log[..data.n_train];
    fit_ols(&used, &train_rows, y_train, Transform::Log)
}

/// One accepted selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub added: String,
    pub adj_r2: f64,
}

/// Outcome of forward selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSelection {
    pub model: RegressionModel,
    pub adj_r2: Option<f64>,
    pub steps: Vec<SelectionStep>,
}

/// Greedy forward selection: start from the mandatory feature, repeatedly
/// add the candidate with the largest strictly positive gain in training
/// adjusted R^2, stop when no candidate improves. Candidates whose fit is
/// rank deficient are skipped.
pub fn forward_select(
    data: &PreparedData,
    mandatory: &str,
    candidates: &[String],
) -> Result<ForwardSelection> {
    if !data.names.iter().any(|n| n == mandatory) {
        return Err(Error::InsufficientData(format!(
            "mandatory feature '{mandatory}' has no training data"
        )));
    }
    let mut selected = vec![mandatory.to_string()];
    let mut model = fit_subset(data, &selected)?;
    let mut steps = Vec::new();
    loop {
        let current = match model.adj_r2 {
            Some(a) => a,
            None => break,
        };
        let mut best: Option<(String, f64, RegressionModel)> = None;
        for cand in candidates {
            if selected.iter().any(|s| s == cand) || !data.names.iter().any(|n| n == cand) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(cand.clone());
            let m = match fit_subset(data, &trial) {
                Ok(x) => x,
                Err(Error::RankDeficient { .. }) | Err(Error::InsufficientData(_)) => continue,
                Err(e) => return Err(e),
            };
            if let Some(a) = m.adj_r2 {
                let beats_current = a > current;
                let beats_best = best.as_ref().map(|(_, b, _)| a > *b).unwrap_or(true);
                if beats_current && beats_best {
                    best = Some((cand.clone(), a, m));
                }
            }
        }
        match best {
            Some((name, a, m)) => {
                selected.push(name.clone());
                steps.push(SelectionStep {
                    added: name,
                    adj_r2: a,
                });
                model = m;
            }
            None => break,
        }
    }
    Ok(ForwardSelection {
        adj_r2: model.adj_r2,
        model,
        steps,
    })
}

/// Evaluation of one model variant on the test period.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEval {
    pub model_name: String,
    pub adj_r2: Option<f64>,
    pub mape_pct: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

/// Full experiment output for one route.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub route_id: RouteId,
    /// Rows `sample`, `base`, `final`, in that order.
    pub evals: Vec<ModelEval>,
    pub base_model: RegressionModel,
    pub final_model: RegressionModel,
    pub steps: Vec<SelectionStep>,
    pub dropped_features: Vec<String>,
    /// Raw-scale predictions of the base and final models over the grid.
    pub predictions_base: SampledSeries,
    pub predictions_final: SampledSeries,
    pub n_train: usize,
    pub n_test: usize,
}

fn test_mape(data: &PreparedData, model: &RegressionModel) -> Option<f64> {
    let rows = data.subset_rows(&model.feature_names, data.n_train, data.rows.len());
    let preds = model.predict_response(&rows);
    mape_slices(&data.y_raw[data.n_train..], &preds).mape_pct
}

fn prediction_series(
    data: &PreparedData,
    model: &RegressionModel,
    template: &SampledSeries,
) -> Result<SampledSeries> {
    let rows = data.subset_rows(&model.feature_names, 0, data.rows.len());
    let mut values: Vec<Option<f64>> = vec![None; template.len()];
    for (pos, pred) in model.predict_response(&rows).iter().enumerate() {
        values[data.intervals[pos]] = Some(*pred);
    }
    SampledSeries::new(*template.grid(), values, Unit::Seconds)
}

/// Fit and evaluate the three model variants for one route. The response
/// holds raw per-interval mean travel times; `sample_series` is the probe
/// sample as deployed without any model (typically its flow-weighted moving
/// average, which is what a consumer of the sample alone would read); the
/// matrix must include the mandatory probe feature.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    route_id: RouteId,
    matrix: &FeatureMatrix,
    response_raw: &SampledSeries,
    sample_series: &SampledSeries,
    split: &SplitSpec,
    mandatory: &str,
    candidates: &[String],
) -> Result<ExperimentResult> {
    response_raw.same_grid(sample_series)?;
    let data = prepare(matrix, response_raw, split)?;
    let p_total = 1 + candidates.len();
    if data.n_train < p_total + 2 {
        return Err(Error::InsufficientData(format!(
            "{} training intervals cannot support {p_total} candidate regressors",
            data.n_train
        )));
    }

    let base_model = fit_subset(&data, &[mandatory.to_string()])?;
    let base_adj = base_model.adj_r2;
    let selection = forward_select(&data, mandatory, candidates)?;

    // Sample row: the probe sample without estimation, read off wherever it
    // is defined on the test period, against the response.
    let test_intervals = &data.intervals[data.n_train..];
    let mut sample_ref = Vec::new();
    let mut sample_est = Vec::new();
    for &i in test_intervals {
        if let (Some(y), Some(p)) = (response_raw.get(i), sample_series.get(i)) {
            sample_ref.push(y);
            sample_est.push(p);
        }
    }
    let sample_mape = mape_slices(&sample_ref, &sample_est).mape_pct;

    let evals = vec![
        ModelEval {
            model_name: "sample".into(),
            adj_r2: None,
            mape_pct: sample_mape,
            n_train: 0,
            n_test: sample_ref.len(),
        },
        ModelEval {
            model_name: "base".into(),
            adj_r2: base_adj,
            mape_pct: test_mape(&data, &base_model),
            n_train: data.n_train,
            n_test: data.n_test(),
        },
        ModelEval {
            model_name: "final".into(),
            adj_r2: selection.adj_r2,
            mape_pct: test_mape(&data, &selection.model),
            n_train: data.n_train,
            n_test: data.n_test(),
        },
    ];

    let predictions_base = prediction_series(&data, &base_model, response_raw)?;
    let predictions_final = prediction_series(&data, &selection.model, response_raw)?;
    Ok(ExperimentResult {
        route_id,
        evals,
        base_model,
        final_model: selection.model,
        steps: selection.steps,
        dropped_features: data.dropped_features.clone(),
        predictions_base,
        predictions_final,
        n_train: data.n_train,
        n_test: data.n_test(),
    })
}
