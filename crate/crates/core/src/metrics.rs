//! Agreement metrics between derived series and ground truth.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::series::SampledSeries;

/// Pearson correlation over the jointly present samples of two series on the
/// same grid. Undefined (None) when fewer than two joint samples exist or
/// when either side has zero variance.
pub fn pcc(a: &SampledSeries, b: &SampledSeries) -> Result<(Option<f64>, usize)> {
    a.same_grid(b)?;
    let joint: Vec<(f64, f64)> = (0..a.len())
        .filter_map(|i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        })
        .collect();
    let n = joint.len();
    if n < 2 {
        return Ok((None, n));
    }
    let mean_a = joint.iter().map(|(x, _)| x).sum::<f64>() / n as f64;
    let mean_b = joint.iter().map(|(_, y)| y).sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in &joint {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Ok((None, n));
    }
    Ok((Some(cov / (var_a * var_b).sqrt()), n))
}

/// Outcome of a MAPE evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapeOutcome {
    /// Mean absolute percentage error, percent. None when no sample is usable.
    pub mape_pct: Option<f64>,
    /// Joint samples the mean was taken over.
    pub n_used: usize,
    /// Joint samples dropped because the reference value was zero.
    pub n_zero_excluded: usize,
}

/// Mean absolute percentage error of `estimate` against `reference` over
/// jointly present samples, in percent. Samples where the reference is zero
/// are excluded and tallied.
pub fn mape(reference: &SampledSeries, estimate: &SampledSeries) -> Result<MapeOutcome> {
    reference.same_grid(estimate)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut zeros = 0usize;
    for i in 0..reference.len() {
        if let (Some(y), Some(yhat)) = (reference.get(i), estimate.get(i)) {
            if y == 0.0 {
                zeros += 1;
                continue;
            }
            sum += ((yhat - y) / y).abs();
            used += 1;
        }
    }
    let mape_pct = if used > 0 {
        Some(sum / used as f64 * 100.0)
    } else {
        None
    };
    Ok(MapeOutcome {
        mape_pct,
        n_used: used,
        n_zero_excluded: zeros,
    })
}

/// MAPE over plain slices, for callers working outside the series type.
/// Same zero-exclusion rule as [`mape`].
pub fn mape_slices(reference: &[f64], estimate: &[f64]) -> MapeOutcome {
    debug_assert_eq!(reference.len(), estimate.len());
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut zeros = 0usize;
    for (y, yhat) in reference.iter().zip(estimate.iter()) {
        if *y == 0.0 {
            zeros += 1;
            continue;
        }
        sum += ((yhat - y) / y).abs();
        used += 1;
    }
    MapeOutcome {
        mape_pct: if used > 0 {
            Some(sum / used as f64 * 100.0)
        } else {
            None
        },
        n_used: used,
        n_zero_excluded: zeros,
    }
}

/// Coefficient of determination and its adjusted form for a fit with `p`
/// regressors (intercept not counted). None when the response has zero
/// total variation or the degrees of freedom run out.
pub fn r2_and_adj(y: &[f64], yhat: &[f64], p: usize) -> (Option<f64>, Option<f64>) {
    debug_assert_eq!(y.len(), yhat.len());
    let n = y.len();
    if n < 2 {
        return (None, None);
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return (None, None);
    }
    let ss_res: f64 = y
        .iter()
        .zip(yhat.iter())
        .map(|(v, vh)| (v - vh).powi(2))
        .sum();
    let r2 = 1.0 - ss_res / ss_tot;
    if n <= p + 1 {
        return (Some(r2), None);
    }
    let adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0);
    (Some(r2), Some(adj))
}

/// Data source a derived series came from, for assessment rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    Lp,
    Tc,
    G,
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Source::Lp => "LP",
            Source::Tc => "TC",
            Source::G => "G",
        })
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "LP" => Ok(Source::Lp),
            "TC" => Ok(Source::Tc),
            "G" => Ok(Source::G),
            other => Err(format!("unknown source '{other}'")),
        }
    }
}

/// One assessed quantity/source pair. Zero-reference exclusion tallies are
/// not part of the row; they travel in the report metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Assessed quantity, e.g. `q3` (spot flow) or `tt2` (route travel time).
    pub quantity: String,
    pub source: Source,
    pub rho: Option<f64>,
    pub mape_pct: Option<f64>,
    /// Period-average sensor matching rate, percent, where applicable.
    pub match_rate_pct: Option<f64>,
    /// Joint samples behind `rho` and `mape_pct`.
    pub n_samples: usize,
}
