//! Ordinary least squares via Householder QR.

use crate::error::{Error, Result};
use crate::metrics::r2_and_adj;
use crate::mlr::Transform;

/// A fitted linear model over named regressors plus an intercept, together
/// with its training diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub feature_names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Transform the response was fitted under; predictions are reported
    /// back on the raw scale.
    pub response_transform: Transform,
    /// Standard deviation of the training residuals (dof-adjusted).
    pub residual_std: f64,
    pub r2: Option<f64>,
    pub adj_r2: Option<f64>,
    /// Training observations.
    pub n: usize,
    /// Regressor count (intercept not included).
    pub p: usize,
}

impl RegressionModel {
    /// Predict one observation in the transformed space; `x` is ordered like
    /// `feature_names`.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coefficients.len());
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x.iter())
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    /// Predictions in the transformed space.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    /// Predictions on the raw response scale, undoing the response
    /// transform.
    pub fn predict_response(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        self.predict(rows)
            .into_iter()
            .map(|v| match self.response_transform {
                Transform::None => v,
                Transform::Log => v.exp(),
            })
            .collect()
    }
}

/// Fit `y ~ 1 + x` by least squares. `rows` holds one observation per entry,
/// each ordered like `names`; `y` is already in the transformed space named
/// by `response_transform`. Solved by Householder QR; a numerically
/// rank-deficient design is rejected with the dependent columns named.
pub fn fit_ols(
    names: &[String],
    rows: &[Vec<f64>],
    y: &[f64],
    response_transform: Transform,
) -> Result<RegressionModel> {
    let n = rows.len();
    let p = names.len();
    let m = p + 1;
    if y.len() != n {
        return Err(Error::InsufficientData(
            "response and design matrix lengths differ".into(),
        ));
    }
    if n < m + 1 {
        return Err(Error::InsufficientData(format!(
            "{n} observations cannot support {p} regressors plus an intercept"
        )));
    }
    // Column 0 is the intercept.
    let mut a = vec![0.0f64; n * m];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != p {
            return Err(Error::InsufficientData(
                "design matrix row width differs from feature names".into(),
            ));
        }
        a[i * m] = 1.0;
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Series("non-finite regressor value".into()));
            }
            a[i * m + j + 1] = *v;
        }
    }
    let mut rhs = y.to_vec();
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Series("non-finite response value".into()));
    }

    // Householder reflections, overwriting `a` with R in its upper triangle
    // and applying the same transforms to the right-hand side.
    for k in 0..m {
        let mut norm2 = 0.0;
        for i in k..n {
            norm2 += a[i * m + k] * a[i * m + k];
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            continue;
        }
        let akk = a[k * m + k];
        let alpha = if akk >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0f64; n - k];
        v[0] = akk - alpha;
        for i in (k + 1)..n {
            v[i - k] = a[i * m + k];
        }
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..m {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i - k] * a[i * m + j];
            }
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                a[i * m + j] -= f * v[i - k];
            }
        }
        let mut dot = 0.0;
        for i in k..n {
            dot += v[i - k] * rhs[i];
        }
        let f = 2.0 * dot / vnorm2;
        for i in k..n {
            rhs[i] -= f * v[i - k];
        }
    }

    let max_diag = (0..m).map(|j| a[j * m + j].abs()).fold(0.0f64, f64::max);
    let tol = f64::EPSILON * (n.max(m) as f64) * max_diag.max(1.0);
    let dependent: Vec<String> = (0..m)
        .filter(|j| a[j * m + j].abs() <= tol)
        .map(|j| {
            if j == 0 {
                "intercept".to_string()
            } else {
                names[j - 1].clone()
            }
        })
        .collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }

    let mut beta = vec![0.0f64; m];
    for j in (0..m).rev() {
        let mut s = rhs[j];
        for l in (j + 1)..m {
            s -= a[j * m + l] * beta[l];
        }
        beta[j] = s / a[j * m + j];
    }

    let mut model = RegressionModel {
        feature_names: names.to_vec(),
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        response_transform,
        residual_std: 0.0,
        r2: None,
        adj_r2: None,
        n,
        p,
    };
    let yhat = model.predict(rows);
    let ss_res: f64 = y
        .iter()
        .zip(yhat.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    model.residual_std = (ss_res / (n - m) as f64).sqrt();
    let (r2, adj) = r2_and_adj(y, &yhat, p);
    model.r2 = r2;
    model.adj_r2 = adj;
    Ok(model)
}
