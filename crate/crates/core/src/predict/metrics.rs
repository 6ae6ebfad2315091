//! Regression metrics, absolute percentage error, and confidence levels.

use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::model::ConfidenceLevel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the targets are constant.
    pub r2: Option<f64>,
}

pub fn regression_metrics(y: &[f64], yhat: &[f64]) -> Result<MetricsReport, PredictError> {
    if y.len() != yhat.len() {
        return Err(PredictError::Shape(format!(
            "{} targets but {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    if y.is_empty() {
        return Err(PredictError::Empty);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let (mut abs, mut sq, mut tot) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        abs += (a - b).abs();
        sq += (a - b) * (a - b);
        tot += (a - mean) * (a - mean);
    }
    Ok(MetricsReport {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        r2: (tot > 0.0).then(|| 1.0 - sq / tot),
    })
}

/// Absolute percentage error `|yhat - y| / y * 100`.
pub fn ape(y_true: f64, y_pred: f64) -> Result<f64, PredictError> {
    if y_true <= 0.0 || !y_true.is_finite() {
        return Err(PredictError::NonPositiveActual(y_true));
    }
    Ok((y_pred - y_true).abs() / y_true * 100.0)
}

/// Buckets: below 10 is high, [10, 25) moderate, [25, 50) low, 50 and above
/// very low.
pub fn confidence_level(ape_percent: f64) -> ConfidenceLevel {
    if ape_percent < 10.0 {
        ConfidenceLevel::HIGH
    } else if ape_percent < 25.0 {
        ConfidenceLevel::MODERATE
    } else if ape_percent < 50.0 {
        ConfidenceLevel::LOW
    } else {
        ConfidenceLevel::VERY_LOW
    }
}
