//! Duration prediction: feature encoding, splitting, regressors, model
//! selection, metrics, and APE-based confidence levels.

pub mod baseline;
pub mod encode;
pub mod knn;
pub mod metrics;
pub mod models;
pub mod search;
pub mod split;
pub mod train;
pub mod tree;

pub use baseline::{BaselineKey, MeanEstimator};
pub use encode::{encode_features, target_vector, FeatureEncoder, FeatureMatrix, UNKNOWN_CODE};
pub use knn::KnnWeights;
pub use metrics::{ape, confidence_level, regression_metrics, MetricsReport};
pub use models::{
    fit, BoostedSpec, FittedModel, ForestSpec, KnnSpec, Learned, ModelSpec, TreeSpec,
};
pub use search::{grid_search_cv, CvScore, GridSearchResult};
pub use split::{kfold, stratified_split};
pub use train::{train, BaselineMetrics, TrainConfig, TrainError, TrainOutput};
pub use tree::Criterion;

use serde::{Deserialize, Serialize};

use crate::ingest::SurgicalRecord;
use crate::model::ConfidenceLevel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input")]
    Empty,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("record {0}: DURATA missing or not positive")]
    InvalidTarget(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("actual duration {0} is not positive")]
    NonPositiveActual(f64),
    #[error("unsupported model artifact version {0}")]
    ArtifactVersion(u32),
}

pub const ARTIFACT_VERSION: u32 = 1;

/// A trained model together with the encoder that produced its features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub encoder: FeatureEncoder,
    pub model: FittedModel,
}

impl ModelArtifact {
    pub fn new(encoder: FeatureEncoder, model: FittedModel) -> Self {
        Self {
            format_version: ARTIFACT_VERSION,
            feature_names: encoder.feature_names(),
            encoder,
            model,
        }
    }

    pub fn check_version(&self) -> Result<(), PredictError> {
        if self.format_version == ARTIFACT_VERSION {
            Ok(())
        } else {
            Err(PredictError::ArtifactVersion(self.format_version))
        }
    }

    pub fn predict_records(&self, records: &[SurgicalRecord]) -> Result<Vec<f64>, PredictError> {
        self.check_version()?;
        let x = self.encoder.transform(records)?;
        self.model.predict(&x)
    }
}

/// One scored prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub id: String,
    pub actual: f64,
    pub predicted: f64,
    pub ape: f64,
    pub confidence: ConfidenceLevel,
}

/// Pairs predictions with actual durations and attaches APE and confidence.
pub fn score_predictions(
    ids: &[String],
    actual: &[f64],
    predicted: &[f64],
) -> Result<Vec<ScoredPrediction>, PredictError> {
    if ids.len() != actual.len() || actual.len() != predicted.len() {
        return Err(PredictError::Shape(format!(
            "{} ids, {} actual, {} predicted",
            ids.len(),
            actual.len(),
            predicted.len()
        )));
    }
    ids.iter()
        .zip(actual)
        .zip(predicted)
        .map(|((id, &a), &p)| {
            let e = ape(a, p)?;
            Ok(ScoredPrediction {
                id: id.clone(),
                actual: a,
                predicted: p,
                ape: e,
                confidence: confidence_level(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Column, TimestampFormat};
    use crate::par::Threads;

    #[test]
    fn artifact_roundtrip_predicts_identically() {
        let mut recs = Vec::new();
        for i in 0..40 {
            let mut r = SurgicalRecord::default();
            r.set(Column::Progressivo, i.to_string());
            r.set(Column::Reparto, if i % 2 == 0 { "A" } else { "B" });
            r.set(Column::Eta, (20 + i).to_string());
            r.set(Column::Durata, (10 + i % 2 * 30 + i / 4).to_string());
            recs.push(r);
        }
        let cols = vec![Column::Progressivo, Column::Reparto, Column::Eta, Column::Durata];
        let enc = FeatureEncoder::fit(&recs, &cols, &TimestampFormat::default());
        let x = enc.transform(&recs).unwrap();
        let y = target_vector(&recs).unwrap();
        let model = fit(&ModelSpec::named("gb").unwrap(), &x, &y, 0, Threads::ALL).unwrap();
        let art = ModelArtifact::new(enc, model);
        let json = serde_json::to_string(&art).unwrap();
        let back: ModelArtifact = serde_json::from_str(&json).unwrap();
        assert_eq!(back, art);
        assert_eq!(
            back.predict_records(&recs).unwrap(),
            art.predict_records(&recs).unwrap()
        );
    }

    #[test]
    fn scoring_attaches_levels() {
        let s = score_predictions(&["a".into(), "b".into()], &[100.0, 40.0], &[95.0, 70.0]).unwrap();
        assert_eq!(s[0].confidence, ConfidenceLevel::HIGH);
        assert_eq!(s[1].ape, 75.0);
        assert_eq!(s[1].confidence, ConfidenceLevel::VERY_LOW);
    }
}
