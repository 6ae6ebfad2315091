//! End-to-end training: preprocess, encode, stratified split, model
//! selection, final fit, held-out scoring.

use serde::{Deserialize, Serialize};

use super::baseline::{BaselineKey, MeanEstimator};
use super::encode::encode_features;
use super::metrics::{regression_metrics, MetricsReport};
use super::models::{fit, ModelSpec};
use super::search::{grid_search_cv, GridSearchResult};
use super::split::stratified_split;
use super::{score_predictions, ModelArtifact, PredictError, ScoredPrediction};
use crate::ingest::{preprocess, IngestError, PreprocessConfig, Provenance, SurgicalRecord};
use crate::par::Threads;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Candidate models; a single entry skips cross-validation.
    pub grid: Vec<ModelSpec>,
    pub test_fraction: f64,
    /// Duration quantile bins used to stratify the split.
    pub strata: usize,
    pub cv_folds: usize,
    pub seed: u64,
    #[serde(skip)]
    pub preprocess: PreprocessConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            grid: vec![ModelSpec::boosted_default()],
            test_fraction: 0.2,
            strata: 10,
            cv_folds: 5,
            seed: 0,
            preprocess: PreprocessConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub department: MetricsReport,
    pub procedure: MetricsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutput {
    pub artifact: ModelArtifact,
    pub selected: ModelSpec,
    pub search: Option<GridSearchResult>,
    pub test_metrics: MetricsReport,
    pub baseline_metrics: BaselineMetrics,
    /// Held-out predictions with APE and confidence.
    pub predictions: Vec<ScoredPrediction>,
    pub provenance: Provenance,
    /// Group means over the training split.
    pub department: MeanEstimator,
    pub procedure: MeanEstimator,
    pub n_train: usize,
    pub n_test: usize,
}

/// Trains on the stratified training split and scores the selected model and
/// both group-mean baselines on the held-out split.
pub fn train(
    records: &[SurgicalRecord],
    config: &TrainConfig,
    threads: Threads,
) -> Result<TrainOutput, TrainError> {
    if config.grid.is_empty() {
        return Err(PredictError::EmptyGrid.into());
    }
    let (clean, provenance) = preprocess(records, &config.preprocess, threads)?;
    let (x, y, encoder) = encode_features(&clean, &config.preprocess.timestamp_format)?;
    let (tr, te) = stratified_split(&y, config.test_fraction, config.strata, config.seed)?;
    if tr.is_empty() || te.is_empty() {
        return Err(PredictError::InvalidSplit(format!(
            "{} training and {} test rows",
            tr.len(),
            te.len()
        ))
        .into());
    }
    let pick = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<f64>>();
    let (x_tr, y_tr) = (x.select_rows(&tr), pick(&tr));
    let (x_te, y_te) = (x.select_rows(&te), pick(&te));

    let search = if config.grid.len() > 1 {
        Some(grid_search_cv(&config.grid, &x_tr, &y_tr, config.cv_folds, config.seed, threads)?)
    } else {
        None
    };
    let selected = search
        .as_ref()
        .map_or_else(|| config.grid[0].clone(), |s| s.best.clone());
    let model = fit(&selected, &x_tr, &y_tr, config.seed, threads)?;
    let predicted = model.predict(&x_te)?;
    let test_metrics = regression_metrics(&y_te, &predicted)?;

    let rows = |idx: &[usize]| idx.iter().map(|&i| clean.records[i].clone()).collect::<Vec<_>>();
    let (train_records, test_records) = (rows(&tr), rows(&te));
    let department = MeanEstimator::fit(&train_records, BaselineKey::Department);
    let procedure = MeanEstimator::fit(&train_records, BaselineKey::ProcedureType);
    let baseline = |e: &MeanEstimator| {
        let p: Vec<f64> = test_records.iter().map(|r| e.estimate(r)).collect();
        regression_metrics(&y_te, &p)
    };
    let baseline_metrics = BaselineMetrics {
        department: baseline(&department)?,
        procedure: baseline(&procedure)?,
    };
    let ids: Vec<String> = test_records.iter().map(|r| r.id().to_string()).collect();
    let predictions = score_predictions(&ids, &y_te, &predicted)?;

    Ok(TrainOutput {
        artifact: ModelArtifact::new(encoder, model),
        selected,
        search,
        test_metrics,
        baseline_metrics,
        predictions,
        provenance,
        department,
        procedure,
        n_train: tr.len(),
        n_test: te.len(),
    })
}
