//! Cross-validated grid search.

use serde::{Deserialize, Serialize};

use super::encode::FeatureMatrix;
use super::metrics::regression_metrics;
use super::models::{fit, ModelSpec};
use super::split::kfold;
use super::PredictError;
use crate::par::{self, Threads};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub spec: ModelSpec,
    pub mean_mae: f64,
    pub mean_rmse: f64,
    pub fold_mae: Vec<f64>,
    pub fold_rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub best: ModelSpec,
    pub scores: Vec<CvScore>,
}

/// Scores every spec on the same seeded k-fold partition. The winner has the
/// lowest mean validation MAE, then the lowest mean RMSE, then comes first in
/// the grid. All (spec, fold) fits run in parallel.
pub fn grid_search_cv(
    grid: &[ModelSpec],
    x: &FeatureMatrix,
    y: &[f64],
    k_folds: usize,
    seed: u64,
    threads: Threads,
) -> Result<GridSearchResult, PredictError> {
    if grid.is_empty() {
        return Err(PredictError::EmptyGrid);
    }
    for spec in grid {
        spec.validate()?;
    }
    let folds = kfold(y.len(), k_folds, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = folds
        .iter()
        .enumerate()
        .map(|(f, val)| {
            let train = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect::<Vec<_>>();
            (train, val.clone())
        })
        .collect();
    let pick = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<f64>>();

    // nested fits run sequentially; the outer loop already saturates the pool
    let results = par::map_indexed(grid.len() * k_folds, threads, |job| {
        let (s, f) = (job / k_folds, job % k_folds);
        let (train, val) = &splits[f];
        let model = fit(
            &grid[s],
            &x.select_rows(train),
            &pick(train),
            seed,
            Threads::SEQUENTIAL,
        )?;
        let pred = model.predict(&x.select_rows(val))?;
        regression_metrics(&pick(val), &pred)
    });

    let mut scores = Vec::with_capacity(grid.len());
    for (s, spec) in grid.iter().enumerate() {
        let mut fold_mae = Vec::with_capacity(k_folds);
        let mut fold_rmse = Vec::with_capacity(k_folds);
        for r in &results[s * k_folds..(s + 1) * k_folds] {
            let m = r.as_ref().map_err(Clone::clone)?;
            fold_mae.push(m.mae);
            fold_rmse.push(m.rmse);
        }
        scores.push(CvScore {
            spec: spec.clone(),
            mean_mae: fold_mae.iter().sum::<f64>() / k_folds as f64,
            mean_rmse: fold_rmse.iter().sum::<f64>() / k_folds as f64,
            fold_mae,
            fold_rmse,
        });
    }
    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let b = &scores[best_index];
        if s.mean_mae < b.mean_mae || (s.mean_mae == b.mean_mae && s.mean_rmse < b.mean_rmse) {
            best_index = i;
        }
    }
    Ok(GridSearchResult {
        best_index,
        best: grid[best_index].clone(),
        scores,
    })
}
