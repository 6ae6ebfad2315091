//! k-nearest-neighbour regression on standardised features.

use serde::{Deserialize, Serialize};

use super::encode::FeatureMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnWeights {
    #[default]
    Uniform,
    /// Inverse-distance weights; exact matches, if any, are averaged alone.
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub n_neighbors: usize,
    pub weights: KnnWeights,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Standardised training rows, row-major.
    pub points: Vec<f64>,
    pub targets: Vec<f64>,
}

impl KnnModel {
    pub fn fit(x: &FeatureMatrix, y: &[f64], n_neighbors: usize, weights: KnnWeights) -> Self {
        let d = x.n_cols();
        let n = x.n_rows();
        let mut mean = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            mean[j] = m;
            if var > 0.0 {
                scale[j] = var.sqrt();
            }
        }
        let mut points = Vec::with_capacity(n * d);
        for i in 0..n {
            for (j, v) in x.row(i).iter().enumerate() {
                points.push((v - mean[j]) / scale[j]);
            }
        }
        Self {
            n_neighbors: n_neighbors.clamp(1, n.max(1)),
            weights,
            mean,
            scale,
            points,
            targets: y.to_vec(),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let d = self.mean.len();
        let q: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.scale[j])
            .collect();
        let mut dist: Vec<(f64, usize)> = self
            .targets
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let p = &self.points[i * d..(i + 1) * d];
                let s: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (s.sqrt(), i)
            })
            .collect();
        let k = self.n_neighbors.min(dist.len());
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        let nearest = &dist[..k];
        match self.weights {
            KnnWeights::Uniform => {
                nearest.iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / k as f64
            }
            KnnWeights::Distance => {
                let exact: Vec<f64> = nearest
                    .iter()
                    .filter(|(dd, _)| *dd == 0.0)
                    .map(|&(_, i)| self.targets[i])
                    .collect();
                if !exact.is_empty() {
                    return exact.iter().sum::<f64>() / exact.len() as f64;
                }
                let (num, den) = nearest.iter().fold((0.0, 0.0), |(n, w), &(dd, i)| {
                    (n + self.targets[i] / dd, w + 1.0 / dd)
                });
                num / den
            }
        }
    }
}
