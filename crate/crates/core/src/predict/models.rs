//! Model specifications, fitting, and prediction.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::FeatureMatrix;
use super::knn::{KnnModel, KnnWeights};
use super::tree::{fit_tree, Binned, Criterion, Tree, TreeParams};
use super::PredictError;
use crate::par::{self, Threads};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_split")]
    pub min_samples_split: usize,
    #[serde(default)]
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestSpec {
    pub n_estimators: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_split")]
    pub min_samples_split: usize,
    /// Features tried per split; defaults to a third of them.
    #[serde(default)]
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostedSpec {
    pub n_estimators: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_split")]
    pub min_samples_split: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnSpec {
    pub n_neighbors: usize,
    #[serde(default)]
    pub weights: KnnWeights,
}

fn default_min_split() -> usize {
    2
}

/// A model family with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Tree(TreeSpec),
    Forest(ForestSpec),
    BoostedTrees(BoostedSpec),
    Knn(KnnSpec),
}

impl ModelSpec {
    /// Tuned configurations by short name: `tree`, `forest`, `gb`,
    /// `boosted_trees`, `knn`.
    pub fn named(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "tree" | "dt" => ModelSpec::Tree(TreeSpec {
                max_depth: Some(50),
                min_samples_split: 2,
                criterion: Criterion::FriedmanMse,
            }),
            "forest" | "rf" => ModelSpec::Forest(ForestSpec {
                n_estimators: 10,
                max_depth: None,
                min_samples_split: 5,
                max_features: None,
            }),
            "gb" => ModelSpec::BoostedTrees(BoostedSpec {
                n_estimators: 400,
                learning_rate: 0.01,
                max_depth: Some(15),
                min_samples_split: 2,
            }),
            "boosted_trees" | "xgboost" => ModelSpec::boosted_default(),
            "knn" => ModelSpec::Knn(KnnSpec {
                n_neighbors: 5,
                weights: KnnWeights::Distance,
            }),
            _ => return None,
        })
    }

    /// 400 stages, learning rate 0.1, depth 5.
    pub fn boosted_default() -> Self {
        ModelSpec::BoostedTrees(BoostedSpec {
            n_estimators: 400,
            learning_rate: 0.1,
            max_depth: Some(5),
            min_samples_split: 2,
        })
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Tree(_) => "tree",
            ModelSpec::Forest(_) => "forest",
            ModelSpec::BoostedTrees(_) => "boosted_trees",
            ModelSpec::Knn(_) => "knn",
        }
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        let bad = |msg: &str| Err(PredictError::InvalidHyperparameter(msg.to_string()));
        let split_ok = |m: usize| m >= 2;
        match self {
            ModelSpec::Tree(s) if !split_ok(s.min_samples_split) => bad("min_samples_split must be >= 2"),
            ModelSpec::Forest(s) if s.n_estimators == 0 => bad("forest needs n_estimators >= 1"),
            ModelSpec::Forest(s) if !split_ok(s.min_samples_split) => bad("min_samples_split must be >= 2"),
            ModelSpec::Forest(s) if s.max_features == Some(0) => bad("max_features must be >= 1"),
            ModelSpec::BoostedTrees(s) if !(s.learning_rate.is_finite() && s.learning_rate > 0.0) => {
                bad("learning_rate must be positive")
            }
            ModelSpec::BoostedTrees(s) if !split_ok(s.min_samples_split) => bad("min_samples_split must be >= 2"),
            ModelSpec::Knn(s) if s.n_neighbors == 0 => bad("n_neighbors must be >= 1"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Learned {
    Tree { tree: Tree },
    Forest { trees: Vec<Tree> },
    BoostedTrees { base: f64, learning_rate: f64, trees: Vec<Tree> },
    Knn(KnnModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub n_features: usize,
    pub learned: Learned,
}

fn check_shapes(x: &FeatureMatrix, y: &[f64]) -> Result<(), PredictError> {
    if x.n_rows() != y.len() {
        return Err(PredictError::Shape(format!(
            "{} rows but {} targets",
            x.n_rows(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(PredictError::Empty);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(PredictError::NonFinite);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Fits `spec` on `(x, y)`. Forest trees are fitted in parallel, each on its
/// own random stream, so results do not depend on `threads`.
pub fn fit(
    spec: &ModelSpec,
    x: &FeatureMatrix,
    y: &[f64],
    seed: u64,
    threads: Threads,
) -> Result<FittedModel, PredictError> {
    spec.validate()?;
    check_shapes(x, y)?;
    let n = y.len();
    let all: Vec<usize> = (0..n).collect();
    let learned = match spec {
        ModelSpec::Tree(s) => {
            let params = TreeParams {
                max_depth: s.max_depth,
                min_samples_split: s.min_samples_split,
                criterion: s.criterion,
                ..Default::default()
            };
            Learned::Tree {
                tree: fit_tree(&Binned::new(x), y, &all, &params, None),
            }
        }
        ModelSpec::Forest(s) => {
            let binned = Binned::new(x);
            let d = x.n_cols();
            let params = TreeParams {
                max_depth: s.max_depth,
                min_samples_split: s.min_samples_split,
                max_features: Some(s.max_features.unwrap_or((d / 3).max(1))),
                ..Default::default()
            };
            let trees = par::map_indexed(s.n_estimators, threads, |t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let sample: Vec<usize> = (0..n)
                    .map(|_| *all.choose(&mut rng).expect("non-empty"))
                    .collect();
                fit_tree(&binned, y, &sample, &params, Some(&mut rng))
            });
            Learned::Forest { trees }
        }
        ModelSpec::BoostedTrees(s) => {
            let binned = Binned::new(x);
            let params = TreeParams {
                max_depth: s.max_depth,
                min_samples_split: s.min_samples_split,
                criterion: Criterion::SquaredError,
                ..Default::default()
            };
            let base = mean(y);
            let mut current = vec![base; n];
            let mut residual = vec![0.0; n];
            let mut trees = Vec::with_capacity(s.n_estimators);
            for _ in 0..s.n_estimators {
                for i in 0..n {
                    residual[i] = y[i] - current[i];
                }
                let tree = fit_tree(&binned, &residual, &all, &params, None);
                for (i, c) in current.iter_mut().enumerate() {
                    *c += s.learning_rate * tree.predict_row(x.row(i));
                }
                trees.push(tree);
            }
            Learned::BoostedTrees {
                base,
                learning_rate: s.learning_rate,
                trees,
            }
        }
        ModelSpec::Knn(s) => Learned::Knn(KnnModel::fit(x, y, s.n_neighbors, s.weights)),
    };
    Ok(FittedModel {
        spec: spec.clone(),
        n_features: x.n_cols(),
        learned,
    })
}

impl FittedModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.learned {
            Learned::Tree { tree } => tree.predict_row(row),
            Learned::Forest { trees } => {
                trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / trees.len() as f64
            }
            Learned::BoostedTrees {
                base,
                learning_rate,
                trees,
            } => trees
                .iter()
                .fold(*base, |acc, t| acc + learning_rate * t.predict_row(row)),
            Learned::Knn(m) => m.predict_row(row),
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, PredictError> {
        if x.n_cols() != self.n_features {
            return Err(PredictError::Shape(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.n_cols()
            )));
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (FeatureMatrix, Vec<f64>) {
        let x = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![1.0, 0.0], vec![2.0, 1.0], vec![3.0, 0.0], vec![4.0, 1.0]],
        )
        .unwrap();
        (x, vec![10.0, 40.0, 20.0, 30.0])
    }

    fn all_families() -> Vec<ModelSpec> {
        ["tree", "forest", "gb", "boosted_trees", "knn"]
            .iter()
            .map(|n| ModelSpec::named(n).unwrap())
            .collect()
    }

    #[test]
    fn constant_target_is_reproduced_by_every_family() {
        let (x, _) = fixture();
        let y = vec![42.0; 4];
        for spec in all_families() {
            let m = fit(&spec, &x, &y, 1, Threads::SEQUENTIAL).unwrap();
            for p in m.predict(&x).unwrap() {
                assert!((p - 42.0).abs() < 1e-9, "{} -> {p}", spec.family());
            }
            assert!((m.predict_row(&[99.0, -3.0]) - 42.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_full_stages_with_unit_rate_interpolate() {
        let (x, y) = fixture();
        let spec = ModelSpec::BoostedTrees(BoostedSpec {
            n_estimators: 2,
            learning_rate: 1.0,
            max_depth: Some(3),
            min_samples_split: 2,
        });
        let m = fit(&spec, &x, &y, 0, Threads::SEQUENTIAL).unwrap();
        let p = m.predict(&x).unwrap();
        for (a, b) in p.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_stages_predict_the_mean() {
        let (x, y) = fixture();
        let spec = ModelSpec::BoostedTrees(BoostedSpec {
            n_estimators: 0,
            learning_rate: 0.1,
            max_depth: Some(3),
            min_samples_split: 2,
        });
        let m = fit(&spec, &x, &y, 0, Threads::SEQUENTIAL).unwrap();
        assert_eq!(m.predict_row(&[0.0, 0.0]), 25.0);
    }

    #[test]
    fn forest_of_identical_trees_equals_one_tree() {
        let (x, y) = fixture();
        let tree = fit(&ModelSpec::named("tree").unwrap(), &x, &y, 0, Threads::SEQUENTIAL).unwrap();
        let Learned::Tree { tree: t } = &tree.learned else { unreachable!() };
        let forest = FittedModel {
            spec: ModelSpec::named("forest").unwrap(),
            n_features: 2,
            learned: Learned::Forest {
                trees: vec![t.clone(); 5],
            },
        };
        assert_eq!(forest.predict(&x).unwrap(), tree.predict(&x).unwrap());
    }

    #[test]
    fn forest_is_thread_count_independent() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64, (i * 7 % 11) as f64, (i % 3) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 + r[1]).collect();
        let x = FeatureMatrix::from_rows(vec!["a".into(), "b".into(), "c".into()], &rows).unwrap();
        let spec = ModelSpec::named("forest").unwrap();
        let a = fit(&spec, &x, &y, 7, Threads::SEQUENTIAL).unwrap();
        let b = fit(&spec, &x, &y, 7, Threads(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_hyperparameters_fail_before_fitting() {
        let (x, y) = fixture();
        let bad = [
            ModelSpec::Knn(KnnSpec { n_neighbors: 0, weights: KnnWeights::Uniform }),
            ModelSpec::BoostedTrees(BoostedSpec {
                n_estimators: 3,
                learning_rate: 0.0,
                max_depth: None,
                min_samples_split: 2,
            }),
            ModelSpec::Forest(ForestSpec {
                n_estimators: 0,
                max_depth: None,
                min_samples_split: 2,
                max_features: None,
            }),
        ];
        for spec in bad {
            assert!(matches!(
                fit(&spec, &x, &y, 0, Threads::SEQUENTIAL),
                Err(PredictError::InvalidHyperparameter(_))
            ));
        }
        assert!(serde_json::from_str::<ModelSpec>(r#"{"family":"knn","n_neighbors":3,"learning_rate":0.1}"#).is_err());
        assert!(serde_json::from_str::<ModelSpec>(r#"{"family":"knn","n_neighbors":3}"#).is_ok());
    }

    #[test]
    fn column_mismatch_is_an_error() {
        let (x, y) = fixture();
        let m = fit(&ModelSpec::named("tree").unwrap(), &x, &y, 0, Threads::SEQUENTIAL).unwrap();
        let other = FeatureMatrix::from_rows(vec!["a".into()], &[vec![1.0]]).unwrap();
        assert!(m.predict(&other).is_err());
    }
}
