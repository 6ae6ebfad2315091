//! Histogram-based regression trees.

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::FeatureMatrix;

pub const MAX_BINS: usize = 256;

/// Split ranking score. Both rank splits by the reduction in squared error;
/// they differ only in how the score is written down.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `S_l^2/n_l + S_r^2/n_r - S^2/n`.
    SquaredError,
    /// `n_l n_r / n * (mean_l - mean_r)^2`.
    #[default]
    FriedmanMse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features drawn at random for every split; `None` uses all of them.
    pub max_features: Option<usize>,
    pub criterion: Criterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            criterion: Criterion::FriedmanMse,
        }
    }
}

/// Features quantised to at most [`MAX_BINS`] bins. Thresholds are raw
/// feature values, so a split on bin `b` sends `x <= thresholds[f][b]` left.
#[derive(Debug, Clone)]
pub struct Binned {
    n_rows: usize,
    bins: Vec<Vec<u16>>,
    thresholds: Vec<Vec<f64>>,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

impl Binned {
    pub fn new(x: &FeatureMatrix) -> Self {
        let mut bins = Vec::with_capacity(x.n_cols());
        let mut thresholds = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let col = x.column(j);
            let mut uniq = col.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            let th: Vec<f64> = if uniq.len() <= MAX_BINS {
                uniq.windows(2).map(|w| midpoint(w[0], w[1])).collect()
            } else {
                let mut t: Vec<f64> = (1..MAX_BINS)
                    .map(|q| {
                        let k = q * uniq.len() / MAX_BINS;
                        midpoint(uniq[k - 1], uniq[k])
                    })
                    .collect();
                t.dedup();
                t
            };
            bins.push(
                col.iter()
                    .map(|v| th.partition_point(|t| t < v) as u16)
                    .collect(),
            );
            thresholds.push(th);
        }
        Self {
            n_rows: x.n_rows(),
            bins,
            thresholds,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.bins.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A fitted regression tree stored as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn constant(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

struct Best {
    feature: usize,
    bin: usize,
    gain: f64,
}

/// Fits a tree on the rows listed in `sample` (repeats act as weights).
/// `rng` is needed only when `params.max_features` restricts the features.
pub fn fit_tree(
    data: &Binned,
    y: &[f64],
    sample: &[usize],
    params: &TreeParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    if sample.is_empty() {
        return Tree::constant(0.0);
    }
    let d = data.n_cols();
    let max_depth = params.max_depth.unwrap_or(usize::MAX);
    let min_split = params.min_samples_split.max(2);
    let min_leaf = params.min_samples_leaf.max(1);
    let n_try = params.max_features.map_or(d, |m| m.clamp(1, d.max(1)));

    let mut idx = sample.to_vec();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![(0usize, 0usize, idx.len(), 0usize)];
    let mut counts = vec![0usize; MAX_BINS];
    let mut sums = vec![0.0f64; MAX_BINS];

    while let Some((node, start, end, depth)) = stack.pop() {
        let rows = &idx[start..end];
        let n = rows.len();
        let (sum, sumsq) = rows
            .iter()
            .fold((0.0, 0.0), |(s, q), &i| (s + y[i], q + y[i] * y[i]));
        let mean = sum / n as f64;
        nodes[node] = Node::Leaf { value: mean };
        let sse = sumsq - sum * sum / n as f64;
        let eps = 1e-12 * (1.0 + sumsq);
        if depth >= max_depth || n < min_split || n < 2 * min_leaf || sse <= eps || d == 0 {
            continue;
        }

        let features: Vec<usize> = if n_try < d {
            let rng = rng
                .as_deref_mut()
                .expect("feature subsampling needs a random source");
            let mut f = index::sample(rng, d, n_try).into_vec();
            f.sort_unstable();
            f
        } else {
            (0..d).collect()
        };

        let mut best: Option<Best> = None;
        for &f in &features {
            let nb = data.thresholds[f].len() + 1;
            if nb < 2 {
                continue;
            }
            counts[..nb].iter_mut().for_each(|c| *c = 0);
            sums[..nb].iter_mut().for_each(|s| *s = 0.0);
            let col = &data.bins[f];
            for &i in rows {
                let b = col[i] as usize;
                counts[b] += 1;
                sums[b] += y[i];
            }
            let (mut nl, mut sl) = (0usize, 0.0f64);
            for b in 0..nb - 1 {
                if counts[b] == 0 {
                    continue;
                }
                nl += counts[b];
                sl += sums[b];
                let nr = n - nl;
                if nr == 0 {
                    break;
                }
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let sr = sum - sl;
                let gain = match params.criterion {
                    Criterion::SquaredError => {
                        sl * sl / nl as f64 + sr * sr / nr as f64 - sum * sum / n as f64
                    }
                    Criterion::FriedmanMse => {
                        let diff = sl / nl as f64 - sr / nr as f64;
                        (nl * nr) as f64 / n as f64 * diff * diff
                    }
                };
                if gain > eps && best.as_ref().is_none_or(|bst| gain > bst.gain) {
                    best = Some(Best {
                        feature: f,
                        bin: b,
                        gain,
                    });
                }
            }
        }

        let Some(best) = best else { continue };
        let col = &data.bins[best.feature];
        let slice = &mut idx[start..end];
        let mut split = 0;
        for k in 0..slice.len() {
            if col[slice[k]] as usize <= best.bin {
                slice.swap(split, k);
                split += 1;
            }
        }
        let left = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        let right = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[node] = Node::Split {
            feature: best.feature,
            threshold: data.thresholds[best.feature][best.bin],
            left,
            right,
        };
        stack.push((right, start + split, end, depth + 1));
        stack.push((left, start, start + split, depth + 1));
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        let names = (0..rows[0].len()).map(|j| format!("x{j}")).collect();
        FeatureMatrix::from_rows(names, rows).unwrap()
    }

    #[test]
    fn depth_zero_predicts_the_mean() {
        let x = matrix(&[vec![1.0], vec![2.0], vec![3.0]]);
        let y = [3.0, 6.0, 9.0];
        let params = TreeParams {
            max_depth: Some(0),
            ..Default::default()
        };
        let t = fit_tree(&Binned::new(&x), &y, &[0, 1, 2], &params, None);
        assert_eq!(t.nodes.len(), 1);
        assert_relative_eq!(t.predict_row(&[100.0]), 6.0);
    }

    #[test]
    fn full_tree_interpolates_distinct_points() {
        let x = matrix(&[vec![1.0, 0.0], vec![2.0, 1.0], vec![3.0, 0.0], vec![4.0, 1.0]]);
        let y = [10.0, 40.0, 20.0, 30.0];
        for criterion in [Criterion::SquaredError, Criterion::FriedmanMse] {
            let params = TreeParams {
                criterion,
                ..Default::default()
            };
            let t = fit_tree(&Binned::new(&x), &y, &[0, 1, 2, 3], &params, None);
            for i in 0..4 {
                assert_eq!(t.predict_row(x.row(i)), y[i]);
            }
        }
    }

    #[test]
    fn both_criteria_choose_the_same_split() {
        let x = matrix(&[
            vec![1.0, 5.0],
            vec![2.0, 3.0],
            vec![3.0, 4.0],
            vec![4.0, 1.0],
            vec![5.0, 2.0],
        ]);
        let y = [1.0, 1.5, 9.0, 10.0, 10.5];
        let stump = |criterion| {
            let p = TreeParams {
                max_depth: Some(1),
                criterion,
                ..Default::default()
            };
            fit_tree(&Binned::new(&x), &y, &[0, 1, 2, 3, 4], &p, None)
        };
        let a = stump(Criterion::SquaredError);
        let b = stump(Criterion::FriedmanMse);
        assert_eq!(a, b);
        match a.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 2.5);
            }
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn many_distinct_values_are_binned() {
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64]).collect();
        let b = Binned::new(&matrix(&rows));
        assert!(b.thresholds[0].len() < MAX_BINS);
        assert!(b.bins[0].windows(2).all(|w| w[0] <= w[1]));
    }
}
