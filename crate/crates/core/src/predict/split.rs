//! Duration-stratified train/test splits and k-fold partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PredictError;
use crate::ingest::clean::quantile_sorted;

/// Assigns each target to one of `n_bins` quantile bins. Equal values always
/// share a bin.
pub fn quantile_bins(y: &[f64], n_bins: usize) -> Vec<usize> {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..n_bins)
        .map(|j| quantile_sorted(&sorted, j as f64 / n_bins as f64))
        .collect();
    y.iter()
        .map(|v| edges.partition_point(|e| e < v))
        .collect()
}

/// Splits indices so that each duration bin sends `round(len * test_fraction)`
/// of its members (chosen by a seeded shuffle) to the test side. Bins with a
/// single member stay in training. Both index lists come back sorted.
pub fn stratified_split(
    y: &[f64],
    test_fraction: f64,
    n_bins: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), PredictError> {
    if n_bins == 0 || y.len() < n_bins {
        return Err(PredictError::InvalidSplit(format!(
            "need n >= n_bins >= 1, got n = {}, n_bins = {n_bins}",
            y.len()
        )));
    }
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(PredictError::InvalidSplit(format!(
            "test fraction {test_fraction} outside [0, 1]"
        )));
    }
    let bins = quantile_bins(y, n_bins);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, &b) in bins.iter().enumerate() {
        members[b].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(y.len());
    let mut test = Vec::new();
    for mut group in members {
        if group.len() < 2 {
            train.extend(group);
            continue;
        }
        group.shuffle(&mut rng);
        let k = (group.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&group[..k]);
        train.extend_from_slice(&group[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Seeded partition of `0..n` into `k` folds whose sizes differ by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, PredictError> {
    if k < 2 || k > n {
        return Err(PredictError::InvalidSplit(format!(
            "need 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_rows_twenty_percent() {
        let y: Vec<f64> = (0..100).map(|i| (i * 37 % 101) as f64).collect();
        let (train, test) = stratified_split(&y, 0.2, 10, 1).unwrap();
        assert_eq!(train.len() + test.len(), 100);
        assert!((test.len() as i64 - 20).abs() <= 10);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn equal_targets_fall_in_one_bin() {
        let y = vec![30.0; 50];
        assert!(quantile_bins(&y, 10).iter().all(|&b| b == 0));
        let (_, test) = stratified_split(&y, 0.2, 10, 3).unwrap();
        assert_eq!(test.len(), 10);
    }

    #[test]
    fn bimodal_targets_reach_the_test_side() {
        let mut y = vec![15.0; 20];
        y.extend(vec![200.0; 80]);
        let (_, test) = stratified_split(&y, 0.2, 5, 11).unwrap();
        let short = test.iter().filter(|&&i| y[i] == 15.0).count();
        let long = test.len() - short;
        assert_eq!(short, 4);
        assert_eq!(long, 16);
    }

    #[test]
    fn singleton_bin_stays_in_training() {
        let y = [100.0, 1.0, 1.0, 1.0];
        let (train, _) = stratified_split(&y, 0.5, 2, 0).unwrap();
        assert!(train.contains(&0));
    }

    #[test]
    fn folds_partition_the_indices() {
        let folds = kfold(23, 5, 9).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert!(kfold(3, 1, 0).is_err());
        assert!(kfold(3, 4, 0).is_err());
    }
}
