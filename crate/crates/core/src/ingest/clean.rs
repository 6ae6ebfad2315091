//! Target derivation and the three cleaning steps: rare-diagnosis grouping,
//! IQR outlier removal on the duration, and correlated-feature pruning.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::{Column, ColumnKind, SurgicalRecord, TimestampFormat};
use super::IngestError;
use crate::par::{self, Threads};

/// Prefix of the synthetic diagnosis codes produced by rare-diagnosis grouping.
pub const RARE_PREFIX: &str = "RARE_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonPositiveDuration {
    pub minutes: i64,
}

/// Operating-room time in whole minutes between entry and exit. Zero or
/// negative spans are data-entry errors and are rejected.
pub fn derive_duration(
    entry: NaiveDateTime,
    exit: NaiveDateTime,
) -> Result<u32, NonPositiveDuration> {
    let minutes = (exit - entry).num_minutes();
    if minutes <= 0 {
        Err(NonPositiveDuration { minutes })
    } else {
        Ok(u32::try_from(minutes).unwrap_or(u32::MAX))
    }
}

/// Quantile by linear interpolation between order statistics at position
/// `p * (n - 1)` of the sorted sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqrFences {
    pub q1: f64,
    pub q3: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn iqr_fences(values: &[f64], multiplier: f64) -> Result<IqrFences, IngestError> {
    if values.is_empty() {
        return Err(IngestError::EmptyInput("iqr filter"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    Ok(IqrFences {
        q1,
        q3,
        lower: q1 - multiplier * iqr,
        upper: q3 + multiplier * iqr,
    })
}

/// Indices of the values inside the Tukey fences `[Q1 - m*IQR, Q3 + m*IQR]`.
pub fn iqr_filter(values: &[f64], multiplier: f64) -> Result<Vec<usize>, IngestError> {
    let f = iqr_fences(values, multiplier)?;
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= f.lower && **v <= f.upper)
        .map(|(i, _)| i)
        .collect())
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

const KMEANS_MAX_ITER: usize = 100;

/// Lloyd's algorithm with seeded farthest-point initialisation.
///
/// All work happens in the lexicographic order of the points, so the labels
/// do not depend on the input order. Labels are numbered by first appearance
/// in that order.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>, IngestError> {
    let n = points.len();
    if n == 0 {
        return Err(IngestError::EmptyInput("kmeans"));
    }
    if k == 0 || k > n {
        return Err(IngestError::InvalidClusterCount { k, n });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(IngestError::RaggedPoints);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![points[order[rng.random_range(0..n)]].clone()];
    while centers.len() < k {
        let mut best = (f64::NEG_INFINITY, order[0]);
        for &i in &order {
            let d = centers
                .iter()
                .map(|c| dist2(&points[i], c))
                .fold(f64::INFINITY, f64::min);
            if d > best.0 {
                best = (d, i);
            }
        }
        centers.push(points[best.1].clone());
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for &i in &order {
            let mut best = (f64::INFINITY, 0);
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(&points[i], center);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if labels[i] != best.1 {
                labels[i] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for &i in &order {
            counts[labels[i]] += 1;
            for (s, x) in sums[labels[i]].iter_mut().zip(&points[i]) {
                *s += x;
            }
        }
        for c in 0..k {
            // an empty cluster keeps its previous center
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }

    let mut remap = vec![usize::MAX; k];
    let mut next = 0;
    for &i in &order {
        if remap[labels[i]] == usize::MAX {
            remap[labels[i]] = next;
            next += 1;
        }
    }
    Ok(labels.into_iter().map(|l| remap[l]).collect())
}

fn standardize_columns(points: &mut [Vec<f64>]) {
    let Some(dim) = points.first().map(|p| p.len()) else {
        return;
    };
    let n = points.len() as f64;
    for j in 0..dim {
        let mean = points.iter().map(|p| p[j]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for p in points.iter_mut() {
            p[j] = if sd > 0.0 { (p[j] - mean) / sd } else { 0.0 };
        }
    }
}

fn mix_seed(seed: u64, key: &str) -> u64 {
    // FNV-1a over the key, folded into the seed
    let mut h: u64 = 0xcbf29ce484222325;
    for b in key.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    seed ^ h
}

/// A cleaned dataset: records with `DURATA` populated plus the columns that
/// survived correlation pruning, in export order.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanDataset {
    pub records: Vec<SurgicalRecord>,
    pub kept_features: Vec<Column>,
}

impl CleanDataset {
    pub fn feature_names(&self) -> Vec<&'static str> {
        self.kept_features.iter().map(|c| c.name()).collect()
    }
}

/// Replaces diagnoses that occur exactly once within a department by a
/// cluster code `RARE_<dept>_<cluster>`.
///
/// Singleton rows of a department are clustered on standardised
/// `(DURATA, ETA)` into `min(max_clusters, count)` groups. Codes already
/// produced by an earlier grouping are left alone. Returns the new dataset and
/// the number of relabelled rows.
pub fn group_rare_diagnoses(
    dataset: &CleanDataset,
    max_clusters: usize,
    seed: u64,
    threads: Threads,
) -> Result<(CleanDataset, usize), IngestError> {
    let mut by_dept: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in dataset.records.iter().enumerate() {
        by_dept.entry(r.get(Column::Reparto)).or_default().push(i);
    }
    let depts: Vec<(&str, Vec<usize>)> = by_dept.into_iter().collect();

    let relabels = par::map_indexed(depts.len(), threads, |d| {
        let (dept, rows) = &depts[d];
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for &i in rows {
            let diag = dataset.records[i].get(Column::Diagnosi1);
            if !diag.is_empty() && !diag.starts_with(RARE_PREFIX) {
                *counts.entry(diag).or_default() += 1;
            }
        }
        let singletons: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&i| counts.get(dataset.records[i].get(Column::Diagnosi1)) == Some(&1))
            .collect();
        if singletons.is_empty() {
            return Ok::<_, IngestError>(Vec::new());
        }
        let mut points: Vec<Vec<f64>> = singletons
            .iter()
            .map(|&i| {
                let r = &dataset.records[i];
                vec![
                    r.duration().map(f64::from).unwrap_or(0.0),
                    r.age().unwrap_or(0.0),
                ]
            })
            .collect();
        standardize_columns(&mut points);
        let k = max_clusters.max(1).min(points.len());
        let labels = kmeans(&points, k, mix_seed(seed, dept))?;
        Ok(singletons
            .into_iter()
            .zip(labels)
            .map(|(i, l)| (i, format!("{RARE_PREFIX}{dept}_{l}")))
            .collect::<Vec<_>>())
    });

    let mut out = dataset.clone();
    let mut changed = 0;
    for batch in relabels {
        for (i, code) in batch? {
            out.records[i].set(Column::Diagnosi1, code);
            changed += 1;
        }
    }
    Ok((out, changed))
}

/// Column-major numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Pearson correlation; zero when either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Greedy correlation pruning: scanning columns left to right, a column is
/// dropped when its absolute correlation with an already kept column exceeds
/// `threshold`. Returns the kept names in their original order.
pub fn prune_correlated_features(
    table: &NumericTable,
    threshold: f64,
) -> Result<Vec<String>, IngestError> {
    if table.n_rows() < 2 {
        return Err(IngestError::TooFewRows {
            needed: 2,
            got: table.n_rows(),
        });
    }
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..table.columns.len() {
        let redundant = kept
            .iter()
            .any(|&i| pearson(&table.columns[i], &table.columns[j]).abs() > threshold);
        if !redundant {
            kept.push(j);
        }
    }
    Ok(kept.into_iter().map(|j| table.names[j].clone()).collect())
}

/// Numeric view of record columns used for correlation analysis: categorical
/// values become ordinal codes by first appearance, timestamps epoch minutes,
/// dates epoch days. Missing values take the column mean.
pub fn encode_for_correlation(
    records: &[SurgicalRecord],
    columns: &[Column],
    format: &TimestampFormat,
) -> NumericTable {
    let columns_out = columns
        .iter()
        .map(|&col| {
            let mut codes: HashMap<&str, f64> = HashMap::new();
            let raw: Vec<Option<f64>> = records
                .iter()
                .map(|r| {
                    let v = r.get(col);
                    if v.is_empty() {
                        return None;
                    }
                    match col.kind() {
                        ColumnKind::Numeric | ColumnKind::Target | ColumnKind::Identifier => {
                            v.parse::<f64>().ok()
                        }
                        ColumnKind::Timestamp => format
                            .parse_datetime(v)
                            .map(|t| t.and_utc().timestamp() as f64 / 60.0),
                        ColumnKind::Date => format.parse_date(v).map(|d| {
                            d.signed_duration_since(chrono::NaiveDate::default()).num_days() as f64
                        }),
                        ColumnKind::Categorical => {
                            let next = codes.len() as f64;
                            Some(*codes.entry(v).or_insert(next))
                        }
                    }
                })
                .collect();
            let present: Vec<f64> = raw.iter().flatten().copied().collect();
            let fill = if present.is_empty() {
                0.0
            } else {
                present.iter().sum::<f64>() / present.len() as f64
            };
            raw.into_iter().map(|v| v.unwrap_or(fill)).collect()
        })
        .collect();
    NumericTable {
        names: columns.iter().map(|c| c.name().to_string()).collect(),
        columns: columns_out,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub timestamp_format: TimestampFormat,
    pub max_clusters: usize,
    pub iqr_multiplier: f64,
    pub correlation_threshold: f64,
    pub seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            timestamp_format: TimestampFormat::default(),
            max_clusters: 3,
            iqr_multiplier: 1.5,
            correlation_threshold: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub stage: String,
    pub rows_in: usize,
    pub rows_out: usize,
    pub features_in: usize,
    pub features_out: usize,
    #[serde(skip_serializing_if = "serde_json::Value::is_null", default)]
    pub detail: serde_json::Value,
}

/// Per-stage row and feature counts of one preprocessing run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stages: Vec<StageLog>,
}

impl Provenance {
    pub fn stage(&self, name: &str) -> Option<&StageLog> {
        self.stages.iter().find(|s| s.stage == name)
    }

    /// Duration fences of the last outlier-filter pass.
    pub fn duration_fences(&self) -> Option<IqrFences> {
        let detail = &self.stage("iqr_filter")?.detail;
        serde_json::from_value(detail.get("fences")?.clone()).ok()
    }
}

/// Header columns needed to derive the duration target.
pub fn check_duration_columns(present: &[Column]) -> Result<(), IngestError> {
    let missing: Vec<String> = [Column::IngressoSala, Column::UscitaSala]
        .into_iter()
        .filter(|c| !present.contains(c))
        .map(|c| c.name().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(IngestError::MissingColumns(missing))
    }
}

/// Duration derivation followed by the three cleaning steps, in order.
///
/// The IQR step is repeated until no further row falls outside the fences,
/// which makes the whole pipeline idempotent on its own output.
pub fn preprocess(
    records: &[SurgicalRecord],
    config: &PreprocessConfig,
    threads: Threads,
) -> Result<(CleanDataset, Provenance), IngestError> {
    let n_features = Column::ALL.len();
    let mut log = Provenance::default();

    // duplicated identifiers keep their first occurrence
    let mut seen = std::collections::HashSet::new();
    let unique: Vec<&SurgicalRecord> = records.iter().filter(|r| seen.insert(r.id())).collect();

    let mut parse_errors = Vec::new();
    let mut rejected = 0usize;
    let mut derived = Vec::with_capacity(unique.len());
    for r in &unique {
        let fmt = &config.timestamp_format;
        let entry = fmt.parse_datetime(r.get(Column::IngressoSala));
        let exit = fmt.parse_datetime(r.get(Column::UscitaSala));
        match (entry, exit) {
            (Some(a), Some(b)) => match derive_duration(a, b) {
                Ok(d) => {
                    let mut rec = (*r).clone();
                    rec.set(Column::Durata, d.to_string());
                    derived.push(rec);
                }
                Err(_) => rejected += 1,
            },
            _ => parse_errors.push(r.id().to_string()),
        }
    }
    log.stages.push(StageLog {
        stage: "derive_duration".into(),
        rows_in: records.len(),
        rows_out: derived.len(),
        features_in: n_features,
        features_out: n_features,
        detail: serde_json::json!({
            "duplicate_ids": records.len() - unique.len(),
            "non_positive": rejected,
            "parse_errors": parse_errors.len(),
        }),
    });

    let dataset = CleanDataset {
        records: derived,
        kept_features: Column::ALL.to_vec(),
    };
    let rows = dataset.records.len();
    let (dataset, relabelled) =
        group_rare_diagnoses(&dataset, config.max_clusters, config.seed, threads)?;
    log.stages.push(StageLog {
        stage: "rare_diagnoses".into(),
        rows_in: rows,
        rows_out: dataset.records.len(),
        features_in: n_features,
        features_out: n_features,
        detail: serde_json::json!({ "relabelled": relabelled }),
    });

    let rows_in = dataset.records.len();
    let mut records = dataset.records;
    let mut passes = 0;
    let mut fences = None;
    while !records.is_empty() {
        let durations: Vec<f64> = records
            .iter()
            .map(|r| r.duration().map(f64::from).unwrap_or(f64::NAN))
            .collect();
        let f = iqr_fences(&durations, config.iqr_multiplier)?;
        let keep = iqr_filter(&durations, config.iqr_multiplier)?;
        fences = Some(f);
        passes += 1;
        if keep.len() == records.len() {
            break;
        }
        records = keep.into_iter().map(|i| records[i].clone()).collect();
    }
    log.stages.push(StageLog {
        stage: "iqr_filter".into(),
        rows_in,
        rows_out: records.len(),
        features_in: n_features,
        features_out: n_features,
        detail: serde_json::json!({ "passes": passes, "fences": fences }),
    });

    if records.is_empty() {
        return Err(IngestError::EmptyDataset(log));
    }

    let candidates: Vec<Column> = Column::ALL
        .iter()
        .copied()
        .filter(|c| !matches!(c.kind(), ColumnKind::Identifier | ColumnKind::Target))
        .collect();
    let table = encode_for_correlation(&records, &candidates, &config.timestamp_format);
    let kept_names = if records.len() >= 2 {
        prune_correlated_features(&table, config.correlation_threshold)?
    } else {
        table.names.clone()
    };
    let kept_features: Vec<Column> = Column::ALL
        .iter()
        .copied()
        .filter(|c| {
            matches!(c.kind(), ColumnKind::Identifier | ColumnKind::Target)
                || kept_names.iter().any(|n| n == c.name())
        })
        .collect();
    let dropped: Vec<&str> = candidates
        .iter()
        .filter(|c| !kept_features.contains(c))
        .map(|c| c.name())
        .collect();
    log.stages.push(StageLog {
        stage: "correlation_pruning".into(),
        rows_in: records.len(),
        rows_out: records.len(),
        features_in: n_features,
        features_out: kept_features.len(),
        detail: serde_json::json!({ "dropped": dropped }),
    });

    Ok((
        CleanDataset {
            records,
            kept_features,
        },
        log,
    ))
}
