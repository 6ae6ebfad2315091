//! Numeric feature encoding of surgical records.

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::ingest::{CleanDataset, Column, ColumnKind, SurgicalRecord, TimestampFormat};

/// Dense row-major matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    n_rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, n_rows: usize, data: Vec<f64>) -> Result<Self, PredictError> {
        if data.len() != n_rows * names.len() {
            return Err(PredictError::Shape(format!(
                "{} values for {n_rows} rows x {} columns",
                data.len(),
                names.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(PredictError::NonFinite);
        }
        Ok(Self { names, n_rows, data })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, PredictError> {
        if let Some(r) = rows.iter().find(|r| r.len() != names.len()) {
            return Err(PredictError::Shape(format!(
                "row of length {} for {} columns",
                r.len(),
                names.len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(names, rows.len(), data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            names: self.names.clone(),
            n_rows: idx.len(),
            data,
        }
    }
}

/// How one source column becomes one numeric feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum ColumnEncoding {
    /// Missing or unparsable values take the training mean.
    Numeric { mean: f64 },
    /// Ordinal code = position in `categories`; unseen or missing values map
    /// to [`UNKNOWN_CODE`].
    Ordinal { categories: Vec<String> },
    /// Day of the week, Monday = 0; missing values map to [`UNKNOWN_CODE`].
    Weekday,
}

pub const UNKNOWN_CODE: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    #[serde(flatten)]
    pub encoding: ColumnEncoding,
}

/// Fitted feature encoder. Identifier, target, and intra-operative timestamp
/// columns never become features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub columns: Vec<EncodedColumn>,
    pub timestamp_format: TimestampFormat,
}

/// Columns of `kept` that may be used as predictors.
pub fn feature_columns(kept: &[Column]) -> Vec<Column> {
    kept.iter()
        .copied()
        .filter(|c| {
            !matches!(c.kind(), ColumnKind::Identifier | ColumnKind::Target) && !c.is_leakage()
        })
        .collect()
}

impl FeatureEncoder {
    pub fn fit(records: &[SurgicalRecord], columns: &[Column], format: &TimestampFormat) -> Self {
        let columns = feature_columns(columns)
            .into_iter()
            .map(|col| {
                let encoding = match col.kind() {
                    ColumnKind::Numeric => {
                        let vals: Vec<f64> = records
                            .iter()
                            .filter_map(|r| r.get(col).trim().parse::<f64>().ok())
                            .filter(|v| v.is_finite())
                            .collect();
                        let mean = if vals.is_empty() {
                            0.0
                        } else {
                            vals.iter().sum::<f64>() / vals.len() as f64
                        };
                        ColumnEncoding::Numeric { mean }
                    }
                    ColumnKind::Date => ColumnEncoding::Weekday,
                    _ => {
                        let mut categories: Vec<String> = Vec::new();
                        let mut seen = std::collections::HashSet::new();
                        for r in records {
                            let v = r.get(col);
                            if !v.is_empty() && seen.insert(v) {
                                categories.push(v.to_string());
                            }
                        }
                        ColumnEncoding::Ordinal { categories }
                    }
                };
                EncodedColumn {
                    name: col.name().to_string(),
                    encoding,
                }
            })
            .collect();
        Self {
            columns,
            timestamp_format: format.clone(),
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn transform(&self, records: &[SurgicalRecord]) -> Result<FeatureMatrix, PredictError> {
        let mut resolved = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            let col = Column::from_name(&c.name)
                .ok_or_else(|| PredictError::UnknownColumn(c.name.clone()))?;
            let lookup: std::collections::HashMap<&str, usize> = match &c.encoding {
                ColumnEncoding::Ordinal { categories } => categories
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.as_str(), i))
                    .collect(),
                _ => Default::default(),
            };
            resolved.push((col, &c.encoding, lookup));
        }
        let mut data = Vec::with_capacity(records.len() * resolved.len());
        for r in records {
            for (col, enc, lookup) in &resolved {
                let raw = r.get(*col);
                let v = match enc {
                    ColumnEncoding::Numeric { mean } => raw
                        .trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .unwrap_or(*mean),
                    ColumnEncoding::Ordinal { .. } => {
                        lookup.get(raw).map(|&i| i as f64).unwrap_or(UNKNOWN_CODE)
                    }
                    ColumnEncoding::Weekday => self
                        .timestamp_format
                        .parse_date(raw)
                        .map(|d| d.weekday().num_days_from_monday() as f64)
                        .unwrap_or(UNKNOWN_CODE),
                };
                data.push(v);
            }
        }
        FeatureMatrix::new(self.feature_names(), records.len(), data)
    }
}

/// Positive `DURATA` values of a set of records, as minutes.
pub fn target_vector(records: &[SurgicalRecord]) -> Result<Vec<f64>, PredictError> {
    records
        .iter()
        .map(|r| match r.duration() {
            Some(d) if d > 0 => Ok(f64::from(d)),
            _ => Err(PredictError::InvalidTarget(r.id().to_string())),
        })
        .collect()
}

/// Fits an encoder on a cleaned dataset and returns `(X, y, encoder)`.
pub fn encode_features(
    dataset: &CleanDataset,
    format: &TimestampFormat,
) -> Result<(FeatureMatrix, Vec<f64>, FeatureEncoder), PredictError> {
    let y = target_vector(&dataset.records)?;
    let encoder = FeatureEncoder::fit(&dataset.records, &dataset.kept_features, format);
    let x = encoder.transform(&dataset.records)?;
    Ok((x, y, encoder))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(sex: &str, dept: &str, age: &str, date: &str, dur: u32) -> SurgicalRecord {
        let mut r = SurgicalRecord::default();
        r.set(Column::Progressivo, "1");
        r.set(Column::Sesso, sex);
        r.set(Column::Reparto, dept);
        r.set(Column::Eta, age);
        r.set(Column::DataIntervento, date);
        r.set(Column::UscitaSala, "2019-03-04T09:00:00");
        r.set(Column::Durata, dur.to_string());
        r
    }

    fn dataset() -> CleanDataset {
        CleanDataset {
            records: vec![
                rec("F", "ORTO", "40", "2019-03-04", 30),
                rec("M", "URO", "", "2019-03-05", 60),
                rec("F", "ORTO", "60", "2019-03-10", 45),
            ],
            kept_features: Column::ALL.to_vec(),
        }
    }

    #[test]
    fn sex_gets_two_codes_and_leakage_is_excluded() {
        let (x, y, enc) = encode_features(&dataset(), &TimestampFormat::default()).unwrap();
        assert_eq!(y, vec![30.0, 60.0, 45.0]);
        let names = enc.feature_names();
        for banned in ["USCITASALA", "INGRESSOSALA", "FINEINTERVENTO", "PROGRESSIVO", "DURATA"] {
            assert!(!names.iter().any(|n| n == banned), "{banned} leaked");
        }
        let j = names.iter().position(|n| n == "SESSO").unwrap();
        let mut codes = x.column(j);
        codes.sort_by(f64::total_cmp);
        codes.dedup();
        assert_eq!(codes, vec![0.0, 1.0]);
        let age = names.iter().position(|n| n == "ETA").unwrap();
        assert_eq!(x.get(1, age), 50.0);
        let day = names.iter().position(|n| n == "DATAINTERVENTO").unwrap();
        assert_eq!(x.column(day), vec![0.0, 1.0, 6.0]);
    }

    #[test]
    fn unseen_category_maps_to_unknown() {
        let ds = dataset();
        let enc = FeatureEncoder::fit(&ds.records, &ds.kept_features, &TimestampFormat::default());
        let x = enc
            .transform(&[rec("X", "CARDIO", "50", "", 10)])
            .unwrap();
        let names = enc.feature_names();
        let j = names.iter().position(|n| n == "REPARTO").unwrap();
        assert_eq!(x.get(0, j), UNKNOWN_CODE);
        let again = FeatureEncoder::fit(&ds.records, &ds.kept_features, &TimestampFormat::default());
        assert_eq!(enc, again);
    }

    #[test]
    fn non_positive_target_is_rejected() {
        let mut ds = dataset();
        ds.records[0].set(Column::Durata, "0");
        assert!(encode_features(&ds, &TimestampFormat::default()).is_err());
    }
}
