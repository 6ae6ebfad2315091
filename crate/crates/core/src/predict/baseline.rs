//! Group-mean duration estimators used as comparison baselines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::{Column, SurgicalRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKey {
    /// `REPARTO`.
    Department,
    /// `ICD1`.
    ProcedureType,
}

impl BaselineKey {
    pub fn column(self) -> Column {
        match self {
            BaselineKey::Department => Column::Reparto,
            BaselineKey::ProcedureType => Column::Icd1,
        }
    }
}

/// Mean training duration per key value; unseen keys get the global mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimator {
    pub key: BaselineKey,
    pub means: BTreeMap<String, f64>,
    pub global_mean: f64,
}

impl MeanEstimator {
    /// Records without a positive duration are ignored.
    pub fn fit(records: &[SurgicalRecord], key: BaselineKey) -> Self {
        let col = key.column();
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        let (mut total, mut count) = (0.0, 0usize);
        for r in records {
            let Some(d) = r.duration().filter(|&d| d > 0) else {
                continue;
            };
            let e = acc.entry(r.get(col).to_string()).or_insert((0.0, 0));
            e.0 += f64::from(d);
            e.1 += 1;
            total += f64::from(d);
            count += 1;
        }
        Self {
            key,
            means: acc
                .into_iter()
                .map(|(k, (s, n))| (k, s / n as f64))
                .collect(),
            global_mean: if count == 0 { 0.0 } else { total / count as f64 },
        }
    }

    pub fn estimate_key(&self, value: &str) -> f64 {
        self.means.get(value).copied().unwrap_or(self.global_mean)
    }

    pub fn estimate(&self, record: &SurgicalRecord) -> f64 {
        self.estimate_key(record.get(self.key.column()))
    }
}
