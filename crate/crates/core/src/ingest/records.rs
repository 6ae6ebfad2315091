//! Historical surgical records and their CSV representation.

use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::IngestError;

/// How a column is interpreted when building numeric features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Identifier,
    Categorical,
    Numeric,
    /// Full date-time recorded during the operative episode.
    Timestamp,
    Date,
    Target,
}

macro_rules! columns {
    ($($variant:ident => $name:literal, $kind:ident;)*) => {
        /// The 32 attributes of a historical surgical record, in export order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Column { $($variant),* }

        impl Column {
            pub const ALL: [Column; 32] = [$(Column::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(Column::$variant => $name),* }
            }

            pub fn kind(self) -> ColumnKind {
                match self { $(Column::$variant => ColumnKind::$kind),* }
            }
        }
    };
}

columns! {
    Progressivo => "PROGRESSIVO", Identifier;
    TipoRicovero => "TIPORICOVERO", Categorical;
    Sesso => "SESSO", Categorical;
    Eta => "ETA", Numeric;
    Reparto => "REPARTO", Categorical;
    PresAnestes => "PRES ANESTES", Categorical;
    Stamp => "STAMP", Categorical;
    Cc => "CC", Categorical;
    Ca => "CA", Categorical;
    AnestLoc => "ANESTLOC", Categorical;
    Diagnosi1 => "DIAGNOSI1", Categorical;
    DescDiagnosi1 => "DESCDIAGNOSI1", Categorical;
    IngressoSala => "INGRESSOSALA", Timestamp;
    UscitaSala => "USCITASALA", Timestamp;
    RegRicovero => "REGRICOVERO", Categorical;
    Chirurghi1 => "CHIRURGHI_1", Categorical;
    Icd1 => "ICD1", Categorical;
    DescIcd1 => "DESCICD1", Categorical;
    Blocco => "BLOCCO", Categorical;
    DataNascita => "DATANASCITA", Date;
    Nosologico => "NOSOLOGICO", Identifier;
    DataIntervento => "DATAINTERVENTO", Date;
    Sala => "SALA", Categorical;
    TipoAnestesia => "TIPOANESTESIA", Categorical;
    IngressoBloccoOp => "INGRESSOBLOCCOOP", Timestamp;
    PreparazionePaziente => "PREPARAZIONEPAZIENTE", Timestamp;
    InizioAnestesia => "INIZIOANESTESIA", Timestamp;
    InizioIntervento => "INIZIOINTERVENTO", Timestamp;
    FineIntervento => "FINEINTERVENTO", Timestamp;
    FineAssAnestInSala => "FINEASSANESTINSALA", Timestamp;
    UscitaBloccoOp => "USCITABLOCCOOP", Timestamp;
    Durata => "DURATA", Target;
}

impl Column {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Column> {
        let name = name.trim();
        Column::ALL.iter().copied().find(|c| c.name() == name)
    }

    /// Intra-operative timestamps. Entry and exit determine the target
    /// exactly and the others are only known once the surgery happened.
    pub fn is_leakage(self) -> bool {
        self.kind() == ColumnKind::Timestamp
    }
}

/// Timestamp layouts accepted when reading records. Canonical files use
/// ISO-8601; raw exports may need an extra pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestampFormat {
    pub datetime_patterns: Vec<String>,
    pub date_patterns: Vec<String>,
}

impl Default for TimestampFormat {
    fn default() -> Self {
        Self {
            datetime_patterns: vec![
                "%Y-%m-%dT%H:%M:%S".into(),
                "%Y-%m-%dT%H:%M".into(),
                "%Y-%m-%d %H:%M:%S".into(),
                "%Y-%m-%d %H:%M".into(),
            ],
            date_patterns: vec!["%Y-%m-%d".into()],
        }
    }
}

impl TimestampFormat {
    pub fn with_pattern(mut self, pattern: &str) -> Self {
        self.datetime_patterns.insert(0, pattern.to_string());
        self
    }

    pub fn parse_datetime(&self, s: &str) -> Option<NaiveDateTime> {
        let s = s.trim();
        self.datetime_patterns
            .iter()
            .find_map(|p| NaiveDateTime::parse_from_str(s, p).ok())
    }

    pub fn parse_date(&self, s: &str) -> Option<NaiveDate> {
        let s = s.trim();
        self.date_patterns
            .iter()
            .find_map(|p| NaiveDate::parse_from_str(s, p).ok())
            .or_else(|| self.parse_datetime(s).map(|dt| dt.date()))
    }
}

pub const CANONICAL_DATETIME: &str = "%Y-%m-%dT%H:%M:%S";
pub const CANONICAL_DATE: &str = "%Y-%m-%d";

/// One historical surgery. Every field is kept as its raw string; an empty
/// string means the value is missing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SurgicalRecord {
    values: Vec<String>,
}

impl Default for SurgicalRecord {
    fn default() -> Self {
        Self {
            values: vec![String::new(); Column::ALL.len()],
        }
    }
}

impl SurgicalRecord {
    pub fn get(&self, col: Column) -> &str {
        &self.values[col.index()]
    }

    pub fn set(&mut self, col: Column, value: impl Into<String>) {
        self.values[col.index()] = value.into();
    }

    pub fn id(&self) -> &str {
        self.get(Column::Progressivo)
    }

    pub fn duration(&self) -> Option<u32> {
        self.get(Column::Durata).trim().parse().ok()
    }

    pub fn age(&self) -> Option<f64> {
        self.get(Column::Eta).trim().parse().ok()
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }
}

/// Result of reading a records file: the parsed rows plus the header columns
/// that were present.
#[derive(Debug, Clone)]
pub struct RecordTable {
    pub records: Vec<SurgicalRecord>,
    pub present: Vec<Column>,
}

/// Reads a records CSV. Columns are matched by header name in any order;
/// unknown headers are ignored and absent ones are left empty.
pub fn read_records<R: Read>(reader: R) -> Result<RecordTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mapping: Vec<Option<Column>> = headers.iter().map(Column::from_name).collect();
    let present: Vec<Column> = mapping.iter().flatten().copied().collect();

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let mut rec = SurgicalRecord::default();
        for (field, col) in row.iter().zip(&mapping) {
            if let Some(c) = col {
                rec.set(*c, field.trim());
            }
        }
        records.push(rec);
    }
    Ok(RecordTable { records, present })
}

pub fn write_records<W: Write>(writer: W, records: &[SurgicalRecord]) -> Result<(), IngestError> {
    let mut wtr = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(writer);
    wtr.write_record(Column::ALL.iter().map(|c| c.name()))?;
    for r in records {
        wtr.write_record(&r.values)?;
    }
    wtr.flush()?;
    Ok(())
}
