//! CSV formats for registrations, MSS slots and shifts, and instance assembly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::{
    validate_instance, ConfidenceLevel, MssSlot, ProblemInstance, Registration, Shift,
};

#[derive(Debug, Serialize, Deserialize)]
struct RegistrationRow {
    id: String,
    priority: u8,
    specialty: String,
    duration_min: u32,
    actual_duration_min: Option<u32>,
    confidence: Option<u8>,
}

/// Settings that are not part of the three CSV files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceConfig {
    #[serde(default)]
    pub hospital: Option<String>,
    #[serde(default)]
    pub emergency_or_id: Option<String>,
    /// Defaults to one past the largest MSS day.
    #[serde(default)]
    pub planning_days: Option<u32>,
}

pub fn read_registrations<R: Read>(reader: R) -> Result<Vec<Registration>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<RegistrationRow>() {
        let row = row?;
        let confidence = match row.confidence {
            None => None,
            Some(c) => Some(
                ConfidenceLevel::new(c)
                    .ok_or_else(|| IngestError::InvalidConfidence(row.id.clone(), c))?,
            ),
        };
        out.push(Registration {
            id: row.id,
            priority: row.priority,
            specialty: row.specialty,
            duration_min: row.duration_min,
            actual_duration_min: row.actual_duration_min,
            confidence,
        });
    }
    Ok(out)
}

pub fn write_registrations<W: Write>(writer: W, regs: &[Registration]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in regs {
        wtr.serialize(RegistrationRow {
            id: r.id.clone(),
            priority: r.priority,
            specialty: r.specialty.clone(),
            duration_min: r.duration_min,
            actual_duration_min: r.actual_duration_min,
            confidence: r.confidence.map(u8::from),
        })?;
    }
    if regs.is_empty() {
        wtr.write_record([
            "id",
            "priority",
            "specialty",
            "duration_min",
            "actual_duration_min",
            "confidence",
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_mss<R: Read>(reader: R) -> Result<Vec<MssSlot>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_mss<W: Write>(writer: W, mss: &[MssSlot]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in mss {
        wtr.serialize(s)?;
    }
    if mss.is_empty() {
        wtr.write_record(["or_id", "specialty", "shift_id", "day"])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_shifts<R: Read>(reader: R) -> Result<Vec<Shift>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_shifts<W: Write>(writer: W, shifts: &[Shift]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in shifts {
        wtr.serialize(s)?;
    }
    if shifts.is_empty() {
        wtr.write_record(["shift_id", "capacity_min"])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses the three instance sources and validates the result.
pub fn build_instance<R1: Read, R2: Read, R3: Read>(
    registrations: R1,
    mss: R2,
    shifts: R3,
    config: &InstanceConfig,
) -> Result<ProblemInstance, IngestError> {
    let registrations = read_registrations(registrations)?;
    let mss = read_mss(mss)?;
    let shifts = read_shifts(shifts)?;
    assemble_instance(registrations, mss, shifts, config)
}

pub fn assemble_instance(
    registrations: Vec<Registration>,
    mss: Vec<MssSlot>,
    shifts: Vec<Shift>,
    config: &InstanceConfig,
) -> Result<ProblemInstance, IngestError> {
    let planning_days = config
        .planning_days
        .unwrap_or_else(|| mss.iter().map(|s| s.day + 1).max().unwrap_or(0));
    let instance = ProblemInstance {
        registrations,
        mss,
        shifts,
        emergency_or_id: config.emergency_or_id.clone(),
        planning_days,
    };
    let report = validate_instance(&instance);
    if report.is_empty() {
        Ok(instance)
    } else {
        Err(IngestError::InvalidInstance(report))
    }
}
