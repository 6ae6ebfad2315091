//! `schedule.csv` and `objective.json`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::SolveOutcome;
use crate::model::{Assignment, ObjectiveVector, Schedule};

/// Writes `registration_id,priority,or_id,day,shift_id`, sorted by
/// registration id.
pub fn write_schedule<W: Write>(writer: W, schedule: &Schedule) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["registration_id", "priority", "or_id", "day", "shift_id"])?;
    for a in schedule.sorted_assignments() {
        wtr.write_record([
            a.registration_id.as_str(),
            &a.priority.to_string(),
            &a.or_id,
            &a.day.to_string(),
            &a.shift_id,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads assignments back; the objective is left at zero for the caller to
/// recompute against an instance.
pub fn read_schedule<R: Read>(reader: R) -> Result<Schedule, csv::Error> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let assignments = rdr.deserialize::<Assignment>().collect::<Result<_, _>>()?;
    Ok(Schedule {
        assignments,
        objective: ObjectiveVector::default(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub l6: u64,
    pub l5: u64,
    pub l4: u64,
    pub l3: u64,
    pub l2: u64,
    pub l1: u64,
    pub proven_optimal: bool,
    pub wall_time_s: f64,
}

impl From<&SolveOutcome> for ObjectiveReport {
    fn from(o: &SolveOutcome) -> Self {
        let [l6, l5, l4, l3, l2, l1] = o.schedule.objective.levels();
        Self {
            l6,
            l5,
            l4,
            l3,
            l2,
            l1,
            proven_optimal: o.proven_optimal,
            wall_time_s: o.wall_time_s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_roundtrip() {
        let s = Schedule {
            assignments: vec![
                Assignment {
                    registration_id: "b".into(),
                    priority: 2,
                    or_id: "OR A".into(),
                    day: 3,
                    shift_id: "S1".into(),
                },
                Assignment {
                    registration_id: "a".into(),
                    priority: 1,
                    or_id: "OR1".into(),
                    day: 0,
                    shift_id: "S1".into(),
                },
            ],
            objective: ObjectiveVector::default(),
        };
        let mut buf = Vec::new();
        write_schedule(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("registration_id,priority,or_id,day,shift_id\na,1,OR1,0,S1\n"));
        let back = read_schedule(buf.as_slice()).unwrap();
        assert_eq!(back.assignments, s.sorted_assignments());
    }
}
