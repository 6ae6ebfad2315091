//! `report.json` and the fixed-width `report.txt` table.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::compare::{Method, MethodReport};

/// Pretty JSON array of reports, newline-terminated.
pub fn render_json(reports: &[MethodReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

type Row = (&'static str, fn(&MethodReport) -> String);

/// One block per hospital (sorted by name), methods as columns in canonical
/// order, percentages rounded to integers.
pub fn render_text(reports: &[MethodReport]) -> String {
    let mut by_hospital: BTreeMap<&str, BTreeMap<Method, &MethodReport>> = BTreeMap::new();
    for r in reports {
        by_hospital.entry(&r.hospital).or_default().insert(r.method, r);
    }
    let rows: [Row; 6] = [
        ("% OR occ. (mean)", |r| pct(r.occupancy.mean)),
        ("OR occ. (std)", |r| pct(r.occupancy.std)),
        ("% OR occ. (max)", |r| pct(r.occupancy.max)),
        ("% OR occ. (min)", |r| pct(r.occupancy.min)),
        ("Overbooking", |r| r.overbooked.to_string()),
        ("Underbooking", |r| r.underbooked.to_string()),
    ];
    let mut out = String::new();
    for (i, (hospital, methods)) in by_hospital.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{hospital:<18}");
        for m in methods.keys() {
            let _ = write!(out, "{:>7}", m.name());
        }
        out.push('\n');
        for (label, value) in &rows {
            let _ = write!(out, "{label:<18}");
            for r in methods.values() {
                let _ = write!(out, "{:>7}", value(r));
            }
            out.push('\n');
        }
    }
    out
}

fn pct(x: f64) -> String {
    format!("{}", x.round() as i64)
}
