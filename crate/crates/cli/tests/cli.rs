use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ors(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ors"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn desk_instance(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    fs::write(
        dir.join("registrations.csv"),
        "id,priority,specialty,duration_min,actual_duration_min,confidence\n\
         a,1,ORTO,120,120,\n\
         b,2,ORTO,150,150,\n\
         c,3,ORTO,200,200,\n\
         d,1,URO,90,90,\n\
         e,4,URO,60,60,\n",
    )
    .unwrap();
    fs::write(
        dir.join("mss.csv"),
        "or_id,specialty,shift_id,day\nOR1,ORTO,S1,0\nOR1,URO,S1,1\n",
    )
    .unwrap();
    fs::write(dir.join("shifts.csv"), "shift_id,capacity_min\nS1,300\n").unwrap();
}

#[test]
fn synth_is_deterministic_and_rejects_zero_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = ors(&["synth", "--seed", "42", "--rows", "600", "-o", p(dir)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for f in ["records.csv", "registrations.csv", "mss.csv", "shifts.csv", "week_records.csv", "instance.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let records = fs::read_to_string(a.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 601);

    let out = ors(&["synth", "--rows", "0", "-o", p(&tmp.path().join("c"))]);
    assert_eq!(code(&out), 2);
    let out = ors(&["synth", "--hospital", "Genova", "-o", p(&tmp.path().join("c"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn train_writes_artifacts_and_names_missing_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert_eq!(code(&ors(&["synth", "--rows", "800", "-o", p(&data)])), 0);
    let hosp = tmp.path().join("hospitalizations.csv");
    fs::write(&hosp, "patient,days\n1,3\n2,5\n").unwrap();
    let model = tmp.path().join("model");
    let out = ors(&[
        "train",
        "--records",
        p(&data.join("records.csv")),
        "--models",
        "tree",
        "--hospitalizations",
        p(&hosp),
        "-o",
        p(&model),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics = json(&model.join("metrics.json"));
    assert_eq!(metrics["selected"]["family"], "tree");
    assert!(metrics["search"].is_null());
    assert!(metrics["test"]["mae"].as_f64().unwrap() > 0.0);
    let preds = fs::read_to_string(model.join("predictions.csv")).unwrap();
    assert!(preds.starts_with("id,actual,predicted,ape,confidence\n"));
    assert_eq!(preds.lines().count() as u64, metrics["n_test"].as_u64().unwrap() + 1);
    for f in ["model.json", "baselines.json", "provenance.json"] {
        assert!(model.join(f).exists(), "{f}");
    }

    let records = fs::read_to_string(data.join("records.csv")).unwrap();
    let stripped: String = records
        .lines()
        .map(|l| l.split(',').take(6).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, stripped).unwrap();
    let out = ors(&["train", "--records", p(&bad), "-o", p(&tmp.path().join("x"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("INGRESSOSALA"), "{}", stderr(&out));
    assert!(stderr(&out).contains("USCITASALA"));
}

#[test]
fn schedule_desk_instance_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst");
    desk_instance(&inst);
    let run = tmp.path().join("run");
    let out = ors(&["schedule", "--instance", p(&inst), "--method", "vba", "-o", p(&run)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let obj = json(&run.join("objective.json"));
    assert_eq!(obj["proven_optimal"], true);
    assert_eq!(obj["l6"], 0);
    assert_eq!(obj["l5"], 0);
    assert_eq!(obj["l4"], 1);
    assert_eq!(obj["l3"], 0);
    let schedule = fs::read_to_string(run.join("schedule.csv")).unwrap();
    assert_eq!(
        schedule,
        "registration_id,priority,or_id,day,shift_id\n\
         a,1,OR1,0,S1\n\
         b,2,OR1,0,S1\n\
         d,1,OR1,1,S1\n\
         e,4,OR1,1,S1\n"
    );

    let out = ors(&["schedule", "--instance", p(&inst), "--method", "conf", "-o", p(&run)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--model"));
    let out = ors(&["schedule", "--instance", p(&inst), "--method", "dep", "-o", p(&run)]);
    assert_eq!(code(&out), 2);
    let out = ors(&["schedule", "--instance", p(&inst), "--time-limit", "0", "-o", p(&run)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn infeasible_priority_one_fails_with_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst");
    desk_instance(&inst);
    fs::write(
        inst.join("registrations.csv"),
        "id,priority,specialty,duration_min,actual_duration_min,confidence\n\
         big,1,ORTO,400,400,\n",
    )
    .unwrap();
    let out = ors(&["schedule", "--instance", p(&inst), "-o", p(&tmp.path().join("run"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("big"), "{}", stderr(&out));
}

#[test]
fn short_budget_keeps_the_incumbent() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert_eq!(code(&ors(&["synth", "--rows", "500", "--hospital", "sanremo", "-o", p(&data)])), 0);
    let run = tmp.path().join("run");
    let out = ors(&[
        "schedule", "--instance", p(&data), "--solver", "exact", "--time-limit", "1", "-o", p(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json(&run.join("objective.json"))["proven_optimal"], false);
    assert!(fs::read_to_string(run.join("schedule.csv")).unwrap().lines().count() > 1);
}

#[test]
fn evaluate_five_methods_and_reject_empty_list() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    assert_eq!(code(&ors(&["synth", "--rows", "1500", "-o", p(&data)])), 0);
    assert_eq!(code(&ors(&["train", "--records", p(&data.join("records.csv")), "-o", p(&model)])), 0);
    for m in ["vba", "conf", "pred", "dep", "surg"] {
        let out = ors(&[
            "schedule",
            "--instance",
            p(&data),
            "--method",
            m,
            "--model",
            p(&model.join("model.json")),
            "--baselines",
            p(&model.join("baselines.json")),
            "--time-limit",
            "5",
            "--max-restarts",
            "8",
            "-o",
            p(&data.join("runs").join(m)),
        ]);
        assert_eq!(code(&out), 0, "{m}: {}", stderr(&out));
    }
    let report = tmp.path().join("report");
    let out = ors(&["evaluate", "--instance", p(&data), "-o", p(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let txt = fs::read_to_string(report.join("report.txt")).unwrap();
    let lines: Vec<&str> = txt.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), ["Bordighera", "VBA", "Conf", "Pred", "Dep", "Surg"]);
    let rows = json(&report.join("report.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["method"], "VBA");
    assert_eq!(rows[0]["overbooked"], 0);

    let out = ors(&["evaluate", "--instance", p(&data), "--methods", "", "-o", p(&report)]);
    assert_eq!(code(&out), 2);
    let out = ors(&["evaluate", "--instance", p(&data), "--methods", "vba,xgb", "-o", p(&report)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_is_read_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("ors.toml");
    fs::write(&cfg, "seed = 7\nrows = 300\n").unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert_eq!(code(&ors(&["synth", "--config", p(&cfg), "-o", p(&a)])), 0);
    assert_eq!(code(&ors(&["synth", "--seed", "7", "--rows", "300", "-o", p(&b)])), 0);
    assert_eq!(code(&ors(&["synth", "--config", p(&cfg), "--seed", "8", "-o", p(&c)])), 0);
    let read = |d: &Path| fs::read(d.join("records.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(String::from_utf8(read(&a)).unwrap().lines().count(), 301);

    fs::write(&cfg, "sed = 7\n").unwrap();
    assert_eq!(code(&ors(&["synth", "--config", p(&cfg), "-o", p(&a)])), 2);
    fs::write(&cfg, "time_limit = -1.0\n").unwrap();
    assert_eq!(code(&ors(&["synth", "--config", p(&cfg), "-o", p(&a)])), 2);
}

#[test]
fn pipeline_reports_every_hospital() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = ors(&[
        "pipeline",
        "--rows",
        "1200",
        "--hospitals",
        "bordighera,imperia",
        "--time-limit",
        "5",
        "--max-restarts",
        "4",
        "-o",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = json(&out_dir.join("report.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 10);
    for r in rows.iter().filter(|r| r["method"] == "VBA") {
        assert_eq!(r["overbooked"], 0);
    }
    let txt = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(txt.starts_with("Bordighera"));
    assert!(txt.contains("\nImperia"));
    assert!(out_dir.join("imperia/runs/conf/schedule.csv").exists());
    assert!(out_dir.join("model/model.json").exists());
}
