//! Subcommand implementations. Each stage reads and writes plain files so it
//! can run on its own; `pipeline` chains them.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use ors_core::evaluate::{
    method_report, render_json, render_text, EvaluateError, Method, MethodInputs, MethodReport,
};
use ors_core::ingest::{
    check_duration_columns, preprocess as clean_records, read_records, write_mss,
    write_records, write_registrations, write_shifts, HospitalShape, IngestError, InstanceConfig,
    PreprocessConfig, SurgicalRecord, SynthConfig, SyntheticWorld, WeekConfig,
};
use ors_core::par::Threads;
use ors_core::predict::{train as fit_model, MeanEstimator, ModelArtifact, TrainConfig, TrainError};
use ors_core::solve::{
    read_schedule, solve, write_schedule, ObjectiveReport, SolveError, SolveLimits, SolveOutcome,
    SolverChoice,
};
use ors_core::ProblemInstance;
use serde::{Deserialize, Serialize};

use crate::config::{parse_methods, parse_models, Settings};

/// Usage and validation errors exit with 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(anyhow!("{msg}"))
}

fn ingest_error(e: IngestError, what: &str) -> CliError {
    match e {
        IngestError::MissingColumns(_) | IngestError::InvalidInstance(_) => {
            CliError::Usage(anyhow::Error::new(e).context(what.to_string()))
        }
        IngestError::EmptyDataset(ref log) => {
            let stages = serde_json::to_string_pretty(log).unwrap_or_default();
            CliError::Runtime(anyhow!("{what}: {e}\nstage log:\n{stages}"))
        }
        _ => CliError::Runtime(anyhow::Error::new(e).context(what.to_string())),
    }
}

pub struct Ctx {
    pub settings: Settings,
    pub out: PathBuf,
}

impl Ctx {
    fn threads(&self) -> Threads {
        Threads(self.settings.threads)
    }

    fn limits(&self) -> SolveLimits {
        SolveLimits {
            time_budget_s: self.settings.time_limit,
            node_limit: None,
            threads: self.settings.threads,
            seed: self.settings.seed,
            max_restarts: self.settings.max_restarts,
        }
    }
}

fn parse_solver(s: &str) -> Result<SolverChoice, String> {
    match s.to_ascii_lowercase().as_str() {
        "auto" => Ok(SolverChoice::Auto),
        "exact" => Ok(SolverChoice::Exact),
        "heuristic" => Ok(SolverChoice::Heuristic),
        _ => Err(format!("unknown solver {s:?} (expected auto, exact or heuristic)")),
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Historical records to generate.
    #[arg(long)]
    rows: Option<usize>,
    /// Hospital shape of the weekly list: Bordighera, Imperia or Sanremo.
    #[arg(long)]
    hospital: Option<String>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Records CSV.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Records CSV.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Model presets to search over, comma separated (tree, forest, xgboost, knn).
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// Prior hospitalizations CSV; checked but not used.
    #[arg(long)]
    hospitalizations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Directory with registrations.csv, mss.csv, shifts.csv and optionally
    /// instance.json and week_records.csv.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Duration source: VBA, Conf, Pred, Dep or Surg.
    #[arg(long, default_value = "VBA")]
    method: String,
    /// model.json written by `train`; needed by Conf and Pred.
    #[arg(long)]
    model: Option<PathBuf>,
    /// baselines.json written by `train`; needed by Dep and Surg.
    #[arg(long)]
    baselines: Option<PathBuf>,
    /// auto, exact or heuristic.
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverChoice>,
    /// Cap on heuristic restarts; runs that hit it are reproducible.
    #[arg(long)]
    max_restarts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Instance directory with one `runs/<method>/` subdirectory per method;
    /// repeat for several hospitals.
    #[arg(long)]
    instance: Vec<PathBuf>,
    /// Methods to include, comma separated.
    #[arg(long)]
    methods: Option<String>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Historical records to generate.
    #[arg(long)]
    rows: Option<usize>,
    /// Hospitals, comma separated.
    #[arg(long, value_delimiter = ',')]
    hospitals: Vec<String>,
    /// Methods, comma separated.
    #[arg(long)]
    methods: Option<String>,
    /// Model presets to search over, comma separated.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// auto, exact or heuristic.
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverChoice>,
    /// Cap on heuristic restarts; runs that hit it are reproducible.
    #[arg(long)]
    max_restarts: Option<usize>,
}

/// Both group-mean estimators, as stored in baselines.json.
#[derive(Debug, Serialize, Deserialize)]
struct Baselines {
    department: MeanEstimator,
    procedure: MeanEstimator,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write_csv(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), IngestError>) -> anyhow::Result<()> {
    let mut w = create(path)?;
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

const HOSPITALS: [&str; 3] = ["Bordighera", "Imperia", "Sanremo"];

fn hospital_shape(name: &str) -> Result<(usize, HospitalShape), CliError> {
    let index = HOSPITALS
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name.trim()))
        .ok_or_else(|| usage(format!("unknown hospital {name:?} (expected {})", HOSPITALS.join(", "))))?;
    let shape = HospitalShape::by_name(HOSPITALS[index]).expect("known hospital");
    Ok((index, shape))
}

fn synth_config(rows: usize) -> SynthConfig {
    SynthConfig {
        n_rows: rows,
        ..SynthConfig::default()
    }
}

/// Writes a weekly list for one hospital. The list only admits durations
/// inside the outlier fences of `history`, the range a model trained on it
/// has seen.
fn write_week(
    world: &SyntheticWorld,
    history: &[SurgicalRecord],
    hospital: &str,
    seed: u64,
    threads: Threads,
    dir: &Path,
) -> Result<(), CliError> {
    let (index, shape) = hospital_shape(hospital)?;
    let fences = clean_records(history, &PreprocessConfig::default(), threads)
        .ok()
        .and_then(|(_, log)| log.duration_fences());
    let mut wc = WeekConfig::new(shape);
    wc.duration_range = fences.map(|f| (f.lower, f.upper));
    let week = world.generate_week(&wc, seed.wrapping_add(2).wrapping_add(1000 * index as u64));
    write_csv(&dir.join("registrations.csv"), |w| write_registrations(w, &week.registrations))?;
    write_csv(&dir.join("mss.csv"), |w| write_mss(w, &week.mss))?;
    write_csv(&dir.join("shifts.csv"), |w| write_shifts(w, &week.shifts))?;
    write_csv(&dir.join("week_records.csv"), |w| write_records(w, &week.records))?;
    write_json(&dir.join("instance.json"), &week.config)?;
    eprintln!(
        "{}: {} registrations over {} MSS slots in {}",
        wc.hospital.name,
        week.registrations.len(),
        week.mss.len(),
        dir.display()
    );
    Ok(())
}

fn check_rows(rows: usize) -> Result<(), CliError> {
    if rows == 0 {
        return Err(usage("--rows must be at least 1"));
    }
    Ok(())
}

pub fn synth(ctx: Ctx, args: SynthArgs) -> Result<(), CliError> {
    let s = &ctx.settings;
    let rows = args.rows.unwrap_or(s.rows);
    check_rows(rows)?;
    let hospital = args.hospital.as_deref().unwrap_or(&s.hospitals[0]);
    hospital_shape(hospital)?;
    let world = SyntheticWorld::new(&synth_config(rows), s.seed);
    let history = world.generate_history(s.seed.wrapping_add(1));
    write_csv(&ctx.out.join("records.csv"), |w| write_records(w, &history))?;
    eprintln!("{} historical records in {}", history.len(), ctx.out.join("records.csv").display());
    write_week(&world, &history, hospital, s.seed, ctx.threads(), &ctx.out)
}

fn load_records(path: &Path) -> Result<Vec<SurgicalRecord>, CliError> {
    let table = read_records(open(path)?).map_err(|e| ingest_error(e, &path.display().to_string()))?;
    check_duration_columns(&table.present).map_err(|e| ingest_error(e, &path.display().to_string()))?;
    Ok(table.records)
}

fn records_path(arg: Option<PathBuf>, s: &Settings) -> Result<PathBuf, CliError> {
    arg.or_else(|| s.records.clone())
        .ok_or_else(|| usage("no records file (pass --records or set `records` in the config)"))
}

pub fn preprocess(ctx: Ctx, args: PreprocessArgs) -> Result<(), CliError> {
    let path = records_path(args.records, &ctx.settings)?;
    let records = load_records(&path)?;
    let (clean, log) = clean_records(&records, &PreprocessConfig::default(), ctx.threads())
        .map_err(|e| ingest_error(e, "preprocessing"))?;
    write_csv(&ctx.out.join("clean_records.csv"), |w| write_records(w, &clean.records))?;
    write_json(&ctx.out.join("provenance.json"), &log)?;
    eprintln!("{} of {} records kept", clean.records.len(), records.len());
    Ok(())
}

/// Checks that the hospitalizations file is a readable, rectangular CSV.
fn check_hospitalizations(path: &Path) -> Result<(), CliError> {
    let mut rdr = csv::Reader::from_reader(open(path).map_err(CliError::Usage)?);
    rdr.headers()
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::Usage)?;
    for row in rdr.records() {
        row.with_context(|| format!("reading {}", path.display()))
            .map_err(CliError::Usage)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainMetrics<'a> {
    selected: &'a ors_core::predict::ModelSpec,
    test: &'a ors_core::predict::MetricsReport,
    baselines: &'a ors_core::predict::BaselineMetrics,
    search: Option<&'a ors_core::predict::GridSearchResult>,
    n_train: usize,
    n_test: usize,
}

/// Trains on `records` and writes the artifacts to `dir`.
fn train_into(
    records: &[SurgicalRecord],
    grid: Vec<ors_core::predict::ModelSpec>,
    s: &Settings,
    dir: &Path,
) -> Result<(ModelArtifact, Baselines), CliError> {
    let config = TrainConfig {
        grid,
        test_fraction: s.test_fraction,
        cv_folds: s.cv_folds,
        seed: s.seed,
        ..TrainConfig::default()
    };
    let out = fit_model(records, &config, Threads(s.threads)).map_err(|e| match e {
        TrainError::Ingest(e) => ingest_error(e, "preprocessing"),
        TrainError::Predict(e) => CliError::Runtime(anyhow::Error::new(e).context("training")),
    })?;
    write_json(&dir.join("model.json"), &out.artifact)?;
    let baselines = Baselines {
        department: out.department.clone(),
        procedure: out.procedure.clone(),
    };
    write_json(&dir.join("baselines.json"), &baselines)?;
    write_json(
        &dir.join("metrics.json"),
        &TrainMetrics {
            selected: &out.selected,
            test: &out.test_metrics,
            baselines: &out.baseline_metrics,
            search: out.search.as_ref(),
            n_train: out.n_train,
            n_test: out.n_test,
        },
    )?;
    let mut w = csv::Writer::from_writer(create(&dir.join("predictions.csv"))?);
    for p in &out.predictions {
        w.serialize(p).context("writing predictions.csv")?;
    }
    w.flush().context("writing predictions.csv")?;
    write_json(&dir.join("provenance.json"), &out.provenance)?;
    let m = &out.test_metrics;
    eprintln!(
        "trained {} on {} rows; test MAE {:.2}, RMSE {:.2}, R2 {}",
        out.selected.family(),
        out.n_train,
        m.mae,
        m.rmse,
        m.r2.map_or_else(|| "undefined".to_string(), |r| format!("{r:.3}"))
    );
    Ok((out.artifact, baselines))
}

fn grid_from(models: &[String], s: &Settings) -> Result<Vec<ors_core::predict::ModelSpec>, CliError> {
    if models.is_empty() {
        Ok(s.grid.clone())
    } else {
        parse_models(models).map_err(CliError::Usage)
    }
}

pub fn train(ctx: Ctx, args: TrainArgs) -> Result<(), CliError> {
    let s = &ctx.settings;
    if let Some(h) = args.hospitalizations.as_ref().or(s.hospitalizations.as_ref()) {
        check_hospitalizations(h)?;
    }
    let grid = grid_from(&args.models, s)?;
    let path = records_path(args.records, s)?;
    let records = load_records(&path)?;
    train_into(&records, grid, s, &ctx.out)?;
    Ok(())
}

fn load_instance(dir: &Path, registrations: &Path) -> Result<(ProblemInstance, InstanceConfig), CliError> {
    let config_path = dir.join("instance.json");
    let config: InstanceConfig = if config_path.exists() {
        read_json(&config_path).map_err(CliError::Usage)?
    } else {
        InstanceConfig::default()
    };
    let instance = ors_core::ingest::build_instance(
        open(registrations).map_err(CliError::Usage)?,
        open(&dir.join("mss.csv")).map_err(CliError::Usage)?,
        open(&dir.join("shifts.csv")).map_err(CliError::Usage)?,
        &config,
    )
    .map_err(|e| ingest_error(e, &dir.display().to_string()))?;
    Ok((instance, config))
}

fn hospital_name(config: &InstanceConfig, dir: &Path) -> String {
    config.hospital.clone().unwrap_or_else(|| {
        dir.file_name()
            .map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
    })
}

fn evaluate_error(e: EvaluateError) -> CliError {
    match e {
        EvaluateError::MissingSource(_) | EvaluateError::NoMethods => CliError::Usage(e.into()),
        _ => CliError::Runtime(e.into()),
    }
}

/// Schedules the week in `dir` with one method and writes schedule.csv,
/// objective.json and the method's registrations.csv to `out`.
fn schedule_into(
    dir: &Path,
    method: Method,
    model: Option<&ModelArtifact>,
    baselines: Option<&Baselines>,
    solver: SolverChoice,
    limits: &SolveLimits,
    out: &Path,
) -> Result<SolveOutcome, CliError> {
    let (base, config) = load_instance(dir, &dir.join("registrations.csv"))?;
    let hospital = hospital_name(&config, dir);
    let inputs = if model.is_some() || baselines.is_some() {
        let records = load_records(&dir.join("week_records.csv"))?;
        MethodInputs::from_records(
            hospital,
            base,
            &records,
            model,
            baselines.map(|b| &b.department),
            baselines.map(|b| &b.procedure),
        )
        .map_err(evaluate_error)?
    } else {
        MethodInputs {
            hospital,
            instance: base,
            predicted: None,
            department_mean: None,
            procedure_mean: None,
        }
    };
    let instance = inputs.instance_for(method).map_err(evaluate_error)?;
    let outcome = match solve(&instance, method.objective_mode(), solver, limits) {
        Ok(o) => o,
        Err(SolveError::Incomplete {
            incumbent: Some(o), ..
        }) => {
            eprintln!("{method}: time limit reached, writing the best schedule found");
            *o
        }
        Err(e @ SolveError::InvalidLimits(_)) => return Err(CliError::Usage(e.into())),
        Err(e) => return Err(CliError::Runtime(anyhow::Error::new(e).context(method.to_string()))),
    };
    write_csv(&out.join("registrations.csv"), |w| write_registrations(w, &instance.registrations))?;
    let mut w = create(&out.join("schedule.csv"))?;
    write_schedule(&mut w, &outcome.schedule).context("writing schedule.csv")?;
    w.flush()?;
    write_json(&out.join("objective.json"), &ObjectiveReport::from(&outcome))?;
    let o = &outcome.schedule.objective;
    eprintln!(
        "{method}: {} of {} registrations scheduled, unassigned by priority [{}, {}, {}, {}], optimal {}",
        outcome.schedule.assignments.len(),
        instance.registrations.len(),
        o.l6,
        o.l5,
        o.l4,
        o.l3,
        outcome.proven_optimal
    );
    Ok(outcome)
}

pub fn schedule(ctx: Ctx, args: ScheduleArgs) -> Result<(), CliError> {
    let s = &ctx.settings;
    let method: Method = args.method.parse().map_err(usage)?;
    let dir = args
        .instance
        .or_else(|| s.instance.clone())
        .ok_or_else(|| usage("no instance directory (pass --instance or set `instance` in the config)"))?;
    match method {
        Method::Conf | Method::Pred if args.model.is_none() => {
            return Err(usage(format!("method {method} needs --model")));
        }
        Method::Dep | Method::Surg if args.baselines.is_none() => {
            return Err(usage(format!("method {method} needs --baselines")));
        }
        _ => {}
    }
    let model: Option<ModelArtifact> = args.model.as_deref().map(read_json).transpose().map_err(CliError::Usage)?;
    if let Some(m) = &model {
        m.check_version().map_err(|e| CliError::Usage(e.into()))?;
    }
    let baselines: Option<Baselines> =
        args.baselines.as_deref().map(read_json).transpose().map_err(CliError::Usage)?;
    let mut limits = ctx.limits();
    if let Some(r) = args.max_restarts {
        limits.max_restarts = r;
    }
    limits.validate().map_err(|e| CliError::Usage(e.into()))?;
    let solver = args.solver.unwrap_or(s.solver);
    schedule_into(&dir, method, model.as_ref(), baselines.as_ref(), solver, &limits, &ctx.out)?;
    Ok(())
}

fn run_dir(dir: &Path, method: Method) -> PathBuf {
    dir.join("runs").join(method.name().to_ascii_lowercase())
}

fn evaluate_dirs(dirs: &[PathBuf], methods: &[Method], out: &Path) -> Result<Vec<MethodReport>, CliError> {
    let mut methods = methods.to_vec();
    methods.sort_unstable();
    methods.dedup();
    let mut reports = Vec::new();
    for dir in dirs {
        for &method in &methods {
            let run = run_dir(dir, method);
            let (instance, config) = load_instance(dir, &run.join("registrations.csv"))?;
            let schedule = read_schedule(open(&run.join("schedule.csv"))?)
                .with_context(|| format!("reading {}", run.join("schedule.csv").display()))?;
            let objective = run.join("objective.json");
            let proven_optimal = if objective.exists() {
                read_json::<ObjectiveReport>(&objective)?.proven_optimal
            } else {
                false
            };
            let report = method_report(&hospital_name(&config, dir), method, &schedule, &instance, proven_optimal)
                .map_err(|e| CliError::Runtime(anyhow::Error::new(e).context(run.display().to_string())))?;
            reports.push(report);
        }
    }
    let json = render_json(&reports);
    let text = render_text(&reports);
    let mut w = create(&out.join("report.json"))?;
    w.write_all(json.as_bytes())?;
    w.flush()?;
    let mut w = create(&out.join("report.txt"))?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    print!("{text}");
    Ok(reports)
}

fn methods_from(arg: Option<&str>, s: &Settings) -> Result<Vec<Method>, CliError> {
    match arg {
        Some(list) => parse_methods(&[list.to_string()]).map_err(CliError::Usage),
        None => Ok(s.methods.clone()),
    }
}

pub fn evaluate(ctx: Ctx, args: EvaluateArgs) -> Result<(), CliError> {
    let s = &ctx.settings;
    let methods = methods_from(args.methods.as_deref(), s)?;
    let dirs = if args.instance.is_empty() {
        s.instance.clone().into_iter().collect()
    } else {
        args.instance
    };
    if dirs.is_empty() {
        return Err(usage("no instance directory (pass --instance or set `instance` in the config)"));
    }
    evaluate_dirs(&dirs, &methods, &ctx.out)?;
    Ok(())
}

pub fn pipeline(ctx: Ctx, args: PipelineArgs) -> Result<(), CliError> {
    let s = &ctx.settings;
    let rows = args.rows.unwrap_or(s.rows);
    check_rows(rows)?;
    let hospitals = if args.hospitals.is_empty() {
        s.hospitals.clone()
    } else {
        args.hospitals
    };
    if hospitals.is_empty() {
        return Err(usage("the hospital list is empty"));
    }
    for h in &hospitals {
        hospital_shape(h)?;
    }
    let methods = methods_from(args.methods.as_deref(), s)?;
    let grid = grid_from(&args.models, s)?;
    let mut limits = ctx.limits();
    if let Some(r) = args.max_restarts {
        limits.max_restarts = r;
    }
    limits.validate().map_err(|e| CliError::Usage(e.into()))?;
    if let Some(h) = &s.hospitalizations {
        check_hospitalizations(h)?;
    }
    let solver = args.solver.unwrap_or(s.solver);

    let world = SyntheticWorld::new(&synth_config(rows), s.seed);
    let history = world.generate_history(s.seed.wrapping_add(1));
    write_csv(&ctx.out.join("records.csv"), |w| write_records(w, &history))?;
    let (model, baselines) = train_into(&history, grid, s, &ctx.out.join("model"))?;

    let mut dirs = Vec::new();
    for h in &hospitals {
        let dir = ctx.out.join(h.to_ascii_lowercase());
        write_week(&world, &history, h, s.seed, ctx.threads(), &dir)?;
        for &m in &methods {
            schedule_into(&dir, m, Some(&model), Some(&baselines), solver, &limits, &run_dir(&dir, m))?;
        }
        dirs.push(dir);
    }
    evaluate_dirs(&dirs, &methods, &ctx.out)?;
    Ok(())
}
