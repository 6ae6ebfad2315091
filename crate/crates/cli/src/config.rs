//! Run settings: built-in defaults, then a TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ors_core::evaluate::Method;
use ors_core::predict::ModelSpec;
use ors_core::solve::SolverChoice;
use serde::Deserialize;

/// Every key is optional so that a file may set any subset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub time_limit: Option<f64>,
    pub max_restarts: Option<usize>,
    pub solver: Option<SolverChoice>,
    pub rows: Option<usize>,
    pub hospitals: Option<Vec<String>>,
    pub methods: Option<Vec<String>>,
    pub models: Option<Vec<String>>,
    pub grid: Option<Vec<ModelSpec>>,
    pub cv_folds: Option<usize>,
    pub test_fraction: Option<f64>,
    pub records: Option<PathBuf>,
    pub instance: Option<PathBuf>,
    pub hospitalizations: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Settings after merging.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub threads: usize,
    pub time_limit: f64,
    pub max_restarts: usize,
    pub solver: SolverChoice,
    pub rows: usize,
    pub hospitals: Vec<String>,
    pub methods: Vec<Method>,
    pub grid: Vec<ModelSpec>,
    pub cv_folds: usize,
    pub test_fraction: f64,
    /// Historical surgical records.
    pub records: Option<PathBuf>,
    /// Directory with registrations.csv, mss.csv and shifts.csv.
    pub instance: Option<PathBuf>,
    /// Accepted and checked for readability; no computation uses it.
    pub hospitalizations: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 42,
            threads: 0,
            time_limit: 60.0,
            max_restarts: 64,
            solver: SolverChoice::Auto,
            rows: 5000,
            hospitals: vec!["Bordighera".into(), "Imperia".into(), "Sanremo".into()],
            methods: Method::ALL.to_vec(),
            grid: vec![ModelSpec::boosted_default()],
            cv_folds: 5,
            test_fraction: 0.2,
            records: None,
            instance: None,
            hospitalizations: None,
        }
    }
}

pub fn parse_methods(names: &[String]) -> anyhow::Result<Vec<Method>> {
    let methods = names
        .iter()
        .flat_map(|n| n.split(','))
        .filter(|n| !n.trim().is_empty())
        .map(|n| n.parse::<Method>().map_err(anyhow::Error::msg))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if methods.is_empty() {
        bail!("the method list is empty");
    }
    Ok(methods)
}

pub fn parse_models(names: &[String]) -> anyhow::Result<Vec<ModelSpec>> {
    let grid = names
        .iter()
        .flat_map(|n| n.split(','))
        .filter(|n| !n.trim().is_empty())
        .map(|n| ModelSpec::named(n.trim()).with_context(|| format!("unknown model preset {n:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if grid.is_empty() {
        bail!("the model list is empty");
    }
    Ok(grid)
}

impl Settings {
    /// Applies a config file on top of the defaults.
    pub fn from_file(file: FileConfig) -> anyhow::Result<Self> {
        let mut s = Settings::default();
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = file.$field { s.$field = v; } )* };
        }
        take!(seed, threads, time_limit, max_restarts, solver, rows, hospitals, cv_folds, test_fraction);
        if let Some(m) = file.methods {
            s.methods = parse_methods(&m)?;
        }
        match (file.grid, file.models) {
            (Some(_), Some(_)) => bail!("set either `grid` or `models` in the config, not both"),
            (Some(g), None) => s.grid = g,
            (None, Some(m)) => s.grid = parse_models(&m)?,
            (None, None) => {}
        }
        s.records = file.records;
        s.instance = file.instance;
        s.hospitalizations = file.hospitalizations;
        Ok(s)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.time_limit.is_finite() && self.time_limit > 0.0) {
            bail!("time limit must be positive, got {}", self.time_limit);
        }
        if self.methods.is_empty() {
            bail!("the method list is empty");
        }
        if self.grid.is_empty() {
            bail!("the model grid is empty");
        }
        for spec in &self.grid {
            spec.validate()?;
        }
        if self.grid.len() > 1 && self.cv_folds < 2 {
            bail!("cross-validation needs at least 2 folds, got {}", self.cv_folds);
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            bail!("test fraction must be in (0, 1), got {}", self.test_fraction);
        }
        Ok(())
    }
}
