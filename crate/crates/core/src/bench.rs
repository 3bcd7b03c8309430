//! Experiment harness: grid runs persisted as JSON run records, performance
//! profiles and median progress curves.
//!
//! Records are plain JSON documents, one per run, so records produced by
//! other solvers can be dropped into the same directory and take part in
//! profiles and curves unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{make_problem, random_start, NoisyVariant, Variant, DEFAULT_EPS_F};
use crate::solver::{bcscg_ds_with, SolverParams};
use crate::{map_ordered, Execution};

/// Solver name written into records produced by this crate.
pub const SOLVER_NAME: &str = "bcscg-ds";
/// Number of log-spaced `α` samples in a performance profile.
pub const PROFILE_GRID: usize = 256;

/// Trace of one solver run on one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub dimension: usize,
    pub variant: Variant,
    pub eps_f: f64,
    pub seed: u64,
    pub solver: String,
    pub initial_value: f64,
    /// `(evaluation_count, best_value)`, raw counts.
    pub best_history: Vec<(usize, f64)>,
    pub budget: usize,
}

impl RunRecord {
    /// Checks the record invariants: counts strictly increasing, values
    /// nonincreasing, and the first value equal to `initial_value`.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("record {}: {msg}", self.file_name())));
        let Some(first) = self.best_history.first() else {
            return bad("empty best_history".into());
        };
        if first.1 != self.initial_value {
            return bad("initial_value differs from the first history value".into());
        }
        for w in self.best_history.windows(2) {
            if w[1].0 <= w[0].0 {
                return bad(format!("evaluation counts not increasing at {}", w[1].0));
            }
            if w[1].1 > w[0].1 {
                return bad(format!("best value increases at {}", w[1].0));
            }
        }
        Ok(())
    }

    pub fn final_value(&self) -> f64 {
        self.best_history.last().map_or(self.initial_value, |h| h.1)
    }

    /// Best value after at most `count` evaluations; the initial value when
    /// no evaluation fits.
    pub fn best_at(&self, count: usize) -> f64 {
        let idx = self.best_history.partition_point(|h| h.0 <= count);
        if idx == 0 {
            self.initial_value
        } else {
            self.best_history[idx - 1].1
        }
    }

    pub fn file_name(&self) -> String {
        format!(
            "{}__{}__n{}__{}__eps{}__seed{}.json",
            self.solver, self.problem, self.dimension, self.variant, self.eps_f, self.seed
        )
    }

    fn instance(&self, with_seed: bool) -> String {
        let mut key = format!(
            "{}/n{}/{}/eps{}",
            self.problem, self.dimension, self.variant, self.eps_f
        );
        if with_seed {
            key.push_str(&format!("/seed{}", self.seed));
        }
        key
    }
}

pub fn write_record(dir: &Path, record: &RunRecord) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(record.file_name());
    let json = serde_json::to_string_pretty(record).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, json + "\n").map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let record: RunRecord = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    record.validate()?;
    Ok(record)
}

/// Every `*.json` record in `dir`, in file-name order.
pub fn read_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_record(p)).collect()
}

/// Coordinates of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub problem: String,
    pub dimension: usize,
    pub variant: Variant,
    pub eps_f: f64,
    pub seed: u64,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "problem={} dim={} variant={} eps_f={} seed={}",
            self.problem, self.dimension, self.variant, self.eps_f, self.seed
        )
    }
}

/// Runs the solver on one cell from the seeded uniform starting point.
pub fn run_cell(cell: &Cell, params: &SolverParams, execution: Execution) -> Result<RunRecord> {
    let base = make_problem(&cell.problem, cell.dimension)?;
    let objective = NoisyVariant::new(base, cell.variant, cell.eps_f)?;
    let domain = objective.domain().clone();
    let x0 = random_start(&domain, cell.seed);
    let trace = bcscg_ds_with(&objective, &domain, &x0, params, cell.seed, execution)?;
    Ok(RunRecord {
        problem: cell.problem.clone(),
        dimension: cell.dimension,
        variant: cell.variant,
        eps_f: cell.eps_f,
        seed: cell.seed,
        solver: SOLVER_NAME.to_string(),
        initial_value: trace.best_history[0].1,
        best_history: trace.best_history,
        budget: params.budget_for(cell.dimension),
    })
}

fn default_eps_f() -> f64 {
    DEFAULT_EPS_F
}

/// Grid definition read by `bench --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problems: Vec<String>,
    pub dims: Vec<usize>,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub params: SolverParams,
    #[serde(default = "default_eps_f")]
    pub eps_f: f64,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for problem in &self.problems {
            for &dimension in &self.dims {
                for &variant in &self.variants {
                    for &seed in &self.seeds {
                        cells.push(Cell {
                            problem: problem.clone(),
                            dimension,
                            variant,
                            eps_f: self.eps_f,
                            seed,
                        });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone)]
pub struct CellFailure {
    pub cell: Cell,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub written: Vec<PathBuf>,
    pub failures: Vec<CellFailure>,
}

/// Runs every cell of the grid and writes one record per successful cell.
/// Cells are independent and run concurrently under [`Execution::Parallel`];
/// a failing cell is reported without stopping the others.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, execution: Execution) -> Result<ExperimentReport> {
    config.params.validate()?;
    fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let cells = config.cells();
    let results = map_ordered(execution, &cells, |cell| {
        run_cell(cell, &config.params, Execution::Sequential).and_then(|r| write_record(out, &r))
    });
    let mut report = ExperimentReport::default();
    for (cell, res) in cells.into_iter().zip(results) {
        match res {
            Ok(path) => report.written.push(path),
            Err(e) => report.failures.push(CellFailure {
                cell,
                error: e.to_string(),
            }),
        }
    }
    Ok(report)
}

/// `f(x₀) − f*_s ≥ (1 − τ)(f(x₀) − f*_L)`, applied literally.
pub fn convergence_test(f0: f64, fs: f64, fl: f64, tau: f64) -> bool {
    f0 - fs >= (1.0 - tau) * (f0 - fl)
}

/// `cost / best_cost` for converged solvers, `∞` otherwise.
pub fn performance_ratio(cost: usize, best_cost: usize, converged: bool) -> f64 {
    if converged {
        cost as f64 / best_cost as f64
    } else {
        f64::INFINITY
    }
}

/// How records are grouped into profile instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileMode {
    /// Each (problem, dimension, variant, ε_f, seed) is one instance.
    #[default]
    PerSeed,
    /// Seeds are collapsed: each solver's histories are replaced by their
    /// pointwise median before profiling.
    Median,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub tau: f64,
    pub solvers: Vec<String>,
    pub instances: Vec<String>,
    /// `ν_{s,p}` keyed by `(solver, instance)`; `∞` when not converged.
    pub ratios: BTreeMap<(String, String), f64>,
    pub alphas: Vec<f64>,
    /// `ρ_s(α)` for every `α` in `alphas`, per solver.
    pub curves: BTreeMap<String, Vec<f64>>,
}

impl ProfileTable {
    /// `ρ_s(α)` for an arbitrary `α`.
    pub fn rho(&self, solver: &str, alpha: f64) -> f64 {
        let hits = self
            .instances
            .iter()
            .filter(|p| self.ratios[&(solver.to_string(), (*p).clone())] <= alpha)
            .count();
        hits as f64 / self.instances.len() as f64
    }
}

/// Pointwise median history of `records` (all for the same instance and solver).
fn median_record(records: &[&RunRecord]) -> RunRecord {
    let max_count = records
        .iter()
        .filter_map(|r| r.best_history.last().map(|h| h.0))
        .max()
        .unwrap_or(0);
    let counts: BTreeSet<usize> = records
        .iter()
        .flat_map(|r| r.best_history.iter().map(|h| h.0))
        .filter(|&c| c <= max_count)
        .collect();
    let best_history = counts
        .into_iter()
        .map(|c| (c, median(records.iter().map(|r| r.best_at(c)).collect())))
        .collect::<Vec<_>>();
    let first = records[0];
    RunRecord {
        initial_value: best_history.first().map_or(first.initial_value, |h| h.1),
        best_history,
        seed: 0,
        ..first.clone()
    }
}

/// Performance profile over `records` at tolerance `tau`.
///
/// `w_{s,p}` is the first evaluation count at which the solver's best value
/// passes the convergence test against the best final value over all solvers
/// on that instance.
pub fn performance_profile(records: &[RunRecord], tau: f64, mode: ProfileMode) -> Result<ProfileTable> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidConfig(format!("tau must lie in (0,1], got {tau}")));
    }
    let with_seed = mode == ProfileMode::PerSeed;
    let mut grouped: BTreeMap<String, BTreeMap<String, Vec<&RunRecord>>> = BTreeMap::new();
    let mut solvers = BTreeSet::new();
    for r in records {
        solvers.insert(r.solver.clone());
        grouped
            .entry(r.instance(with_seed))
            .or_default()
            .entry(r.solver.clone())
            .or_default()
            .push(r);
    }
    if grouped.is_empty() {
        return Err(Error::InvalidConfig("no run records".into()));
    }
    let solvers: Vec<String> = solvers.into_iter().collect();

    let mut ratios = BTreeMap::new();
    for (instance, by_solver) in &grouped {
        let mut cells: Vec<(String, RunRecord)> = Vec::with_capacity(solvers.len());
        for s in &solvers {
            let recs = by_solver.get(s).ok_or_else(|| Error::MissingCell {
                solver: s.clone(),
                instance: instance.clone(),
            })?;
            let rec = match mode {
                ProfileMode::PerSeed if recs.len() == 1 => recs[0].clone(),
                ProfileMode::PerSeed => {
                    return Err(Error::InvalidConfig(format!(
                        "{} records for solver `{s}` on instance {instance}",
                        recs.len()
                    )))
                }
                ProfileMode::Median => median_record(recs),
            };
            cells.push((s.clone(), rec));
        }
        let f_l = cells.iter().map(|(_, r)| r.final_value()).fold(f64::INFINITY, f64::min);
        let costs: Vec<Option<usize>> = cells
            .iter()
            .map(|(_, r)| {
                r.best_history
                    .iter()
                    .find(|h| convergence_test(r.initial_value, h.1, f_l, tau))
                    .map(|h| h.0.max(1))
            })
            .collect();
        let best_cost = costs.iter().flatten().copied().min();
        for ((s, _), cost) in cells.iter().zip(&costs) {
            let nu = match (cost, best_cost) {
                (Some(c), Some(b)) => performance_ratio(*c, b, true),
                _ => f64::INFINITY,
            };
            ratios.insert((s.clone(), instance.clone()), nu);
        }
    }

    let max_nu = ratios.values().copied().filter(|v| v.is_finite()).fold(1.0, f64::max);
    let alphas: Vec<f64> = if max_nu > 1.0 {
        let top = max_nu.ln();
        (0..PROFILE_GRID)
            .map(|i| {
                if i + 1 == PROFILE_GRID {
                    max_nu
                } else {
                    (top * i as f64 / (PROFILE_GRID - 1) as f64).exp()
                }
            })
            .collect()
    } else {
        vec![1.0]
    };
    let instances: Vec<String> = grouped.keys().cloned().collect();
    let mut table = ProfileTable {
        tau,
        solvers: solvers.clone(),
        instances,
        ratios,
        alphas,
        curves: BTreeMap::new(),
    };
    for s in &solvers {
        let curve = table.alphas.iter().map(|&a| table.rho(s, a)).collect();
        table.curves.insert(s.clone(), curve);
    }
    Ok(table)
}

/// Median of a non-empty sample; mean of the middle pair for even sizes.
pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Median best value across `records` at each normalized checkpoint `c`,
/// i.e. after `⌊c (n + 1)⌋` evaluations.
pub fn progress_curve(records: &[&RunRecord], checkpoints: &[f64]) -> Vec<(f64, f64)> {
    assert!(!records.is_empty(), "progress curve needs at least one record");
    let n1 = (records[0].dimension + 1) as f64;
    checkpoints
        .iter()
        .map(|&c| {
            let count = (c * n1 + 1e-9).floor().max(0.0) as usize;
            (c, median(records.iter().map(|r| r.best_at(count)).collect()))
        })
        .collect()
}

/// Integer checkpoints `0, 1, …, ⌈budget/(n+1)⌉` covering every record.
pub fn default_checkpoints(records: &[&RunRecord]) -> Vec<f64> {
    let n1 = records.first().map_or(1, |r| r.dimension + 1);
    let max_budget = records.iter().map(|r| r.budget).max().unwrap_or(0);
    let last = max_budget.div_ceil(n1);
    (0..=last).map(|c| c as f64).collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

fn write_rows<'a>(path: &Path, header: [&str; 3], rows: impl Iterator<Item = (&'a str, f64, f64)>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for (s, a, b) in rows {
        w.write_record([s, &a.to_string(), &b.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `solver,alpha,rho` rows for every solver and grid point.
pub fn write_profile_csv(table: &ProfileTable, path: &Path) -> Result<()> {
    let rows = table
        .curves
        .iter()
        .flat_map(|(s, curve)| table.alphas.iter().zip(curve).map(move |(&a, &r)| (s.as_str(), a, r)));
    write_rows(path, ["solver", "alpha", "rho"], rows)
}

/// `solver,normalized_evals,median_best` rows.
pub fn write_curve_csv(curves: &BTreeMap<String, Vec<(f64, f64)>>, path: &Path) -> Result<()> {
    let rows = curves
        .iter()
        .flat_map(|(s, curve)| curve.iter().map(move |&(c, v)| (s.as_str(), c, v)));
    write_rows(path, ["solver", "normalized_evals", "median_best"], rows)
}

/// Progress curves of every solver on one (problem, dimension, variant).
pub fn curves_for(
    records: &[RunRecord],
    problem: &str,
    dimension: usize,
    variant: Variant,
) -> BTreeMap<String, Vec<(f64, f64)>> {
    let selected: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.problem == problem && r.dimension == dimension && r.variant == variant)
        .collect();
    let checkpoints = default_checkpoints(&selected);
    let mut by_solver: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in selected {
        by_solver.entry(r.solver.clone()).or_default().push(r);
    }
    by_solver
        .into_iter()
        .map(|(s, recs)| (s, progress_curve(&recs, &checkpoints)))
        .collect()
}
