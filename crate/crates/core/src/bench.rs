//! Benchmark configuration and the (mode × norm) measurement matrix.
//!
//! Configuration is a flat `key = value` file; `#` starts a comment. Every
//! key can also be overridden one at a time with [`BenchConfig::set`].
//!
//! | key                  | value                                                 |
//! |----------------------|-------------------------------------------------------|
//! | `data`               | path to `.fvecs` or CSV; replaces the synthetic model |
//! | `model`              | `iid-uniform`, `block-correlated`, `piecewise-smooth` |
//! | `s`, `n`             | synthetic size and dimension                          |
//! | `block_size`, `rho`  | block-correlated parameters                           |
//! | `window`             | piecewise-smooth parameter                            |
//! | `data_seed`          | synthetic generator seed                              |
//! | `schedule`           | e.g. `64,16,4`                                        |
//! | `modes`              | e.g. `orthogonal,adaptive`                            |
//! | `norms`              | e.g. `1,2,4,inf`                                      |
//! | `epsilon`            | a number, or `calibrate`                              |
//! | `target_nn`          | neighbour rank used by calibration                    |
//! | `calibration_sample` | held-out points used by calibration                   |
//! | `calibration_seed`   | seed of the calibration sample                        |
//! | `queries`            | query points held out of the database                 |
//! | `query_seed`         | seed of the query sample                              |
//! | `verify_queries`     | queries per cell re-checked against the linear scan   |
//! | `output`             | report path                                           |
//! | `format`             | `json` or `csv`                                       |

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cost::{estimate_cost, fit_const};
use crate::dataset::{generate, load_auto, DataSet, SyntheticModel, SyntheticSpec};
use crate::error::{Error, Result};
use crate::norms::NormOrder;
use crate::oracle::{brute_force_range_with, calibrate_epsilon, CalibrationSpec};
use crate::par::{map_each, Execution};
use crate::projection::ProjectionMode;
use crate::report::{BenchRow, ReportFormat};
use crate::tree::{DimensionSchedule, QueryReport, SubspaceIndex};

/// Where the vectors come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<DataSet> {
        match self {
            DataSource::File(path) => load_auto(path),
            DataSource::Synthetic(spec) => generate(spec),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsilonPolicy {
    Fixed(f64),
    /// Calibrated separately under every norm.
    Calibrate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub source: DataSource,
    pub schedule: DimensionSchedule,
    pub modes: Vec<ProjectionMode>,
    pub norms: Vec<NormOrder>,
    pub epsilon: EpsilonPolicy,
    pub calibration: CalibrationSpec,
    pub queries: usize,
    pub query_seed: u64,
    pub verify_queries: usize,
    pub output: Option<PathBuf>,
    pub format: Option<ReportFormat>,
}

impl Default for BenchConfig {
    /// The desk-scale norm-trend setup.
    fn default() -> Self {
        BenchConfig {
            source: DataSource::Synthetic(SyntheticSpec {
                s: 20_000,
                n: 64,
                model: SyntheticModel::BlockCorrelated { block_size: 4, rho: 0.8 },
                seed: 1,
            }),
            schedule: DimensionSchedule::new(vec![64, 16, 4]).expect("valid default schedule"),
            modes: vec![ProjectionMode::Orthogonal, ProjectionMode::Adaptive],
            norms: vec![NormOrder::L1, NormOrder::L2, NormOrder::L4, NormOrder::LINF],
            epsilon: EpsilonPolicy::Calibrate,
            calibration: CalibrationSpec::default(),
            queries: 100,
            query_seed: 7,
            verify_queries: 20,
            output: None,
            format: None,
        }
    }
}

/// Minimum number of queries per cell checked against the linear scan.
pub const MIN_VERIFY_QUERIES: usize = 20;

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse {key} = {value:?}")))
}

fn parse_list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(item)
        .collect::<Result<Vec<_>>>()?;
    if items.is_empty() {
        return Err(Error::invalid(format!("{key} must not be empty")));
    }
    Ok(items)
}

impl BenchConfig {
    /// Parses a config file over the defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut config = BenchConfig::default();
        config.apply_str(&fs::read_to_string(path)?)?;
        Ok(config)
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line)
                .map_err(|e| Error::format("config", format!("line {}", i + 1), e.to_string()))?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected key=value, got {pair:?}")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data" => self.source = DataSource::File(PathBuf::from(value)),
            "schedule" => self.schedule = value.parse()?,
            "modes" => self.modes = parse_list(key, value, |t| t.parse())?,
            "norms" => self.norms = parse_list(key, value, |t| t.parse())?,
            "epsilon" => {
                self.epsilon = if value.eq_ignore_ascii_case("calibrate") {
                    EpsilonPolicy::Calibrate
                } else {
                    EpsilonPolicy::Fixed(parse(key, value)?)
                }
            }
            "target_nn" => self.calibration.target_nn = parse(key, value)?,
            "calibration_sample" => self.calibration.sample_size = parse(key, value)?,
            "calibration_seed" => self.calibration.seed = parse(key, value)?,
            "queries" => self.queries = parse(key, value)?,
            "query_seed" => self.query_seed = parse(key, value)?,
            "verify_queries" => self.verify_queries = parse(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => self.format = Some(value.parse()?),
            "model" | "s" | "n" | "block_size" | "rho" | "window" | "data_seed" => self.set_synthetic(key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    fn set_synthetic(&mut self, key: &str, value: &str) -> Result<()> {
        let spec = match &mut self.source {
            DataSource::Synthetic(spec) => spec,
            DataSource::File(_) => {
                return Err(Error::invalid(format!("{key} given but data is read from a file")));
            }
        };
        match key {
            "model" => {
                spec.model = match value {
                    "iid-uniform" => SyntheticModel::IidUniform,
                    "block-correlated" => SyntheticModel::BlockCorrelated { block_size: 4, rho: 0.8 },
                    "piecewise-smooth" => SyntheticModel::PiecewiseSmooth { window: 8 },
                    _ => return Err(Error::invalid(format!("unknown model {value:?}"))),
                }
            }
            "s" => spec.s = parse(key, value)?,
            "n" => spec.n = parse(key, value)?,
            "data_seed" => spec.seed = parse(key, value)?,
            "block_size" | "rho" => match &mut spec.model {
                SyntheticModel::BlockCorrelated { block_size, rho } => {
                    if key == "rho" {
                        *rho = parse(key, value)?;
                    } else {
                        *block_size = parse(key, value)?;
                    }
                }
                _ => return Err(Error::invalid(format!("{key} applies to the block-correlated model only"))),
            },
            "window" => match &mut spec.model {
                SyntheticModel::PiecewiseSmooth { window } => *window = parse(key, value)?,
                _ => return Err(Error::invalid("window applies to the piecewise-smooth model only")),
            },
            _ => unreachable!("routed by set"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() || self.norms.is_empty() {
            return Err(Error::invalid("modes and norms must be non-empty"));
        }
        if let DataSource::Synthetic(spec) = &self.source {
            spec.validate()?;
            if spec.n != self.schedule.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.schedule.input_dim(),
                    found: spec.n,
                });
            }
        }
        if let EpsilonPolicy::Fixed(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::invalid(format!("epsilon must be positive, got {e}")));
            }
        }
        if self.queries == 0 {
            return Err(Error::invalid("queries must be positive"));
        }
        if self.verify_queries < MIN_VERIFY_QUERIES.min(self.queries) {
            return Err(Error::invalid(format!(
                "verify_queries must be at least {MIN_VERIFY_QUERIES} (or every query)"
            )));
        }
        Ok(())
    }

    pub fn report_format(&self) -> ReportFormat {
        self.format
            .or_else(|| self.output.as_deref().map(ReportFormat::from_path))
            .unwrap_or(ReportFormat::Json)
    }

    /// (mode, norm) cells in report order.
    pub fn cells(&self) -> Vec<(ProjectionMode, NormOrder)> {
        let mut cells: Vec<_> = self
            .modes
            .iter()
            .flat_map(|&m| self.norms.iter().map(move |&p| (m, p)))
            .collect();
        cells.sort_by(|a, b| cell_order(*a, *b));
        cells.dedup();
        cells
    }
}

fn cell_order(a: (ProjectionMode, NormOrder), b: (ProjectionMode, NormOrder)) -> std::cmp::Ordering {
    let mode_rank = |m| match m {
        ProjectionMode::Orthogonal => 0,
        ProjectionMode::Adaptive => 1,
    };
    mode_rank(a.0)
        .cmp(&mode_rank(b.0))
        .then(a.1.as_f64().total_cmp(&b.1.as_f64()))
}

impl fmt::Display for BenchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            DataSource::File(p) => writeln!(f, "data = {}", p.display())?,
            DataSource::Synthetic(spec) => {
                match spec.model {
                    SyntheticModel::IidUniform => writeln!(f, "model = iid-uniform")?,
                    SyntheticModel::BlockCorrelated { block_size, rho } => {
                        writeln!(f, "model = block-correlated\nblock_size = {block_size}\nrho = {rho}")?
                    }
                    SyntheticModel::PiecewiseSmooth { window } => {
                        writeln!(f, "model = piecewise-smooth\nwindow = {window}")?
                    }
                }
                writeln!(f, "s = {}\nn = {}\ndata_seed = {}", spec.s, spec.n, spec.seed)?;
            }
        }
        let join = |v: Vec<String>| v.join(",");
        writeln!(f, "schedule = {}", self.schedule)?;
        writeln!(f, "modes = {}", join(self.modes.iter().map(ToString::to_string).collect()))?;
        writeln!(f, "norms = {}", join(self.norms.iter().map(ToString::to_string).collect()))?;
        match self.epsilon {
            EpsilonPolicy::Fixed(e) => writeln!(f, "epsilon = {e}")?,
            EpsilonPolicy::Calibrate => writeln!(f, "epsilon = calibrate")?,
        }
        writeln!(f, "target_nn = {}", self.calibration.target_nn)?;
        writeln!(f, "calibration_sample = {}", self.calibration.sample_size)?;
        writeln!(f, "calibration_seed = {}", self.calibration.seed)?;
        writeln!(f, "queries = {}", self.queries)?;
        writeln!(f, "query_seed = {}", self.query_seed)?;
        writeln!(f, "verify_queries = {}", self.verify_queries)?;
        if let Some(out) = &self.output {
            writeln!(f, "output = {}", out.display())?;
        }
        if let Some(format) = self.format {
            writeln!(f, "format = {}", if format == ReportFormat::Csv { "csv" } else { "json" })?;
        }
        Ok(())
    }
}

/// A built index for one (mode, norm) cell.
pub struct BuiltCell {
    pub mode: ProjectionMode,
    pub norm: NormOrder,
    pub index: SubspaceIndex,
}

/// Builds every cell over the whole data set.
pub fn build_cells(config: &BenchConfig, exec: Execution) -> Result<Vec<BuiltCell>> {
    config.validate()?;
    let data = config.source.load()?;
    config
        .cells()
        .into_iter()
        .map(|(mode, norm)| {
            let index = SubspaceIndex::build_with(&data, &config.schedule, mode, norm, exec)?;
            let diag = index.diagnostics();
            info!(
                "{mode} l_{norm}: max diversion {:.3e}, {} unconverged block(s)",
                diag.max_diversion(),
                diag.unconverged_blocks
            );
            Ok(BuiltCell { mode, norm, index })
        })
        .collect()
}

/// Database / query split used by the benchmark.
pub fn split_queries(data: &DataSet, queries: usize, seed: u64) -> Result<(DataSet, DataSet)> {
    if queries >= data.len() {
        return Err(Error::invalid(format!(
            "{queries} queries leave no database out of {} points",
            data.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = sample(&mut rng, data.len(), queries).into_vec();
    held.sort_unstable();
    data.partition(&held)
}

/// Runs the full matrix and returns one row per cell, sorted by (mode, p).
///
/// The first `verify_queries` queries of each cell are repeated with the
/// linear scan; any disagreement is an [`Error::Invariant`].
pub fn run_bench(config: &BenchConfig, exec: Execution) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let data = config.source.load()?;
    let (database, queries) = split_queries(&data, config.queries, config.query_seed)?;
    info!("database {} points, {} queries", database.len(), queries.len());

    let mut epsilons = Vec::new();
    for &p in &config.norms {
        if epsilons.iter().any(|(q, _)| *q == p) {
            continue;
        }
        let eps = match config.epsilon {
            EpsilonPolicy::Fixed(e) => e,
            EpsilonPolicy::Calibrate => calibrate_epsilon(&database, &config.calibration, p)?,
        };
        info!("l_{p}: epsilon = {eps}");
        epsilons.push((p, eps));
    }

    let mut rows = Vec::new();
    for (mode, p) in config.cells() {
        let epsilon = epsilons.iter().find(|(q, _)| *q == p).expect("calibrated").1;
        let index = SubspaceIndex::build_with(&database, &config.schedule, mode, p, exec)?;
        let reports = map_each(exec, queries.len(), |q| {
            index.range_query_with(queries.row(q), epsilon, Execution::Sequential)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let verify = config.verify_queries.min(queries.len());
        verify_against_oracle(&database, &queries, &reports[..verify], p, exec)?;
        rows.push(summarize(mode, p, &index, &reports)?);
    }
    Ok(rows)
}

fn verify_against_oracle(
    database: &DataSet,
    queries: &DataSet,
    reports: &[QueryReport],
    p: NormOrder,
    exec: Execution,
) -> Result<()> {
    for (q, report) in reports.iter().enumerate() {
        let truth = brute_force_range_with(database, queries.row(q), report.epsilon, p, exec)?;
        if truth.matches != report.matches {
            return Err(Error::Invariant(format!(
                "query {q} under l_{p}: index returned {} matches, linear scan {}",
                report.matches.len(),
                truth.matches.len()
            )));
        }
    }
    Ok(())
}

fn summarize(mode: ProjectionMode, p: NormOrder, index: &SubspaceIndex, reports: &[QueryReport]) -> Result<BenchRow> {
    let count = reports.len() as f64;
    let schedule = index.schedule();
    let mut mean_sigma = vec![0.0; schedule.depth() + 1];
    for r in reports {
        mean_sigma.iter_mut().zip(&r.survivors).for_each(|(a, &b)| *a += b as f64);
    }
    mean_sigma.iter_mut().for_each(|v| *v /= count);
    let fitted_const = fit_const(reports, schedule).ok();
    let estimated_cost = match fitted_const {
        Some(c) => Some(estimate_cost(schedule, index.len(), c)?),
        None => None,
    };
    Ok(BenchRow {
        mode,
        p,
        epsilon: reports[0].epsilon,
        queries: reports.len(),
        mean_cost_s: reports.iter().map(|r| r.cost_s as f64).sum::<f64>() / count,
        cost_l: reports[0].cost_l,
        mean_ratio: reports.iter().map(|r| r.ratio).sum::<f64>() / count,
        mean_sigma,
        fitted_const,
        estimated_cost,
        max_diversion: index.diagnostics().max_diversion(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchConfig {
        let mut c = BenchConfig::default();
        c.apply_str(
            "model = iid-uniform\ns = 600\nn = 16\nschedule = 16,4,2\nqueries = 25\ncalibration_sample = 40\ntarget_nn = 10",
        )
        .unwrap();
        c
    }

    #[test]
    fn parses_and_prints_round_trip() {
        let mut c = small();
        c.set_pair("norms=1, inf").unwrap();
        c.set_pair("output=out.csv").unwrap();
        let mut back = BenchConfig::default();
        back.apply_str(&c.to_string()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.report_format(), ReportFormat::Csv);
    }

    #[test]
    fn config_errors_are_reported() {
        let mut c = BenchConfig::default();
        assert!(c.apply_str("bogus = 1").unwrap_err().to_string().contains("line 1"));
        assert!(c.set_pair("schedule=64,15").is_err());
        assert!(c.set_pair("window=4").is_err());
        assert!(c.set_pair("modes=").is_err());
        let mut c = small();
        c.set_pair("n=32").unwrap();
        assert!(c.validate().is_err());
        let mut c = small();
        c.set_pair("verify_queries=3").unwrap();
        assert!(c.validate().is_err());
        let mut c = small();
        c.set_pair("data=/x.fvecs").unwrap();
        assert!(c.set_pair("rho=0.5").is_err());
    }

    #[test]
    fn cells_sorted_by_mode_then_norm() {
        let mut c = small();
        c.set_pair("modes=adaptive,orthogonal").unwrap();
        c.set_pair("norms=inf,2,1").unwrap();
        let cells = c.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], (ProjectionMode::Orthogonal, NormOrder::L1));
        assert_eq!(cells[2], (ProjectionMode::Orthogonal, NormOrder::LINF));
        assert_eq!(cells[3], (ProjectionMode::Adaptive, NormOrder::L1));
    }

    #[test]
    fn bench_is_deterministic_and_ordered() {
        let mut c = small();
        c.set_pair("norms=2,1").unwrap();
        let a = run_bench(&c, Execution::Parallel).unwrap();
        let b = run_bench(&c, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert_eq!(a[0].p, NormOrder::L1);
        for row in &a {
            assert_eq!(row.queries, 25);
            assert_eq!(row.cost_l, 575 * 16);
            assert_eq!(row.mean_sigma.len(), 3);
            assert!(row.mean_sigma.windows(2).all(|w| w[0] <= w[1]));
            assert!(row.mean_ratio > 0.0);
        }
        // Epsilon is calibrated per norm and shared by both modes.
        assert_eq!(a[0].epsilon, a[2].epsilon);
        assert_ne!(a[0].epsilon, a[1].epsilon);
    }

    #[test]
    fn fixed_epsilon_is_used_verbatim() {
        let mut c = small();
        c.set_pair("epsilon=0.75").unwrap();
        c.set_pair("modes=orthogonal").unwrap();
        c.set_pair("norms=2").unwrap();
        let rows = run_bench(&c, Execution::default()).unwrap();
        assert_eq!(rows[0].epsilon, 0.75);
    }

    #[test]
    fn build_cells_covers_matrix() {
        let mut c = small();
        c.set_pair("norms=2").unwrap();
        let cells = build_cells(&c, Execution::default()).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].index.diagnostics().max_diversion(), 0.0);
        assert!(cells[1].index.diagnostics().max_diversion() < 0.05);
        assert_eq!(cells[1].index.len(), 600);
    }
}
