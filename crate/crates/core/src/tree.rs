//! The subspace index: a chain of projection levels over one dataset and the
//! cascade range query that filters coarse-to-fine before verifying matches
//! in the original space.

use std::fmt;
use std::str::FromStr;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::dataset::DataSet;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::norms::NormOrder;
use crate::par::{map_chunks, Execution};
use crate::pca::{first_principal_component, CovarianceAccumulator};
use crate::projection::{BlockPartition, DiversionReport, ProjectionLevel, ProjectionMode};

/// Strictly decreasing dimensions `[dim(U_0), …, dim(U_t)]`, each dividing
/// its predecessor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DimensionSchedule {
    dims: Vec<usize>,
}

impl DimensionSchedule {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Schedule(format!(
                "need at least two dimensions, got {dims:?}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::Schedule("dimensions must be positive".into()));
        }
        for pair in dims.windows(2) {
            let (hi, lo) = (pair[0], pair[1]);
            if lo >= hi {
                return Err(Error::Schedule(format!(
                    "dimensions must strictly decrease ({hi} -> {lo})"
                )));
            }
            if hi % lo != 0 {
                return Err(Error::Schedule(format!("{hi} is not divisible by {lo}")));
            }
            let ratio = hi / lo;
            if !(2..=16).contains(&ratio) {
                warn!("schedule ratio {hi}/{lo} = {ratio} lies outside [2, 16]");
            }
        }
        Ok(DimensionSchedule { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `dim(U_i)`.
    pub fn dim(&self, level: usize) -> usize {
        self.dims[level]
    }

    /// Number of projection levels `t`.
    pub fn depth(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn coarsest_dim(&self) -> usize {
        self.dims[self.depth()]
    }
}

impl TryFrom<Vec<usize>> for DimensionSchedule {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        DimensionSchedule::new(dims)
    }
}

impl From<DimensionSchedule> for Vec<usize> {
    fn from(s: DimensionSchedule) -> Self {
        s.dims
    }
}

impl FromStr for DimensionSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Schedule(format!("cannot parse {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        DimensionSchedule::new(dims)
    }
}

impl fmt::Display for DimensionSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// `cost_s = Σ_{i=1..t} σ_i·dim(U_{i−1}) + s·dim(U_t)`.
///
/// `survivors[i]` is σ_i for `i ∈ 0..=t`; σ_0 does not enter the sum.
pub fn cascade_cost(schedule: &DimensionSchedule, survivors: &[usize], s: usize) -> u64 {
    let t = schedule.depth();
    let filtered: u64 = (1..=t)
        .map(|i| survivors[i] as u64 * schedule.dim(i - 1) as u64)
        .sum();
    filtered + s as u64 * schedule.coarsest_dim() as u64
}

/// One database item within range of the query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub id: u64,
    pub distance: f64,
}

/// Outcome of one range query together with its cost counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub epsilon: f64,
    /// In database order.
    pub matches: Vec<Match>,
    /// σ_0 … σ_t: items passing the filter at each level (σ_0 = matches).
    pub survivors: Vec<usize>,
    /// Cascade cost recomputed from `survivors`.
    pub cost_s: u64,
    /// Components touched by the query as counted during execution; every
    /// distance evaluation at level k is charged dim(U_k) in full even when
    /// it exits early.
    pub operations: u64,
    /// Linear scan cost `s·dim(U_0)`.
    pub cost_l: u64,
    /// `cost_l / cost_s`.
    pub ratio: f64,
}

/// Per-level facts gathered while building.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuildDiagnostics {
    /// One entry per projection level (all zeros for orthogonal levels).
    pub diversion: Vec<DiversionReport>,
    /// Blocks whose eigen-solver hit its iteration cap.
    pub unconverged_blocks: usize,
}

impl BuildDiagnostics {
    pub fn max_diversion(&self) -> f64 {
        self.diversion.iter().map(DiversionReport::max).fold(0.0, f64::max)
    }
}

/// Relative slack on pruning thresholds covering f64 rounding in the
/// projected features.
const F64_FEATURE_TOLERANCE: f64 = 1e-10;
/// Additional slack once features were narrowed to f32 (unit roundoff 2^-24).
pub(crate) const F32_FEATURE_TOLERANCE: f64 = 5.960_464_477_539_063e-8 + F64_FEATURE_TOLERANCE;

/// Immutable index over one dataset.
#[derive(Clone, Debug)]
pub struct SubspaceIndex {
    pub(crate) schedule: DimensionSchedule,
    pub(crate) norm: NormOrder,
    pub(crate) mode: ProjectionMode,
    pub(crate) levels: Vec<ProjectionLevel>,
    /// `features[i - 1]` holds the s × dim(U_i) matrix of level i, row-major.
    pub(crate) features: Vec<Vec<f64>>,
    pub(crate) base: DataSet,
    pub(crate) feature_tolerance: f64,
    pub(crate) diagnostics: BuildDiagnostics,
}

const BUILD_CHUNK: usize = 256;
const QUERY_CHUNK: usize = 1024;

impl SubspaceIndex {
    pub fn build(
        data: &DataSet,
        schedule: &DimensionSchedule,
        mode: ProjectionMode,
        norm: NormOrder,
    ) -> Result<Self> {
        Self::build_with(data, schedule, mode, norm, Execution::default())
    }

    pub fn build_with(
        data: &DataSet,
        schedule: &DimensionSchedule,
        mode: ProjectionMode,
        norm: NormOrder,
        exec: Execution,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        check_dim(schedule.input_dim(), data.dim())?;
        let s = data.len();
        let mut levels = Vec::with_capacity(schedule.depth());
        let mut features: Vec<Vec<f64>> = Vec::with_capacity(schedule.depth());
        let mut diagnostics = BuildDiagnostics::default();

        for i in 1..=schedule.depth() {
            let (dim_in, dim_out) = (schedule.dim(i - 1), schedule.dim(i));
            let prev: &[f64] = match features.last() {
                Some(f) => f,
                None => data.as_slice(),
            };
            let partition = BlockPartition::new(dim_in, dim_out)?;
            let level = match mode {
                ProjectionMode::Orthogonal => ProjectionLevel::orthogonal(partition, norm),
                ProjectionMode::Adaptive => {
                    let (level, unconverged) = fit_adaptive_level(prev, s, partition, norm, exec)?;
                    diagnostics.unconverged_blocks += unconverged;
                    level
                }
            };
            let report = level.diversion_report();
            debug!(
                "level {i}: {dim_in} -> {dim_out}, diversion max {:.3e} mean {:.3e}",
                report.max(),
                report.mean()
            );
            diagnostics.diversion.push(report);

            let parts = map_chunks(exec, s, BUILD_CHUNK, |rows| {
                let mut out = vec![0.0; rows.len() * dim_out];
                for (r, o) in rows.zip(out.chunks_exact_mut(dim_out)) {
                    level.project_into(&prev[r * dim_in..(r + 1) * dim_in], o);
                }
                out
            });
            features.push(parts.concat());
            levels.push(level);
        }
        if diagnostics.unconverged_blocks > 0 {
            warn!(
                "{} block eigenvector(s) did not converge",
                diagnostics.unconverged_blocks
            );
        }
        info!(
            "built {mode} index over {s} items, schedule {schedule}, p = {norm}, max diversion {:.3e}",
            diagnostics.max_diversion()
        );
        Ok(SubspaceIndex {
            schedule: schedule.clone(),
            norm,
            mode,
            levels,
            features,
            base: data.clone(),
            feature_tolerance: F64_FEATURE_TOLERANCE,
            diagnostics,
        })
    }

    pub fn schedule(&self) -> &DimensionSchedule {
        &self.schedule
    }

    pub fn norm(&self) -> NormOrder {
        self.norm
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn levels(&self) -> &[ProjectionLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn data(&self) -> &DataSet {
        &self.base
    }

    pub fn diagnostics(&self) -> &BuildDiagnostics {
        &self.diagnostics
    }

    /// Stored level-`level` features of item `row` (`level ≥ 1`).
    pub fn features(&self, level: usize, row: usize) -> &[f64] {
        let d = self.schedule.dim(level);
        &self.features[level - 1][row * d..(row + 1) * d]
    }

    /// Images of `y` at levels 1..=t.
    pub fn project_query(&self, y: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim(self.schedule.input_dim(), y.len())?;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.levels.len());
        for level in &self.levels {
            let prev = out.last().map(Vec::as_slice).unwrap_or(y);
            let mut next = vec![0.0; level.dim_out()];
            level.project_into(prev, &mut next);
            out.push(next);
        }
        Ok(out)
    }

    /// All items with `d(x, y) < epsilon`.
    pub fn range_query(&self, y: &[f64], epsilon: f64) -> Result<QueryReport> {
        self.range_query_with(y, epsilon, Execution::default())
    }

    pub fn range_query_with(&self, y: &[f64], epsilon: f64, exec: Execution) -> Result<QueryReport> {
        check_dim(self.schedule.input_dim(), y.len())?;
        check_finite(y, "query")?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        let p = self.norm;
        let t = self.schedule.depth();
        let s = self.len();
        let projected = self.project_query(y)?;

        // Prune when the level distance reaches epsilon plus rounding slack.
        let raised: Vec<f64> = projected
            .iter()
            .map(|q| {
                let slack = self.feature_tolerance * (epsilon + p.norm(q));
                p.raise(epsilon + slack)
            })
            .collect();
        // Base-level early exit only fires well clear of the boundary, so
        // the final decision always comes from `NormOrder::distance`.
        let base_abort = p.raise(epsilon) * (1.0 + 1e-6);
        let dims = self.schedule.dims();

        let partials = map_chunks(exec, s, QUERY_CHUNK, |rows| {
            let mut survivors = vec![0usize; t + 1];
            let mut operations = 0u64;
            let mut matches = Vec::new();
            'items: for r in rows {
                for k in (1..=t).rev() {
                    operations += dims[k] as u64;
                    let d = dims[k];
                    let stored = &self.features[k - 1][r * d..(r + 1) * d];
                    if p.distance_reaches(stored, &projected[k - 1], raised[k - 1]) {
                        continue 'items;
                    }
                    survivors[k] += 1;
                }
                operations += dims[0] as u64;
                let x = self.base.row(r);
                if p.distance_reaches(x, y, base_abort) {
                    continue;
                }
                let distance = p.distance(x, y);
                if distance < epsilon {
                    survivors[0] += 1;
                    matches.push(Match {
                        id: self.base.id(r),
                        distance,
                    });
                }
            }
            (survivors, operations, matches)
        });

        let mut survivors = vec![0usize; t + 1];
        let mut operations = 0u64;
        let mut matches = Vec::new();
        for (sv, ops, m) in partials {
            survivors.iter_mut().zip(&sv).for_each(|(a, b)| *a += b);
            operations += ops;
            matches.extend(m);
        }
        let cost_s = cascade_cost(&self.schedule, &survivors, s);
        let cost_l = s as u64 * dims[0] as u64;
        Ok(QueryReport {
            epsilon,
            matches,
            survivors,
            cost_s,
            operations,
            cost_l,
            ratio: cost_l as f64 / cost_s as f64,
        })
    }
}

/// Fits one unit direction per block from the second moments of the
/// previous level's rows.
fn fit_adaptive_level(
    rows: &[f64],
    s: usize,
    partition: BlockPartition,
    norm: NormOrder,
    exec: Execution,
) -> Result<(ProjectionLevel, usize)> {
    let (dim_in, f, m) = (partition.dim_in(), partition.block_count(), partition.block_size());
    let shards = map_chunks(exec, s, BUILD_CHUNK * 4, |range| {
        let mut accs: Vec<CovarianceAccumulator> = (0..f).map(|_| CovarianceAccumulator::new(m)).collect();
        for r in range {
            let row = &rows[r * dim_in..(r + 1) * dim_in];
            for (acc, block) in accs.iter_mut().zip(row.chunks_exact(m)) {
                acc.push(block);
            }
        }
        accs
    });
    let mut merged: Vec<CovarianceAccumulator> = (0..f).map(|_| CovarianceAccumulator::new(m)).collect();
    for shard in &shards {
        for (acc, part) in merged.iter_mut().zip(shard) {
            acc.merge(part)?;
        }
    }
    let mut unconverged = 0;
    let mut directions = Vec::with_capacity(f);
    for acc in &merged {
        let pc = first_principal_component(&acc.second_moment()?)?;
        if !pc.converged {
            unconverged += 1;
        }
        directions.push(pc.direction);
    }
    Ok((ProjectionLevel::adaptive(partition, directions, norm)?, unconverged))
}
