//! Per-block rank-1 projections.
//!
//! A level splits its input into `f` contiguous blocks of `m` components and
//! maps each block to one scalar. Two block maps are available:
//!
//! * orthogonal: the block mean scaled by `m^(1/p)`, i.e. the signed l_p
//!   length of the projection onto the m-secting line `(1, …, 1)`;
//! * adaptive: the inner product with a fitted unit direction, divided by
//!   the dual norm `‖z‖_{p*}` of that direction.
//!
//! Both are 1-Lipschitz from `(R^m, l_p)` to `(R, |·|)`, so the concatenated
//! level map is 1-Lipschitz from `(R^n, l_p)` to `(R^f, l_p)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::norms::NormOrder;

/// Which block map a level uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    Orthogonal,
    Adaptive,
}

impl std::fmt::Display for ProjectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProjectionMode::Orthogonal => "orthogonal",
            ProjectionMode::Adaptive => "adaptive",
        })
    }
}

impl std::str::FromStr for ProjectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "orthogonal" | "orth" | "mean" => Ok(ProjectionMode::Orthogonal),
            "adaptive" | "pca" => Ok(ProjectionMode::Adaptive),
            _ => Err(Error::invalid(format!("unknown projection mode {s:?}"))),
        }
    }
}

/// Split of `R^n` into `block_count` contiguous blocks of `block_size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    dim_in: usize,
    block_count: usize,
    block_size: usize,
}

impl BlockPartition {
    pub fn new(dim_in: usize, block_count: usize) -> Result<Self> {
        if dim_in == 0 || block_count == 0 {
            return Err(Error::Schedule("dimensions must be positive".into()));
        }
        if !dim_in.is_multiple_of(block_count) {
            return Err(Error::Schedule(format!(
                "{dim_in} is not divisible by {block_count}"
            )));
        }
        Ok(BlockPartition {
            dim_in,
            block_count,
            block_size: dim_in / block_count,
        })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Iterator over the blocks of `x`.
    pub fn blocks<'a>(&self, x: &'a [f64]) -> std::slice::ChunksExact<'a, f64> {
        x.chunks_exact(self.block_size)
    }
}

/// Scalar map applied to one block.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockProjector {
    Orthogonal,
    Adaptive {
        /// l_2-unit direction, oriented so that its component sum is >= 0.
        direction: Vec<f64>,
        /// `‖direction‖_{p*}`: dividing by it makes the map 1-Lipschitz under l_p.
        lipschitz_scale: f64,
    },
}

impl BlockProjector {
    /// An adaptive projector onto `direction` for norm `p`. The direction must
    /// have unit l_2 length (to 1e-9).
    pub fn adaptive(direction: Vec<f64>, p: NormOrder) -> Result<Self> {
        if direction.is_empty() {
            return Err(Error::Empty("direction"));
        }
        check_finite(&direction, "direction")?;
        let len = NormOrder::L2.norm(&direction);
        if (len - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "direction must have unit l2 norm, got {len}"
            )));
        }
        let lipschitz_scale = p.dual().norm(&direction);
        Ok(BlockProjector::Adaptive {
            direction,
            lipschitz_scale,
        })
    }

    pub fn mode(&self) -> ProjectionMode {
        match self {
            BlockProjector::Orthogonal => ProjectionMode::Orthogonal,
            BlockProjector::Adaptive { .. } => ProjectionMode::Adaptive,
        }
    }

    pub fn direction(&self) -> Option<&[f64]> {
        match self {
            BlockProjector::Orthogonal => None,
            BlockProjector::Adaptive { direction, .. } => Some(direction),
        }
    }
}

/// `m^(1/p) · mean(block)`, the signed l_p length of the block's projection
/// onto the m-secting line. For p = ∞ the factor is 1.
pub fn orthogonal_feature(block: &[f64], p: NormOrder) -> Result<f64> {
    if block.is_empty() {
        return Err(Error::Empty("block"));
    }
    Ok(orthogonal_factor(block.len(), p) * block.iter().sum::<f64>())
}

/// Multiplier turning a block sum into the orthogonal feature: `m^(1/p) / m`.
fn orthogonal_factor(m: usize, p: NormOrder) -> f64 {
    let m = m as f64;
    m.powf(p.reciprocal()) / m
}

/// `⟨direction, block⟩ / ‖direction‖_{p*}`.
pub fn adaptive_feature(block: &[f64], proj: &BlockProjector) -> Result<f64> {
    match proj {
        BlockProjector::Orthogonal => Err(Error::invalid(
            "adaptive feature requested from an orthogonal projector",
        )),
        BlockProjector::Adaptive {
            direction,
            lipschitz_scale,
        } => {
            check_dim(direction.len(), block.len())?;
            Ok(dot(direction, block) / lipschitz_scale)
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deviation of an adaptive direction from the m-secting line:
/// `√m − ‖z zᵀ o‖_2 = √m − |⟨z, o⟩|` with `o = (1, …, 1)`.
pub fn diversion(proj: &BlockProjector, m: usize) -> Result<f64> {
    match proj {
        BlockProjector::Orthogonal => Err(Error::invalid(
            "diversion is only defined for adaptive projectors (orthogonal is 0)",
        )),
        BlockProjector::Adaptive { direction, .. } => {
            check_dim(m, direction.len())?;
            let along: f64 = direction.iter().sum();
            Ok(((m as f64).sqrt() - along.abs()).max(0.0))
        }
    }
}

/// Induced l_p operator norm `m^((p−2)/p)` of the rank-1 map `Q = qᵀq`
/// built from the l_p-normalised m-secting direction. Exceeds 1 for p > 2,
/// which is why `Q` is never used as a filter.
pub fn q_mapping_norm(m: usize, p: NormOrder) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m must be positive"));
    }
    match p {
        NormOrder::Infinity => Err(Error::invalid("Q mapping norm is undefined for p = inf")),
        NormOrder::Finite(e) => Ok((m as f64).powf((e - 2.0) / e)),
    }
}

/// Per-block diversion values of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct DiversionReport {
    pub per_block: Vec<f64>,
    pub block_size: usize,
}

impl DiversionReport {
    pub fn max(&self) -> f64 {
        self.per_block.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.per_block.is_empty() {
            0.0
        } else {
            self.per_block.iter().sum::<f64>() / self.per_block.len() as f64
        }
    }
}

/// One map `R^{dim_in} → R^{block_count}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionLevel {
    partition: BlockPartition,
    projectors: Vec<BlockProjector>,
    norm: NormOrder,
    orth_factor: f64,
}

impl ProjectionLevel {
    pub fn orthogonal(partition: BlockPartition, norm: NormOrder) -> Self {
        ProjectionLevel {
            partition,
            projectors: vec![BlockProjector::Orthogonal; partition.block_count()],
            norm,
            orth_factor: orthogonal_factor(partition.block_size(), norm),
        }
    }

    /// Adaptive level from one unit direction per block.
    pub fn adaptive(partition: BlockPartition, directions: Vec<Vec<f64>>, norm: NormOrder) -> Result<Self> {
        check_dim(partition.block_count(), directions.len())?;
        let projectors = directions
            .into_iter()
            .map(|d| {
                check_dim(partition.block_size(), d.len())?;
                BlockProjector::adaptive(d, norm)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProjectionLevel {
            partition,
            projectors,
            norm,
            orth_factor: orthogonal_factor(partition.block_size(), norm),
        })
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn projectors(&self) -> &[BlockProjector] {
        &self.projectors
    }

    pub fn norm(&self) -> NormOrder {
        self.norm
    }

    pub fn mode(&self) -> ProjectionMode {
        self.projectors[0].mode()
    }

    pub fn dim_in(&self) -> usize {
        self.partition.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.partition.block_count()
    }

    /// Writes the level image of `x` into `out`. Lengths are not checked
    /// beyond debug assertions.
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim_in());
        debug_assert_eq!(out.len(), self.dim_out());
        let blocks = self.partition.blocks(x);
        for ((o, block), proj) in out.iter_mut().zip(blocks).zip(&self.projectors) {
            *o = match proj {
                BlockProjector::Orthogonal => self.orth_factor * block.iter().sum::<f64>(),
                BlockProjector::Adaptive {
                    direction,
                    lipschitz_scale,
                } => dot(direction, block) / lipschitz_scale,
            };
        }
    }

    /// Diversion of every block; all zeros for an orthogonal level.
    pub fn diversion_report(&self) -> DiversionReport {
        let m = self.partition.block_size();
        let per_block = self
            .projectors
            .iter()
            .map(|p| match p {
                BlockProjector::Orthogonal => 0.0,
                adaptive => diversion(adaptive, m).unwrap_or(0.0),
            })
            .collect();
        DiversionReport {
            per_block,
            block_size: m,
        }
    }
}

/// Level image of `x`.
pub fn project_level(x: &[f64], level: &ProjectionLevel) -> Result<Vec<f64>> {
    check_dim(level.dim_in(), x.len())?;
    let mut out = vec![0.0; level.dim_out()];
    level.project_into(x, &mut out);
    Ok(out)
}
