//! Streaming block covariance and dominant eigenvector extraction.

use crate::error::{check_dim, check_finite, Error, Result};

/// Dense symmetric `m × m` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Builds from row-major entries. Symmetry is checked by
    /// [`first_principal_component`], not here.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(dim * dim, data.len())?;
        check_finite(&data, "matrix")?;
        Ok(SymmetricMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ·C·v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    fn square(&self) -> SymmetricMatrix {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|k| self.get(i, k) * self.get(k, j)).sum();
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        SymmetricMatrix { dim: n, data: out }
    }

    fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Single-pass mean and co-moment accumulator for blocks of one size.
///
/// Uses the Welford update; two accumulators combine with [`merge`](Self::merge)
/// so that sample shards can be processed independently.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceAccumulator {
    count: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        CovarianceAccumulator {
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn accumulate(&mut self, block: &[f64]) -> Result<()> {
        check_dim(self.dim(), block.len())?;
        self.push(block);
        Ok(())
    }

    /// Unchecked variant of [`accumulate`](Self::accumulate) for hot loops.
    pub(crate) fn push(&mut self, block: &[f64]) {
        let m = self.dim();
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        // delta before the mean update, delta2 after; comoment += delta ⊗ delta2
        let mut stack = [0.0f64; 64];
        let mut heap = Vec::new();
        let delta: &mut [f64] = if m <= stack.len() {
            &mut stack[..m]
        } else {
            heap.resize(m, 0.0);
            &mut heap
        };
        for ((d, &b), mu) in delta.iter_mut().zip(block).zip(self.mean.iter_mut()) {
            *d = b - *mu;
            *mu += *d * inv;
        }
        for ((&b, &mu), row) in block.iter().zip(&self.mean).zip(self.comoment.chunks_exact_mut(m)) {
            let d2 = b - mu;
            for (c, &d) in row.iter_mut().zip(delta.iter()) {
                *c += d * d2;
            }
        }
    }

    /// Combines the statistics of two disjoint sample sets.
    pub fn merge(&mut self, other: &CovarianceAccumulator) -> Result<()> {
        check_dim(self.dim(), other.dim())?;
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let m = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let w = na * nb / n;
        for ((row, other_row), &di) in self
            .comoment
            .chunks_exact_mut(m)
            .zip(other.comoment.chunks_exact(m))
            .zip(&delta)
        {
            for ((c, &o), &dj) in row.iter_mut().zip(other_row).zip(&delta) {
                *c += o + w * di * dj;
            }
        }
        for (mu, &d) in self.mean.iter_mut().zip(&delta) {
            *mu += d * nb / n;
        }
        self.count += other.count;
        Ok(())
    }

    /// Sample covariance `comoment / max(1, count − 1)`.
    pub fn finalize(&self) -> Result<SymmetricMatrix> {
        if self.count == 0 {
            return Err(Error::Empty("covariance accumulator"));
        }
        let divisor = (self.count.saturating_sub(1)).max(1) as f64;
        Ok(self.symmetrized(|i, j| self.comoment[i * self.dim() + j] / divisor))
    }

    /// Second moment about the origin, `E[b·bᵀ] = comoment / count + mean·meanᵀ`.
    ///
    /// Block features are projections through the origin, so the direction
    /// that keeps the most of `‖b‖²` on average is the dominant eigenvector
    /// of this matrix rather than of the centred covariance.
    pub fn second_moment(&self) -> Result<SymmetricMatrix> {
        if self.count == 0 {
            return Err(Error::Empty("covariance accumulator"));
        }
        let n = self.count as f64;
        Ok(self.symmetrized(|i, j| {
            self.comoment[i * self.dim() + j] / n + self.mean[i] * self.mean[j]
        }))
    }

    fn symmetrized(&self, entry: impl Fn(usize, usize) -> f64) -> SymmetricMatrix {
        let m = self.dim();
        let mut out = SymmetricMatrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                let v = 0.5 * (entry(i, j) + entry(j, i));
                out.data[i * m + j] = v;
                out.data[j * m + i] = v;
            }
        }
        out
    }
}

/// Dominant eigenpair of a symmetric PSD matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalComponent {
    pub direction: Vec<f64>,
    pub eigenvalue: f64,
    /// False when the iteration cap was hit before the direction settled.
    pub converged: bool,
}

const MAX_SQUARINGS: usize = 64;
const DIRECTION_TOL: f64 = 1e-10;

/// Dominant eigenvector by power iteration on `C^(2^k)`.
///
/// Each squaring doubles the power, so the component along the second
/// eigenvector shrinks like `(λ₂/λ₁)^(2^k)`; relative eigengaps down to
/// ~1e-15 resolve within the 64-squaring cap. The start vector is the
/// normalised m-secting direction. The result is polished with plain power
/// steps and the eigenvalue is the Rayleigh quotient. The direction is
/// oriented so that its component sum is >= 0 (first nonzero component
/// positive on a tie). A zero matrix yields the m-secting direction with
/// eigenvalue 0.
pub fn first_principal_component(c: &SymmetricMatrix) -> Result<PrincipalComponent> {
    let m = c.dim();
    if m == 0 {
        return Err(Error::Empty("matrix"));
    }
    let scale = c.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if c.max_asymmetry() > 1e-9 * scale.max(1.0) {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    let secting = vec![1.0 / (m as f64).sqrt(); m];
    let trace = c.trace();
    if scale == 0.0 || trace <= 0.0 {
        return Ok(PrincipalComponent {
            direction: secting,
            eigenvalue: 0.0,
            converged: true,
        });
    }

    let mut power = c.clone();
    power.scale(1.0 / trace);
    let mut direction = dominant_column(&power, &secting);
    let mut converged = false;
    for _ in 0..MAX_SQUARINGS {
        power = power.square();
        let t = power.trace();
        if !(t > 0.0 && t.is_finite()) {
            break;
        }
        power.scale(1.0 / t);
        let next = dominant_column(&power, &secting);
        let diff = diff_norm(&next, &direction);
        direction = next;
        if diff < DIRECTION_TOL {
            converged = true;
            break;
        }
    }

    for _ in 0..3 {
        let next = c.mul_vec(&direction);
        let len = l2(&next);
        if len == 0.0 {
            break;
        }
        direction = next.into_iter().map(|v| v / len).collect();
    }
    orient(&mut direction);
    let eigenvalue = c.quadratic_form(&direction).max(0.0);
    Ok(PrincipalComponent {
        direction,
        eigenvalue,
        converged,
    })
}

/// `M·start` normalised; falls back to the longest column of `M` when the
/// start vector is (nearly) orthogonal to the dominant eigenspace.
fn dominant_column(power: &SymmetricMatrix, start: &[f64]) -> Vec<f64> {
    let m = power.dim();
    let mut v = power.mul_vec(start);
    let mut len = l2(&v);
    let col_max = (0..m)
        .map(|j| (0..m).map(|i| power.get(i, j).powi(2)).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    if len <= 1e-6 * col_max {
        let j = (0..m)
            .max_by(|&a, &b| power.get(a, a).total_cmp(&power.get(b, b)))
            .unwrap_or(0);
        v = (0..m).map(|i| power.get(i, j)).collect();
        len = l2(&v);
    }
    let mut out: Vec<f64> = v.into_iter().map(|x| x / len).collect();
    orient(&mut out);
    out
}

fn orient(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    let flip = if sum.abs() > 1e-12 {
        sum < 0.0
    } else {
        v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
