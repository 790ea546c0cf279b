//! l_p norms and distances.
//!
//! Every filter level of the index and the brute-force oracle measure
//! distances through the kernels in this module, so the two paths agree
//! bit for bit on the final `d < epsilon` decision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// Exponent of an l_p norm. `Infinity` is the Chebyshev (max) norm and is
/// never approximated by a large finite exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

impl NormOrder {
    pub const L1: NormOrder = NormOrder::Finite(1.0);
    pub const L2: NormOrder = NormOrder::Finite(2.0);
    pub const L4: NormOrder = NormOrder::Finite(4.0);
    pub const LINF: NormOrder = NormOrder::Infinity;

    /// A finite exponent; values below 1 do not define a norm.
    pub fn finite(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(NormOrder::Finite(p))
        } else if p == f64::INFINITY {
            Ok(NormOrder::Infinity)
        } else {
            Err(Error::invalid(format!("norm exponent must be >= 1, got {p}")))
        }
    }

    /// Hölder conjugate: 1/p + 1/p* = 1.
    pub fn dual(self) -> NormOrder {
        match self {
            NormOrder::Infinity => NormOrder::L1,
            NormOrder::Finite(1.0) => NormOrder::Infinity,
            NormOrder::Finite(p) => NormOrder::Finite(p / (p - 1.0)),
        }
    }

    /// 1/p, with 1/∞ = 0.
    pub fn reciprocal(self) -> f64 {
        match self {
            NormOrder::Finite(p) => 1.0 / p,
            NormOrder::Infinity => 0.0,
        }
    }

    /// The exponent as a float, `f64::INFINITY` for the max norm.
    pub fn as_f64(self) -> f64 {
        match self {
            NormOrder::Finite(p) => p,
            NormOrder::Infinity => f64::INFINITY,
        }
    }

    /// `t^p` for finite p, `t` itself for ∞. Thresholds are compared against
    /// raw accumulated sums in this space.
    #[inline]
    pub(crate) fn raise(self, t: f64) -> f64 {
        match self {
            NormOrder::Infinity => t,
            NormOrder::Finite(p) => pow_abs(t, p),
        }
    }

    /// Inverse of [`raise`](Self::raise) on accumulated sums.
    #[inline]
    pub(crate) fn root(self, acc: f64) -> f64 {
        match self {
            NormOrder::Infinity => acc,
            NormOrder::Finite(1.0) => acc,
            NormOrder::Finite(2.0) => acc.sqrt(),
            NormOrder::Finite(p) => acc.powf(1.0 / p),
        }
    }

    /// Norm of a slice without input validation.
    pub fn norm(self, v: &[f64]) -> f64 {
        norm_of(v.iter().copied(), self)
    }

    /// Distance between two equal-length slices without input validation.
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        norm_of(x.iter().zip(y).map(|(a, b)| a - b), self)
    }

    /// Returns `true` as soon as the accumulated distance reaches `bound`
    /// (given in raised form, see [`raise`](Self::raise)).
    #[inline]
    pub(crate) fn distance_reaches(self, x: &[f64], y: &[f64], raised_bound: f64) -> bool {
        debug_assert_eq!(x.len(), y.len());
        match self {
            NormOrder::Infinity => x.iter().zip(y).any(|(a, b)| (a - b).abs() >= raised_bound),
            NormOrder::Finite(p) => {
                let mut acc = 0.0;
                // Checking every 8 components keeps the inner loop vectorizable.
                for (xc, yc) in x.chunks(8).zip(y.chunks(8)) {
                    acc += xc
                        .iter()
                        .zip(yc)
                        .map(|(a, b)| pow_abs(a - b, p))
                        .sum::<f64>();
                    if acc >= raised_bound {
                        return true;
                    }
                }
                false
            }
        }
    }
}

impl Default for NormOrder {
    fn default() -> Self {
        NormOrder::L2
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Finite(p) => write!(f, "{p}"),
            NormOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches(['l', 'L']).trim_start_matches('_');
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" | "max" => Ok(NormOrder::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::invalid(format!("cannot parse norm order {s:?}")))?;
                NormOrder::finite(p)
            }
        }
    }
}

impl From<NormOrder> for String {
    fn from(p: NormOrder) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for NormOrder {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[inline]
fn pow_abs(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x.abs()
    } else if p == 2.0 {
        x * x
    } else if p == 4.0 {
        let s = x * x;
        s * s
    } else {
        x.abs().powf(p)
    }
}

fn norm_of<I>(values: I, p: NormOrder) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    match p {
        NormOrder::Infinity => values.fold(0.0, |m, v| m.max(v.abs())),
        NormOrder::Finite(1.0) => values.map(f64::abs).sum(),
        NormOrder::Finite(e) => {
            let acc: f64 = values.clone().map(|v| pow_abs(v, e)).sum();
            if acc.is_finite() && acc >= 1e-280 {
                return p.root(acc);
            }
            // Overflow or underflow of the raw power sum: factor out the max.
            let max = values.clone().fold(0.0, |m: f64, v| m.max(v.abs()));
            if max == 0.0 {
                return 0.0;
            }
            let scaled: f64 = values.map(|v| pow_abs(v / max, e)).sum();
            max * p.root(scaled)
        }
    }
}

/// l_p norm of `v`. Rejects empty or non-finite input.
pub fn lp_norm(v: &[f64], p: NormOrder) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Empty("vector"));
    }
    check_finite(v, "vector")?;
    Ok(p.norm(v))
}

/// l_p distance between `x` and `y`.
pub fn lp_distance(x: &[f64], y: &[f64], p: NormOrder) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    if x.is_empty() {
        return Err(Error::Empty("vector"));
    }
    check_finite(x, "vector")?;
    check_finite(y, "vector")?;
    Ok(p.distance(x, y))
}

/// Checks the chained equivalence inequalities between the q- and p-norms
/// of an m-dimensional vector (q < p):
///
/// `‖v‖_p ≤ ‖v‖_q ≤ m^(1/q − 1/p)·‖v‖_p` and
/// `m^(1/p − 1/q)·‖v‖_q ≤ ‖v‖_p ≤ ‖v‖_q`,
///
/// each within a relative tolerance of 1e-9.
pub fn check_norm_equivalence(v: &[f64], q: NormOrder, p: NormOrder) -> Result<bool> {
    let q_exp = match q {
        NormOrder::Finite(e) => e,
        NormOrder::Infinity => return Err(Error::invalid("q must be finite")),
    };
    if q_exp >= p.as_f64() {
        return Err(Error::invalid(format!("need q < p, got q={q}, p={p}")));
    }
    let nq = lp_norm(v, q)?;
    let np = lp_norm(v, p)?;
    let m = v.len() as f64;
    let tol = 1e-9;
    let le = |a: f64, b: f64| a <= b + tol * a.abs().max(b.abs());

    let upper = m.powf(q.reciprocal() - p.reciprocal());
    let lower = m.powf(p.reciprocal() - q.reciprocal());
    Ok(le(np, nq) && le(nq, upper * np) && le(lower * nq, np))
}
