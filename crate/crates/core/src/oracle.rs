//! Linear-scan ground truth and epsilon calibration.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::DataSet;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::norms::NormOrder;
use crate::par::{map_chunks, map_each, Execution};
use crate::tree::Match;

/// Result of a linear scan.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceResult {
    /// In database order.
    pub matches: Vec<Match>,
    /// `s · n`.
    pub cost_l: u64,
}

/// Every `x` in `data` with `d(x, y) < epsilon`.
pub fn brute_force_range(data: &DataSet, y: &[f64], epsilon: f64, p: NormOrder) -> Result<BruteForceResult> {
    brute_force_range_with(data, y, epsilon, p, Execution::default())
}

pub fn brute_force_range_with(
    data: &DataSet,
    y: &[f64],
    epsilon: f64,
    p: NormOrder,
    exec: Execution,
) -> Result<BruteForceResult> {
    check_dim(data.dim(), y.len())?;
    check_finite(y, "query")?;
    let parts = map_chunks(exec, data.len(), 1024, |rows| {
        rows.filter_map(|r| {
            let distance = p.distance(data.row(r), y);
            (distance < epsilon).then(|| Match {
                id: data.id(r),
                distance,
            })
        })
        .collect::<Vec<_>>()
    });
    Ok(BruteForceResult {
        matches: parts.concat(),
        cost_l: (data.len() * data.dim()) as u64,
    })
}

/// Protocol for choosing epsilon from the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationSpec {
    /// Number of held-out query points.
    pub sample_size: usize,
    /// Rank of the neighbour whose distance is recorded per query.
    pub target_nn: usize,
    pub seed: u64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec {
            sample_size: 400,
            target_nn: 52,
            seed: 0,
        }
    }
}

/// Median over a seeded sample of the distance from each sample point to its
/// `target_nn`-th nearest neighbour among all other points.
///
/// Each sample point is held out of its own scan (leave-one-out), so a query
/// never counts itself and the neighbour rank refers to the full data
/// density. Deterministic for a fixed seed.
pub fn calibrate_epsilon(data: &DataSet, spec: &CalibrationSpec, p: NormOrder) -> Result<f64> {
    let s = data.len();
    if spec.target_nn == 0 || spec.sample_size == 0 {
        return Err(Error::invalid("sample size and target_nn must be positive"));
    }
    if s <= spec.target_nn {
        return Err(Error::invalid(format!(
            "dataset of {s} points cannot supply {} neighbours",
            spec.target_nn
        )));
    }
    if spec.sample_size > s {
        return Err(Error::invalid(format!(
            "sample of {} exceeds the {s} available points",
            spec.sample_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let held = sample(&mut rng, s, spec.sample_size).into_vec();

    let mut kth: Vec<f64> = map_each(Execution::default(), held.len(), |q| {
        let (qi, y) = (held[q], data.row(held[q]));
        let mut d: Vec<f64> = data
            .rows()
            .enumerate()
            .filter(|&(i, _)| i != qi)
            .map(|(_, x)| p.distance(x, y))
            .collect();
        let (_, v, _) = d.select_nth_unstable_by(spec.target_nn - 1, f64::total_cmp);
        *v
    });
    Ok(median(&mut kth))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_inequality_boundary() {
        let data = DataSet::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let r = brute_force_range(&data, &[0.0, 0.0], 5.0, NormOrder::L2).unwrap();
        assert_eq!(r.matches, vec![Match { id: 0, distance: 0.0 }]);
        assert_eq!(r.cost_l, 4);
        let r = brute_force_range(&data, &[0.0, 0.0], 5.0001, NormOrder::L2).unwrap();
        assert_eq!(r.matches.len(), 2);
        assert!(brute_force_range(&data, &[0.0], 1.0, NormOrder::L2).is_err());
    }

    fn line(n: usize) -> DataSet {
        DataSet::new(1, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn unit_spacing_nearest_neighbour() {
        let spec = CalibrationSpec { sample_size: 1, target_nn: 1, seed: 4 };
        assert_eq!(calibrate_epsilon(&line(100), &spec, NormOrder::L1).unwrap(), 1.0);
    }

    #[test]
    fn farthest_neighbour_rank() {
        let data = line(100);
        for seed in 0..5 {
            let spec = CalibrationSpec { sample_size: 1, target_nn: 99, seed };
            let eps = calibrate_epsilon(&data, &spec, NormOrder::L1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = sample(&mut rng, 100, 1).index(0) as f64;
            assert_eq!(eps, q.max(99.0 - q));
        }
    }

    #[test]
    fn calibration_errors() {
        let data = line(10);
        let spec = |sample_size, target_nn| CalibrationSpec { sample_size, target_nn, seed: 0 };
        assert!(calibrate_epsilon(&data, &spec(1, 10), NormOrder::L2).is_err());
        assert!(calibrate_epsilon(&data, &spec(11, 3), NormOrder::L2).is_err());
        assert!(calibrate_epsilon(&data, &spec(10, 9), NormOrder::L2).is_ok());
        assert!(calibrate_epsilon(&data, &spec(0, 1), NormOrder::L2).is_err());
        assert!(calibrate_epsilon(&data, &spec(2, 0), NormOrder::L2).is_err());
    }

    #[test]
    fn calibration_is_monotone_in_rank() {
        let data = crate::dataset::generate(&crate::dataset::SyntheticSpec {
            s: 500,
            n: 8,
            model: crate::dataset::SyntheticModel::IidUniform,
            seed: 2,
        })
        .unwrap();
        let mut last = 0.0;
        for k in [1, 2, 5, 10, 30, 100] {
            let eps = calibrate_epsilon(&data, &CalibrationSpec { sample_size: 40, target_nn: k, seed: 1 }, NormOrder::L2).unwrap();
            assert!(eps >= last);
            last = eps;
        }
    }

    #[test]
    fn oracle_symmetry() {
        let data = crate::dataset::generate(&crate::dataset::SyntheticSpec {
            s: 200,
            n: 6,
            model: crate::dataset::SyntheticModel::IidUniform,
            seed: 5,
        })
        .unwrap();
        for p in [NormOrder::L1, NormOrder::L2, NormOrder::LINF] {
            let eps = 0.6;
            for a in 0..20 {
                let hits = brute_force_range(&data, data.row(a), eps, p).unwrap();
                for m in hits.matches {
                    let back = brute_force_range(&data, data.row(m.id as usize), eps, p).unwrap();
                    assert!(back.matches.iter().any(|b| b.id == a as u64));
                }
            }
        }
    }
}
