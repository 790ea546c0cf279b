//! Analytic cost model of the cascade.
//!
//! Assumes survivor counts fall off reciprocally with the dimension of the
//! next level, `const · σ_i = 1 / dim(U_{i+1})`, which turns the cascade
//! cost into a sum of dimension ratios plus the full coarse scan.

use crate::error::{Error, Result};
use crate::tree::{DimensionSchedule, QueryReport};

/// `(1/const) · Σ_{i=1..t} dim(U_{i−1})/dim(U_i) + dim(U_t)·s`.
///
/// Reporting aid only; the query path never consults it.
pub fn estimate_cost(schedule: &DimensionSchedule, s: usize, constant: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::invalid("s must be positive"));
    }
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::invalid(format!("const must be positive, got {constant}")));
    }
    let ratios: f64 = schedule
        .dims()
        .windows(2)
        .map(|w| w[0] as f64 / w[1] as f64)
        .sum();
    Ok(ratios / constant + (schedule.coarsest_dim() * s) as f64)
}

/// Least-squares estimate of `const` from observed pairs
/// `(σ_i, dim(U_{i+1}))`, `i = 0..t−1`, over all reports.
///
/// Minimises `Σ (const·σ_i − 1/dim(U_{i+1}))²`, giving
/// `const = Σ σ_i/dim(U_{i+1}) / Σ σ_i²`. Pairs with σ_i = 0 carry no
/// information and are skipped.
pub fn fit_const(reports: &[QueryReport], schedule: &DimensionSchedule) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::Empty("query reports"));
    }
    let t = schedule.depth();
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for report in reports {
        if report.survivors.len() != t + 1 {
            return Err(Error::DimensionMismatch {
                expected: t + 1,
                found: report.survivors.len(),
            });
        }
        for i in 0..t {
            let sigma = report.survivors[i] as f64;
            if sigma > 0.0 {
                numerator += sigma / schedule.dim(i + 1) as f64;
                denominator += sigma * sigma;
            }
        }
    }
    if denominator == 0.0 {
        return Err(Error::invalid("all survivor counts are zero; const is undetermined"));
    }
    Ok(numerator / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(survivors: Vec<usize>) -> QueryReport {
        QueryReport {
            epsilon: 1.0,
            matches: Vec::new(),
            survivors,
            cost_s: 0,
            operations: 0,
            cost_l: 0,
            ratio: 0.0,
        }
    }

    fn gist_schedule() -> DimensionSchedule {
        DimensionSchedule::new(vec![960, 480, 240, 120, 60, 30, 10, 5]).unwrap()
    }

    #[test]
    fn estimate_examples() {
        let s = DimensionSchedule::new(vec![4, 2]).unwrap();
        assert_eq!(estimate_cost(&s, 4, 1.0).unwrap(), 10.0);
        assert_eq!(estimate_cost(&gist_schedule(), 100_000, 1.0).unwrap(), 500_015.0);
        let single = DimensionSchedule::new(vec![64, 8]).unwrap();
        assert_eq!(estimate_cost(&single, 1000, 0.5).unwrap(), 8.0 / 0.5 + 8.0 * 1000.0);
        assert!(estimate_cost(&s, 4, 0.0).is_err());
        assert!(estimate_cost(&s, 0, 1.0).is_err());
    }

    #[test]
    fn fit_examples() {
        let s = DimensionSchedule::new(vec![960, 480]).unwrap();
        let c = fit_const(&[report(vec![1, 7])], &s).unwrap();
        assert!((c - 1.0 / 480.0).abs() < 1e-18);
        let c2 = fit_const(&[report(vec![1, 7]), report(vec![1, 9])], &s).unwrap();
        assert_eq!(c, c2);
        assert!(fit_const(&[report(vec![0, 5])], &s).is_err());
        assert!(fit_const(&[], &s).is_err());
        assert!(fit_const(&[report(vec![1, 2, 3])], &s).is_err());
    }

    #[test]
    fn recovers_known_const() {
        let schedule = gist_schedule();
        let truth = 1.0 / 4800.0;
        // σ_i = 1 / (const · dim(U_{i+1})) is integral for every level here.
        let mut survivors: Vec<usize> = (0..schedule.depth())
            .map(|i| (1.0 / (truth * schedule.dim(i + 1) as f64)).round() as usize)
            .collect();
        survivors.push(100_000);
        assert_eq!(&survivors[..3], &[10, 20, 40]);
        let fitted = fit_const(&[report(survivors.clone()), report(survivors)], &schedule).unwrap();
        assert!((fitted - truth).abs() <= 1e-6 * truth);
    }
}
