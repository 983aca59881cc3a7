use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

/// Pearson χ² test of independence on a class-pair contingency table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Outcome {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub reject: bool,
    /// Some expected count is below 5, so the χ² approximation is unreliable.
    pub sparse: bool,
}

pub fn contingency_table(pairs: &[(usize, usize)], class_count: usize) -> Result<DMatrix<f64>> {
    let mut t = DMatrix::zeros(class_count, class_count);
    for &(a, b) in pairs {
        if a >= class_count || b >= class_count {
            return Err(Error::Domain(format!("class pair ({a}, {b}) out of range")));
        }
        t[(a, b)] += 1.0;
    }
    Ok(t)
}

/// Tests the table against the product of its own marginals at level
/// `alpha`. Empty rows and columns are dropped before counting degrees of
/// freedom.
pub fn chi2_independence(pairs: &[(usize, usize)], class_count: usize, alpha: f64) -> Result<Chi2Outcome> {
    let table = contingency_table(pairs, class_count)?;
    let n = table.sum();
    let rows: Vec<usize> = (0..class_count).filter(|&r| table.row(r).sum() > 0.0).collect();
    let cols: Vec<usize> = (0..class_count).filter(|&c| table.column(c).sum() > 0.0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return Err(Error::InsufficientData(
            "independence test needs at least two observed classes per side".into(),
        ));
    }
    let mut statistic = 0.0;
    let mut sparse = false;
    for &r in &rows {
        let rs = table.row(r).sum();
        for &c in &cols {
            let expected = rs * table.column(c).sum() / n;
            sparse |= expected < 5.0;
            statistic += (table[(r, c)] - expected).powi(2) / expected;
        }
    }
    let dof = (rows.len() - 1) * (cols.len() - 1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Domain(e.to_string()))?;
    let p_value = 1.0 - dist.cdf(statistic);
    Ok(Chi2Outcome {
        statistic,
        degrees_of_freedom: dof,
        p_value,
        reject: p_value < alpha,
        sparse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_table_has_zero_statistic() {
        let pairs: Vec<_> = (0..10).flat_map(|a| (0..10).map(move |b| (a, b))).collect();
        let out = chi2_independence(&pairs, 10, 0.01).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.degrees_of_freedom, 81);
        assert!(!out.reject);
        assert!(out.sparse);
    }

    #[test]
    fn two_by_two_by_hand() {
        // table [[30, 10], [10, 30]]: expected 20 everywhere, χ² = 4·100/20
        let mut pairs = vec![(0, 0); 30];
        pairs.extend(vec![(0, 1); 10]);
        pairs.extend(vec![(1, 0); 10]);
        pairs.extend(vec![(1, 1); 30]);
        let out = chi2_independence(&pairs, 2, 0.01).unwrap();
        assert!((out.statistic - 20.0).abs() < 1e-12);
        // P(χ²₁ > 20) = erfc(√10)
        assert!((out.p_value - 7.744_216_431_044_074e-6).abs() < 1e-12);
        assert!(out.reject);
    }
}
