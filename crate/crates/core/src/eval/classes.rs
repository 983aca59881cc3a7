use nalgebra::{DMatrix, DVector};

use crate::data::PairedCategoricalTask;
use crate::{Error, Result};

/// Class of the nearest class mean; ties go to the lowest index.
pub fn nearest_class(task: &PairedCategoricalTask, point: [f64; 2]) -> usize {
    let mut best = (0, f64::INFINITY);
    for k in 0..task.class_count() {
        let [mx, my] = task.class_mean(k);
        let d = (point[0] - mx).powi(2) + (point[1] - my).powi(2);
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// `(top, bottom)` class of each joint row `(top_x, top_y, bottom_x, bottom_y)`.
pub fn classify_parts(samples: &DMatrix<f64>, task: &PairedCategoricalTask) -> Result<Vec<(usize, usize)>> {
    if samples.ncols() != 4 {
        return Err(Error::InputShape {
            expected: 4,
            got: samples.ncols(),
        });
    }
    Ok(samples
        .row_iter()
        .map(|r| {
            (
                nearest_class(task, [r[0], r[1]]),
                nearest_class(task, [r[2], r[3]]),
            )
        })
        .collect())
}

/// Joint class frequencies with their two marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTable {
    joint: DMatrix<f64>,
    top: DVector<f64>,
    bottom: DVector<f64>,
}

impl ClassTable {
    pub fn from_probabilities(joint: DMatrix<f64>) -> Result<Self> {
        if !joint.is_square() || joint.nrows() == 0 {
            return Err(Error::Shape(format!("class table must be square, got {:?}", joint.shape())));
        }
        if joint.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain("class probabilities must be finite and non-negative".into()));
        }
        let total = joint.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("class table sums to {total}, not 1")));
        }
        let top = DVector::from_iterator(joint.nrows(), joint.row_iter().map(|r| r.sum()));
        let bottom = DVector::from_iterator(joint.ncols(), joint.column_iter().map(|c| c.sum()));
        Ok(Self { joint, top, bottom })
    }

    pub fn from_pairs(pairs: &[(usize, usize)], class_count: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InsufficientData("no class pairs".into()));
        }
        let mut counts = DMatrix::zeros(class_count, class_count);
        for &(t, b) in pairs {
            if t >= class_count || b >= class_count {
                return Err(Error::Domain(format!("class pair ({t}, {b}) out of range")));
            }
            counts[(t, b)] += 1.0;
        }
        Self::from_probabilities(counts / pairs.len() as f64)
    }

    pub fn class_count(&self) -> usize {
        self.joint.nrows()
    }

    pub fn joint(&self) -> &DMatrix<f64> {
        &self.joint
    }

    pub fn top(&self) -> &DVector<f64> {
        &self.top
    }

    pub fn bottom(&self) -> &DVector<f64> {
        &self.bottom
    }

    /// `p(t, b) / (p(t) p(b))` per cell, or `None` if a marginal cell is zero.
    pub fn dependency_ratios(&self) -> Option<DMatrix<f64>> {
        if self.top.iter().chain(self.bottom.iter()).any(|&m| m == 0.0) {
            return None;
        }
        Some(DMatrix::from_fn(self.class_count(), self.class_count(), |t, b| {
            self.joint[(t, b)] / (self.top[t] * self.bottom[b])
        }))
    }
}

/// Outcome of the dependency metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DependencyMetric {
    Value(f64),
    /// Some class never occurs in one of the tables, so a ratio is undefined.
    Degenerate,
}

impl DependencyMetric {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(v),
            Self::Degenerate => None,
        }
    }
}

/// Mean absolute difference of the joint-to-marginal-product ratios over
/// all `C²` cells.
pub fn dependency_metric(real: &ClassTable, generated: &ClassTable) -> Result<DependencyMetric> {
    if real.class_count() != generated.class_count() {
        return Err(Error::Shape(format!(
            "tables have {} and {} classes",
            real.class_count(),
            generated.class_count()
        )));
    }
    let (Some(a), Some(b)) = (real.dependency_ratios(), generated.dependency_ratios()) else {
        return Ok(DependencyMetric::Degenerate);
    };
    let c = real.class_count() as f64;
    Ok(DependencyMetric::Value((a - b).abs().sum() / (c * c)))
}
