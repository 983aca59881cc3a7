use nalgebra::DMatrix;

use crate::factorization::{select_columns, HeadId, LogitHead, SubDiscriminatorSet};
use crate::nn::sigmoid;
use crate::{Error, Result};

/// Mean absolute probability-space error of a model against an oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMae {
    pub combined: f64,
    /// For heads present in both sets.
    pub per_head: Vec<(HeadId, f64)>,
}

fn mean_abs_sigmoid_gap(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (sigmoid(*x) - sigmoid(*y)).abs()).sum::<f64>() / a.len() as f64
}

pub fn ratio_mae<H: LogitHead, O: LogitHead>(
    model: &SubDiscriminatorSet<H>,
    oracle: &SubDiscriminatorSet<O>,
    points: &DMatrix<f64>,
) -> Result<RatioMae> {
    if points.nrows() == 0 {
        return Err(Error::InsufficientData("no test points".into()));
    }
    let combined = mean_abs_sigmoid_gap(&model.logits(points)?, &oracle.logits(points)?);
    let mut per_head = Vec::new();
    for (slot, head) in model.iter() {
        if let Some(o) = oracle.head(slot.id) {
            let x = select_columns(points, &slot.columns);
            per_head.push((slot.id, mean_abs_sigmoid_gap(&head.logits(&x)?, &o.logits(&x)?)));
        }
    }
    Ok(RatioMae { combined, per_head })
}

/// Same measure for a single head against a single oracle.
pub fn head_ratio_mae<H: LogitHead, O: LogitHead>(model: &H, oracle: &O, points: &DMatrix<f64>) -> Result<f64> {
    if points.nrows() == 0 {
        return Err(Error::InsufficientData("no test points".into()));
    }
    Ok(mean_abs_sigmoid_gap(&model.logits(points)?, &oracle.logits(points)?))
}
