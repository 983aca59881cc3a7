//! The probability ↔ density-ratio bijection and the two equivalent ways of
//! combining sub-discriminator outputs.

use crate::nn::sigmoid;
use crate::{Error, Result};

/// `h(a) = a / (1 − a)`, mapping a discriminator probability to a density ratio.
pub fn h_map(a: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::Domain(format!("h is defined on [0, 1), got {a}")));
    }
    Ok(a / (1.0 - a))
}

/// `h⁻¹(r) = r / (1 + r)`.
pub fn h_inv(r: f64) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!(
            "h⁻¹ is defined on finite r ≥ 0, got {r}"
        )));
    }
    Ok(r / (1.0 + r))
}

/// Logit of the combined discriminator: `d_P − d_Q + Σ dᵢ`.
/// Absent dependency heads contribute zero.
pub fn combine_logits(p_dependency: Option<f64>, q_dependency: Option<f64>, marginals: &[f64]) -> f64 {
    p_dependency.unwrap_or(0.0) - q_dependency.unwrap_or(0.0) + marginals.iter().sum::<f64>()
}

/// The same combination evaluated in ratio space:
/// `h⁻¹( h(σ(d_P)) · h(σ(d_Q))⁻¹ · Π h(σ(dᵢ)) )`.
///
/// Only usable for moderate logits; saturated sigmoids push `h` to infinity.
pub fn product_form_probability(
    p_dependency: Option<f64>,
    q_dependency: Option<f64>,
    marginals: &[f64],
) -> Result<f64> {
    let mut ratio = 1.0;
    if let Some(p) = p_dependency {
        ratio *= h_map(sigmoid(p))?;
    }
    if let Some(q) = q_dependency {
        ratio /= h_map(sigmoid(q))?;
    }
    for &d in marginals {
        ratio *= h_map(sigmoid(d))?;
    }
    h_inv(ratio)
}
