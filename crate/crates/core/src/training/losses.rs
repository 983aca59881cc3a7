use nalgebra::DVector;

use crate::{Error, Result};

/// `log(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    crate::nn::sigmoid(x)
}

fn non_empty(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Shape(format!("{what} batch is empty")));
    }
    Ok(())
}

/// `−[mean log σ(real) + mean log(1 − σ(fake))]`.
pub fn disc_loss(real: &DVector<f64>, fake: &DVector<f64>) -> Result<f64> {
    non_empty(real, "real")?;
    non_empty(fake, "fake")?;
    let r = real.iter().map(|&l| softplus(-l)).sum::<f64>() / real.len() as f64;
    let f = fake.iter().map(|&l| softplus(l)).sum::<f64>() / fake.len() as f64;
    Ok(r + f)
}

/// Gradients of [`disc_loss`] with respect to the real and fake logits.
pub fn disc_loss_grad(
    real: &DVector<f64>,
    fake: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    non_empty(real, "real")?;
    non_empty(fake, "fake")?;
    let nr = real.len() as f64;
    let nf = fake.len() as f64;
    Ok((
        real.map(|l| -sigmoid(-l) / nr),
        fake.map(|l| sigmoid(l) / nf),
    ))
}

/// Non-saturating generator loss `−mean log σ(l)`.
pub fn gen_loss(fake: &DVector<f64>) -> Result<f64> {
    non_empty(fake, "generated")?;
    Ok(fake.iter().map(|&l| softplus(-l)).sum::<f64>() / fake.len() as f64)
}

pub fn gen_loss_grad(fake: &DVector<f64>) -> Result<DVector<f64>> {
    non_empty(fake, "generated")?;
    let n = fake.len() as f64;
    Ok(fake.map(|l| -sigmoid(-l) / n))
}
