//! Spectral normalisation by persistent power iteration.
//!
//! Each weight matrix `W` keeps estimates `u`, `v` of its leading left and
//! right singular vectors. One refresh runs
//! `v <- Wᵀu / ‖Wᵀu‖`, `u <- Wv / ‖Wv‖` a fixed number of times, and the
//! normalised weight is `W / σ` with `σ = uᵀ W v`. During backpropagation
//! `u` and `v` are held constant, so `∂σ/∂W = u vᵀ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Power-iteration state for one weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralNormState {
    u: DVector<f64>,
    v: DVector<f64>,
    power_iterations: usize,
}

fn random_unit<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let candidate = DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = candidate.norm();
        if norm > 1e-12 {
            return candidate / norm;
        }
    }
}

impl SpectralNormState {
    /// Random unit start vectors for a `rows × cols` matrix.
    pub fn new<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        power_iterations: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            u: random_unit(rows, rng),
            v: random_unit(cols, rng),
            power_iterations: power_iterations.max(1),
        }
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn power_iterations(&self) -> usize {
        self.power_iterations
    }

    pub fn set_power_iterations(&mut self, n: usize) {
        self.power_iterations = n.max(1);
    }

    /// Advances `u` and `v` by the configured number of iterations.
    pub fn power_iterate(&mut self, weight: &DMatrix<f64>) -> Result<()> {
        self.iterate_n(weight, self.power_iterations)
    }

    /// Advances `u` and `v` by exactly `n` iterations.
    pub fn iterate_n(&mut self, weight: &DMatrix<f64>, n: usize) -> Result<()> {
        if weight.nrows() != self.u.len() || weight.ncols() != self.v.len() {
            return Err(Error::Shape(format!(
                "spectral state is {}x{}, weight is {}x{}",
                self.u.len(),
                self.v.len(),
                weight.nrows(),
                weight.ncols()
            )));
        }
        if is_zero(weight) {
            return Err(Error::Degenerate(
                "spectral normalisation of an all-zero matrix".into(),
            ));
        }
        for _ in 0..n {
            let mut wt_u = weight.tr_mul(&self.u);
            let mut norm = wt_u.norm();
            if norm < 1e-300 {
                // u fell into the left null space; restart from the largest column.
                let (col, _) = weight
                    .column_iter()
                    .enumerate()
                    .map(|(i, c)| (i, c.norm()))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                let c = weight.column(col).into_owned();
                self.u = &c / c.norm();
                wt_u = weight.tr_mul(&self.u);
                norm = wt_u.norm();
            }
            self.v = wt_u / norm;
            let wv = weight * &self.v;
            self.u = &wv / wv.norm();
        }
        Ok(())
    }

    /// `uᵀ W v` for the current vectors.
    pub fn sigma(&self, weight: &DMatrix<f64>) -> f64 {
        (weight * &self.v).dot(&self.u)
    }
}

pub(crate) fn is_zero(weight: &DMatrix<f64>) -> bool {
    weight.iter().all(|&w| w == 0.0)
}

/// Advances `state` and returns `weight / σ`.
pub fn spectral_normalize(
    weight: &DMatrix<f64>,
    state: &mut SpectralNormState,
) -> Result<DMatrix<f64>> {
    state.power_iterate(weight)?;
    let sigma = state.sigma(weight);
    Ok(weight / sigma)
}
