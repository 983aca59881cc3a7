use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::factorization::Partition;
use crate::{Error, Result};

/// Two coupled class labels, each emitted as a 2-D point near its class mean.
///
/// The top class is uniform over `C` classes. The bottom class equals it with
/// probability `λ` and is otherwise uniform over the other `C − 1` classes.
/// Class means sit evenly on a circle; emissions are isotropic normals.
/// Joint samples are `(top_x, top_y, bottom_x, bottom_y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedCategoricalTask {
    class_count: usize,
    coupling: f64,
    radius: f64,
    emission_std: f64,
    partition: Partition,
}

pub const DEFAULT_RADIUS: f64 = 3.0;
pub const DEFAULT_EMISSION_STD: f64 = 0.25;

impl PairedCategoricalTask {
    pub fn new(class_count: usize, coupling: f64) -> Result<Self> {
        Self::with_geometry(class_count, coupling, DEFAULT_RADIUS, DEFAULT_EMISSION_STD)
    }

    pub fn with_geometry(
        class_count: usize,
        coupling: f64,
        radius: f64,
        emission_std: f64,
    ) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::Configuration(format!(
                "need at least two classes, got {class_count}"
            )));
        }
        if !(0.0..=1.0).contains(&coupling) {
            return Err(Error::Configuration(format!(
                "coupling must be a probability, got {coupling}"
            )));
        }
        if !(radius > 0.0 && emission_std > 0.0) {
            return Err(Error::Configuration(
                "radius and emission std must be positive".into(),
            ));
        }
        Ok(Self {
            class_count,
            coupling,
            radius,
            emission_std,
            partition: Partition::contiguous(&[2, 2])?,
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn emission_std(&self) -> f64 {
        self.emission_std
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn class_mean(&self, class: usize) -> [f64; 2] {
        let angle = 2.0 * PI * class as f64 / self.class_count as f64;
        [self.radius * angle.cos(), self.radius * angle.sin()]
    }

    /// Exact `P(top = t, bottom = b)`.
    pub fn joint_class_probability(&self, top: usize, bottom: usize) -> f64 {
        let c = self.class_count as f64;
        if top == bottom {
            self.coupling / c
        } else {
            (1.0 - self.coupling) / (c * (c - 1.0))
        }
    }

    pub fn joint_class_probabilities(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.class_count, self.class_count, |t, b| {
            self.joint_class_probability(t, b)
        })
    }

    pub fn sample_classes<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(usize, usize)> {
        (0..n)
            .map(|_| {
                let top = rng.gen_range(0..self.class_count);
                let bottom = if rng.gen::<f64>() < self.coupling {
                    top
                } else {
                    let other = rng.gen_range(0..self.class_count - 1);
                    if other >= top {
                        other + 1
                    } else {
                        other
                    }
                };
                (top, bottom)
            })
            .collect()
    }

    fn emit<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> [f64; 2] {
        let [mx, my] = self.class_mean(class);
        [
            mx + self.emission_std * rng.sample::<f64, _>(StandardNormal),
            my + self.emission_std * rng.sample::<f64, _>(StandardNormal),
        ]
    }

    /// Joint samples together with their true class pairs.
    pub fn sample_joint_labeled<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> (DMatrix<f64>, Vec<(usize, usize)>) {
        let classes = self.sample_classes(n, rng);
        let mut x = DMatrix::zeros(n, 4);
        for (r, &(t, b)) in classes.iter().enumerate() {
            let top = self.emit(t, rng);
            let bottom = self.emit(b, rng);
            x[(r, 0)] = top[0];
            x[(r, 1)] = top[1];
            x[(r, 2)] = bottom[0];
            x[(r, 3)] = bottom[1];
        }
        (x, classes)
    }

    pub fn sample_joint<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        self.sample_joint_labeled(n, rng).0
    }

    /// Either part's marginal: a uniform class, then its emission.
    pub fn sample_marginal<R: Rng + ?Sized>(
        &self,
        part: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        if part > 1 {
            return Err(Error::Partition(format!("paired task has parts 0 and 1, not {part}")));
        }
        let mut x = DMatrix::zeros(n, 2);
        for r in 0..n {
            let class = rng.gen_range(0..self.class_count);
            let [a, b] = self.emit(class, rng);
            x[(r, 0)] = a;
            x[(r, 1)] = b;
        }
        Ok(x)
    }
}
