use nalgebra::DMatrix;
use rand::Rng;

use crate::data::split_mixture;
use crate::factorization::Partition;
use crate::nn::{Activation, DenseNet, ForwardCache, ParamGradients};
use crate::{Error, Result};

/// How generator outputs become joint samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// `x = G(z)`.
    Direct,
    /// `x¹` is given; `G(z, x¹)` fills the remaining parts.
    Conditional,
    /// A mixture `m` is given; `G(z, m) = b` and the parts are `b ⊙ m` and
    /// `(1 − b) ⊙ m`.
    MixtureMask,
}

#[derive(Debug, Clone)]
pub struct Generator {
    net: DenseNet,
    kind: GeneratorKind,
    partition: Partition,
    noise_dim: usize,
}

/// Generated joints with what is needed to backpropagate into the generator.
#[derive(Debug, Clone)]
pub struct GeneratedBatch {
    pub joint: DMatrix<f64>,
    cache: ForwardCache,
    /// Conditioning input (for masks: the mixtures), if any.
    conditioning: Option<DMatrix<f64>>,
    output: DMatrix<f64>,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(
        kind: GeneratorKind,
        partition: Partition,
        noise_dim: usize,
        hidden: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let d = partition.total_dim();
        let (extra, out, output_activation) = match kind {
            GeneratorKind::Direct => (0, d, output_activation),
            GeneratorKind::Conditional => {
                let c = partition.parts()[0].len();
                (c, d - c, output_activation)
            }
            GeneratorKind::MixtureMask => {
                let parts = partition.parts();
                if parts.len() != 2 || parts[0].len() != parts[1].len() {
                    return Err(Error::Configuration(
                        "a mask generator needs two parts of equal size".into(),
                    ));
                }
                (parts[0].len(), parts[0].len(), Activation::Sigmoid)
            }
        };
        let mut dims = vec![noise_dim + extra];
        dims.extend_from_slice(hidden);
        dims.push(out);
        let net = DenseNet::with_rng(&dims, hidden_activation, output_activation, rng)?;
        Ok(Self {
            net,
            kind,
            partition,
            noise_dim,
        })
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Width of the conditioning input, 0 for a direct generator.
    pub fn conditioning_dim(&self) -> usize {
        self.net.input_dim() - self.noise_dim
    }

    pub fn generate(&self, z: &DMatrix<f64>, conditioning: Option<&DMatrix<f64>>) -> Result<GeneratedBatch> {
        if z.ncols() != self.noise_dim {
            return Err(Error::InputShape {
                expected: self.noise_dim,
                got: z.ncols(),
            });
        }
        let n = z.nrows();
        let cdim = self.conditioning_dim();
        let input = match (cdim, conditioning) {
            (0, None) => z.clone(),
            (0, Some(_)) => {
                return Err(Error::Configuration("a direct generator takes no conditioning".into()))
            }
            (_, None) => {
                return Err(Error::Configuration(format!(
                    "this generator needs a {cdim}-wide conditioning input"
                )))
            }
            (_, Some(c)) => {
                if c.shape() != (n, cdim) {
                    return Err(Error::Shape(format!(
                        "conditioning is {:?}, expected ({n}, {cdim})",
                        c.shape()
                    )));
                }
                DMatrix::from_fn(n, self.noise_dim + cdim, |r, k| {
                    if k < self.noise_dim {
                        z[(r, k)]
                    } else {
                        c[(r, k - self.noise_dim)]
                    }
                })
            }
        };
        let pass = self.net.forward(&input)?;
        let parts = self.partition.parts();
        let mut joint = DMatrix::zeros(n, self.partition.total_dim());
        match self.kind {
            GeneratorKind::Direct => {
                for c in 0..joint.ncols() {
                    joint.set_column(c, &pass.output.column(c));
                }
            }
            GeneratorKind::Conditional => {
                let cond = conditioning.expect("checked above");
                for (k, &col) in parts[0].iter().enumerate() {
                    joint.set_column(col, &cond.column(k));
                }
                for (k, &col) in parts[1..].iter().flatten().enumerate() {
                    joint.set_column(col, &pass.output.column(k));
                }
            }
            GeneratorKind::MixtureMask => {
                let m = conditioning.expect("checked above");
                for r in 0..n {
                    for k in 0..m.ncols() {
                        let (a, v) = split_mixture(m[(r, k)], pass.output[(r, k)]);
                        joint[(r, parts[0][k])] = a;
                        joint[(r, parts[1][k])] = v;
                    }
                }
            }
        }
        Ok(GeneratedBatch {
            joint,
            cache: pass.cache,
            conditioning: conditioning.cloned(),
            output: pass.output,
        })
    }

    /// Parameter gradients given `∂L/∂joint`.
    pub fn backward(&self, batch: &GeneratedBatch, grad_joint: &DMatrix<f64>) -> Result<ParamGradients> {
        if grad_joint.shape() != batch.joint.shape() {
            return Err(Error::Shape(format!(
                "gradient is {:?}, batch is {:?}",
                grad_joint.shape(),
                batch.joint.shape()
            )));
        }
        let parts = self.partition.parts();
        let n = grad_joint.nrows();
        let upstream = match self.kind {
            GeneratorKind::Direct => grad_joint.clone(),
            GeneratorKind::Conditional => {
                let cols: Vec<usize> = parts[1..].iter().flatten().copied().collect();
                DMatrix::from_fn(n, cols.len(), |r, k| grad_joint[(r, cols[k])])
            }
            GeneratorKind::MixtureMask => {
                let m = batch.conditioning.as_ref().expect("mask batches carry mixtures");
                DMatrix::from_fn(n, m.ncols(), |r, k| {
                    (grad_joint[(r, parts[0][k])] - grad_joint[(r, parts[1][k])]) * m[(r, k)]
                })
            }
        };
        debug_assert_eq!(upstream.shape(), batch.output.shape());
        Ok(self.net.backward(&batch.cache, &upstream)?.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| Distribution::<f64>::sample(&StandardNormal, rng))
    }

    fn fd_check(gen: &Generator, z: &DMatrix<f64>, cond: Option<&DMatrix<f64>>, weights: &DMatrix<f64>) {
        let loss = |g: &Generator| -> f64 {
            let b = g.generate(z, cond).unwrap();
            b.joint.component_mul(weights).sum()
        };
        let batch = gen.generate(z, cond).unwrap();
        let grads = gen.backward(&batch, weights).unwrap();
        let analytic: Vec<f64> = grads.slices().iter().flat_map(|s| s.iter().copied()).collect();
        let mut probe = gen.clone();
        let h = 1e-5;
        let mut idx = 0;
        let sizes = probe.net.parameter_sizes();
        for (p, &size) in sizes.iter().enumerate() {
            for k in 0..size {
                let orig = probe.net.parameters_mut()[p][k];
                probe.net.parameters_mut()[p][k] = orig + h;
                let up = loss(&probe);
                probe.net.parameters_mut()[p][k] = orig - h;
                let down = loss(&probe);
                probe.net.parameters_mut()[p][k] = orig;
                let fd = (up - down) / (2.0 * h);
                let a = analytic[idx];
                assert!(
                    (fd - a).abs() <= 1e-4 * fd.abs().max(a.abs()).max(1e-6),
                    "param {p}[{k}]: fd {fd} analytic {a}"
                );
                idx += 1;
            }
        }
    }

    #[test]
    fn mask_outputs_sum_to_the_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = Partition::contiguous(&[3, 3]).unwrap();
        let g = Generator::new(GeneratorKind::MixtureMask, p, 4, &[8], Activation::LeakyRelu, Activation::Identity, &mut rng)
            .unwrap();
        let z = normal(200, 4, &mut rng);
        let m = normal(200, 3, &mut rng) * 7.0;
        let b = g.generate(&z, Some(&m)).unwrap();
        for r in 0..200 {
            for k in 0..3 {
                assert_eq!(b.joint[(r, k)] + b.joint[(r, k + 3)], m[(r, k)]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Partition::new(vec![vec![0, 2], vec![1, 3]]).unwrap();
        for (kind, out) in [
            (GeneratorKind::Direct, Activation::Identity),
            (GeneratorKind::Direct, Activation::Sigmoid),
            (GeneratorKind::Conditional, Activation::Identity),
            (GeneratorKind::MixtureMask, Activation::Sigmoid),
        ] {
            let g = Generator::new(kind, p.clone(), 3, &[5], Activation::LeakyRelu, out, &mut rng).unwrap();
            let z = normal(4, 3, &mut rng);
            let cond = (g.conditioning_dim() > 0).then(|| normal(4, g.conditioning_dim(), &mut rng));
            let w = normal(4, 4, &mut rng);
            fd_check(&g, &z, cond.as_ref(), &w);
        }
    }

    #[test]
    fn conditional_passes_the_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = Partition::contiguous(&[2, 2]).unwrap();
        let g = Generator::new(GeneratorKind::Conditional, p, 3, &[5], Activation::LeakyRelu, Activation::Identity, &mut rng)
            .unwrap();
        let z = normal(6, 3, &mut rng);
        let c = normal(6, 2, &mut rng);
        let b = g.generate(&z, Some(&c)).unwrap();
        assert_eq!(b.joint.columns(0, 2), c.columns(0, 2));
        assert!(g.generate(&z, None).is_err());
    }
}
