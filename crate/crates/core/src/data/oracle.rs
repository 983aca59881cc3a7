use nalgebra::{DMatrix, DVector};

use super::gaussian::{GaussianTask, MultivariateNormal};
use crate::factorization::{FactorLayout, HeadRole, HeadSlot, LogitHead, SubDiscriminatorSet};
use crate::{Error, Result};

/// Exact logit built from closed-form normal log-densities:
/// `Σ sign · log N(x[positions])`.
#[derive(Debug, Clone)]
pub struct OracleHead {
    input_dim: usize,
    terms: Vec<(f64, Vec<usize>, MultivariateNormal)>,
}

impl OracleHead {
    pub fn new(input_dim: usize, terms: Vec<(f64, Vec<usize>, MultivariateNormal)>) -> Result<Self> {
        for (_, positions, density) in &terms {
            if positions.len() != density.dim() || positions.iter().any(|&p| p >= input_dim) {
                return Err(Error::Shape(format!(
                    "oracle term over {positions:?} does not fit a {input_dim}-wide input"
                )));
            }
        }
        Ok(Self { input_dim, terms })
    }

    /// `log p(x) − log q(x)` over all input columns.
    pub fn ratio(p: MultivariateNormal, q: MultivariateNormal) -> Result<Self> {
        if p.dim() != q.dim() {
            return Err(Error::Shape(format!(
                "densities have dimensions {} and {}",
                p.dim(),
                q.dim()
            )));
        }
        let all: Vec<usize> = (0..p.dim()).collect();
        Self::new(p.dim(), vec![(1.0, all.clone(), p), (-1.0, all, q)])
    }

    fn row_logit(&self, row: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (sign, positions, density) in &self.terms {
            let sub: Vec<f64> = positions.iter().map(|&p| row[p]).collect();
            total += sign * density.log_density(&sub)?;
        }
        Ok(total)
    }
}

impl LogitHead for OracleHead {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn logits(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::InputShape {
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        let mut out = DVector::zeros(x.nrows());
        for r in 0..x.nrows() {
            let row: Vec<f64> = x.row(r).iter().copied().collect();
            out[r] = self.row_logit(&row)?;
        }
        Ok(out)
    }

    fn input_gradient(&self, x: &DMatrix<f64>, upstream: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::InputShape {
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        if upstream.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "upstream has {} entries for {} rows",
                upstream.len(),
                x.nrows()
            )));
        }
        let mut grad = DMatrix::zeros(x.nrows(), x.ncols());
        for r in 0..x.nrows() {
            for (sign, positions, density) in &self.terms {
                let sub: Vec<f64> = positions.iter().map(|&p| x[(r, p)]).collect();
                let g = density.grad_log_density(&sub)?;
                for (k, &p) in positions.iter().enumerate() {
                    grad[(r, p)] += upstream[r] * sign * g[k];
                }
            }
        }
        Ok(grad)
    }
}

fn slot_head(slot: &HeadSlot, p: &GaussianTask, q: &GaussianTask) -> Result<OracleHead> {
    let all: Vec<usize> = (0..slot.columns.len()).collect();
    let dependency = |task: &GaussianTask| -> Result<OracleHead> {
        let mut terms = vec![(1.0, all.clone(), task.subset(&slot.columns)?)];
        for block in &slot.blocks {
            let dims: Vec<usize> = block.iter().map(|&b| slot.columns[b]).collect();
            terms.push((-1.0, block.clone(), task.subset(&dims)?));
        }
        OracleHead::new(slot.columns.len(), terms)
    };
    match slot.id.role() {
        HeadRole::Joint | HeadRole::Marginal => {
            OracleHead::ratio(p.subset(&slot.columns)?, q.subset(&slot.columns)?)
        }
        HeadRole::RealDependency => dependency(p),
        HeadRole::GeneratedDependency => dependency(q),
    }
}

/// The non-parametric optimum of every head in `layout`, for real data `p`
/// and generated data `q`: marginal heads give `log pᶜ − log qᶜ` on their
/// columns, dependency heads give `log p − Σ_b log p_b` over their blocks
/// (or the same with `q`).
pub fn oracle_heads(
    p: &GaussianTask,
    q: &GaussianTask,
    layout: &FactorLayout,
) -> Result<SubDiscriminatorSet<OracleHead>> {
    if p.partition() != q.partition() || p.partition() != layout.partition() {
        return Err(Error::Partition(
            "oracle densities and layout must share one partition".into(),
        ));
    }
    SubDiscriminatorSet::build(layout.clone(), |slot| slot_head(slot, p, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{select_columns, CombinationMode, HeadId, HierarchySpec, Partition};
    use crate::nn::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn correlated_2d() -> (GaussianTask, GaussianTask) {
        let part = Partition::contiguous(&[1, 1]).unwrap();
        let p = GaussianTask::from_rows(&[0.0, 0.0], &[vec![1.0, 0.8], vec![0.8, 1.0]], part.clone())
            .unwrap();
        let q = GaussianTask::from_rows(&[0.5, -0.3], &[vec![1.5, 0.0], vec![0.0, 0.7]], part)
            .unwrap();
        (p, q)
    }

    fn random_points(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| 1.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
    }

    fn analytic(p: &GaussianTask, q: &GaussianTask, x: &[f64]) -> f64 {
        let lp = p.log_density(x).unwrap();
        let lq = q.log_density(x).unwrap();
        1.0 / (1.0 + (lq - lp).exp())
    }

    #[test]
    fn identical_densities_cancel() {
        let (p, _) = correlated_2d();
        let layout = FactorLayout::factorgan(p.partition().clone(), CombinationMode::Joint).unwrap();
        let set = oracle_heads(&p, &p, &layout).unwrap();
        let x = random_points(20, 2, 1);
        for i in 0..2 {
            let slot = set.slot(HeadId::Marginal(i)).unwrap();
            let l = set.head(slot.id).unwrap().logits(&select_columns(&x, &slot.columns)).unwrap();
            assert!(l.amax() < 1e-12);
        }
        let dp = set.head(HeadId::PDependency).unwrap().logits(&x).unwrap();
        let dq = set.head(HeadId::QDependency).unwrap().logits(&x).unwrap();
        assert_eq!(dp, dq);
        assert!(set.logits(&x).unwrap().amax() < 1e-12);
    }

    #[test]
    fn joint_combination_is_the_density_ratio() {
        let (p, q) = correlated_2d();
        let layout = FactorLayout::factorgan(p.partition().clone(), CombinationMode::Joint).unwrap();
        let set = oracle_heads(&p, &q, &layout).unwrap();
        let x = random_points(20, 2, 2);
        let logits = set.logits(&x).unwrap();
        for r in 0..20 {
            let row: Vec<f64> = x.row(r).iter().copied().collect();
            let got = sigmoid(logits[r]);
            assert!((got - analytic(&p, &q, &row)).abs() < 1e-9);
        }
    }

    #[test]
    fn independent_p_has_a_zero_p_head() {
        let (_, q) = correlated_2d();
        let layout = FactorLayout::factorgan(q.partition().clone(), CombinationMode::Joint).unwrap();
        let set = oracle_heads(&q, &q, &layout).unwrap();
        let x = random_points(20, 2, 3);
        let head = set.head(HeadId::PDependency).unwrap();
        assert!(head.logits(&x).unwrap().amax() < 1e-12);
    }

    #[test]
    fn partition_mismatch_is_rejected() {
        let (p, _) = correlated_2d();
        let other = GaussianTask::new(
            DVector::zeros(2),
            DMatrix::identity(2, 2),
            Partition::new(vec![vec![1], vec![0]]).unwrap(),
        )
        .unwrap();
        let layout = FactorLayout::factorgan(p.partition().clone(), CombinationMode::Joint).unwrap();
        assert!(matches!(oracle_heads(&p, &other, &layout), Err(Error::Partition(_))));
    }

    #[test]
    fn hierarchical_matches_flat() {
        let cov = vec![
            vec![1.0, 0.3, 0.2, 0.1],
            vec![0.3, 1.2, -0.2, 0.3],
            vec![0.2, -0.2, 0.9, 0.4],
            vec![0.1, 0.3, 0.4, 1.1],
        ];
        let part = Partition::contiguous(&[2, 2]).unwrap();
        let p = GaussianTask::from_rows(&[0.1, 0.2, -0.3, 0.0], &cov, part.clone()).unwrap();
        let q = GaussianTask::from_rows(&[0.0; 4], &identity_rows(4), part.clone()).unwrap();
        let h = HierarchySpec::new(vec![vec![vec![0], vec![1]], vec![vec![2], vec![3]]]);
        let hier = oracle_heads(&p, &q, &FactorLayout::hierarchical(part.clone(), h).unwrap()).unwrap();
        let flat = oracle_heads(&p, &q, &FactorLayout::factorgan(part, CombinationMode::Joint).unwrap())
            .unwrap();
        let x = random_points(50, 4, 4);
        let a = hier.logits(&x).unwrap();
        let b = flat.logits(&x).unwrap();
        assert!((a - b).amax() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (p, q) = correlated_2d();
        let head = OracleHead::ratio(p.joint().clone(), q.joint().clone()).unwrap();
        let x = random_points(5, 2, 5);
        let up = DVector::from_element(5, 1.0);
        let g = head.input_gradient(&x, &up).unwrap();
        let eps = 1e-5;
        for r in 0..5 {
            for c in 0..2 {
                let mut plus = x.clone();
                plus[(r, c)] += eps;
                let mut minus = x.clone();
                minus[(r, c)] -= eps;
                let fd = (head.logits(&plus).unwrap().sum() - head.logits(&minus).unwrap().sum())
                    / (2.0 * eps);
                assert!((fd - g[(r, c)]).abs() < 1e-6 * fd.abs().max(1.0));
            }
        }
    }

    fn identity_rows(d: usize) -> Vec<Vec<f64>> {
        (0..d).map(|r| (0..d).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect()
    }
}
