//! Density and Fréchet computations against hand-written linear algebra:
//! Gauss-Jordan elimination for inverses and determinants, cyclic Jacobi
//! rotations for symmetric eigenproblems.

use factorgan::data::MultivariateNormal;
use factorgan::eval::{frechet_distance, frechet_gaussians};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Mat = Vec<Vec<f64>>;

/// Inverse and log-determinant by Gauss-Jordan with partial pivoting.
fn gauss_jordan(a: &Mat) -> (Mat, f64) {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut log_det = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        // covariances are PD, so row swaps come in pairs of sign flips that
        // cancel out in |det|
        log_det += p.abs().ln();
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                for c in 0..2 * n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    (m.into_iter().map(|r| r[n..].to_vec()).collect(), log_det)
}

fn log_density_oracle(mean: &[f64], cov: &Mat, x: &[f64]) -> f64 {
    let n = mean.len();
    let (inv, log_det) = gauss_jordan(cov);
    let d: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += d[i] * inv[i][j] * d[j];
        }
    }
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Mat {
    let a: Mat = (0..n).map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 })
                .collect()
        })
        .collect()
}

fn to_dmatrix(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m.len(), |i, j| m[i][j])
}

#[test]
fn log_density_matches_gauss_jordan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..30 {
        let n = 1 + trial % 5;
        let cov = random_spd(n, &mut rng);
        let mean: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mvn = MultivariateNormal::new(DVector::from_vec(mean.clone()), to_dmatrix(&cov)).unwrap();
        for _ in 0..5 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let got = mvn.log_density(&x).unwrap();
            let want = log_density_oracle(&mean, &cov, &x);
            assert!((got - want).abs() < 1e-10, "n={n}: {got} vs {want}");
        }
    }
}

/// Eigenvalues and eigenvectors (as columns) of a symmetric matrix.
fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut m = a.clone();
    let mut v: Mat = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn sqrt_psd(a: &Mat) -> Mat {
    let (vals, vecs) = jacobi_eigen(a);
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| vecs[i][k] * vals[k].max(0.0).sqrt() * vecs[j][k]).sum()).collect())
        .collect()
}

fn frechet_oracle(mu1: &[f64], c1: &Mat, mu2: &[f64], c2: &Mat) -> f64 {
    let s = sqrt_psd(c1);
    let inner = matmul(&matmul(&s, c2), &s);
    let (vals, _) = jacobi_eigen(&inner);
    let tr_sqrt: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    let mean_term: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b).powi(2)).sum();
    let tr: f64 = (0..mu1.len()).map(|i| c1[i][i] + c2[i][i]).sum();
    mean_term + tr - 2.0 * tr_sqrt
}

#[test]
fn frechet_matches_jacobi_oracle_in_four_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let c1 = random_spd(4, &mut rng);
        let c2 = random_spd(4, &mut rng);
        let mu1: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mu2: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = frechet_gaussians(
            &DVector::from_vec(mu1.clone()),
            &to_dmatrix(&c1),
            &DVector::from_vec(mu2.clone()),
            &to_dmatrix(&c2),
        )
        .unwrap();
        let want = frechet_oracle(&mu1, &c1, &mu2, &c2);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn univariate_closed_form() {
    let d = frechet_gaussians(
        &DVector::from_element(1, 0.0),
        &DMatrix::from_element(1, 1, 1.0),
        &DVector::from_element(1, 1.0),
        &DMatrix::from_element(1, 1, 4.0),
    )
    .unwrap();
    assert!((d - 2.0).abs() < 1e-12);
}

#[test]
fn sample_frechet_matches_oracle_on_fitted_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = DMatrix::from_fn(300, 3, |_, c| c as f64 + rng.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(200, 3, |r, c| if c == 0 { 0.5 * a[(r, 1)] } else { 2.0 * rng.sample::<f64, _>(StandardNormal) });
    let fit = |x: &DMatrix<f64>| -> (Vec<f64>, Mat) {
        let n = x.nrows() as f64;
        let mu: Vec<f64> = (0..3).map(|c| x.column(c).sum() / n).collect();
        let cov = (0..3)
            .map(|i| (0..3).map(|j| (0..x.nrows()).map(|r| (x[(r, i)] - mu[i]) * (x[(r, j)] - mu[j])).sum::<f64>() / (n - 1.0)).collect())
            .collect();
        (mu, cov)
    };
    let (ma, ca) = fit(&a);
    let (mb, cb) = fit(&b);
    let got = frechet_distance(&a, &b).unwrap();
    assert!((got - frechet_oracle(&ma, &ca, &mb, &cb)).abs() < 1e-8);
}
