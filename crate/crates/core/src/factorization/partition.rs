use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An ordered split of the dimensions `0..d` into `K ≥ 2` disjoint,
/// non-empty parts. Index order inside each part is preserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Partition {
    parts: Vec<Vec<usize>>,
    total_dim: usize,
}

impl Partition {
    pub fn new(parts: Vec<Vec<usize>>) -> Result<Self> {
        if parts.len() < 2 {
            return Err(Error::Partition(format!(
                "need at least two parts, got {}",
                parts.len()
            )));
        }
        if let Some(i) = parts.iter().position(|p| p.is_empty()) {
            return Err(Error::Partition(format!("part {i} is empty")));
        }
        let total_dim: usize = parts.iter().map(Vec::len).sum();
        check_cover(&parts, total_dim)?;
        Ok(Self { parts, total_dim })
    }

    /// Consecutive blocks of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let parts = sizes
            .iter()
            .map(|&n| {
                let part = (start..start + n).collect();
                start += n;
                part
            })
            .collect();
        Self::new(parts)
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn part(&self, i: usize) -> Result<&[usize]> {
        self.parts
            .get(i)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Partition(format!("no part {i} in a {}-part partition", self.len())))
    }

    /// Number of parts `K`.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn split(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.total_dim {
            return Err(Error::InputShape {
                expected: self.total_dim,
                got: x.len(),
            });
        }
        Ok(self
            .parts
            .iter()
            .map(|p| p.iter().map(|&i| x[i]).collect())
            .collect())
    }

    /// Inverse of [`Partition::split`].
    pub fn join(&self, parts: &[Vec<f64>]) -> Result<Vec<f64>> {
        if parts.len() != self.parts.len() {
            return Err(Error::Shape(format!(
                "expected {} parts, got {}",
                self.parts.len(),
                parts.len()
            )));
        }
        let mut x = vec![0.0; self.total_dim];
        for (k, (idx, values)) in self.parts.iter().zip(parts).enumerate() {
            if idx.len() != values.len() {
                return Err(Error::Shape(format!(
                    "part {k} has {} dims, got {} values",
                    idx.len(),
                    values.len()
                )));
            }
            for (&i, &v) in idx.iter().zip(values) {
                x[i] = v;
            }
        }
        Ok(x)
    }

    /// Row-wise split of a batch.
    pub fn split_batch(&self, x: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        if x.ncols() != self.total_dim {
            return Err(Error::InputShape {
                expected: self.total_dim,
                got: x.ncols(),
            });
        }
        Ok(self.parts.iter().map(|p| select_columns(x, p)).collect())
    }
}

impl TryFrom<Vec<Vec<usize>>> for Partition {
    type Error = Error;

    fn try_from(parts: Vec<Vec<usize>>) -> Result<Self> {
        Partition::new(parts)
    }
}

impl From<Partition> for Vec<Vec<usize>> {
    fn from(p: Partition) -> Self {
        p.parts
    }
}

/// Checks that `sets` are disjoint and cover `0..n` exactly.
pub(crate) fn check_cover(sets: &[Vec<usize>], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for (k, set) in sets.iter().enumerate() {
        for &i in set {
            if i >= n {
                return Err(Error::Partition(format!(
                    "part {k} names dimension {i}, but only {n} dimensions are covered"
                )));
            }
            if seen[i] {
                return Err(Error::Partition(format!("dimension {i} appears twice")));
            }
            seen[i] = true;
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(Error::Partition(format!("dimension {i} is not covered"))),
        None => Ok(()),
    }
}

/// Gathers the given columns (in order) into a new matrix.
pub fn select_columns(x: &DMatrix<f64>, columns: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), columns.len(), |r, c| x[(r, columns[c])])
}

/// Adds `values` into the given columns of `target`.
pub fn scatter_add_columns(target: &mut DMatrix<f64>, columns: &[usize], values: &DMatrix<f64>) {
    for (c, &col) in columns.iter().enumerate() {
        for r in 0..target.nrows() {
            target[(r, col)] += values[(r, c)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn contiguous_split() {
        let p = Partition::contiguous(&[2, 2]).unwrap();
        let parts = p.split(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(parts, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn interleaved_split() {
        let p = Partition::new(vec![vec![0, 2], vec![1, 3]]).unwrap();
        let parts = p.split(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(parts, vec![vec![1.0, 3.0], vec![2.0, 4.0]]);
    }

    #[test]
    fn invalid_partitions() {
        assert!(Partition::new(vec![vec![0, 1]]).is_err());
        assert!(Partition::new(vec![vec![0], vec![]]).is_err());
        assert!(Partition::new(vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::new(vec![vec![0], vec![2]]).is_err());
    }

    #[test]
    fn length_mismatch() {
        let p = Partition::contiguous(&[1, 1]).unwrap();
        assert!(matches!(p.split(&[1.0]), Err(Error::InputShape { .. })));
    }

    proptest! {
        #[test]
        fn join_inverts_split(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
                              cut in 1usize..6,
                              x in prop::collection::vec(-10.0f64..10.0, 6)) {
            let p = Partition::new(vec![perm[..cut].to_vec(), perm[cut..].to_vec()]).unwrap();
            let parts = p.split(&x).unwrap();
            prop_assert_eq!(p.join(&parts).unwrap(), x);
        }
    }
}
