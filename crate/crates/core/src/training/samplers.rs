use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Result};

/// `n` rows drawn uniformly with replacement.
pub fn sample_rows<R: Rng + ?Sized>(pool: &DMatrix<f64>, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if pool.nrows() == 0 {
        return Err(Error::InsufficientData("cannot sample from an empty pool".into()));
    }
    let picks: Vec<usize> = (0..n).map(|_| rng.gen_range(0..pool.nrows())).collect();
    Ok(DMatrix::from_fn(n, pool.ncols(), |r, c| pool[(picks[r], c)]))
}

fn check_blocks(blocks: &[Vec<usize>], width: usize) -> Result<()> {
    if blocks.iter().flatten().any(|&c| c >= width) {
        return Err(Error::Shape(format!("blocks {blocks:?} exceed width {width}")));
    }
    Ok(())
}

/// Joint-shaped rows whose blocks each come from an independently chosen
/// pool row: the marginals of every block are kept, coupling between blocks
/// is removed.
pub fn independent_real_batch<R: Rng + ?Sized>(
    pool: &DMatrix<f64>,
    blocks: &[Vec<usize>],
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if pool.nrows() < 2 {
        return Err(Error::InsufficientData(format!(
            "decoupling needs at least two pool rows, got {}",
            pool.nrows()
        )));
    }
    check_blocks(blocks, pool.ncols())?;
    let mut out = DMatrix::zeros(n, pool.ncols());
    for r in 0..n {
        for block in blocks {
            let src = rng.gen_range(0..pool.nrows());
            for &c in block {
                out[(r, c)] = pool[(src, c)];
            }
        }
    }
    Ok(out)
}

/// Permutes every block but the first independently across rows.
pub fn shuffle_fake_parts<R: Rng + ?Sized>(
    batch: &DMatrix<f64>,
    blocks: &[Vec<usize>],
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if batch.nrows() < 2 {
        return Err(Error::InsufficientData(format!(
            "shuffling needs at least two rows, got {}",
            batch.nrows()
        )));
    }
    check_blocks(blocks, batch.ncols())?;
    let mut out = batch.clone();
    let mut perm: Vec<usize> = (0..batch.nrows()).collect();
    for block in blocks.iter().skip(1) {
        perm.shuffle(rng);
        for (r, &src) in perm.iter().enumerate() {
            for &c in block {
                out[(r, c)] = batch[(src, c)];
            }
        }
    }
    Ok(out)
}
