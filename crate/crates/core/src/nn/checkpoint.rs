//! Flat binary checkpoints.
//!
//! Layout, all integers `u64` and all reals `f64`, little-endian:
//!
//! ```text
//! "FGAN1"                       5 ASCII bytes
//! network_count
//! per network:
//!     layer_count L
//!     L + 1 layer dims          input dim first
//!     per layer: weight (out × in, row-major), bias (out)
//!     adam_step_count
//!     first moments             same order and layout as the parameters
//!     second moments            same order and layout as the parameters
//! ```
//!
//! Activations and spectral-normalisation vectors are not stored; they are
//! rebuilt from the run configuration.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::adam::{AdamConfig, AdamState};
use super::dense::{Activation, DenseNet, Layer};
use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"FGAN1";

/// One network as read back from a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRecord {
    pub layers: Vec<Layer>,
    pub adam_step_count: u64,
    /// Moments in parameter-tensor order (weight then bias per layer), each
    /// tensor laid out like the in-memory parameter slice.
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl NetworkRecord {
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weight.ncols()];
        dims.extend(self.layers.iter().map(|l| l.weight.nrows()));
        dims
    }

    pub fn to_network(&self, hidden: Activation, output: Activation) -> Result<DenseNet> {
        DenseNet::from_layers(self.layers.clone(), hidden, output)
    }

    pub fn to_adam(&self, config: AdamConfig) -> AdamState {
        AdamState::from_parts(
            config,
            self.first_moment.clone(),
            self.second_moment.clone(),
            self.adam_step_count,
        )
    }
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_row_major<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            put_f64(w, m[(r, c)])?;
        }
    }
    Ok(())
}

/// Writes moments (stored column-major per weight tensor) in the
/// checkpoint's row-major layout.
fn put_moments<W: Write>(w: &mut W, net: &DenseNet, moments: &[Vec<f64>]) -> Result<()> {
    for (i, layer) in net.layers().iter().enumerate() {
        let (rows, cols) = layer.weight.shape();
        let weight = DMatrix::from_column_slice(rows, cols, &moments[2 * i]);
        put_row_major(w, &weight)?;
        for &b in &moments[2 * i + 1] {
            put_f64(w, b)?;
        }
    }
    Ok(())
}

/// Serialises networks and their optimiser state.
pub fn write_checkpoint<W: Write>(writer: &mut W, networks: &[(&DenseNet, &AdamState)]) -> Result<()> {
    writer.write_all(MAGIC)?;
    put_u64(writer, networks.len() as u64)?;
    for (net, adam) in networks {
        if adam.first_moment().len() != net.parameter_sizes().len() {
            return Err(Error::Shape(
                "optimiser state does not match the network it is saved with".into(),
            ));
        }
        let dims = net.layer_dims();
        put_u64(writer, net.layers().len() as u64)?;
        for d in dims {
            put_u64(writer, d as u64)?;
        }
        for layer in net.layers() {
            put_row_major(writer, &layer.weight)?;
            for &b in layer.bias.iter() {
                put_f64(writer, b)?;
            }
        }
        put_u64(writer, adam.step_count())?;
        put_moments(writer, net, adam.first_moment())?;
        put_moments(writer, net, adam.second_moment())?;
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn u64(&mut self) -> Result<u64> {
        let mut buf = [0u8; 8];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        Ok(u64::from_le_bytes(buf))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut buf = [0u8; 8];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        Ok(f64::from_le_bytes(buf))
    }

    fn row_major(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn vector(&mut self, len: usize) -> Result<Vec<f64>> {
        (0..len).map(|_| self.f64()).collect()
    }

    fn moments(&mut self, dims: &[usize]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(2 * (dims.len() - 1));
        for w in dims.windows(2) {
            let weight = self.row_major(w[1], w[0])?;
            out.push(weight.as_slice().to_vec());
            out.push(self.vector(w[1])?);
        }
        Ok(out)
    }
}

const MAX_DIM: u64 = 1 << 24;

pub fn read_checkpoint<R: Read>(reader: R) -> Result<Vec<NetworkRecord>> {
    let mut cursor = Cursor { inner: reader };
    let mut magic = [0u8; 5];
    cursor
        .inner
        .read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("missing magic header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
    }
    let count = cursor.u64()?;
    let mut records = Vec::new();
    for n in 0..count {
        let layer_count = cursor.u64()?;
        if layer_count == 0 || layer_count > 1024 {
            return Err(Error::Checkpoint(format!(
                "network {n}: implausible layer count {layer_count}"
            )));
        }
        let mut dims = Vec::with_capacity(layer_count as usize + 1);
        for _ in 0..=layer_count {
            let d = cursor.u64()?;
            if d == 0 || d > MAX_DIM {
                return Err(Error::Checkpoint(format!("network {n}: bad layer dim {d}")));
            }
            dims.push(d as usize);
        }
        let mut layers = Vec::with_capacity(layer_count as usize);
        for w in dims.windows(2) {
            let weight = cursor.row_major(w[1], w[0])?;
            let bias = DVector::from_vec(cursor.vector(w[1])?);
            layers.push(Layer { weight, bias });
        }
        let adam_step_count = cursor.u64()?;
        let first_moment = cursor.moments(&dims)?;
        let second_moment = cursor.moments(&dims)?;
        records.push(NetworkRecord {
            layers,
            adam_step_count,
            first_moment,
            second_moment,
        });
    }
    let mut rest = Vec::new();
    cursor.inner.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Ok(records)
}
