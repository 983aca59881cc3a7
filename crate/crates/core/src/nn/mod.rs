//! Dense-network substrate shared by every generator and discriminator.

mod adam;
mod checkpoint;
mod dense;
mod spectral;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, NetworkRecord, MAGIC};
pub use dense::{
    sigmoid, Activation, Backward, DenseNet, ForwardCache, ForwardPass, Layer, LayerGradient,
    ParamGradients, LEAKY_RELU_SLOPE,
};
pub use spectral::{spectral_normalize, SpectralNormState};
