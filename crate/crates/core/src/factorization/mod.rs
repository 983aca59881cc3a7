//! Partitions of the joint variable and the combination of sub-discriminator
//! logits into a joint discriminator.
//!
//! With `D = σ(d)` for every head, the combined discriminator is
//! `σ(d_P − d_Q + Σᵢ dᵢ)`. When each head is optimal its logit is the log of
//! the density ratio it targets, so the sum is `log p(x)/q(x)` and the
//! combined output is `p/(p+q)`. All combination happens in logit space.

mod heads;
mod layout;
mod partition;
mod ratio;

pub use heads::{ConstantHead, LogitHead, SubDiscriminatorSet};
pub use layout::{
    CombinationMode, FactorLayout, HeadId, HeadRole, HeadSlot, HierarchySpec, ModelKind,
};
pub use partition::{scatter_add_columns, select_columns, Partition};
pub use ratio::{combine_logits, h_inv, h_map, product_form_probability};
