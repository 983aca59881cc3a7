use nalgebra::{DMatrix, DVector};

use super::layout::{CombinationMode, FactorLayout, HeadId, HeadSlot, ModelKind};
use super::partition::{scatter_add_columns, select_columns};
use crate::nn::{Activation, DenseNet};
use crate::{Error, Result};

/// A network (or analytic function) producing one pre-sigmoid logit per row.
pub trait LogitHead {
    fn input_dim(&self) -> usize;

    fn logits(&self, x: &DMatrix<f64>) -> Result<DVector<f64>>;

    /// Gradient of `Σ_r upstream[r] · logit(x_r)` with respect to `x`.
    fn input_gradient(&self, x: &DMatrix<f64>, upstream: &DVector<f64>) -> Result<DMatrix<f64>>;
}

impl<T: LogitHead + ?Sized> LogitHead for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn logits(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        (**self).logits(x)
    }

    fn input_gradient(&self, x: &DMatrix<f64>, upstream: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).input_gradient(x, upstream)
    }
}

impl<T: LogitHead + ?Sized> LogitHead for Box<T> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn logits(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        (**self).logits(x)
    }

    fn input_gradient(&self, x: &DMatrix<f64>, upstream: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).input_gradient(x, upstream)
    }
}

fn check_logit_net(net: &DenseNet) -> Result<()> {
    if net.output_dim() != 1 {
        return Err(Error::Configuration(format!(
            "a logit head needs one output, this network has {}",
            net.output_dim()
        )));
    }
    Ok(())
}

impl LogitHead for DenseNet {
    fn input_dim(&self) -> usize {
        DenseNet::input_dim(self)
    }

    fn logits(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        check_logit_net(self)?;
        Ok(self.forward(x)?.logits.column(0).into_owned())
    }

    fn input_gradient(&self, x: &DMatrix<f64>, upstream: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_logit_net(self)?;
        if self.output_activation() != Activation::Identity {
            return Err(Error::Configuration(
                "logit heads must have an identity output activation".into(),
            ));
        }
        let pass = self.forward(x)?;
        let upstream = DMatrix::from_column_slice(upstream.len(), 1, upstream.as_slice());
        Ok(self.backward(&pass.cache, &upstream)?.input)
    }
}

/// A head that returns the same logit everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantHead {
    pub input_dim: usize,
    pub value: f64,
}

impl ConstantHead {
    pub fn zero(input_dim: usize) -> Self {
        Self {
            input_dim,
            value: 0.0,
        }
    }
}

impl LogitHead for ConstantHead {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn logits(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        check_width(self.input_dim, x)?;
        Ok(DVector::from_element(x.nrows(), self.value))
    }

    fn input_gradient(&self, x: &DMatrix<f64>, _upstream: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_width(self.input_dim, x)?;
        Ok(DMatrix::zeros(x.nrows(), x.ncols()))
    }
}

fn check_width(expected: usize, x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::InputShape {
            expected,
            got: x.ncols(),
        });
    }
    Ok(())
}

/// The sub-discriminators of one model together with their layout.
#[derive(Debug, Clone)]
pub struct SubDiscriminatorSet<H> {
    layout: FactorLayout,
    slots: Vec<HeadSlot>,
    heads: Vec<Option<H>>,
}

impl<H: LogitHead> SubDiscriminatorSet<H> {
    /// Creates every required slot's head with `factory`. Optional slots are
    /// left empty.
    pub fn build<F>(layout: FactorLayout, mut factory: F) -> Result<Self>
    where
        F: FnMut(&HeadSlot) -> Result<H>,
    {
        let slots = layout.slots();
        let heads = slots
            .iter()
            .map(|slot| {
                if slot.optional {
                    Ok(None)
                } else {
                    factory(slot).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let set = Self {
            layout,
            slots,
            heads,
        };
        set.check_dims()?;
        Ok(set)
    }

    /// Assembles a set from explicitly supplied heads, rejecting heads the
    /// layout has no slot for and missing required heads.
    pub fn from_heads(layout: FactorLayout, supplied: Vec<(HeadId, H)>) -> Result<Self> {
        let slots = layout.slots();
        let mut heads: Vec<Option<H>> = slots.iter().map(|_| None).collect();
        for (id, head) in supplied {
            let Some(k) = slots.iter().position(|s| s.id == id) else {
                return Err(Error::Configuration(format!(
                    "head {id} is not allowed in {} {} layout",
                    layout.kind(),
                    layout.mode()
                )));
            };
            if heads[k].is_some() {
                return Err(Error::Configuration(format!("head {id} supplied twice")));
            }
            heads[k] = Some(head);
        }
        if let Some(missing) = slots.iter().zip(&heads).find(|(s, h)| !s.optional && h.is_none()) {
            return Err(Error::Configuration(format!(
                "{} {} layout requires head {}",
                layout.kind(),
                layout.mode(),
                missing.0.id
            )));
        }
        let set = Self {
            layout,
            slots,
            heads,
        };
        set.check_dims()?;
        Ok(set)
    }

    fn check_dims(&self) -> Result<()> {
        for (slot, head) in self.iter() {
            if head.input_dim() != slot.input_dim() {
                return Err(Error::Configuration(format!(
                    "head {} takes {} inputs, its slot provides {}",
                    slot.id,
                    head.input_dim(),
                    slot.input_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> &FactorLayout {
        &self.layout
    }

    pub fn mode(&self) -> CombinationMode {
        self.layout.mode()
    }

    pub fn kind(&self) -> ModelKind {
        self.layout.kind()
    }

    pub fn slots(&self) -> &[HeadSlot] {
        &self.slots
    }

    /// Present heads with their slots, in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&HeadSlot, &H)> {
        self.slots
            .iter()
            .zip(&self.heads)
            .filter_map(|(s, h)| h.as_ref().map(|h| (s, h)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&HeadSlot, &mut H)> {
        self.slots
            .iter()
            .zip(self.heads.iter_mut())
            .filter_map(|(s, h)| h.as_mut().map(|h| (s, h)))
    }

    pub fn head_ids(&self) -> Vec<HeadId> {
        self.iter().map(|(s, _)| s.id).collect()
    }

    pub fn head(&self, id: HeadId) -> Option<&H> {
        self.slots
            .iter()
            .position(|s| s.id == id)
            .and_then(|k| self.heads[k].as_ref())
    }

    pub fn head_mut(&mut self, id: HeadId) -> Option<&mut H> {
        let k = self.slots.iter().position(|s| s.id == id)?;
        self.heads[k].as_mut()
    }

    pub fn slot(&self, id: HeadId) -> Option<&HeadSlot> {
        self.slots.iter().find(|s| s.id == id)
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<()> {
        check_width(self.layout.partition().total_dim(), x)
    }

    /// Each present head's raw logit on its slice of `x`.
    pub fn head_logits(&self, x: &DMatrix<f64>) -> Result<Vec<(HeadId, DVector<f64>)>> {
        self.check_input(x)?;
        self.iter()
            .map(|(slot, head)| Ok((slot.id, head.logits(&select_columns(x, &slot.columns))?)))
            .collect()
    }

    /// Combined logit for every row of `x`, per the set's layout.
    pub fn logits(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        let mut total = DVector::zeros(x.nrows());
        for (slot, head) in self.iter() {
            let l = head.logits(&select_columns(x, &slot.columns))?;
            total.axpy(slot.sign, &l, 1.0);
        }
        Ok(total)
    }

    /// Gradient of `Σ_r upstream[r] · combined_logit(x_r)` with respect to
    /// `x`: each head's input gradient, signed and scattered back to the
    /// columns it reads.
    pub fn input_gradient(&self, x: &DMatrix<f64>, upstream: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        if upstream.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "{} upstream values for {} rows",
                upstream.len(),
                x.nrows()
            )));
        }
        let mut grad = DMatrix::zeros(x.nrows(), x.ncols());
        for (slot, head) in self.iter() {
            let signed = upstream * slot.sign;
            let g = head.input_gradient(&select_columns(x, &slot.columns), &signed)?;
            scatter_add_columns(&mut grad, &slot.columns, &g);
        }
        Ok(grad)
    }

    fn require(&self, mode: CombinationMode) -> Result<()> {
        if self.layout.kind() != ModelKind::Factorgan {
            return Err(Error::Configuration(
                "the baseline has a single joint head; use logits()".into(),
            ));
        }
        if self.layout.mode() != mode {
            return Err(Error::ModeMismatch {
                expected: mode,
                actual: self.layout.mode(),
            });
        }
        Ok(())
    }

    fn single(&self, x: &[f64]) -> Result<f64> {
        let m = DMatrix::from_row_slice(1, x.len(), x);
        Ok(self.logits(&m)?[0])
    }

    /// `d_P(x) − d_Q(x) + Σᵢ dᵢ(xⁱ)`.
    pub fn combined_logit(&self, x: &[f64]) -> Result<f64> {
        self.require(CombinationMode::Joint)?;
        self.single(x)
    }

    /// `d_P(x) − d_Q(x) + Σ_{i≥1} dᵢ(xⁱ)` with `x¹` the conditioning input.
    /// `output` lists the values of parts `1..K` in partition order.
    pub fn conditional_combined_logit(&self, input: &[f64], output: &[f64]) -> Result<f64> {
        self.require(CombinationMode::Conditional)?;
        let partition = self.layout.partition();
        let input_dims = partition.part(0)?;
        if input.len() != input_dims.len() {
            return Err(Error::InputShape {
                expected: input_dims.len(),
                got: input.len(),
            });
        }
        let out_len = partition.total_dim() - input_dims.len();
        if output.len() != out_len {
            return Err(Error::InputShape {
                expected: out_len,
                got: output.len(),
            });
        }
        let mut parts = vec![input.to_vec()];
        let mut offset = 0;
        for p in &partition.parts()[1..] {
            parts.push(output[offset..offset + p.len()].to_vec());
            offset += p.len();
        }
        self.single(&partition.join(&parts)?)
    }

    /// `−d_Q(x) + Σᵢ dᵢ(xⁱ)`.
    pub fn independent_combined_logit(&self, x: &[f64]) -> Result<f64> {
        self.require(CombinationMode::IndependentMarginals)?;
        self.single(x)
    }

    /// `d_P − d_Q + Σᵢ [d_P,ᵢ − d_Q,ᵢ + Σⱼ dᵢⱼ(xⁱʲ)]`.
    pub fn hierarchical_combined_logit(&self, x: &[f64]) -> Result<f64> {
        self.require(CombinationMode::Hierarchical)?;
        self.single(x)
    }

    /// `d₁(x¹) + Σ_{i≥2} [d_P,ᵢ(x¹..xⁱ) − d_Q,ᵢ(x¹..xⁱ) + dᵢ(xⁱ)]`, with
    /// the sequence given part by part.
    pub fn autoregressive_combined_logit(&self, sequence: &[Vec<f64>]) -> Result<f64> {
        self.require(CombinationMode::Autoregressive)?;
        let x = self.layout.partition().join(sequence)?;
        self.single(&x)
    }
}
