use crate::engine::tensor::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

/// Which regularization group a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecayGroup {
    Weights,
    ClippingLevels,
    BnAffine,
    None,
}

impl DecayGroup {
    /// Weight decay applies to weights and clipping levels only.
    pub fn decays(self) -> bool {
        matches!(self, DecayGroup::Weights | DecayGroup::ClippingLevels)
    }
}

/// A trainable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub group: DecayGroup,
    touched: bool,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(value: Tensor<T>, group: DecayGroup) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            value,
            grad,
            group,
            touched: false,
        }
    }

    /// Start a new accumulation window.
    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
        self.touched = false;
    }

    pub fn accumulate(&mut self, g: &Tensor<T>) -> Result<()> {
        self.grad.add_assign(g)?;
        self.touched = true;
        Ok(())
    }

    /// Whether any gradient reached this parameter in the current window.
    pub fn touched(&self) -> bool {
        self.touched
    }
}
