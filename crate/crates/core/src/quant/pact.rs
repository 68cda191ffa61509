//! Activation clipping with a learnable level followed by quantization.

use serde::{Deserialize, Serialize};

use crate::engine::{CustomOp, Tensor};
use crate::error::{Error, Result};
use crate::quant::bitwidth::{BitWidth, QuantScheme};
use crate::scalar::Scalar;

/// Smallest clipping level the optimizer may leave behind.
pub const ALPHA_FLOOR: f64 = 1e-2;

/// `½(|x| − |x − α| + α)`, i.e. `x` clipped to `[0, α]`.
///
/// The result is clamped to `[0, α]` to absorb last-bit rounding of the
/// absolute-value form.
#[inline]
pub fn pact_clip<T: Scalar>(x: T, alpha: T) -> T {
    let half = T::from_f64_lossy(0.5);
    let v = half * (x.abs() - (x - alpha).abs() + alpha);
    v.max(T::zero()).min(alpha)
}

#[inline]
pub fn pact_quantize_value<T: Scalar>(x: T, alpha: T, k: BitWidth, scheme: QuantScheme) -> T {
    let clipped = pact_clip(x, alpha);
    alpha * scheme.quantize_unit(clipped / alpha, k)
}

/// `α · q_k(clip(x) / α)` elementwise.
pub fn pact_quantize<T: Scalar>(x: &Tensor<T>, alpha: T, k: BitWidth, scheme: QuantScheme) -> Result<Tensor<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::contract(format!("clipping level must be positive, got {alpha}")));
    }
    Ok(x.map(|v| pact_quantize_value(v, alpha, k, scheme)))
}

/// How the clipping level receives its gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaGradient {
    /// Differentiate `α · q_k(x̃/α)` with the rounding treated as identity:
    /// `q_k(x̃/α) − x̃/α` inside the clip range, `q_k(1)` above it.
    #[default]
    QuantError,
    /// The clip indicator only: 1 where `x ≥ α`, 0 elsewhere.
    ClipIndicator,
}

/// Backward of [`pact_quantize`]. Inputs are `[x, alpha]`, alpha of shape `[1]`.
///
/// The input gradient is passed straight through where `0 < x < α`.
pub struct PactOp {
    pub bits: BitWidth,
    pub scheme: QuantScheme,
    pub alpha_gradient: AlphaGradient,
}

impl PactOp {
    /// Per-element derivative of the output w.r.t. α.
    #[inline]
    pub fn alpha_partial<T: Scalar>(&self, x: T, alpha: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        if x >= alpha {
            return match self.alpha_gradient {
                AlphaGradient::QuantError => self.scheme.top(self.bits),
                AlphaGradient::ClipIndicator => T::one(),
            };
        }
        match self.alpha_gradient {
            AlphaGradient::QuantError => {
                let u = pact_clip(x, alpha) / alpha;
                self.scheme.quantize_unit(u, self.bits) - u
            }
            AlphaGradient::ClipIndicator => T::zero(),
        }
    }
}

impl<T: Scalar> CustomOp<T> for PactOp {
    fn name(&self) -> &'static str {
        "pact_quantize"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _output: &Tensor<T>, grad: &Tensor<T>) -> Vec<Option<Tensor<T>>> {
        let (x, alpha) = (inputs[0], inputs[1].data()[0]);
        let mut dx = Vec::with_capacity(x.numel());
        let mut dalpha = T::zero();
        for (&xv, &g) in x.data().iter().zip(grad.data()) {
            dx.push(if xv > T::zero() && xv < alpha { g } else { T::zero() });
            dalpha += g * self.alpha_partial(xv, alpha);
        }
        vec![
            Some(Tensor::new(x.shape().to_vec(), dx).expect("same shape")),
            Some(Tensor::scalar(dalpha)),
        ]
    }
}
