use crate::engine::{CustomOp, Tensor};
use crate::quant::bitwidth::{BitWidth, QuantScheme};
use crate::scalar::Scalar;

/// Quantize one weight: clamp to `[-1, 1]`, map to `[0, 1]`, quantize, map back.
#[inline]
pub fn quantize_weight_value<T: Scalar>(w: T, k: BitWidth, scheme: QuantScheme) -> T {
    let two = T::one() + T::one();
    let clamped = w.max(-T::one()).min(T::one());
    let unit = (clamped + T::one()) / two;
    two * scheme.quantize_unit(unit, k) - T::one()
}

pub fn quantize_weight<T: Scalar>(w: &Tensor<T>, k: BitWidth, scheme: QuantScheme) -> Tensor<T> {
    w.map(|v| quantize_weight_value(v, k, scheme))
}

/// Straight-through gradient of [`quantize_weight`]: identity on `[-1, 1]`,
/// zero where the clamp saturates.
pub struct WeightQuantOp;

impl<T: Scalar> CustomOp<T> for WeightQuantOp {
    fn name(&self) -> &'static str {
        "quantize_weight"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _output: &Tensor<T>, grad: &Tensor<T>) -> Vec<Option<Tensor<T>>> {
        let w = inputs[0];
        let g = grad
            .zip_map(w, |g, w| if w.abs() <= T::one() { g } else { T::zero() })
            .expect("gradient shape matches weight");
        vec![Some(g)]
    }
}
