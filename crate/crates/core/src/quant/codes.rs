//! Integer storage form of floor-scheme weights and exact bit-width reduction.

use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::quant::bitwidth::{BitWidth, QuantScheme};
use crate::quant::unit::modified_code;
use crate::scalar::Scalar;

/// Level indices of quantized weights at a given bit-width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codes {
    pub bits: BitWidth,
    pub values: Vec<u8>,
}

impl Codes {
    /// Drop the low `self.bits - to` bits of every code.
    pub fn downshift(&self, to: BitWidth) -> Result<Codes> {
        Ok(Codes {
            bits: to,
            values: downshift_codes(&self.values, self.bits, to)?,
        })
    }

    pub fn decode<T: Scalar>(&self) -> Vec<T> {
        weight_decode(&self.values, self.bits)
    }
}

/// Map floor-scheme quantized weights to their level index in `[0, 2^k)`.
///
/// Every value must sit exactly on the `k`-bit grid `2c/2^k − 1`.
pub fn weight_encode<T: Scalar>(wq: &Tensor<T>, k: BitWidth) -> Result<Codes> {
    let levels = T::from_u32(k.levels()).expect("small integer");
    let two = T::one() + T::one();
    let mut values = Vec::with_capacity(wq.numel());
    for (i, &w) in wq.data().iter().enumerate() {
        let scaled = (w + T::one()) / two * levels;
        let code = scaled.round();
        let in_range = code >= T::zero() && code < levels;
        if !in_range || scaled != code || decode_one::<T>(code.to_u32().unwrap_or(0), k) != w {
            return Err(Error::contract(format!(
                "weight {w} at index {i} is not on the {k}-bit grid"
            )));
        }
        values.push(code.to_u8().expect("code < 256"));
    }
    Ok(Codes { bits: k, values })
}

#[inline]
fn decode_one<T: Scalar>(code: u32, k: BitWidth) -> T {
    let levels = T::from_u32(k.levels()).expect("small integer");
    let two = T::one() + T::one();
    two * (T::from_u32(code).expect("small integer") / levels) - T::one()
}

pub fn weight_decode<T: Scalar>(codes: &[u8], k: BitWidth) -> Vec<T> {
    codes.iter().map(|&c| decode_one(c as u32, k)).collect()
}

/// Level indices of real weights under the floor scheme, without going
/// through the real-valued quantizer.
pub fn weight_codes<T: Scalar>(w: &Tensor<T>, k: BitWidth) -> Codes {
    let two = T::one() + T::one();
    let values = w
        .data()
        .iter()
        .map(|&v| {
            let unit = (v.max(-T::one()).min(T::one()) + T::one()) / two;
            modified_code(unit, k) as u8
        })
        .collect();
    Codes { bits: k, values }
}

/// `code >> (from − to)` for every code.
pub fn downshift_codes(codes: &[u8], from: BitWidth, to: BitWidth) -> Result<Vec<u8>> {
    if from <= to {
        return Err(Error::contract(format!(
            "downshift needs a lower target bit-width ({from} -> {to})"
        )));
    }
    let shift = from.get() - to.get();
    let limit = from.levels();
    codes
        .iter()
        .map(|&c| {
            if (c as u32) < limit {
                Ok(c >> shift)
            } else {
                Err(Error::contract(format!("code {c} exceeds {from}-bit range")))
            }
        })
        .collect()
}

/// Only the floor scheme has shift-convertible codes.
pub fn require_modified(scheme: QuantScheme, what: &str) -> Result<()> {
    match scheme {
        QuantScheme::Modified => Ok(()),
        QuantScheme::Original => Err(Error::Unsupported(format!(
            "{what} needs the modified scheme; original-scheme models must keep full-precision weights"
        ))),
    }
}
