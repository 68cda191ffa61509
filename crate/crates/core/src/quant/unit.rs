//! Quantizers on the unit interval.

use crate::error::{Error, Result};
use crate::quant::bitwidth::{BitWidth, QuantScheme};
use crate::scalar::Scalar;

fn check_unit<T: Scalar>(x: T) -> Result<()> {
    if x >= T::zero() && x <= T::one() {
        Ok(())
    } else {
        Err(Error::contract(format!("unit quantizer input {x} outside [0, 1]")))
    }
}

/// `round(a x) / a` with `a = 2^k - 1`; ties round away from zero.
pub fn quantize_unit_original<T: Scalar>(x: T, k: BitWidth) -> Result<T> {
    check_unit(x)?;
    Ok(original_unchecked(x, k))
}

/// `min(floor(â x), â - 1) / â` with `â = 2^k`.
pub fn quantize_unit_modified<T: Scalar>(x: T, k: BitWidth) -> Result<T> {
    check_unit(x)?;
    Ok(modified_unchecked(x, k))
}

#[inline]
pub(crate) fn original_unchecked<T: Scalar>(x: T, k: BitWidth) -> T {
    let a = T::from_u32(k.max_code()).expect("small integer");
    (a * x).round() / a
}

#[inline]
pub(crate) fn modified_unchecked<T: Scalar>(x: T, k: BitWidth) -> T {
    let levels = T::from_u32(k.levels()).expect("small integer");
    let top = T::from_u32(k.max_code()).expect("small integer");
    (levels * x).floor().min(top) / levels
}

/// Integer level of `x` under the floor-based scheme.
#[inline]
pub fn modified_code<T: Scalar>(x: T, k: BitWidth) -> u32 {
    let levels = T::from_u32(k.levels()).expect("small integer");
    let code = (levels * x).floor().to_u32().unwrap_or(0);
    code.min(k.max_code())
}

impl QuantScheme {
    /// Apply this scheme's unit quantizer. `x` must already lie in `[0, 1]`.
    #[inline]
    pub fn quantize_unit<T: Scalar>(self, x: T, k: BitWidth) -> T {
        debug_assert!(x >= T::zero() && x <= T::one(), "unit input {x}");
        match self {
            QuantScheme::Original => original_unchecked(x, k),
            QuantScheme::Modified => modified_unchecked(x, k),
        }
    }

    /// Checked variant of [`QuantScheme::quantize_unit`].
    pub fn try_quantize_unit<T: Scalar>(self, x: T, k: BitWidth) -> Result<T> {
        match self {
            QuantScheme::Original => quantize_unit_original(x, k),
            QuantScheme::Modified => quantize_unit_modified(x, k),
        }
    }

    /// Number of distinct outputs over `[0, 1]`.
    pub fn level_count(self, k: BitWidth) -> u32 {
        match self {
            QuantScheme::Original => k.max_code() + 1,
            QuantScheme::Modified => k.levels(),
        }
    }

    /// Largest output value.
    pub fn top<T: Scalar>(self, k: BitWidth) -> T {
        self.quantize_unit(T::one(), k)
    }
}
