use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::{AlphaGradient, BitWidth, QuantScheme};

/// Whether clipping levels are shared across bit-widths or switched with them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    Shared,
    Switchable,
}

impl ClipMode {
    pub fn tag(self) -> u8 {
        match self {
            ClipMode::Shared => 0,
            ClipMode::Switchable => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ClipMode::Shared),
            1 => Ok(ClipMode::Switchable),
            t => Err(Error::Format(format!("unknown clip mode tag {t}"))),
        }
    }
}

/// Quantization policy of an adaptive model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantConfig {
    pub scheme: QuantScheme,
    /// Registered bit-widths, ascending and unique.
    pub bit_widths: Vec<BitWidth>,
    /// Weight bit-width of the first and last layer at every active bit-width.
    pub first_last_bits: BitWidth,
    /// Bits of the unsigned integer input images.
    pub input_bits: u8,
    pub clip_mode: ClipMode,
    pub alpha_init: f64,
    pub alpha_gradient: AlphaGradient,
}

impl QuantConfig {
    pub fn new(scheme: QuantScheme, bits: &[BitWidth], clip_mode: ClipMode) -> Result<Self> {
        let mut bit_widths = bits.to_vec();
        bit_widths.sort();
        bit_widths.dedup();
        if bit_widths.is_empty() {
            return Err(Error::Config("at least one bit-width must be registered".into()));
        }
        Ok(Self {
            scheme,
            bit_widths,
            first_last_bits: BitWidth::EIGHT,
            input_bits: 8,
            clip_mode,
            alpha_init: 8.0,
            alpha_gradient: AlphaGradient::default(),
        })
    }

    pub fn max_bits(&self) -> BitWidth {
        *self.bit_widths.last().expect("non-empty")
    }

    pub fn min_bits(&self) -> BitWidth {
        self.bit_widths[0]
    }

    pub fn position(&self, k: BitWidth) -> Result<usize> {
        self.bit_widths
            .iter()
            .position(|&b| b == k)
            .ok_or(Error::UnregisteredBitWidth(k.get()))
    }

    pub fn validate(&self) -> Result<()> {
        let sorted = self.bit_widths.windows(2).all(|w| w[0] < w[1]);
        if self.bit_widths.is_empty() || !sorted {
            return Err(Error::Config(
                "bit-widths must be non-empty, ascending and unique".into(),
            ));
        }
        if self.input_bits != 8 {
            return Err(Error::Config("only 8-bit input images are supported".into()));
        }
        if !(self.alpha_init.is_finite() && self.alpha_init > 0.0) {
            return Err(Error::Config(format!(
                "alpha_init must be positive, got {}",
                self.alpha_init
            )));
        }
        Ok(())
    }
}
