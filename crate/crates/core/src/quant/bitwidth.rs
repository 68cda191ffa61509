use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of quantization bits, `2 ≤ k ≤ 8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct BitWidth(u8);

impl BitWidth {
    pub const MIN: u8 = 2;
    pub const MAX: u8 = 8;
    pub const EIGHT: BitWidth = BitWidth(8);

    pub fn new(k: u32) -> Result<Self> {
        if (Self::MIN as u32..=Self::MAX as u32).contains(&k) {
            Ok(Self(k as u8))
        } else {
            Err(Error::InvalidBitWidth(k))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// `2^k`, the level count of the floor-based scheme.
    pub fn levels(self) -> u32 {
        1 << self.0
    }

    /// `2^k - 1`, the step denominator of the rounding scheme.
    pub fn max_code(self) -> u32 {
        self.levels() - 1
    }

    /// Every supported bit-width in ascending order.
    pub fn all() -> impl Iterator<Item = BitWidth> {
        (Self::MIN..=Self::MAX).map(BitWidth)
    }
}

impl TryFrom<u8> for BitWidth {
    type Error = Error;

    fn try_from(k: u8) -> Result<Self> {
        Self::new(k as u32)
    }
}

impl From<BitWidth> for u8 {
    fn from(k: BitWidth) -> u8 {
        k.0
    }
}

impl fmt::Display for BitWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Parse a comma-separated bit list such as `"8,6,5,4"`.
pub fn parse_bit_list(s: &str) -> Result<Vec<BitWidth>> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<u32>()
                .map_err(|_| Error::Config(format!("not a bit-width: {part:?}")))
                .and_then(BitWidth::new)
        })
        .collect()
}

/// Which unit-interval quantizer is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantScheme {
    /// `round((2^k - 1) x) / (2^k - 1)`; lower bit-widths need the real weights.
    Original,
    /// `min(floor(2^k x), 2^k - 1) / 2^k`; codes convert downwards by shifting.
    Modified,
}

impl QuantScheme {
    pub fn tag(self) -> u8 {
        match self {
            QuantScheme::Original => 0,
            QuantScheme::Modified => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(QuantScheme::Original),
            1 => Ok(QuantScheme::Modified),
            _ => Err(Error::Format(format!("unknown scheme tag {tag}"))),
        }
    }
}

impl fmt::Display for QuantScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuantScheme::Original => "original",
            QuantScheme::Modified => "modified",
        })
    }
}
