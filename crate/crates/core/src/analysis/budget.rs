//! Bit-operation and storage accounting over MAC manifests.

use crate::analysis::manifest::MacManifest;
use crate::net::LayerRole;
use crate::quant::{BitWidth, QuantScheme};

/// Bits of one stored real value.
pub const FLOAT_BITS: u64 = 32;
/// Bits of one stored clipping level.
pub const ALPHA_BITS: u64 = 32;
pub const MIB: f64 = (1u64 << 20) as f64;

/// Weight and activation bit-widths that enter each layer's multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitPolicy {
    pub first_last_weight_bits: u64,
    pub input_bits: u64,
}

impl Default for BitPolicy {
    fn default() -> Self {
        Self {
            first_last_weight_bits: 8,
            input_bits: 8,
        }
    }
}

impl BitPolicy {
    /// `(weight_bits, activation_bits)` of a layer at bit-width `k`.
    pub fn layer_bits(&self, role: LayerRole, k: BitWidth) -> (u64, u64) {
        let k = k.get() as u64;
        match role {
            LayerRole::First => (self.first_last_weight_bits, self.input_bits),
            LayerRole::Last => (self.first_last_weight_bits, k),
            LayerRole::Interior => (k, k),
        }
    }

    pub fn weight_bits(&self, role: LayerRole, k: BitWidth) -> u64 {
        self.layer_bits(role, k).0
    }
}

/// `Σ macs × weight_bits × activation_bits`.
pub fn bitops(manifest: &MacManifest, k: BitWidth, policy: &BitPolicy) -> u64 {
    manifest
        .layers
        .iter()
        .map(|l| {
            let (w, a) = policy.layer_bits(l.role, k);
            l.macs * w * a
        })
        .sum()
}

/// Stored size of a model, or the marker that real-valued master weights
/// must be kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSize {
    Bytes(f64),
    FullPrecision,
}

impl ModelSize {
    pub fn mib(self) -> Option<f64> {
        match self {
            ModelSize::Bytes(b) => Some(b / MIB),
            ModelSize::FullPrecision => None,
        }
    }
}

impl std::fmt::Display for ModelSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelSize::Bytes(b) => write!(f, "{:.2} MiB", b / MIB),
            ModelSize::FullPrecision => f.write_str("FP"),
        }
    }
}

fn weight_bits_total(manifest: &MacManifest, k: BitWidth, policy: &BitPolicy) -> u64 {
    manifest
        .layers
        .iter()
        .map(|l| l.params * policy.weight_bits(l.role, k))
        .sum()
}

/// A model trained at the single bit-width `k`: weights at their layer
/// bit-width, biases and BN affine parameters at 32 bits.
pub fn individual_size(manifest: &MacManifest, k: BitWidth, policy: &BitPolicy) -> f64 {
    (weight_bits_total(manifest, k, policy) + manifest.total_fp_params() * FLOAT_BITS) as f64 / 8.0
}

/// An adaptive model over `bits`.
///
/// Under the floor scheme only the codes of the largest bit-width are
/// stored, plus one set of biases and BN affine parameters and one clipping
/// level per clipped layer for every bit-width. The rounding scheme needs
/// the real-valued weights.
pub fn adaptive_size(manifest: &MacManifest, scheme: QuantScheme, bits: &[BitWidth], policy: &BitPolicy) -> ModelSize {
    let Some(&max) = bits.iter().max() else {
        return ModelSize::Bytes(0.0);
    };
    match scheme {
        QuantScheme::Original => ModelSize::FullPrecision,
        QuantScheme::Modified => {
            let n = bits.len() as u64;
            let total = weight_bits_total(manifest, max, policy)
                + manifest.total_fp_params() * FLOAT_BITS * n
                + manifest.clipped_layers() as u64 * n * ALPHA_BITS;
            ModelSize::Bytes(total as f64 / 8.0)
        }
    }
}

/// Bytes of a switchable clipping-level table over `bit_count` bit-widths
/// divided by the bytes of all other parameters stored as 32-bit reals.
pub fn scl_overhead_ratio(manifest: &MacManifest, bit_count: usize) -> f64 {
    let alpha = (manifest.clipped_layers() * bit_count) as f64 * ALPHA_BITS as f64;
    let other = (manifest.total_params() + manifest.total_fp_params()) as f64 * FLOAT_BITS as f64;
    if other == 0.0 {
        0.0
    } else {
        alpha / other
    }
}
