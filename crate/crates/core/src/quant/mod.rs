//! Quantization arithmetic: unit-interval quantizers, weight and activation
//! quantizers with their straight-through gradients, weight rescaling and
//! integer codes.

pub mod bitwidth;
pub mod codes;
pub mod pact;
pub mod sat;
pub mod unit;
pub mod weight;

pub use bitwidth::{parse_bit_list, BitWidth, QuantScheme};
pub use codes::{downshift_codes, weight_codes, weight_decode, weight_encode, Codes};
pub use pact::{pact_clip, pact_quantize, pact_quantize_value, AlphaGradient, PactOp, ALPHA_FLOOR};
pub use sat::{sat_rescale, sat_scale};
pub use unit::{modified_code, quantize_unit_modified, quantize_unit_original};
pub use weight::{quantize_weight, quantize_weight_value, WeightQuantOp};
