//! Quantized neural networks with adaptive bit-widths.
//!
//! One set of real-valued weights is trained so that it runs at any of several
//! registered bit-widths. Per bit-width the model switches its activation
//! clipping levels and batch-norm statistics; with the floor quantizer the
//! stored integer weights convert to lower bit-widths by a right shift.

pub mod analysis;
pub mod data;
pub mod engine;
pub mod error;
pub mod io;
pub mod net;
pub mod quant;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use quant::{BitWidth, QuantScheme};
pub use scalar::Scalar;

pub type AdaptiveModel32 = net::AdaptiveModel<f32>;
pub type AdaptiveModel64 = net::AdaptiveModel<f64>;
pub type Tensor32 = engine::Tensor<f32>;
pub type Tensor64 = engine::Tensor<f64>;
