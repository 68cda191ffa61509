//! Diagnostic studies and accounting: clipping-error sweeps, clipping and
//! variance profiles, bit-operation and model-size budgets.

pub mod budget;
pub mod manifest;
pub mod profile;
pub mod sweep;

pub use budget::{adaptive_size, bitops, individual_size, scl_overhead_ratio, BitPolicy, ModelSize, MIB};
pub use manifest::{MacManifest, ManifestLayer};
pub use profile::{
    clipping_profile, clipping_profile_csv, monotone_layer_fraction, variance_profile, variance_profile_csv, ClipRow,
    VarianceRow,
};
pub use sweep::{
    clipping_sweep, default_alpha_grid, draw_preactivations, log_grid, relative_error, synthetic_clipping_error,
    SweepPoint, SweepResult,
};
