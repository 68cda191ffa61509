//! The adaptive model: shared weights executed at a selectable bit-width.

pub mod arch;
pub mod bn;
pub mod clip;
pub mod config;
pub mod model;

pub use arch::{ArchSpec, LayerRole, LayerSpec, ResolvedLayer, WeightKind};
pub use bn::{BnSet, SwitchableBn};
pub use clip::ClippingLevelTable;
pub use config::{ClipMode, QuantConfig};
pub use model::{AdaptiveModel, BatchOutcome, Precision, WeightLayer};
