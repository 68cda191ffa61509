//! Persistence and configuration: bit-packed model files, run
//! configuration documents and output-directory locking.

pub mod bitpack;
pub mod config;
pub mod lock;
pub mod model_file;
pub mod run;

pub use config::{resolve_source, DataConfig, ModelConfig, RunConfig, DATA_DIR_ENV};
pub use lock::DirLock;
pub use model_file::{convert_file, load_model, read_file, save_model, write_file, ModelFile, WeightStore};
pub use run::{fit_source, load_for, run, RunOutcome};
