//! Training regimes, batch-norm calibration and evaluation.

pub mod eval;
pub mod metrics;
pub mod plan;
pub mod regimes;

pub use eval::{accuracy, calibrate_bn, calibrate_bn_with, evaluate, evaluate_all, evaluate_at};
pub use metrics::{EpochRecord, MetricsSink, NoMetrics};
pub use plan::{progressive_order, Direction, Regime, TrainPlan};
pub use regimes::{continue_progressive, pretrain_fp, train_individual, train_joint, train_progressive};
