use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Name of the training phase, e.g. `fp`, `individual-4`, `joint`.
    pub phase: String,
    /// 1-based epoch within the phase.
    pub epoch: usize,
    /// Learning rate of the last step of the epoch.
    pub lr: f64,
    /// Mean per-batch loss, summed over the trained bit-widths.
    pub loss: f64,
    /// Accuracy in percent per precision label (`fp` or the bit-width).
    pub train_acc: BTreeMap<String, f64>,
    pub val_acc: BTreeMap<String, f64>,
}

impl EpochRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Receives every epoch record as it is produced.
pub trait MetricsSink {
    fn record(&mut self, record: &EpochRecord);
}

impl MetricsSink for Vec<EpochRecord> {
    fn record(&mut self, record: &EpochRecord) {
        self.push(record.clone());
    }
}

/// Discards records.
pub struct NoMetrics;

impl MetricsSink for NoMetrics {
    fn record(&mut self, _: &EpochRecord) {}
}

impl<F: FnMut(&EpochRecord)> MetricsSink for F {
    fn record(&mut self, record: &EpochRecord) {
        self(record)
    }
}
