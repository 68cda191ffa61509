use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{AdaptiveModel, Precision};
use crate::quant::BitWidth;
use crate::scalar::Scalar;

pub const EVAL_BATCH: usize = 256;
pub const CALIBRATION_BATCHES: usize = 50;
pub const CALIBRATION_BATCH_SIZE: usize = 128;

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Top-1 accuracy in percent at the model's active precision.
pub fn accuracy<T: Scalar>(model: &AdaptiveModel<T>, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Dataset("cannot evaluate on an empty dataset".into()));
    }
    let mut correct = 0;
    for (images, labels) in data.sequential_batches(EVAL_BATCH) {
        let logits = model.logits(&images)?;
        let classes = logits.shape()[1];
        correct += logits
            .data()
            .chunks(classes)
            .zip(&labels)
            .filter(|(row, &l)| argmax(row) == l)
            .count();
    }
    Ok(100.0 * correct as f64 / data.len() as f64)
}

/// Top-1 accuracy in percent at bit-width `k`. The model's active precision
/// is restored afterwards.
pub fn evaluate<T: Scalar>(model: &mut AdaptiveModel<T>, k: BitWidth, data: &Dataset) -> Result<f64> {
    evaluate_at(model, Precision::Bits(k), data)
}

pub fn evaluate_at<T: Scalar>(model: &mut AdaptiveModel<T>, p: Precision, data: &Dataset) -> Result<f64> {
    let previous = model.active();
    model.set_precision(p)?;
    let acc = accuracy(model, data);
    model.set_precision(previous)?;
    acc
}

/// Accuracy at every registered bit-width, ascending.
pub fn evaluate_all<T: Scalar>(model: &mut AdaptiveModel<T>, data: &Dataset) -> Result<Vec<(BitWidth, f64)>> {
    let bits = model.bit_widths().to_vec();
    bits.into_iter().map(|k| Ok((k, evaluate(model, k, data)?))).collect()
}

/// Recompute the running BN moments of bit-width `k` as plain averages of
/// batch moments over up to 50 shuffled batches of 128 from `data`.
/// Weights and clipping levels are untouched. Returns the batch count.
pub fn calibrate_bn<T: Scalar>(model: &mut AdaptiveModel<T>, k: BitWidth, data: &Dataset, seed: u64) -> Result<usize> {
    calibrate_bn_with(model, k, data, CALIBRATION_BATCHES, CALIBRATION_BATCH_SIZE, seed)
}

pub fn calibrate_bn_with<T: Scalar>(
    model: &mut AdaptiveModel<T>,
    k: BitWidth,
    data: &Dataset,
    batches: usize,
    batch_size: usize,
    seed: u64,
) -> Result<usize> {
    if data.is_empty() || batches == 0 {
        return Err(Error::Dataset("calibration needs a non-empty data stream".into()));
    }
    let mut plan = data.shuffled_batches(batch_size.min(data.len()), seed);
    plan.truncate(batches);
    let previous = model.active();
    model.set_bitwidth(k)?;
    model.begin_bn_calibration();
    let mut result = Ok(());
    for idx in &plan {
        let (images, _) = data.gather(idx);
        result = model.calibration_batch(&images);
        if result.is_err() {
            break;
        }
    }
    // Always leave collection mode, even after a failed batch.
    let finished = model.finish_bn_calibration();
    model.set_precision(previous)?;
    result?;
    finished
}
