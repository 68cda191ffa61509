use std::collections::BTreeMap;

use crate::data::DataSplit;
use crate::engine::{LrSchedule, Sgd};
use crate::error::{Error, Result};
use crate::net::{AdaptiveModel, ClipMode, Precision};
use crate::quant::{BitWidth, ALPHA_FLOOR};
use crate::scalar::Scalar;
use crate::train::eval::evaluate_at;
use crate::train::metrics::{EpochRecord, MetricsSink};
use crate::train::plan::{progressive_order, Direction, TrainPlan};

fn diverged(epoch: usize, step: usize, loss: f64) -> Error {
    Error::Divergence { epoch, step, loss }
}

/// Train at the given precisions jointly: every batch runs forward and
/// backward once per precision, in the given order, and the summed
/// gradients feed one optimizer step.
fn run_phase<T: Scalar>(
    model: &mut AdaptiveModel<T>,
    precisions: &[Precision],
    plan: &TrainPlan,
    data: &DataSplit,
    phase: (usize, &str),
    sink: &mut dyn MetricsSink,
) -> Result<()> {
    plan.validate()?;
    if plan.epochs == 0 {
        return Ok(());
    }
    let steps = data.train.len() / plan.batch_size;
    if steps == 0 {
        return Err(Error::Config(format!(
            "training set of {} samples is smaller than one batch of {}",
            data.train.len(),
            plan.batch_size
        )));
    }
    let full_precision = precisions.contains(&Precision::Full);
    let schedule = LrSchedule::from_epochs(plan.peak_lr(), steps, plan.epochs, plan.warmup())?;
    let mut opt = Sgd::new(
        T::from_f64_lossy(plan.momentum),
        T::from_f64_lossy(plan.weight_decay),
        true,
    );
    let floor = T::from_f64_lossy(ALPHA_FLOOR);
    let restore = model.active();
    for epoch in 0..plan.epochs {
        let mut loss_sum = 0.0;
        let mut correct = vec![0usize; precisions.len()];
        let mut lr = 0.0;
        for (i, idx) in data
            .train
            .shuffled_batches(plan.batch_size, plan.epoch_seed(phase.0, epoch))
            .iter()
            .enumerate()
        {
            let step = epoch * steps + i;
            lr = schedule.lr(step);
            let (images, labels) = data.train.gather(idx);
            model.zero_grad();
            let mut batch_loss = 0.0;
            for (p, hits) in precisions.iter().zip(correct.iter_mut()) {
                model.set_precision(*p)?;
                let out = model.train_batch(&images, &labels).map_err(|e| match e {
                    Error::NonFinite(_) => diverged(epoch, step, f64::NAN),
                    other => other,
                })?;
                if !out.loss.is_finite() {
                    return Err(diverged(epoch, step, out.loss));
                }
                batch_loss += out.loss;
                *hits += out.correct;
            }
            opt.step(&mut model.parameters_mut(), T::from_f64_lossy(lr));
            if full_precision {
                model.clamp_weights();
            }
            model.clip_mut().clamp_below(floor);
            loss_sum += batch_loss;
        }
        let seen = (steps * plan.batch_size) as f64;
        let label = |p: &Precision| p.to_string();
        let train_acc: BTreeMap<String, f64> = precisions
            .iter()
            .zip(&correct)
            .map(|(p, &c)| (label(p), 100.0 * c as f64 / seen))
            .collect();
        let mut val_acc = BTreeMap::new();
        if !data.test.is_empty() {
            for p in precisions {
                val_acc.insert(label(p), evaluate_at(model, *p, &data.test)?);
            }
        }
        sink.record(&EpochRecord {
            phase: phase.1.to_string(),
            epoch: epoch + 1,
            lr,
            loss: loss_sum / steps as f64,
            train_acc,
            val_acc,
        });
    }
    model.set_precision(restore)?;
    Ok(())
}

/// Full-precision training with weights clamped to `[-1, 1]` after every
/// step. The learned BN set is then copied to every bit-width.
pub fn pretrain_fp<T: Scalar>(
    model: &mut AdaptiveModel<T>,
    plan: &TrainPlan,
    data: &DataSplit,
    sink: &mut dyn MetricsSink,
) -> Result<()> {
    model.clamp_weights();
    run_phase(model, &[Precision::Full], plan, data, (0, "fp"), sink)?;
    model.broadcast_full_precision_bn();
    Ok(())
}

/// Quantization-aware training at the single bit-width `k`.
///
/// The trained BN set and clipping levels are copied to every other
/// registered bit-width, so running the result at another bit-width is
/// direct adaptation.
pub fn train_individual<T: Scalar>(
    model: &mut AdaptiveModel<T>,
    k: BitWidth,
    plan: &TrainPlan,
    data: &DataSplit,
    sink: &mut dyn MetricsSink,
) -> Result<()> {
    individual_phase(model, k, plan, data, 1, sink)
}

fn individual_phase<T: Scalar>(
    model: &mut AdaptiveModel<T>,
    k: BitWidth,
    plan: &TrainPlan,
    data: &DataSplit,
    phase: usize,
    sink: &mut dyn MetricsSink,
) -> Result<()> {
    model.config().position(k)?;
    let name = format!("individual-{k}");
    run_phase(model, &[Precision::Bits(k)], plan, data, (phase, &name), sink)?;
    model.broadcast_bit_state(k)?;
    model.set_bitwidth(k)
}

/// Joint training over `bits` with shared weights, largest bit-width first
/// within every batch.
pub fn train_joint<T: Scalar>(
    model: &mut AdaptiveModel<T>,
    bits: &[BitWidth],
    scl: bool,
    plan: &TrainPlan,
    data: &DataSplit,
    sink: &mut dyn MetricsSink,
) -> Result<()> {
    let expected = if scl { ClipMode::Switchable } else { ClipMode::Shared };
    if model.config().clip_mode != expected {
        return Err(Error::Config(format!(
            "model clipping levels are {:?} but the regime needs {expected:?}",
            model.config().clip_mode
        )));
    }
    let mut order = bits.to_vec();
    order.sort_by(|a, b| b.cmp(a));
    order.dedup();
    for &k in &order {
        model.config().position(k)?;
    }
    let precisions: Vec<Precision> = order.iter().map(|&k| Precision::Bits(k)).collect();
    let name = if scl { "joint-scl" } else { "joint" };
    run_phase(model, &precisions, plan, data, (1, name), sink)
}

/// Sequential training over `bits`: individual training at the first
/// bit-width, then finetuning with the same plan at each following one.
/// Clipping levels and BN sets carry over between phases. Returns a copy of
/// the model after every phase.
pub fn train_progressive<T: Scalar>(
    model: &mut AdaptiveModel<T>,
    bits: &[BitWidth],
    direction: Direction,
    plan: &TrainPlan,
    data: &DataSplit,
    sink: &mut dyn MetricsSink,
) -> Result<Vec<(BitWidth, AdaptiveModel<T>)>> {
    let order = progressive_order(bits, direction);
    if order.is_empty() {
        return Err(Error::Config(
            "progressive training needs at least one bit-width".into(),
        ));
    }
    individual_phase(model, order[0], plan, data, 1, sink)?;
    let mut checkpoints = vec![(order[0], model.clone())];
    checkpoints.extend(continue_progressive(model, &order[1..], plan, data, sink)?);
    Ok(checkpoints)
}

/// The finetuning phases of [`train_progressive`], starting from a model
/// already trained at the first bit-width.
pub fn continue_progressive<T: Scalar>(
    model: &mut AdaptiveModel<T>,
    order: &[BitWidth],
    plan: &TrainPlan,
    data: &DataSplit,
    sink: &mut dyn MetricsSink,
) -> Result<Vec<(BitWidth, AdaptiveModel<T>)>> {
    let mut checkpoints = Vec::new();
    for (i, &k) in order.iter().enumerate() {
        individual_phase(model, k, plan, data, i + 2, sink)?;
        checkpoints.push((k, model.clone()));
    }
    Ok(checkpoints)
}
