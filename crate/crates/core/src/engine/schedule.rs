use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Linear warmup followed by cosine annealing to zero, evaluated per
/// iteration, without restarts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn new(peak_lr: f64, warmup_steps: usize, total_steps: usize) -> Result<Self> {
        if total_steps == 0 || warmup_steps > total_steps {
            return Err(Error::Config(format!(
                "invalid schedule: {warmup_steps} warmup steps of {total_steps}"
            )));
        }
        Ok(Self {
            peak_lr,
            warmup_steps,
            total_steps,
        })
    }

    /// Build from epoch counts; fractional warmup epochs round to whole steps.
    pub fn from_epochs(peak_lr: f64, steps_per_epoch: usize, epochs: usize, warmup_epochs: f64) -> Result<Self> {
        let total = steps_per_epoch * epochs;
        let warmup = ((warmup_epochs * steps_per_epoch as f64).round() as usize).min(total);
        Self::new(peak_lr, warmup, total)
    }

    pub fn lr(&self, step: usize) -> f64 {
        lr_schedule(step, self.total_steps, self.warmup_steps, self.peak_lr)
    }
}

/// Learning rate at `step`. Warmup starts at `peak / warmup_steps` and
/// reaches `peak` on the last warmup step.
pub fn lr_schedule(step: usize, total_steps: usize, warmup_steps: usize, peak_lr: f64) -> f64 {
    debug_assert!(step < total_steps.max(1));
    if step < warmup_steps {
        return peak_lr * (step + 1) as f64 / warmup_steps as f64;
    }
    let span = (total_steps - warmup_steps).max(1) as f64;
    let progress = (step - warmup_steps) as f64 / span;
    peak_lr * 0.5 * (1.0 + (PI * progress).cos())
}
