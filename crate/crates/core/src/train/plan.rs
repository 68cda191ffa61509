use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::BitWidth;

/// Optimizer and schedule settings shared by every regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainPlan {
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rate at a batch of 256; the peak rate scales linearly with
    /// the batch size.
    pub base_lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Defaults to 5 epochs per 150, i.e. proportional to `epochs`.
    pub warmup_epochs: Option<f64>,
    pub seed: u64,
}

impl Default for TrainPlan {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 128,
            base_lr: 0.05,
            weight_decay: 4e-5,
            momentum: 0.9,
            warmup_epochs: None,
            seed: 0,
        }
    }
}

impl TrainPlan {
    pub fn peak_lr(&self) -> f64 {
        self.base_lr * self.batch_size as f64 / 256.0
    }

    pub fn warmup(&self) -> f64 {
        self.warmup_epochs.unwrap_or(5.0 * self.epochs as f64 / 150.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train plan: {m}")));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return bad("base_lr must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.warmup() < 0.0 || self.warmup() > self.epochs as f64 {
            return bad("warmup_epochs must lie in [0, epochs]");
        }
        Ok(())
    }

    /// Shuffle seed of one epoch in one phase.
    pub(crate) fn epoch_seed(&self, phase: usize, epoch: usize) -> u64 {
        let mix = ((phase as u64) << 32 | epoch as u64).wrapping_add(1);
        self.seed ^ mix.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Ascending,
    Descending,
}

/// Which bit-widths are trained and how.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regime {
    /// Training at `bits` only. The `adapt` bit-widths are registered too
    /// and receive copies of the trained BN and clipping state.
    Individual {
        bits: BitWidth,
        #[serde(default)]
        adapt: Vec<BitWidth>,
    },
    Joint {
        bits: Vec<BitWidth>,
        scl: bool,
    },
    Progressive {
        bits: Vec<BitWidth>,
        direction: Direction,
    },
}

impl Regime {
    /// Every bit-width the regime needs registered in the model.
    pub fn bit_widths(&self) -> Vec<BitWidth> {
        let mut bits = match self {
            Regime::Individual { bits, adapt } => std::iter::once(*bits).chain(adapt.iter().copied()).collect(),
            Regime::Joint { bits, .. } | Regime::Progressive { bits, .. } => bits.clone(),
        };
        bits.sort();
        bits.dedup();
        bits
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Regime::Individual { .. } => Ok(()),
            Regime::Joint { bits, .. } if self.bit_widths().len() < 2 || bits.len() != self.bit_widths().len() => Err(
                Error::Config("joint training needs at least two distinct bit-widths".into()),
            ),
            Regime::Progressive { bits, .. } if bits.is_empty() || bits.len() != self.bit_widths().len() => {
                Err(Error::Config("progressive training needs distinct bit-widths".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Bit-widths in the order a progressive run visits them.
pub fn progressive_order(bits: &[BitWidth], direction: Direction) -> Vec<BitWidth> {
    let mut v = bits.to_vec();
    v.sort();
    if direction == Direction::Descending {
        v.reverse();
    }
    v
}
