use crate::engine::{BnStats, DecayGroup, Parameter, Tensor};
use crate::scalar::Scalar;

/// Running moments and affine parameters of one batch-norm instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BnSet<T> {
    pub gamma: Parameter<T>,
    pub beta: Parameter<T>,
    pub stats: BnStats<T>,
}

impl<T: Scalar> BnSet<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Parameter::new(Tensor::full(&[channels], T::one()), DecayGroup::BnAffine),
            beta: Parameter::new(Tensor::zeros(&[channels]), DecayGroup::BnAffine),
            stats: BnStats::new(channels),
        }
    }
}

/// Private batch-norm sets of one layer: one per registered bit-width plus a
/// full-precision set.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchableBn<T> {
    pub sets: Vec<BnSet<T>>,
    pub full_precision: BnSet<T>,
}

impl<T: Scalar> SwitchableBn<T> {
    pub fn new(channels: usize, bit_count: usize) -> Self {
        Self {
            sets: (0..bit_count).map(|_| BnSet::new(channels)).collect(),
            full_precision: BnSet::new(channels),
        }
    }

    pub fn set(&self, slot: Option<usize>) -> &BnSet<T> {
        match slot {
            Some(i) => &self.sets[i],
            None => &self.full_precision,
        }
    }

    pub fn set_mut(&mut self, slot: Option<usize>) -> &mut BnSet<T> {
        match slot {
            Some(i) => &mut self.sets[i],
            None => &mut self.full_precision,
        }
    }
}
