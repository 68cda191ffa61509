//! Seeded image classification task. Each class is a plane grating with its
//! own orientation and frequency; samples take a random phase and contrast
//! and carry Gaussian pixel noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DataSplit, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub train: usize,
    pub test: usize,
    /// Pixel noise standard deviation relative to the unit-variance grating.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            height: 16,
            width: 16,
            train: 10_000,
            test: 2_000,
            noise: 1.0,
            seed: 0,
        }
    }
}

/// Grey level of a unit signal.
const CONTRAST_SCALE: f64 = 40.0;

impl SyntheticSpec {
    /// Same task at the 28×28 resolution of the MLP preset.
    pub fn mlp() -> Self {
        Self {
            height: 28,
            width: 28,
            ..Self::default()
        }
    }

    /// Orientation (radians) and frequency (cycles per pixel) of class `c`.
    ///
    /// Classes are split over two frequencies; orientations are spread
    /// evenly over half a turn within each frequency.
    pub fn grating(&self, c: usize) -> (f64, f64) {
        let per_band = self.classes.div_ceil(2);
        let theta = PI * (c % per_band) as f64 / per_band as f64;
        let freq = if c < per_band { 0.125 } else { 0.25 };
        (theta, freq)
    }

    fn sample_set(&self, count: usize, stream: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let (h, w) = (self.height, self.width);
        let mut images = Vec::with_capacity(count * h * w);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let class = i % self.classes;
            let (theta, freq) = self.grating(class);
            let (ct, st) = (theta.cos(), theta.sin());
            let phase = rng.gen_range(0.0..2.0 * PI);
            let contrast = rng.gen_range(0.5..1.5) * std::f64::consts::SQRT_2;
            for y in 0..h {
                for x in 0..w {
                    let arg = 2.0 * PI * freq * (x as f64 * ct + y as f64 * st) + phase;
                    let n: f64 = rng.sample(StandardNormal);
                    let v = 128.0 + CONTRAST_SCALE * (contrast * arg.cos() + self.noise * n);
                    images.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
            labels.push(class as u8);
        }
        Dataset::new(images, labels, [1, h, w], self.classes).expect("generator produces consistent data")
    }

    pub fn generate(&self) -> DataSplit {
        DataSplit {
            train: self.sample_set(self.train, 1),
            test: self.sample_set(self.test, 2),
        }
    }
}
