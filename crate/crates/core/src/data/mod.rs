//! Image classification datasets with 8-bit unsigned pixels.

pub mod idx;
pub mod synthetic;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use synthetic::SyntheticSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    /// Row-major images, `len() * shape.iter().product()` bytes.
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
    /// Channels, height, width.
    pub shape: [usize; 3],
    pub classes: usize,
}

impl Dataset {
    pub fn new(images: Vec<u8>, labels: Vec<u8>, shape: [usize; 3], classes: usize) -> Result<Self> {
        let per: usize = shape.iter().product();
        if per == 0 || images.len() != labels.len() * per {
            return Err(Error::Dataset(format!(
                "{} image bytes do not match {} labels of shape {shape:?}",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Dataset(format!("label {bad} outside [0, {classes})")));
        }
        Ok(Self {
            images,
            labels,
            shape,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.shape.iter().product()
    }

    /// Images and labels of the given samples, in order.
    pub fn gather(&self, indices: &[usize]) -> (Vec<u8>, Vec<usize>) {
        let per = self.image_len();
        let mut images = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(&self.images[i * per..(i + 1) * per]);
            labels.push(self.labels[i] as usize);
        }
        (images, labels)
    }

    /// Consecutive batches in storage order; the last one may be short.
    pub fn sequential_batches(&self, batch: usize) -> impl Iterator<Item = (Vec<u8>, Vec<usize>)> + '_ {
        let n = self.len();
        (0..n).step_by(batch.max(1)).map(move |start| {
            let idx: Vec<usize> = (start..(start + batch).min(n)).collect();
            self.gather(&idx)
        })
    }

    /// A seeded permutation cut into full batches; the incomplete tail is
    /// dropped.
    pub fn shuffled_batches(&self, batch: usize, seed: u64) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order.chunks_exact(batch.max(1)).map(<[usize]>::to_vec).collect()
    }

    /// The first `n` samples.
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images[..n * self.image_len()].to_vec(),
            labels: self.labels[..n].to_vec(),
            shape: self.shape,
            classes: self.classes,
        }
    }
}

/// Train and test partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Dataset,
    pub test: Dataset,
}

/// Where a dataset comes from: a directory of IDX files or the synthetic
/// generator.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Idx(std::path::PathBuf),
    Synthetic(SyntheticSpec),
}

impl DataSource {
    /// `synthetic`, `synthetic:<seed>` or a directory path.
    pub fn parse(text: &str) -> Self {
        if text == "synthetic" {
            return DataSource::Synthetic(SyntheticSpec::default());
        }
        if let Some(seed) = text.strip_prefix("synthetic:").and_then(|s| s.parse().ok()) {
            return DataSource::Synthetic(SyntheticSpec {
                seed,
                ..SyntheticSpec::default()
            });
        }
        DataSource::Idx(text.into())
    }

    pub fn load(&self) -> Result<DataSplit> {
        match self {
            DataSource::Idx(dir) => idx::load_split(dir),
            DataSource::Synthetic(spec) => Ok(spec.generate()),
        }
    }
}

/// Write both partitions as IDX files into `dir`.
pub fn save_split(split: &DataSplit, dir: &Path) -> Result<()> {
    idx::save_split(split, dir)
}
