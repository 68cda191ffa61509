use crate::engine::{DecayGroup, Parameter, Tensor};
use crate::error::Result;
use crate::net::config::{ClipMode, QuantConfig};
use crate::quant::BitWidth;
use crate::scalar::Scalar;

/// Learnable clipping levels, one row per clipped layer.
///
/// In shared mode every row has a single column used at all bit-widths; in
/// switchable mode there is one column per registered bit-width.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippingLevelTable<T> {
    mode: ClipMode,
    bits: Vec<BitWidth>,
    rows: Vec<Vec<Parameter<T>>>,
}

impl<T: Scalar> ClippingLevelTable<T> {
    pub fn new(layers: usize, config: &QuantConfig) -> Self {
        let columns = match config.clip_mode {
            ClipMode::Shared => 1,
            ClipMode::Switchable => config.bit_widths.len(),
        };
        let init = T::from_f64_lossy(config.alpha_init);
        let rows = (0..layers)
            .map(|_| {
                (0..columns)
                    .map(|_| Parameter::new(Tensor::scalar(init), DecayGroup::ClippingLevels))
                    .collect()
            })
            .collect();
        Self {
            mode: config.clip_mode,
            bits: config.bit_widths.clone(),
            rows,
        }
    }

    pub fn mode(&self) -> ClipMode {
        self.mode
    }

    pub fn layers(&self) -> usize {
        self.rows.len()
    }

    pub fn columns(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn bits(&self) -> &[BitWidth] {
        &self.bits
    }

    /// Column used at bit-width `k`.
    pub fn column(&self, k: BitWidth) -> Result<usize> {
        let pos = self
            .bits
            .iter()
            .position(|&b| b == k)
            .ok_or(crate::Error::UnregisteredBitWidth(k.get()))?;
        Ok(match self.mode {
            ClipMode::Shared => 0,
            ClipMode::Switchable => pos,
        })
    }

    pub fn alpha(&self, layer: usize, k: BitWidth) -> Result<T> {
        Ok(self.rows[layer][self.column(k)?].value.data()[0])
    }

    pub fn param(&self, layer: usize, column: usize) -> &Parameter<T> {
        &self.rows[layer][column]
    }

    pub fn param_mut(&mut self, layer: usize, column: usize) -> &mut Parameter<T> {
        &mut self.rows[layer][column]
    }

    pub fn set(&mut self, layer: usize, column: usize, value: T) {
        self.rows[layer][column].value.data_mut()[0] = value;
    }

    /// Raise every level to at least `floor`.
    pub fn clamp_below(&mut self, floor: T) {
        for p in self.rows.iter_mut().flatten() {
            let v = &mut p.value.data_mut()[0];
            *v = v.max(floor);
        }
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.rows.iter_mut().flatten()
    }
}
