//! Per-layer clipping levels and standard deviations of a trained model.

use crate::error::{Error, Result};
use crate::net::AdaptiveModel;
use crate::quant::{quantize_weight, BitWidth};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipRow {
    pub layer: usize,
    pub k: BitWidth,
    pub alpha: f64,
}

/// Clipping level of every clipped layer at every registered bit-width.
/// The head's output is not clipped and has no row.
pub fn clipping_profile<T: Scalar>(model: &AdaptiveModel<T>) -> Vec<ClipRow> {
    let clip = model.clip();
    let mut rows = Vec::new();
    for layer in 0..clip.layers() {
        for &k in model.bit_widths() {
            let alpha = clip.alpha(layer, k).expect("registered bit-width").to_f64_lossy();
            rows.push(ClipRow { layer, k, alpha });
        }
    }
    rows
}

pub fn clipping_profile_csv(rows: &[ClipRow]) -> String {
    let mut out = String::from("layer,k,alpha\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.layer, r.k, r.alpha));
    }
    out
}

/// Fraction of clipped layers whose level at the largest bit-width is at
/// least the level at the smallest.
pub fn monotone_layer_fraction<T: Scalar>(model: &AdaptiveModel<T>) -> f64 {
    let clip = model.clip();
    let (lo, hi) = (model.config().min_bits(), model.config().max_bits());
    let n = clip.layers();
    if n == 0 {
        return 0.0;
    }
    let ok = (0..n)
        .filter(|&l| clip.alpha(l, hi).expect("registered") >= clip.alpha(l, lo).expect("registered"))
        .count();
    ok as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRow {
    pub layer: usize,
    pub k: BitWidth,
    /// Population standard deviation of the quantized weights.
    pub weight_std: f64,
    /// Standard deviation of the layer's quantized output activation; the
    /// head has none.
    pub activation_std: Option<f64>,
}

fn std_dev<T: Scalar>(v: &[T]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().map(|x| x.to_f64_lossy()).sum::<f64>() / n;
    (v.iter().map(|x| (x.to_f64_lossy() - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Standard deviations of quantized weights and activations of every layer
/// at bit-width `k`, activations measured on `probe_images`.
pub fn variance_profile<T: Scalar>(
    model: &mut AdaptiveModel<T>,
    k: BitWidth,
    probe_images: &[u8],
) -> Result<Vec<VarianceRow>> {
    if probe_images.is_empty() {
        return Err(Error::Dataset("variance profile needs probe data".into()));
    }
    let previous = model.active();
    model.set_bitwidth(k)?;
    let result = model.logits_and_activations(probe_images);
    let rows = (0..model.layers().len())
        .map(|l| {
            let bits = model.weight_bits(l).expect("quantized precision");
            let q = quantize_weight(&model.layers()[l].weight.value, bits, model.config().scheme);
            (l, std_dev(q.data()))
        })
        .collect::<Vec<_>>();
    model.set_precision(previous)?;
    let (_, acts) = result?;
    Ok(rows
        .into_iter()
        .map(|(layer, weight_std)| VarianceRow {
            layer,
            k,
            weight_std,
            activation_std: acts.get(layer).map(|a| std_dev(a.data())),
        })
        .collect())
}

pub fn variance_profile_csv(rows: &[VarianceRow]) -> String {
    let mut out = String::from("layer,k,weight_std,activation_std\n");
    for r in rows {
        let act = r.activation_std.map_or(String::new(), |a| a.to_string());
        out.push_str(&format!("{},{},{},{act}\n", r.layer, r.k, r.weight_std));
    }
    out
}
