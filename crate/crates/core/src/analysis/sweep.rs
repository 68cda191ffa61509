//! Monte-Carlo clipping error of a synthetic linear layer followed by a
//! clipped quantized activation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::quant::{pact_quantize_value, BitWidth, QuantScheme};

pub const DEFAULT_INPUTS: usize = 1000;
pub const DEFAULT_TRIALS: usize = 100_000;

/// Pre-activations `z = Σ w_i u_i` of independent trials with
/// `w_i ~ N(0, 1/n)` and `u_i ~ U[0, 1)`.
///
/// Trial `t` draws from its own stream of the master seed, so any subset of
/// trials can be regenerated independently.
pub fn draw_preactivations(inputs: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    if inputs == 0 || trials == 0 {
        return Err(Error::contract("need at least one input and one trial"));
    }
    let normal = Normal::new(0.0, (1.0 / inputs as f64).sqrt()).expect("positive std");
    Ok((0..trials)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            (0..inputs)
                .map(|_| {
                    let w: f64 = rng.sample(normal);
                    let u: f64 = rng.gen();
                    w * u
                })
                .sum()
        })
        .collect())
}

/// `sqrt(E[(q − y)²] / E[y²])` with `y = ReLU(z)` and `q` the clipped
/// quantized `z`.
pub fn relative_error(z: &[f64], k: BitWidth, alpha: f64, scheme: QuantScheme) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::contract(format!("clipping level must be positive, got {alpha}")));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &v in z {
        let y = v.max(0.0);
        let q = pact_quantize_value(v, alpha, k, scheme);
        num += (q - y) * (q - y);
        den += y * y;
    }
    if den == 0.0 {
        return Err(Error::contract("all pre-activations are non-positive"));
    }
    Ok((num / den).sqrt())
}

pub fn synthetic_clipping_error(k: BitWidth, alpha: f64, inputs: usize, trials: usize, seed: u64) -> Result<f64> {
    let z = draw_preactivations(inputs, trials, seed)?;
    relative_error(&z, k, alpha, QuantScheme::Original)
}

/// `n` points from `lo` to `hi` evenly spaced in log scale.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2, "invalid grid");
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Default clipping-level grid of the sweep.
pub fn default_alpha_grid() -> Vec<f64> {
    log_grid(0.02, 4.0, 60)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub k: BitWidth,
    pub alpha: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Grid point of smallest error per bit-width, in input order.
    pub argmin: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn curve(&self, k: BitWidth) -> Vec<SweepPoint> {
        self.points.iter().copied().filter(|p| p.k == k).collect()
    }

    pub fn best(&self, k: BitWidth) -> Option<SweepPoint> {
        self.argmin.iter().copied().find(|p| p.k == k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,alpha,rel_error\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.k, p.alpha, p.rel_error));
        }
        out
    }
}

/// Relative error over every `(k, alpha)` pair on one shared set of trials.
pub fn clipping_sweep(
    bits: &[BitWidth],
    alphas: &[f64],
    inputs: usize,
    trials: usize,
    seed: u64,
    scheme: QuantScheme,
) -> Result<SweepResult> {
    if alphas.is_empty() {
        return Err(Error::contract("empty clipping-level grid"));
    }
    let z = draw_preactivations(inputs, trials, seed)?;
    let mut points = Vec::with_capacity(bits.len() * alphas.len());
    let mut argmin = Vec::with_capacity(bits.len());
    for &k in bits {
        let mut best: Option<SweepPoint> = None;
        for &alpha in alphas {
            let p = SweepPoint {
                k,
                alpha,
                rel_error: relative_error(&z, k, alpha, scheme)?,
            };
            if best.is_none_or(|b| p.rel_error < b.rel_error) {
                best = Some(p);
            }
            points.push(p);
        }
        argmin.push(best.expect("non-empty grid"));
    }
    Ok(SweepResult { points, argmin })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(b: u32) -> BitWidth {
        BitWidth::new(b).unwrap()
    }

    #[test]
    fn reproducible_per_seed() {
        let a = draw_preactivations(50, 20, 3).unwrap();
        assert_eq!(a, draw_preactivations(50, 20, 3).unwrap());
        assert_ne!(a, draw_preactivations(50, 20, 4).unwrap());
        // trial streams do not depend on the trial count
        assert_eq!(a[..10], draw_preactivations(50, 10, 3).unwrap()[..]);
    }

    #[test]
    fn tiny_alpha_clips_everything_to_zero() {
        let z = draw_preactivations(100, 2000, 1).unwrap();
        let e = relative_error(&z, k(2), 1e-9, QuantScheme::Original).unwrap();
        assert!((e - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fine_grid_near_max_is_accurate() {
        let z = draw_preactivations(100, 2000, 1).unwrap();
        let max = z.iter().cloned().fold(0.0, f64::max);
        let e = relative_error(&z, k(8), max, QuantScheme::Original).unwrap();
        assert!(e < 0.02, "{e}");
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(0.02, 2.0, 3);
        assert!((g[0] - 0.02).abs() < 1e-15 && (g[1] - 0.2).abs() < 1e-12 && (g[2] - 2.0).abs() < 1e-12);
    }
}
