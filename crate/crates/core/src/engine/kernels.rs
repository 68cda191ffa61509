//! Forward/backward kernels for the layer types the tape supports.
//!
//! All kernels take and return plain tensors; the tape decides which
//! backward pieces are actually needed.

use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Batch-norm epsilon.
pub const BN_EPS: f64 = 1e-5;
/// Weight of the newest batch in the running-moment EMA.
pub const BN_MOMENTUM: f64 = 0.1;

// ---------------------------------------------------------------- dense

/// `x[B,I] · w[I,O] + b[O]`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    x.expect_rank("dense", 2)?;
    w.expect_rank("dense", 2)?;
    let (batch, inputs) = (x.shape()[0], x.shape()[1]);
    let outputs = w.shape()[1];
    if w.shape()[0] != inputs {
        return Err(Error::shape(
            "dense",
            format!("input {:?} incompatible with weight {:?}", x.shape(), w.shape()),
        ));
    }
    let mut out = Tensor::zeros(&[batch, outputs]);
    if let Some(b) = b {
        b.expect_shape("dense bias", &[outputs])?;
        for row in out.data_mut().chunks_mut(outputs) {
            row.copy_from_slice(b.data());
        }
    }
    let beta = if b.is_some() { T::one() } else { T::zero() };
    T::gemm(
        batch,
        inputs,
        outputs,
        T::one(),
        x.data(),
        (inputs as isize, 1),
        w.data(),
        (outputs as isize, 1),
        beta,
        out.data_mut(),
        (outputs as isize, 1),
    );
    Ok(out)
}

/// Gradient of the dense map w.r.t. its input: `dy · wᵀ`.
pub fn dense_backward_input<T: Scalar>(dy: &Tensor<T>, w: &Tensor<T>) -> Tensor<T> {
    let (batch, outputs) = (dy.shape()[0], dy.shape()[1]);
    let inputs = w.shape()[0];
    let mut dx = Tensor::zeros(&[batch, inputs]);
    T::gemm(
        batch,
        outputs,
        inputs,
        T::one(),
        dy.data(),
        (outputs as isize, 1),
        w.data(),
        (1, outputs as isize),
        T::zero(),
        dx.data_mut(),
        (inputs as isize, 1),
    );
    dx
}

/// Gradient of the dense map w.r.t. its weight: `xᵀ · dy`.
pub fn dense_backward_weight<T: Scalar>(dy: &Tensor<T>, x: &Tensor<T>) -> Tensor<T> {
    let (batch, outputs) = (dy.shape()[0], dy.shape()[1]);
    let inputs = x.shape()[1];
    let mut dw = Tensor::zeros(&[inputs, outputs]);
    T::gemm(
        inputs,
        batch,
        outputs,
        T::one(),
        x.data(),
        (1, inputs as isize),
        dy.data(),
        (outputs as isize, 1),
        T::zero(),
        dw.data_mut(),
        (outputs as isize, 1),
    );
    dw
}

/// Column sums of `dy`, the bias gradient.
pub fn dense_backward_bias<T: Scalar>(dy: &Tensor<T>) -> Tensor<T> {
    let outputs = dy.shape()[1];
    let mut db = Tensor::zeros(&[outputs]);
    for row in dy.data().chunks(outputs) {
        for (acc, &g) in db.data_mut().iter_mut().zip(row) {
            *acc += g;
        }
    }
    db
}

// ---------------------------------------------------------------- conv

/// Static shape information for one 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(x_shape: &[usize], w_shape: &[usize], stride: usize, pad: usize) -> Result<Self> {
        if x_shape.len() != 4 || w_shape.len() != 4 {
            return Err(Error::shape(
                "conv2d",
                format!("expected rank-4 input and weight, got {x_shape:?} and {w_shape:?}"),
            ));
        }
        if stride == 0 {
            return Err(Error::shape("conv2d", "stride must be positive"));
        }
        let [batch, in_channels, in_h, in_w] = [x_shape[0], x_shape[1], x_shape[2], x_shape[3]];
        let [out_channels, wc, kernel_h, kernel_w] = [w_shape[0], w_shape[1], w_shape[2], w_shape[3]];
        if wc != in_channels {
            return Err(Error::shape(
                "conv2d",
                format!("weight expects {wc} input channels, input has {in_channels}"),
            ));
        }
        if kernel_h > in_h + 2 * pad || kernel_w > in_w + 2 * pad {
            return Err(Error::shape(
                "conv2d",
                format!("kernel {kernel_h}x{kernel_w} larger than padded input {in_h}x{in_w} (pad {pad})"),
            ));
        }
        Ok(Self {
            batch,
            in_channels,
            in_h,
            in_w,
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            pad,
            out_h: (in_h + 2 * pad - kernel_h) / stride + 1,
            out_w: (in_w + 2 * pad - kernel_w) / stride + 1,
        })
    }

    /// Rows of the unfolded input matrix (`C·R·S`).
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    /// Columns of the unfolded input matrix (`B·H'·W'`).
    pub fn columns(&self) -> usize {
        self.batch * self.out_h * self.out_w
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.out_channels, self.out_h, self.out_w]
    }

    pub fn macs_per_sample(&self) -> usize {
        self.out_channels * self.out_h * self.out_w * self.patch_len()
    }
}

/// Unfold `x` into a `[C·R·S, B·H'·W']` matrix.
pub fn im2col<T: Scalar>(x: &[T], g: &ConvGeometry) -> Vec<T> {
    let cols = g.columns();
    let plane = g.out_h * g.out_w;
    let mut out = vec![T::zero(); g.patch_len() * cols];
    for c in 0..g.in_channels {
        for r in 0..g.kernel_h {
            for s in 0..g.kernel_w {
                let row = (c * g.kernel_h + r) * g.kernel_w + s;
                let dst_row = &mut out[row * cols..(row + 1) * cols];
                for b in 0..g.batch {
                    let src = &x[(b * g.in_channels + c) * g.in_h * g.in_w..][..g.in_h * g.in_w];
                    let dst = &mut dst_row[b * plane..(b + 1) * plane];
                    for oh in 0..g.out_h {
                        let ih = (oh * g.stride + r) as isize - g.pad as isize;
                        let dst_line = &mut dst[oh * g.out_w..(oh + 1) * g.out_w];
                        if ih < 0 || ih >= g.in_h as isize {
                            continue;
                        }
                        let src_line = &src[ih as usize * g.in_w..][..g.in_w];
                        for (ow, d) in dst_line.iter_mut().enumerate() {
                            let iw = (ow * g.stride + s) as isize - g.pad as isize;
                            if iw >= 0 && (iw as usize) < g.in_w {
                                *d = src_line[iw as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Fold a `[C·R·S, B·H'·W']` matrix back onto input positions, summing overlaps.
pub fn col2im<T: Scalar>(cols_mat: &[T], g: &ConvGeometry) -> Vec<T> {
    let cols = g.columns();
    let plane = g.out_h * g.out_w;
    let mut dx = vec![T::zero(); g.batch * g.in_channels * g.in_h * g.in_w];
    for c in 0..g.in_channels {
        for r in 0..g.kernel_h {
            for s in 0..g.kernel_w {
                let row = (c * g.kernel_h + r) * g.kernel_w + s;
                let src_row = &cols_mat[row * cols..(row + 1) * cols];
                for b in 0..g.batch {
                    let dst = &mut dx[(b * g.in_channels + c) * g.in_h * g.in_w..][..g.in_h * g.in_w];
                    let src = &src_row[b * plane..(b + 1) * plane];
                    for oh in 0..g.out_h {
                        let ih = (oh * g.stride + r) as isize - g.pad as isize;
                        if ih < 0 || ih >= g.in_h as isize {
                            continue;
                        }
                        let dst_line = &mut dst[ih as usize * g.in_w..][..g.in_w];
                        for ow in 0..g.out_w {
                            let iw = (ow * g.stride + s) as isize - g.pad as isize;
                            if iw >= 0 && (iw as usize) < g.in_w {
                                dst_line[iw as usize] += src[oh * g.out_w + ow];
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Zero-padded cross-correlation. Returns the output and the unfolded input,
/// which the weight gradient needs.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor<T>, Vec<T>, ConvGeometry)> {
    let g = ConvGeometry::new(x.shape(), w.shape(), stride, pad)?;
    let cols = im2col(x.data(), &g);
    let n = g.columns();
    let k = g.patch_len();
    let mut mat = vec![T::zero(); g.out_channels * n];
    T::gemm(
        g.out_channels,
        k,
        n,
        T::one(),
        w.data(),
        (k as isize, 1),
        &cols,
        (n as isize, 1),
        T::zero(),
        &mut mat,
        (n as isize, 1),
    );
    let out = Tensor::new(g.output_shape().to_vec(), channel_major_to_batch_major(&mat, &g))?;
    Ok((out, cols, g))
}

/// `[K, B·P]` -> `[B, K, P]`.
fn channel_major_to_batch_major<T: Scalar>(mat: &[T], g: &ConvGeometry) -> Vec<T> {
    let plane = g.out_h * g.out_w;
    let n = g.columns();
    let mut out = vec![T::zero(); mat.len()];
    for b in 0..g.batch {
        for k in 0..g.out_channels {
            out[(b * g.out_channels + k) * plane..][..plane].copy_from_slice(&mat[k * n + b * plane..][..plane]);
        }
    }
    out
}

/// `[B, K, P]` -> `[K, B·P]`.
fn batch_major_to_channel_major<T: Scalar>(dy: &[T], g: &ConvGeometry) -> Vec<T> {
    let plane = g.out_h * g.out_w;
    let n = g.columns();
    let mut mat = vec![T::zero(); dy.len()];
    for b in 0..g.batch {
        for k in 0..g.out_channels {
            mat[k * n + b * plane..][..plane].copy_from_slice(&dy[(b * g.out_channels + k) * plane..][..plane]);
        }
    }
    mat
}

/// Gradients of the convolution. Either half may be skipped.
pub fn conv2d_backward<T: Scalar>(
    dy: &Tensor<T>,
    w: &Tensor<T>,
    cols: &[T],
    g: &ConvGeometry,
    need_input: bool,
    need_weight: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>) {
    let dmat = batch_major_to_channel_major(dy.data(), g);
    let n = g.columns();
    let k = g.patch_len();
    let dw = need_weight.then(|| {
        let mut dw = Tensor::zeros(w.shape());
        T::gemm(
            g.out_channels,
            n,
            k,
            T::one(),
            &dmat,
            (n as isize, 1),
            cols,
            (1, n as isize),
            T::zero(),
            dw.data_mut(),
            (k as isize, 1),
        );
        dw
    });
    let dx = need_input.then(|| {
        let mut dcols = vec![T::zero(); k * n];
        T::gemm(
            k,
            g.out_channels,
            n,
            T::one(),
            w.data(),
            (1, k as isize),
            &dmat,
            (n as isize, 1),
            T::zero(),
            &mut dcols,
            (n as isize, 1),
        );
        let data = col2im(&dcols, g);
        Tensor::new(vec![g.batch, g.in_channels, g.in_h, g.in_w], data).expect("col2im shape")
    });
    (dx, dw)
}

// ---------------------------------------------------------------- batch norm

/// Running moments of one batch-norm instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    accumulator: Option<MomentAccumulator>,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct MomentAccumulator {
    mean_sum: Vec<f64>,
    var_sum: Vec<f64>,
    batches: usize,
}

impl<T: Scalar> BnStats<T> {
    /// Mean 0, variance 1.
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            accumulator: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    /// Begin averaging batch moments instead of the EMA update.
    pub fn begin_collection(&mut self) {
        let c = self.channels();
        self.accumulator = Some(MomentAccumulator {
            mean_sum: vec![0.0; c],
            var_sum: vec![0.0; c],
            batches: 0,
        });
    }

    /// Replace the running moments by the plain average of the collected
    /// batch moments. Returns the number of batches seen.
    pub fn finish_collection(&mut self) -> Result<usize> {
        let acc = self
            .accumulator
            .take()
            .ok_or_else(|| Error::contract("finish_collection without begin_collection"))?;
        if acc.batches == 0 {
            return Err(Error::contract("no batches were collected"));
        }
        let n = acc.batches as f64;
        for (dst, s) in self.running_mean.iter_mut().zip(&acc.mean_sum) {
            *dst = T::from_f64_lossy(s / n);
        }
        for (dst, s) in self.running_var.iter_mut().zip(&acc.var_sum) {
            *dst = T::from_f64_lossy(s / n);
        }
        Ok(acc.batches)
    }

    pub fn is_collecting(&self) -> bool {
        self.accumulator.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize by batch moments and update the running moments (EMA).
    Train,
    /// Normalize by the running moments.
    Eval,
    /// Normalize by batch moments and feed them to the collection accumulator.
    Collect,
}

/// Saved values for the batch-norm backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub batch_stats: bool,
}

fn bn_layout(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [b, c] => Ok((b, c, 1)),
        [b, c, h, w] => Ok((b, c, h * w)),
        _ => Err(Error::shape(
            "batch_norm",
            format!("expected rank 2 or 4, got {shape:?}"),
        )),
    }
}

/// One batch-norm instance over `[B,C]` or `[B,C,H,W]` input.
pub fn batchnorm_forward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    stats: &mut BnStats<T>,
    mode: BnMode,
) -> Result<(Tensor<T>, BnCache<T>)> {
    let (batch, channels, plane) = bn_layout(x.shape())?;
    if stats.channels() != channels {
        return Err(Error::shape(
            "batch_norm",
            format!("stats have {} channels, input has {channels}", stats.channels()),
        ));
    }
    gamma.expect_shape("batch_norm gamma", &[channels])?;
    beta.expect_shape("batch_norm beta", &[channels])?;
    if mode == BnMode::Collect && !stats.is_collecting() {
        return Err(Error::contract("collect mode requires begin_collection"));
    }
    let count = batch * plane;
    let eps = T::from_f64_lossy(BN_EPS);
    let momentum = T::from_f64_lossy(BN_MOMENTUM);
    let data = x.data();
    let mut out = vec![T::zero(); data.len()];
    let mut xhat = vec![T::zero(); data.len()];
    let mut inv_std = vec![T::zero(); channels];

    for c in 0..channels {
        let channel_iter = || (0..batch).flat_map(move |b| data[(b * channels + c) * plane..][..plane].iter().copied());
        let (mean, var) = if mode == BnMode::Eval {
            (stats.running_mean[c], stats.running_var[c])
        } else {
            let n = T::from_usize_lossy(count);
            let mean = channel_iter().sum::<T>() / n;
            let var = channel_iter().map(|v| (v - mean) * (v - mean)).sum::<T>() / n;
            let unbiased = if count > 1 {
                var * n / T::from_usize_lossy(count - 1)
            } else {
                var
            };
            match mode {
                BnMode::Train => {
                    stats.running_mean[c] = (T::one() - momentum) * stats.running_mean[c] + momentum * mean;
                    stats.running_var[c] = (T::one() - momentum) * stats.running_var[c] + momentum * unbiased;
                }
                BnMode::Collect => {
                    let acc = stats.accumulator.as_mut().expect("checked above");
                    acc.mean_sum[c] += mean.to_f64_lossy();
                    acc.var_sum[c] += unbiased.to_f64_lossy();
                }
                BnMode::Eval => unreachable!(),
            }
            (mean, var)
        };
        let is = T::one() / (var + eps).sqrt();
        inv_std[c] = is;
        let (g, bt) = (gamma.data()[c], beta.data()[c]);
        for b in 0..batch {
            let off = (b * channels + c) * plane;
            for i in off..off + plane {
                let h = (data[i] - mean) * is;
                xhat[i] = h;
                out[i] = g * h + bt;
            }
        }
    }
    if mode == BnMode::Collect {
        if let Some(acc) = stats.accumulator.as_mut() {
            acc.batches += 1;
        }
    }
    let out = Tensor::new(x.shape().to_vec(), out)?;
    Ok((
        out,
        BnCache {
            xhat,
            inv_std,
            batch_stats: mode != BnMode::Eval,
        },
    ))
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batchnorm_backward<T: Scalar>(
    dy: &Tensor<T>,
    gamma: &Tensor<T>,
    cache: &BnCache<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (batch, channels, plane) = bn_layout(dy.shape()).expect("validated in forward");
    let count = T::from_usize_lossy(batch * plane);
    let g = dy.data();
    let mut dx = vec![T::zero(); g.len()];
    let mut dgamma = vec![T::zero(); channels];
    let mut dbeta = vec![T::zero(); channels];
    for c in 0..channels {
        let mut sum_dy = T::zero();
        let mut sum_dy_xhat = T::zero();
        for b in 0..batch {
            let off = (b * channels + c) * plane;
            for i in off..off + plane {
                sum_dy += g[i];
                sum_dy_xhat += g[i] * cache.xhat[i];
            }
        }
        dgamma[c] = sum_dy_xhat;
        dbeta[c] = sum_dy;
        let gm = gamma.data()[c];
        let is = cache.inv_std[c];
        for b in 0..batch {
            let off = (b * channels + c) * plane;
            for i in off..off + plane {
                dx[i] = if cache.batch_stats {
                    gm * is * (g[i] - (sum_dy + cache.xhat[i] * sum_dy_xhat) / count)
                } else {
                    gm * is * g[i]
                };
            }
        }
    }
    (
        Tensor::new(dy.shape().to_vec(), dx).expect("same shape"),
        Tensor::new(vec![channels], dgamma).expect("channels"),
        Tensor::new(vec![channels], dbeta).expect("channels"),
    )
}

// ---------------------------------------------------------------- pooling

/// `[B,C,H,W]` -> `[B,C]` spatial mean.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    x.expect_rank("global_avg_pool", 4)?;
    let [b, c, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let plane = h * w;
    let inv = T::one() / T::from_usize_lossy(plane);
    let data = x
        .data()
        .chunks(plane)
        .map(|p| p.iter().copied().sum::<T>() * inv)
        .collect();
    Tensor::new(vec![b, c], data)
}

pub fn global_avg_pool_backward<T: Scalar>(dy: &Tensor<T>, input_shape: &[usize]) -> Tensor<T> {
    let plane = input_shape[2] * input_shape[3];
    let inv = T::one() / T::from_usize_lossy(plane);
    let mut dx = Vec::with_capacity(dy.numel() * plane);
    for &g in dy.data() {
        dx.extend(std::iter::repeat_n(g * inv, plane));
    }
    Tensor::new(input_shape.to_vec(), dx).expect("pool shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn dense_basis_vector() {
        let x = t(&[1, 2], &[1.0, 0.0]);
        let w = t(&[2, 2], &[2.0, 0.0, 0.0, 3.0]);
        let b = t(&[2], &[0.0, 0.0]);
        assert_eq!(dense_forward(&x, &w, Some(&b)).unwrap().data(), &[2.0, 0.0]);
    }

    #[test]
    fn dense_zero_input_returns_bias() {
        let x = t(&[1, 2], &[0.0, 0.0]);
        let w = t(&[2, 2], &[5.0, -7.0, 0.5, 9.0]);
        let b = t(&[2], &[1.0, 1.0]);
        assert_eq!(dense_forward(&x, &w, Some(&b)).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn dense_rejects_mismatch() {
        let x = t(&[1, 3], &[0.0; 3]);
        let w = t(&[2, 2], &[0.0; 4]);
        assert!(matches!(dense_forward(&x, &w, None), Err(Error::Shape { .. })));
    }

    #[test]
    fn conv_identity_channel_mix() {
        let x = Tensor::from_fn(&[2, 3, 4, 4], |i| i as f64 * 0.25 - 3.0);
        let w = Tensor::from_fn(&[3, 3, 1, 1], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let (y, _, _) = conv2d_forward(&x, &w, 1, 0).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_zero_input() {
        let x = Tensor::<f64>::zeros(&[1, 2, 5, 5]);
        let w = Tensor::from_fn(&[4, 2, 3, 3], |i| i as f64);
        let (y, _, g) = conv2d_forward(&x, &w, 2, 1).unwrap();
        assert_eq!(y.shape(), &[1, 4, 3, 3]);
        assert_eq!(g.out_h, 3);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let x = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        let w = Tensor::<f64>::zeros(&[1, 1, 5, 5]);
        assert!(conv2d_forward(&x, &w, 1, 1).is_err());
        let w = Tensor::<f64>::zeros(&[1, 2, 1, 1]);
        assert!(conv2d_forward(&x, &w, 1, 0).is_err());
    }

    #[test]
    fn bn_constant_channel_normalizes_to_zero() {
        let x = Tensor::full(&[4, 1, 2, 2], 3.5f64);
        let mut stats = BnStats::new(1);
        let (y, _) = batchnorm_forward(&x, &t(&[1], &[1.0]), &t(&[1], &[0.0]), &mut stats, BnMode::Train).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        // EMA: 0.9 * 0 + 0.1 * 3.5
        assert!((stats.running_mean[0] - 0.35).abs() < 1e-12);
        assert!((stats.running_var[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn bn_eval_identity() {
        let x = Tensor::from_fn(&[3, 2], |i| i as f64 - 2.0);
        let mut stats = BnStats::new(2);
        let ones = t(&[2], &[1.0, 1.0]);
        let zeros = t(&[2], &[0.0, 0.0]);
        let (y, _) = batchnorm_forward(&x, &ones, &zeros, &mut stats, BnMode::Eval).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            // only the epsilon separates the two
            assert!((a - b).abs() < 1e-4 * b.abs().max(1.0));
        }
        assert_eq!(stats, BnStats::new(2));
    }

    #[test]
    fn bn_collect_averages_batches() {
        let mut stats = BnStats::<f64>::new(1);
        stats.begin_collection();
        let ones = t(&[1], &[1.0]);
        let zeros = t(&[1], &[0.0]);
        batchnorm_forward(&t(&[2, 1], &[0.0, 2.0]), &ones, &zeros, &mut stats, BnMode::Collect).unwrap();
        batchnorm_forward(&t(&[2, 1], &[4.0, 4.0]), &ones, &zeros, &mut stats, BnMode::Collect).unwrap();
        assert_eq!(stats.finish_collection().unwrap(), 2);
        assert_eq!(stats.running_mean[0], 2.5);
        // unbiased batch variances 2 and 0
        assert_eq!(stats.running_var[0], 1.0);
    }

    #[test]
    fn bn_channel_mismatch() {
        let x = Tensor::<f64>::zeros(&[2, 3]);
        let mut stats = BnStats::new(2);
        let p = t(&[2], &[1.0, 1.0]);
        assert!(batchnorm_forward(&x, &p, &p, &mut stats, BnMode::Train).is_err());
    }

    #[test]
    fn pool_averages_plane() {
        let x = t(&[1, 2, 1, 2], &[1.0, 3.0, -2.0, 2.0]);
        assert_eq!(global_avg_pool(&x).unwrap().data(), &[2.0, 0.0]);
    }
}
