use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean cross-entropy of a batch together with its gradient w.r.t. the logits.
#[derive(Debug, Clone)]
pub struct XentOutput<T> {
    pub loss: T,
    /// `(softmax - onehot) / B`
    pub grad: Tensor<T>,
    /// Number of rows whose arg-max equals the label.
    pub correct: usize,
}

pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<XentOutput<T>> {
    logits.expect_rank("softmax_xent", 2)?;
    let (batch, classes) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != batch {
        return Err(Error::shape(
            "softmax_xent",
            format!("{batch} rows but {} labels", labels.len()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::shape(
            "softmax_xent",
            format!("label {bad} outside [0, {classes})"),
        ));
    }
    let inv_batch = T::one() / T::from_usize_lossy(batch);
    let mut grad = vec![T::zero(); batch * classes];
    let mut total = T::zero();
    let mut correct = 0;
    for (row_idx, (row, &label)) in logits.data().chunks(classes).zip(labels).enumerate() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let denom: T = row.iter().map(|&v| (v - max).exp()).sum();
        let log_denom = denom.ln();
        total += log_denom - (row[label] - max);
        let argmax = row
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > row[best] { i } else { best });
        if argmax == label {
            correct += 1;
        }
        let g = &mut grad[row_idx * classes..(row_idx + 1) * classes];
        for (gi, &v) in g.iter_mut().zip(row) {
            *gi = (v - max).exp() / denom * inv_batch;
        }
        g[label] -= inv_batch;
    }
    let loss = total * inv_batch;
    if !loss.is_finite() {
        return Err(Error::NonFinite("softmax_xent"));
    }
    Ok(XentOutput {
        loss,
        grad: Tensor::new(vec![batch, classes], grad)?,
        correct,
    })
}
