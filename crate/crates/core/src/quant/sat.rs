use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `1 / sqrt(n_out · VAR[Q])` with the population variance over all entries.
pub fn sat_scale<T: Scalar>(q: &Tensor<T>, n_out: usize) -> Result<T> {
    if n_out == 0 {
        return Err(Error::contract("n_out must be positive"));
    }
    let var = q.variance();
    if !(var > T::zero()) {
        return Err(Error::contract(
            "weight rescaling needs non-zero variance (degenerate layer)",
        ));
    }
    Ok(T::one() / (T::from_usize_lossy(n_out) * var).sqrt())
}

/// Scale quantized weights of a layer without a following batch norm so that
/// `n_out · VAR[Q*] = 1`.
pub fn sat_rescale<T: Scalar>(q: &Tensor<T>, n_out: usize) -> Result<Tensor<T>> {
    let s = sat_scale(q, n_out)?;
    Ok(q.map(|v| v * s))
}
