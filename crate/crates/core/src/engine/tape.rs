//! Reverse-mode differentiation over a linear tape of tensor ops.
//!
//! Every op appends one node holding its output value. `backward` walks
//! the tape from the requested output towards the leaves, skipping
//! subgraphs that no trainable leaf depends on. Ops whose gradient is a
//! surrogate (straight-through estimators) plug in through [`CustomOp`].

use crate::engine::kernels::{self, BnCache, BnMode, BnStats, ConvGeometry};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A differentiable op whose forward value is computed by the caller.
///
/// `backward` returns one optional gradient per input, in input order.
pub trait CustomOp<T: Scalar>: Send {
    fn name(&self) -> &'static str;

    fn backward(&self, inputs: &[&Tensor<T>], output: &Tensor<T>, grad_output: &Tensor<T>) -> Vec<Option<Tensor<T>>>;
}

enum Op<T: Scalar> {
    Leaf,
    Dense {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Conv2d {
        x: Var,
        w: Var,
        geometry: ConvGeometry,
        cols: Vec<T>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        cache: BnCache<T>,
    },
    Relu {
        x: Var,
    },
    GlobalAvgPool {
        x: Var,
    },
    Reshape {
        x: Var,
    },
    Scale {
        x: Var,
        factor: T,
    },
    Custom {
        inputs: Vec<Var>,
        op: Box<dyn CustomOp<T>>,
    },
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Recorded computation.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that receives no gradient (data, frozen values).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf whose gradient is reported by [`Tape::backward`].
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = kernels::dense_forward(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        y.ensure_finite("dense")?;
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(y, Op::Dense { x, w, b }, needs))
    }

    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Result<Var> {
        let (y, cols, geometry) = kernels::conv2d_forward(self.value(x), self.value(w), stride, pad)?;
        y.ensure_finite("conv2d")?;
        let needs = self.needs(x) || self.needs(w);
        // The unfolded input is only needed for the weight gradient.
        let cols = if self.needs(w) { cols } else { Vec::new() };
        Ok(self.push(y, Op::Conv2d { x, w, geometry, cols }, needs))
    }

    pub fn batch_norm(&mut self, x: Var, gamma: Var, beta: Var, stats: &mut BnStats<T>, mode: BnMode) -> Result<Var> {
        let (y, cache) = kernels::batchnorm_forward(self.value(x), self.value(gamma), self.value(beta), stats, mode)?;
        y.ensure_finite("batch_norm")?;
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(y, Op::BatchNorm { x, gamma, beta, cache }, needs))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        let needs = self.needs(x);
        self.push(y, Op::Relu { x }, needs)
    }

    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let y = kernels::global_avg_pool(self.value(x))?;
        let needs = self.needs(x);
        Ok(self.push(y, Op::GlobalAvgPool { x }, needs))
    }

    /// Collapse all non-batch dimensions.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let shape = self.value(x).shape();
        let batch = shape[0];
        let rest: usize = shape[1..].iter().product();
        let y = self.value(x).clone().reshape(&[batch, rest])?;
        let needs = self.needs(x);
        Ok(self.push(y, Op::Reshape { x }, needs))
    }

    /// Multiply by a constant that is not differentiated.
    pub fn scale(&mut self, x: Var, factor: T) -> Result<Var> {
        let y = self.value(x).map(|v| v * factor);
        y.ensure_finite("scale")?;
        let needs = self.needs(x);
        Ok(self.push(y, Op::Scale { x, factor }, needs))
    }

    /// Record an op whose forward value the caller already computed.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor<T>, op: Box<dyn CustomOp<T>>) -> Result<Var> {
        value.ensure_finite(op.name())?;
        let needs = inputs.iter().any(|&v| self.needs(v));
        Ok(self.push(
            value,
            Op::Custom {
                inputs: inputs.to_vec(),
                op,
            },
            needs,
        ))
    }

    /// Propagate `seed` (the gradient of some scalar w.r.t. `output`) back
    /// through the tape.
    pub fn backward(&self, output: Var, seed: Tensor<T>) -> Result<Gradients<T>> {
        seed.expect_shape("backward seed", self.value(output).shape())?;
        let mut grads: Vec<Option<Tensor<T>>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(seed);

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let mut contributions: Vec<(Var, Tensor<T>)> = Vec::new();
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Dense { x, w, b } => {
                    if self.needs(*x) {
                        contributions.push((*x, kernels::dense_backward_input(&g, self.value(*w))));
                    }
                    if self.needs(*w) {
                        contributions.push((*w, kernels::dense_backward_weight(&g, self.value(*x))));
                    }
                    if let Some(b) = b.filter(|b| self.needs(*b)) {
                        contributions.push((b, kernels::dense_backward_bias(&g)));
                    }
                }
                Op::Conv2d { x, w, geometry, cols } => {
                    let (dx, dw) =
                        kernels::conv2d_backward(&g, self.value(*w), cols, geometry, self.needs(*x), self.needs(*w));
                    contributions.extend(dx.map(|d| (*x, d)));
                    contributions.extend(dw.map(|d| (*w, d)));
                }
                Op::BatchNorm { x, gamma, beta, cache } => {
                    let (dx, dgamma, dbeta) = kernels::batchnorm_backward(&g, self.value(*gamma), cache);
                    for (v, d) in [(*x, dx), (*gamma, dgamma), (*beta, dbeta)] {
                        if self.needs(v) {
                            contributions.push((v, d));
                        }
                    }
                }
                Op::Relu { x } => {
                    let xin = self.value(*x);
                    let d = g.zip_map(xin, |gv, xv| if xv > T::zero() { gv } else { T::zero() })?;
                    contributions.push((*x, d));
                }
                Op::GlobalAvgPool { x } => {
                    contributions.push((*x, kernels::global_avg_pool_backward(&g, self.value(*x).shape())));
                }
                Op::Reshape { x } => {
                    contributions.push((*x, g.reshape(self.value(*x).shape())?));
                }
                Op::Scale { x, factor } => {
                    let f = *factor;
                    contributions.push((*x, g.map(|v| v * f)));
                }
                Op::Custom { inputs, op } => {
                    let values: Vec<&Tensor<T>> = inputs.iter().map(|&v| self.value(v)).collect();
                    let outs = op.backward(&values, &node.value, &g);
                    if outs.len() != inputs.len() {
                        return Err(Error::contract(format!(
                            "{} returned {} gradients for {} inputs",
                            op.name(),
                            outs.len(),
                            inputs.len()
                        )));
                    }
                    for (&v, d) in inputs.iter().zip(outs) {
                        if let Some(d) = d.filter(|_| self.needs(v)) {
                            contributions.push((v, d));
                        }
                    }
                }
            }
            for (v, d) in contributions {
                d.expect_shape("gradient", self.value(v).shape())?;
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&d)?,
                    slot @ None => *slot = Some(d),
                }
            }
        }
        for g in grads.iter().flatten() {
            g.ensure_finite("backward")?;
        }
        Ok(Gradients { grads })
    }
}

/// Gradients of the leaves reached by one backward pass.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}
