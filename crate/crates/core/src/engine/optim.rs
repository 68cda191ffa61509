use crate::engine::param::Parameter;
use crate::engine::tensor::Tensor;
use crate::scalar::Scalar;

/// SGD with (Nesterov) momentum, no dampening, L2 weight decay on the
/// decaying parameter groups.
///
/// Momentum buffers are matched to parameters by position, so callers must
/// pass parameters in a stable order. Parameters that received no gradient
/// in the current window are left untouched.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    pub momentum: T,
    pub weight_decay: T,
    pub nesterov: bool,
    velocity: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(momentum: T, weight_decay: T, nesterov: bool) -> Self {
        Self {
            momentum,
            weight_decay,
            nesterov,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Parameter<T>], lr: T) {
        if self.velocity.len() < params.len() {
            self.velocity.resize_with(params.len(), || None);
        }
        for (p, slot) in params.iter_mut().zip(self.velocity.iter_mut()) {
            if !p.touched() {
                continue;
            }
            let decay = if p.group.decays() { self.weight_decay } else { T::zero() };
            let v = slot.get_or_insert_with(|| Tensor::zeros(p.value.shape()));
            let (mu, nesterov) = (self.momentum, self.nesterov);
            let values = p.value.data_mut();
            let grads = p.grad.data();
            for ((w, &g), vel) in values.iter_mut().zip(grads).zip(v.data_mut()) {
                let d = g + decay * *w;
                *vel = mu * *vel + d;
                let update = if nesterov { d + mu * *vel } else { *vel };
                *w -= lr * update;
            }
        }
    }
}

/// One step of [`Sgd`] on a single scalar, for callers that only need the
/// recursion.
pub fn sgd_momentum_step<T: Scalar>(
    param: &mut Parameter<T>,
    velocity: &mut Tensor<T>,
    lr: T,
    momentum: T,
    weight_decay: T,
    nesterov: bool,
) {
    let mut sgd = Sgd::new(momentum, weight_decay, nesterov);
    sgd.velocity = vec![Some(velocity.clone())];
    sgd.step(&mut [param], lr);
    if let Some(Some(v)) = sgd.velocity.pop() {
        *velocity = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::param::DecayGroup;

    fn scalar_param(v: f64, g: f64) -> Parameter<f64> {
        let mut p = Parameter::new(Tensor::scalar(v), DecayGroup::Weights);
        p.accumulate(&Tensor::scalar(g)).unwrap();
        p
    }

    #[test]
    fn zero_gradient_zero_decay_is_noop() {
        let mut p = scalar_param(1.25, 0.0);
        let mut sgd = Sgd::new(0.9, 0.0, true);
        sgd.step(&mut [&mut p], 0.1);
        assert_eq!(p.value.data(), &[1.25]);
    }

    #[test]
    fn plain_step_without_momentum() {
        let mut p = scalar_param(1.0, 0.5);
        let mut sgd = Sgd::new(0.0, 0.0, true);
        sgd.step(&mut [&mut p], 0.1);
        assert_eq!(p.value.data(), &[1.0 - 0.1 * 0.5]);
    }

    #[test]
    fn two_nesterov_steps_follow_velocity_recursion() {
        // v1 = g1, p1 = p0 - lr (g1 + mu v1)
        // v2 = mu v1 + g2, p2 = p1 - lr (g2 + mu v2)
        let (lr, mu, g1, g2) = (0.1, 0.9, 0.5, -0.25);
        let v1 = g1;
        let p1 = 1.0 - lr * (g1 + mu * v1);
        let v2 = mu * v1 + g2;
        let p2 = p1 - lr * (g2 + mu * v2);

        let mut p = scalar_param(1.0, g1);
        let mut sgd = Sgd::new(mu, 0.0, true);
        sgd.step(&mut [&mut p], lr);
        assert!((p.value.data()[0] - p1).abs() < 1e-15);
        p.zero_grad();
        p.accumulate(&Tensor::scalar(g2)).unwrap();
        sgd.step(&mut [&mut p], lr);
        assert!((p.value.data()[0] - p2).abs() < 1e-15);
    }

    #[test]
    fn decay_only_on_decaying_groups() {
        let mut w = scalar_param(2.0, 0.0);
        let mut bn = Parameter::new(Tensor::scalar(2.0), DecayGroup::BnAffine);
        bn.accumulate(&Tensor::scalar(0.0)).unwrap();
        let mut sgd = Sgd::new(0.0, 0.5, false);
        sgd.step(&mut [&mut w, &mut bn], 0.1);
        assert_eq!(w.value.data(), &[2.0 - 0.1 * 0.5 * 2.0]);
        assert_eq!(bn.value.data(), &[2.0]);
    }

    #[test]
    fn untouched_parameters_are_skipped() {
        let mut p = Parameter::new(Tensor::scalar(3.0f64), DecayGroup::Weights);
        let mut sgd = Sgd::new(0.9, 0.1, true);
        sgd.step(&mut [&mut p], 1.0);
        assert_eq!(p.value.data(), &[3.0]);
    }

    #[test]
    fn free_function_matches_optimizer() {
        let mut p = scalar_param(1.0, 0.5);
        let mut v = Tensor::scalar(0.2);
        sgd_momentum_step(&mut p, &mut v, 0.1, 0.9, 0.0, true);
        let v1 = 0.9 * 0.2 + 0.5;
        assert!((v.data()[0] - v1).abs() < 1e-15);
        assert!((p.value.data()[0] - (1.0 - 0.1 * (0.5 + 0.9 * v1))).abs() < 1e-15);
    }
}
