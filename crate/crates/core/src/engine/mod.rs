//! Dense tensors, layer kernels, reverse-mode differentiation and the
//! optimizer used for training.

pub mod kernels;
pub mod loss;
pub mod optim;
pub mod param;
pub mod schedule;
pub mod tape;
pub mod tensor;

pub use kernels::{batchnorm_forward, conv2d_forward, dense_forward, BnMode, BnStats};
pub use loss::{softmax_xent, XentOutput};
pub use optim::{sgd_momentum_step, Sgd};
pub use param::{DecayGroup, Parameter};
pub use schedule::{lr_schedule, LrSchedule};
pub use tape::{CustomOp, Gradients, Tape, Var};
pub use tensor::Tensor;
