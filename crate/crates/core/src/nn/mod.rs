//! Feed-forward networks with exact manual backpropagation.

mod grad;
mod mlp;
mod optim;
mod param;
mod policy;

pub use grad::{mean_loss_grad, per_sample_grads, GradSampleMatrix, SampleLoss};
pub use mlp::{Activation, Mlp, MlpCache, MlpSpec};
pub use optim::{global_grad_clip, l2_norm, OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use param::{LayerDesc, ParamVector};
pub use policy::{gaussian_log_density, GaussianPolicy, HALF_LN_2PI};
