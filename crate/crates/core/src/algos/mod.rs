//! Policy-gradient losses, per-sample objectives and the training loop.

mod losses;
mod objective;
mod trainer;

pub use losses::{
    a2c_loss, check_clip_eps, gaussian_kl, mean_kl, ppo_clip_active, ppo_clip_loss, ppo_clip_objective, ratio, ratios,
    surrogate_noclip_loss, value_loss, value_loss_term, value_loss_term_grad,
};
pub use objective::{ActorObjective, Aggregation, CriticObjective, LossConfig, PolicyObjective, TrainBatch};
pub use trainer::{Agent, Algorithm, IterationReport, RatioStats, StepContext, StepObserver, TrainConfig, Trainer};
