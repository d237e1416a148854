//! Per-sample gradient capture inside the training loop, and tail reports.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::estimators::{ad_fraction, alpha_index_default, kurtosis};
use crate::advantage::grouped_tail_stats;
use crate::algos::{ActorObjective, CriticObjective, LossConfig, StepContext, StepObserver};
use crate::nn::{per_sample_grads, GradSampleMatrix};
use crate::rng::{derive_seed, RunRng};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quantity {
    #[serde(rename = "actor-grad-norm")]
    ActorGradNorm,
    #[serde(rename = "critic-grad-norm")]
    CriticGradNorm,
    #[serde(rename = "advantage")]
    Advantage,
    #[serde(rename = "ratio")]
    Ratio,
    /// ‖∇actor‖ / |Â|
    #[serde(rename = "actor/advantage")]
    ActorOverAdvantage,
    /// ‖∇actor‖ / ρ
    #[serde(rename = "actor/ratio")]
    ActorOverRatio,
    #[serde(rename = "returns")]
    Returns,
    #[serde(rename = "value-estimates")]
    ValueEstimates,
    /// Raw advantages below zero (magnitudes).
    #[serde(rename = "advantage-negative")]
    NegativeAdvantage,
    #[serde(rename = "advantage-positive")]
    PositiveAdvantage,
}

impl Quantity {
    /// The per-step quantities, in output column order.
    pub const PER_SAMPLE: [Quantity; 8] = [
        Quantity::ActorGradNorm,
        Quantity::CriticGradNorm,
        Quantity::Advantage,
        Quantity::Ratio,
        Quantity::ActorOverAdvantage,
        Quantity::ActorOverRatio,
        Quantity::Returns,
        Quantity::ValueEstimates,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Quantity::ActorGradNorm => "actor-grad-norm",
            Quantity::CriticGradNorm => "critic-grad-norm",
            Quantity::Advantage => "advantage",
            Quantity::Ratio => "ratio",
            Quantity::ActorOverAdvantage => "actor/advantage",
            Quantity::ActorOverRatio => "actor/ratio",
            Quantity::Returns => "returns",
            Quantity::ValueEstimates => "value-estimates",
            Quantity::NegativeAdvantage => "advantage-negative",
            Quantity::PositiveAdvantage => "advantage-positive",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Kurtosis,
    AlphaIndex,
    AdFraction,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::Kurtosis => "kurtosis",
            Estimator::AlphaIndex => "alpha_index",
            Estimator::AdFraction => "ad_fraction",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "iteration")]
    Iteration,
    #[serde(rename = "init")]
    Init,
    #[serde(rename = "50%-max")]
    HalfMax,
    #[serde(rename = "max")]
    Max,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Iteration => "iteration",
            Stage::Init => "init",
            Stage::HalfMax => "50%-max",
            Stage::Max => "max",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iteration" => Ok(Stage::Iteration),
            "init" => Ok(Stage::Init),
            "50%-max" | "half_max" | "half-max" => Ok(Stage::HalfMax),
            "max" => Ok(Stage::Max),
            _ => Err(crate::Error::Config(format!("unknown stage `{s}`"))),
        }
    }
}

/// Objective under which per-sample gradients are recomputed, adding one
/// heuristic at a time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Surrogate objective and plain value regression.
    NoClip,
    /// + likelihood-ratio clipping.
    RatioClip,
    /// + value clipping.
    ValueClip,
    /// + per-sample gradient norm clipping.
    GradClip,
}

impl Variant {
    pub const PROGRESSIVE: [Variant; 4] = [Variant::NoClip, Variant::RatioClip, Variant::ValueClip, Variant::GradClip];

    pub fn label(self) -> &'static str {
        match self {
            Variant::NoClip => "no_clip",
            Variant::RatioClip => "ratio_clip",
            Variant::ValueClip => "value_clip",
            Variant::GradClip => "grad_clip",
        }
    }

    /// Loss configuration of this variant on top of a run's loss, and the
    /// per-sample gradient norm bound if any.
    pub fn loss_config(self, base: &LossConfig, eps: f64, grad_clip: f64) -> (LossConfig, Option<f64>) {
        let mut cfg = LossConfig {
            ratio_clip_eps: None,
            value_clip_eps: None,
            grad_clip_max: None,
            ..*base
        };
        cfg.policy_objective = crate::algos::PolicyObjective::ImportanceWeighted;
        if self >= Variant::RatioClip {
            cfg.ratio_clip_eps = Some(eps);
        }
        if self >= Variant::ValueClip {
            cfg.value_clip_eps = Some(eps);
        }
        let clip = (self == Variant::GradClip).then_some(grad_clip);
        (cfg, clip)
    }
}

/// One estimator applied to one quantity at one captured step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub quantity: Quantity,
    pub stage: Stage,
    pub iteration: u64,
    pub step: usize,
    pub estimator: Estimator,
    /// Absent when the estimator is undefined on this sample (e.g. zero
    /// variance) or saturated.
    pub value: Option<f64>,
    /// The estimate diverged (e.g. a non-positive alpha-index denominator).
    pub saturated: bool,
    pub sample_count: usize,
    pub seed: u64,
    pub variant: Option<Variant>,
    /// Block length used by the alpha-index.
    pub block_size: Option<usize>,
}

/// Per-sample quantities at one step, in minibatch order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSamples {
    pub actor_norms: Vec<f64>,
    pub critic_norms: Vec<f64>,
    pub advantages: Vec<f64>,
    pub ratios: Vec<f64>,
    pub returns: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepSamples {
    /// Values of `q` used for estimation. Ratio-normalised quantities skip
    /// samples whose divisor is zero.
    pub fn quantity(&self, q: Quantity) -> Vec<f64> {
        match q {
            Quantity::ActorGradNorm => self.actor_norms.clone(),
            Quantity::CriticGradNorm => self.critic_norms.clone(),
            Quantity::Advantage => self.advantages.clone(),
            Quantity::Ratio => self.ratios.clone(),
            Quantity::ActorOverAdvantage => self
                .actor_norms
                .iter()
                .zip(&self.advantages)
                .filter(|(_, a)| **a != 0.0)
                .map(|(n, a)| n / a.abs())
                .collect(),
            Quantity::ActorOverRatio => self.actor_norms.iter().zip(&self.ratios).map(|(n, r)| n / r).collect(),
            Quantity::Returns => self.returns.clone(),
            Quantity::ValueEstimates => self.values.clone(),
            Quantity::NegativeAdvantage => self.advantages.iter().filter(|a| **a < 0.0).map(|a| -a).collect(),
            Quantity::PositiveAdvantage => self.advantages.iter().filter(|a| **a > 0.0).copied().collect(),
        }
    }
}

/// Per-sample gradients of both networks at one step.
pub struct StepGradients {
    pub samples: StepSamples,
    pub actor: GradSampleMatrix,
    pub critic: GradSampleMatrix,
}

/// Recomputes per-sample actor and critic gradients for the step's minibatch
/// under `loss`, optionally clipping each sample's joint gradient to
/// `per_sample_clip`.
pub fn step_gradients(ctx: &StepContext<'_>, loss: &LossConfig, per_sample_clip: Option<f64>) -> Result<StepGradients> {
    let actor = ActorObjective::new(ctx.actor_net, ctx.batch, ctx.indices, loss);
    let critic = CriticObjective::new(ctx.critic_net, ctx.batch, ctx.indices, loss);
    let mut ga = per_sample_grads(&actor, ctx.actor_params)?;
    let mut gc = per_sample_grads(&critic, ctx.critic_params)?;
    if let Some(max) = per_sample_clip {
        for i in 0..ga.n_samples {
            let joint = (ga.norms[i] * ga.norms[i] + gc.norms[i] * gc.norms[i]).sqrt();
            if joint > max {
                let s = max / joint;
                let (pa, pc) = (ga.n_params, gc.n_params);
                ga.rows[i * pa..(i + 1) * pa].iter_mut().for_each(|g| *g *= s);
                gc.rows[i * pc..(i + 1) * pc].iter_mut().for_each(|g| *g *= s);
                ga.norms[i] *= s;
                gc.norms[i] *= s;
            }
        }
    }
    let n = ctx.indices.len();
    let mut ratios = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        ratios.push(actor.log_prob_and_ratio(ctx.actor_params, i)?.1);
        values.push(critic.value(ctx.critic_params, i)?);
    }
    let samples = StepSamples {
        actor_norms: ga.norms.clone(),
        critic_norms: gc.norms.clone(),
        advantages: ctx.indices.iter().map(|&j| ctx.batch.advantages[j]).collect(),
        ratios,
        returns: ctx.indices.iter().map(|&j| ctx.batch.returns[j]).collect(),
        values,
    };
    Ok(StepGradients {
        samples,
        actor: ga,
        critic: gc,
    })
}

/// Where a tail report comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportKey {
    pub stage: Stage,
    pub iteration: u64,
    pub step: usize,
    pub seed: u64,
    pub variant: Option<Variant>,
}

/// κ^{1/4} and the alpha-index (on mean-centred values) of one sample.
pub fn estimate(quantity: Quantity, values: &[f64], key: ReportKey) -> Vec<TailReport> {
    let base = |estimator, value: Option<f64>, saturated, block_size| TailReport {
        quantity,
        stage: key.stage,
        iteration: key.iteration,
        step: key.step,
        estimator,
        value,
        saturated,
        sample_count: values.len(),
        seed: key.seed,
        variant: key.variant,
        block_size,
    };
    let k = kurtosis(values).ok();
    let mut out = vec![base(Estimator::Kurtosis, k, false, None)];
    let alpha = if values.len() >= 4 {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let centred: Vec<f64> = values.iter().map(|v| v - mean).collect();
        alpha_index_default(&centred).ok()
    } else {
        None
    };
    out.push(match alpha {
        Some(a) if a.alpha.is_finite() && a.alpha > 0.0 => base(Estimator::AlphaIndex, Some(a.alpha), false, Some(a.block_size)),
        Some(a) => base(Estimator::AlphaIndex, None, true, Some(a.block_size)),
        None => base(Estimator::AlphaIndex, None, false, None),
    });
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CaptureMode {
    /// First minibatch step of every `every`-th iteration.
    OnPolicy { every: u64 },
    /// Every step of one iteration.
    OffPolicy { iteration: u64, stage: Stage },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptureConfig {
    pub mode: CaptureMode,
    /// Random directions for the Anderson–Darling fraction; 0 disables it.
    pub ad_directions: usize,
    /// Recompute under every progressive-heuristic variant in addition to the
    /// run's own objective.
    pub progressive: bool,
    pub clip_eps: f64,
    pub grad_clip: f64,
    /// Keep the raw per-sample quantities of every captured step.
    pub keep_samples: bool,
    pub seed: u64,
}

impl CaptureConfig {
    pub fn on_policy(seed: u64) -> Self {
        Self {
            mode: CaptureMode::OnPolicy { every: 10 },
            ad_directions: 1000,
            progressive: false,
            clip_eps: 0.2,
            grad_clip: 0.5,
            keep_samples: false,
            seed,
        }
    }

    pub fn off_policy(seed: u64, iteration: u64, stage: Stage) -> Self {
        Self {
            mode: CaptureMode::OffPolicy { iteration, stage },
            progressive: true,
            ..Self::on_policy(seed)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapturedStep {
    pub stage: Stage,
    pub iteration: u64,
    pub step: usize,
    pub variant: Option<Variant>,
    pub samples: StepSamples,
}

/// Observer that captures per-sample gradients without touching the run's
/// state or random stream.
#[derive(Clone, Debug)]
pub struct GradientCapture {
    pub config: CaptureConfig,
    pub reports: Vec<TailReport>,
    pub steps: Vec<CapturedStep>,
    /// Steps whose zero-variance projections were skipped by the AD test.
    pub skipped_directions: usize,
}

impl GradientCapture {
    pub fn new(config: CaptureConfig) -> Self {
        Self {
            config,
            reports: Vec::new(),
            steps: Vec::new(),
            skipped_directions: 0,
        }
    }

    fn stage(&self) -> Stage {
        match self.config.mode {
            CaptureMode::OnPolicy { .. } => Stage::Iteration,
            CaptureMode::OffPolicy { stage, .. } => stage,
        }
    }

    fn record(&mut self, ctx: &StepContext<'_>, loss: &LossConfig, clip: Option<f64>, variant: Option<Variant>) -> Result<()> {
        let grads = step_gradients(ctx, loss, clip)?;
        let key = ReportKey {
            stage: self.stage(),
            iteration: ctx.iteration,
            step: ctx.step,
            seed: self.config.seed,
            variant,
        };
        for q in Quantity::PER_SAMPLE {
            self.reports.extend(estimate(q, &grads.samples.quantity(q), key));
        }
        if self.config.ad_directions > 0 {
            let variant_tag = variant.map_or(0, |v| v as u64 + 1);
            let mut rng = RunRng::new(derive_seed(&[self.config.seed, ctx.iteration, ctx.step as u64, variant_tag]));
            for (q, m) in [(Quantity::ActorGradNorm, &grads.actor), (Quantity::CriticGradNorm, &grads.critic)] {
                let f = ad_fraction(&m.rows, m.n_samples, m.n_params, self.config.ad_directions, &mut rng);
                let (value, skipped) = match f {
                    Ok(f) => ((f.tested > 0).then_some(f.fraction), f.skipped),
                    Err(_) => (None, 0),
                };
                self.skipped_directions += skipped;
                self.reports.push(TailReport {
                    quantity: q,
                    stage: key.stage,
                    iteration: key.iteration,
                    step: key.step,
                    estimator: Estimator::AdFraction,
                    value,
                    saturated: false,
                    sample_count: m.n_samples,
                    seed: key.seed,
                    variant,
                    block_size: None,
                });
            }
        }
        if self.config.keep_samples {
            self.steps.push(CapturedStep {
                stage: key.stage,
                iteration: key.iteration,
                step: key.step,
                variant,
                samples: grads.samples,
            });
        }
        Ok(())
    }

    fn record_grouped(&mut self, ctx: &StepContext<'_>) {
        let g = grouped_tail_stats(&ctx.batch.raw_advantages);
        for (q, k, n) in [
            (Quantity::NegativeAdvantage, g.negative_kurtosis, g.negative_count),
            (Quantity::PositiveAdvantage, g.positive_kurtosis, g.positive_count),
        ] {
            self.reports.push(TailReport {
                quantity: q,
                stage: self.stage(),
                iteration: ctx.iteration,
                step: ctx.step,
                estimator: Estimator::Kurtosis,
                value: k,
                saturated: false,
                sample_count: n,
                seed: self.config.seed,
                variant: None,
                block_size: None,
            });
        }
    }
}

impl StepObserver for GradientCapture {
    fn wants_iteration(&self, iteration: u64) -> bool {
        match self.config.mode {
            CaptureMode::OnPolicy { every } => every > 0 && iteration.is_multiple_of(every),
            CaptureMode::OffPolicy { iteration: it, .. } => iteration == it,
        }
    }

    fn on_step(&mut self, ctx: &StepContext<'_>) -> Result<()> {
        if !self.wants_iteration(ctx.iteration) {
            return Ok(());
        }
        if matches!(self.config.mode, CaptureMode::OnPolicy { .. }) && ctx.step != 0 {
            return Ok(());
        }
        if ctx.step == 0 {
            self.record_grouped(ctx);
        }
        self.record(ctx, ctx.loss, None, None)?;
        if self.config.progressive {
            for v in Variant::PROGRESSIVE {
                let (loss, clip) = v.loss_config(ctx.loss, self.config.clip_eps, self.config.grad_clip);
                self.record(ctx, &loss, clip, Some(v))?;
            }
        }
        Ok(())
    }
}
