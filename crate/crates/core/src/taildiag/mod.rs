//! Heavy-tail diagnostics: estimators, synthetic studies and gradient capture.

mod capture;
mod estimators;
mod synth;

pub use capture::*;
pub use estimators::{
    ad_critical_value, ad_fraction, alpha_index, alpha_index_default, anderson_darling, default_block_size, kurtosis,
    AdFraction, AlphaIndex, AD_CRITICAL_VALUES, AD_SIGNIFICANCE, GAUSSIAN_KURTOSIS_ROOT, LOG_FLOOR,
};
pub use synth::{
    norm_kurtosis, ratio_tail_demo, symmetric_stable, synth_pareto_study, CoordinateLaw, KurtosisStudyRow,
    RatioTailOutcome, RatioTailSpec, MIN_RATIO_TAIL_SAMPLES,
};
