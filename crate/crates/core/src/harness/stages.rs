//! Locating training stages from a run's return history.

use serde::{Deserialize, Serialize};

use crate::algos::IterationReport;

pub const RUNNING_WINDOW: usize = 10;

/// Mean of the available returns in the trailing window ending at each
/// iteration.
pub fn running_mean_returns(reports: &[IterationReport], window: usize) -> Vec<Option<f64>> {
    (0..reports.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let vals: Vec<f64> = reports[lo..=i].iter().filter_map(|r| r.mean_return).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageIterations {
    pub init: u64,
    /// First iteration whose running mean covers half the distance from the
    /// random-agent return to the target return.
    pub half_max: Option<u64>,
    /// Iteration with the highest running mean (earliest on ties).
    pub max: Option<u64>,
}

pub fn locate_stages(reports: &[IterationReport], random_return: f64, target_return: f64) -> StageIterations {
    let running = running_mean_returns(reports, RUNNING_WINDOW);
    let span = target_return - random_return;
    let half_max = running
        .iter()
        .zip(reports)
        .find(|(m, _)| m.is_some_and(|m| span != 0.0 && (m - random_return) / span >= 0.5))
        .map(|(_, r)| r.iteration);
    let mut max: Option<(u64, f64)> = None;
    for (m, r) in running.iter().zip(reports) {
        if let Some(m) = m {
            if max.is_none_or(|(_, best)| *m > best) {
                max = Some((r.iteration, *m));
            }
        }
    }
    StageIterations {
        init: 0,
        half_max,
        max: max.map(|(i, _)| i),
    }
}

/// (R − R_random)/(R_best − R_random)
pub fn normalized_return(value: f64, random_return: f64, best_return: f64) -> f64 {
    (value - random_return) / (best_return - random_return)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algos::RatioStats;

    fn report(iteration: u64, ret: Option<f64>) -> IterationReport {
        IterationReport {
            iteration,
            mean_return: ret,
            episodes: 1,
            mean_reward: 0.0,
            mean_kl: 0.0,
            gradient_steps: 320,
            ratio: RatioStats::default(),
            actor_loss: 0.0,
            critic_loss: 0.0,
            advantage_kurtosis: None,
            raw_advantage_kurtosis: None,
            policy_std: vec![1.0],
        }
    }

    #[test]
    fn stages_on_a_ramp() {
        let reports: Vec<_> = (0..40).map(|i| report(i, Some(-100.0 + 2.0 * i as f64))).collect();
        let s = locate_stages(&reports, -100.0, -40.0);
        // Running mean at i is -100 + 2(i - 4.5); it reaches -70 at i = 19.5.
        assert_eq!(s.half_max, Some(20));
        assert_eq!(s.max, Some(39));
        assert_eq!(s.init, 0);
    }

    #[test]
    fn unreachable_half_stage_is_absent() {
        let reports: Vec<_> = (0..20).map(|i| report(i, Some(-100.0))).collect();
        let s = locate_stages(&reports, -100.0, -10.0);
        assert_eq!(s.half_max, None);
        assert_eq!(s.max, Some(0));
    }

    #[test]
    fn missing_returns_are_skipped() {
        let reports = vec![report(0, None), report(1, Some(3.0)), report(2, None)];
        let r = running_mean_returns(&reports, 10);
        assert_eq!(r, vec![None, Some(3.0), Some(3.0)]);
    }

    #[test]
    fn normalization_identity() {
        assert_eq!(normalized_return(-300.0, -1200.0, -300.0), 1.0);
        assert_eq!(normalized_return(-1200.0, -1200.0, -300.0), 0.0);
    }
}
