use std::f64::consts::PI;

use super::{clip, EnvState, StepResult, DT, EPISODE_LIMIT};

pub const PENDULUM_MAX_TORQUE: f64 = 2.0;
pub const PENDULUM_MAX_SPEED: f64 = 8.0;
const G: f64 = 10.0;
const M: f64 = 1.0;
const L: f64 = 1.0;

/// Maps an angle to (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let r = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

pub(super) fn state(theta: f64, theta_dot: f64, t: usize) -> EnvState {
    EnvState {
        observation: vec![theta.cos(), theta.sin(), theta_dot],
        internal: vec![theta, theta_dot],
        t,
    }
}

/// Swing-up pendulum; θ = 0 is upright. The reward is the negated cost of the
/// state the action is applied in.
pub fn pendulum_step(s: &EnvState, action: &[f64]) -> StepResult {
    let (theta, theta_dot) = (s.internal[0], s.internal[1]);
    let u = clip(action.first().copied().unwrap_or(0.0), PENDULUM_MAX_TORQUE);
    let cost = wrap_angle(theta).powi(2) + 0.1 * theta_dot * theta_dot + 0.001 * u * u;
    let accel = 3.0 * G / (2.0 * L) * theta.sin() + 3.0 / (M * L * L) * u;
    let new_dot = clip(theta_dot + accel * DT, PENDULUM_MAX_SPEED);
    let new_theta = theta + new_dot * DT;
    let t = s.t + 1;
    StepResult {
        next_state: state(new_theta, new_dot, t),
        reward: -cost,
        done: t >= EPISODE_LIMIT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_rest_is_fixed_point() {
        let s = state(0.0, 0.0, 0);
        let r = pendulum_step(&s, &[0.0]);
        assert_eq!(r.reward, 0.0);
        assert_eq!(r.next_state.internal, vec![0.0, 0.0]);
        assert_eq!(r.next_state.observation, s.observation);
        assert!(!r.done);
    }

    #[test]
    fn torque_is_clipped() {
        let s = state(0.4, -0.3, 0);
        let a = pendulum_step(&s, &[5.0]);
        let b = pendulum_step(&s, &[2.0]);
        assert_eq!(a, b);
        let c = pendulum_step(&s, &[-7.0]);
        assert_eq!(c, pendulum_step(&s, &[-2.0]));
    }

    #[test]
    fn horizontal_release() {
        let s = state(PI / 2.0, 0.0, 0);
        let r = pendulum_step(&s, &[0.0]);
        assert!((r.next_state.internal[1] - 0.75).abs() < 1e-12);
        assert!((r.next_state.internal[0] - (PI / 2.0 + 0.75 * 0.05)).abs() < 1e-12);
    }

    #[test]
    fn speed_is_clipped_and_reward_bounded() {
        let s = state(PI, 8.0, 0);
        let r = pendulum_step(&s, &[2.0]);
        assert!(r.next_state.internal[1] <= PENDULUM_MAX_SPEED);
        let lower = -(PI * PI + 0.1 * 64.0 + 0.001 * 4.0);
        assert!(r.reward >= lower && r.reward <= 0.0);
    }

    #[test]
    fn truncates_at_limit() {
        let s = state(1.0, 0.0, EPISODE_LIMIT - 1);
        assert!(pendulum_step(&s, &[0.0]).done);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(0.1 + 4.0 * PI) - 0.1).abs() < 1e-12);
    }
}
