use super::{clip, EnvState, StepResult, DT, EPISODE_LIMIT};

pub(super) fn state(pos: [f64; 2], vel: [f64; 2], t: usize) -> EnvState {
    EnvState {
        observation: vec![pos[0], pos[1], vel[0], vel[1]],
        internal: vec![pos[0], pos[1], vel[0], vel[1]],
        t,
    }
}

/// 2-D point mass driven towards the origin. Semi-implicit Euler: velocity is
/// updated first and the new velocity moves the position. The reward is the
/// negated cost at the pre-step position.
pub fn pointmass_step(s: &EnvState, action: &[f64]) -> StepResult {
    let a = [
        clip(action.first().copied().unwrap_or(0.0), 1.0),
        clip(action.get(1).copied().unwrap_or(0.0), 1.0),
    ];
    let pos = [s.internal[0], s.internal[1]];
    let vel = [s.internal[2], s.internal[3]];
    let cost = pos[0] * pos[0] + pos[1] * pos[1] + 0.01 * (a[0] * a[0] + a[1] * a[1]);
    let nv = [vel[0] + DT * a[0], vel[1] + DT * a[1]];
    let np = [pos[0] + DT * nv[0], pos[1] + DT * nv[1]];
    let t = s.t + 1;
    StepResult {
        next_state: state(np, nv, t),
        reward: -cost,
        done: t >= EPISODE_LIMIT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_fixed_point() {
        let s = state([0.0, 0.0], [0.0, 0.0], 3);
        let r = pointmass_step(&s, &[0.0, 0.0]);
        assert_eq!(r.reward, 0.0);
        assert_eq!(r.next_state.internal, s.internal);
    }

    #[test]
    fn quadratic_cost() {
        let s = state([1.0, 0.0], [0.0, 0.0], 0);
        assert_eq!(pointmass_step(&s, &[0.0, 0.0]).reward, -1.0);
    }

    #[test]
    fn semi_implicit_update() {
        let s = state([0.0, 0.0], [1.0, 0.0], 0);
        let r = pointmass_step(&s, &[1.0, 0.0]);
        let st = &r.next_state.internal;
        assert!((st[2] - 1.05).abs() < 1e-15);
        assert!((st[0] - 0.0525).abs() < 1e-15);
        assert_eq!(st[1], 0.0);
        assert_eq!(st[3], 0.0);
    }

    #[test]
    fn force_is_clipped() {
        let s = state([0.2, -0.1], [0.3, 0.0], 0);
        assert_eq!(pointmass_step(&s, &[4.0, -9.0]), pointmass_step(&s, &[1.0, -1.0]));
    }
}
