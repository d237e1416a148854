use serde::{Deserialize, Serialize};

use super::param::ParamVector;
use crate::error::check_len;
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, n_params: usize) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {learning_rate}")));
        }
        Ok(Self {
            kind,
            learning_rate,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step_count: 0,
        })
    }

    pub fn sgd(learning_rate: f64, n_params: usize) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate, n_params)
    }

    pub fn adam(learning_rate: f64, n_params: usize) -> Result<Self> {
        Self::new(OptimizerKind::Adam, learning_rate, n_params)
    }

    pub fn step(&mut self, params: &mut ParamVector, grad: &[f64]) -> Result<()> {
        self.step_slice(&mut params.values, grad)
    }

    /// Applies one descent step in place.
    pub fn step_slice(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        check_len("optimizer gradient", params.len(), grad.len())?;
        check_len("optimizer state", self.m.len(), grad.len())?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.step_count += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - ADAM_BETA1.powi(t);
                let bc2 = 1.0 - ADAM_BETA2.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
                    self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
        Ok(())
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales `grad` onto the ball of radius `max_norm` if it lies outside.
pub fn global_grad_clip(grad: &[f64], max_norm: f64) -> Vec<f64> {
    let mut g = grad.to_vec();
    clip_in_place(&mut g, max_norm);
    g
}

/// In-place variant of [`global_grad_clip`]; returns the norm before clipping.
pub fn clip_in_place(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = l2_norm(grad);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerDesc;
    use proptest::prelude::*;

    fn scalar(v: f64) -> ParamVector {
        ParamVector::new(vec![LayerDesc::new("theta", vec![1])], vec![v]).unwrap()
    }

    #[test]
    fn sgd_arithmetic() {
        let mut st = OptimizerState::sgd(0.1, 1).unwrap();
        let mut p = scalar(1.0);
        st.step(&mut p, &[2.0]).unwrap();
        assert!((p.values[0] - 0.8).abs() < 1e-15);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        for g in [3.7, -0.02] {
            let mut st = OptimizerState::adam(0.01, 1).unwrap();
            let mut p = scalar(0.0);
            st.step(&mut p, &[g]).unwrap();
            // m_hat = g, v_hat = g², update = lr·g/(|g| + eps)
            let expect = -0.01 * g / (g.abs() + ADAM_EPS);
            assert!((p.values[0] - expect).abs() < 1e-15);
            assert!((p.values[0] + 0.01 * g.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn adam_minimises_quadratic() {
        let mut st = OptimizerState::adam(0.01, 1).unwrap();
        let mut p = scalar(1.0);
        for _ in 0..1000 {
            let g = 2.0 * p.values[0];
            st.step(&mut p, &[g]).unwrap();
        }
        assert!(p.values[0].abs() < 1e-2, "theta = {}", p.values[0]);
        assert_eq!(st.step_count, 1000);
    }

    #[test]
    fn rejects_non_finite_and_mismatched_grads() {
        let mut st = OptimizerState::adam(0.01, 1).unwrap();
        let mut p = scalar(1.0);
        assert!(st.step(&mut p, &[f64::NAN]).is_err());
        assert!(st.step(&mut p, &[1.0, 2.0]).is_err());
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn clip_examples() {
        let g = [0.6, 0.8];
        let c = global_grad_clip(&g, 0.5);
        assert!((l2_norm(&c) - 0.5).abs() < 1e-15);
        assert!((c[0] - 0.3).abs() < 1e-15 && (c[1] - 0.4).abs() < 1e-15);
        let small = [0.18, 0.24];
        assert_eq!(global_grad_clip(&small, 0.5), small.to_vec());
        assert_eq!(global_grad_clip(&[0.0, 0.0], 0.5), vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn clip_bounds_norm_and_keeps_direction(
            g in proptest::collection::vec(-100.0f64..100.0, 1..20),
            max in 0.01f64..10.0,
        ) {
            let c = global_grad_clip(&g, max);
            prop_assert!(l2_norm(&c) <= max + 1e-12 || c == g);
            let n0 = l2_norm(&g);
            if n0 > 0.0 {
                let cos = g.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / (n0 * l2_norm(&c));
                prop_assert!((cos - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn optimizer_step_is_deterministic(
            g in proptest::collection::vec(-5.0f64..5.0, 3),
            p0 in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let layout = vec![LayerDesc::new("x", vec![3])];
            let mut a = ParamVector::new(layout.clone(), p0.clone()).unwrap();
            let mut b = ParamVector::new(layout, p0).unwrap();
            let mut sa = OptimizerState::adam(1e-3, 3).unwrap();
            let mut sb = sa.clone();
            sa.step(&mut a, &g).unwrap();
            sb.step(&mut b, &g).unwrap();
            prop_assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(sa, sb);
        }
    }
}
