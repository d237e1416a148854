use serde::{Deserialize, Serialize};

use super::param::{LayerDesc, ParamVector};
use crate::error::check_len;
use crate::rng::RunRng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// Architecture of a fully connected network: hidden layers use `activation`,
/// the output layer is linear.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

/// Scratch space for one forward/backward pass. Reusing it avoids per-sample
/// allocation in the training loop.
#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden,
            output_dim,
            activation: Activation::Tanh,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::InvalidArgument("MLP needs at least one hidden layer".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("MLP dimensions must be positive".into()));
        }
        Ok(())
    }

    /// (fan_in, fan_out) per layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in self.hidden.iter().chain(std::iter::once(&self.output_dim)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn layout(&self, prefix: &str) -> Vec<LayerDesc> {
        let mut out = Vec::new();
        for (l, (fan_in, fan_out)) in self.layer_dims().into_iter().enumerate() {
            out.push(LayerDesc::new(format!("{prefix}layer{l}.weight"), vec![fan_out, fan_in]));
            out.push(LayerDesc::new(format!("{prefix}layer{l}.bias"), vec![fan_out]));
        }
        out
    }

    /// Scaled-uniform initialisation: weights ~ U(±g·sqrt(3/fan_in)) so that the
    /// per-weight variance is g²/fan_in; hidden layers use g = √2, the output
    /// layer uses `head_gain`; biases start at zero.
    pub fn init_params(&self, rng: &mut RunRng, head_gain: f64) -> Vec<f64> {
        let dims = self.layer_dims();
        let last = dims.len() - 1;
        let mut values = Vec::with_capacity(self.num_params());
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let gain = if l == last { head_gain } else { std::f64::consts::SQRT_2 };
            let a = gain * (3.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                values.push(rng.uniform_range(-a, a));
            }
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        values
    }

    pub fn new_cache(&self) -> MlpCache {
        let mut acts = vec![vec![0.0; self.input_dim]];
        for (_, o) in self.layer_dims() {
            acts.push(vec![0.0; o]);
        }
        let widest = self
            .hidden
            .iter()
            .copied()
            .chain([self.input_dim, self.output_dim])
            .max()
            .unwrap_or(0);
        MlpCache {
            acts,
            delta: Vec::with_capacity(widest),
            delta_prev: Vec::with_capacity(widest),
        }
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.new_cache();
        self.forward_cached(params, x, &mut cache)?;
        Ok(cache.output().to_vec())
    }

    pub fn forward_cached<'c>(
        &self,
        params: &[f64],
        x: &[f64],
        cache: &'c mut MlpCache,
    ) -> Result<&'c [f64]> {
        check_len("MLP input", self.input_dim, x.len())?;
        if params.len() < self.num_params() {
            return Err(Error::DimensionMismatch {
                context: "MLP params",
                expected: self.num_params(),
                actual: params.len(),
            });
        }
        if cache.acts.len() != self.hidden.len() + 2 {
            *cache = self.new_cache();
        }
        cache.acts[0].copy_from_slice(x);
        let dims = self.layer_dims();
        let last = dims.len() - 1;
        let mut off = 0;
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let w = &params[off..off + fan_in * fan_out];
            let b = &params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            off += fan_in * fan_out + fan_out;
            let (head, tail) = cache.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            for j in 0..fan_out {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let z = b[j] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                out[j] = if l == last { z } else { z.tanh() };
            }
        }
        Ok(cache.output())
    }

    /// Backpropagates `d_out` (dL/d output) through the pass stored in `cache`,
    /// overwriting `grad[..num_params]` with dL/dθ.
    pub fn backward(&self, params: &[f64], cache: &mut MlpCache, d_out: &[f64], grad: &mut [f64]) {
        let dims = self.layer_dims();
        let n_layers = dims.len();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for &(i, o) in &dims {
            offsets.push(off);
            off += i * o + o;
        }
        cache.delta.clear();
        cache.delta.extend_from_slice(d_out);
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = dims[l];
            if l != n_layers - 1 {
                // tanh'(z) = 1 - tanh(z)^2, using the stored activation
                for (d, a) in cache.delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let o = offsets[l];
            let input = &cache.acts[l];
            let (gw, gb) = grad[o..o + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            for j in 0..fan_out {
                let dj = cache.delta[j];
                gb[j] = dj;
                for (g, a) in gw[j * fan_in..(j + 1) * fan_in].iter_mut().zip(input) {
                    *g = dj * a;
                }
            }
            if l > 0 {
                let w = &params[o..o + fan_in * fan_out];
                cache.delta_prev.clear();
                cache.delta_prev.resize(fan_in, 0.0);
                for j in 0..fan_out {
                    let dj = cache.delta[j];
                    for (dp, wji) in cache.delta_prev.iter_mut().zip(&w[j * fan_in..(j + 1) * fan_in]) {
                        *dp += wji * dj;
                    }
                }
                std::mem::swap(&mut cache.delta, &mut cache.delta_prev);
            }
        }
    }
}

/// An [`MlpSpec`] together with its parameters; used for the critic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl Mlp {
    pub fn new(spec: MlpSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        check_len("Mlp params", spec.num_params(), params.len())?;
        params.validate()?;
        Ok(Self { spec, params })
    }

    pub fn init(spec: MlpSpec, rng: &mut RunRng, head_gain: f64) -> Result<Self> {
        spec.validate()?;
        let values = spec.init_params(rng, head_gain);
        let params = ParamVector::new(spec.layout(""), values)?;
        Ok(Self { spec, params })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.spec.forward(&self.params.values, x)
    }

    /// First output, for scalar heads such as the critic.
    pub fn scalar(&self, x: &[f64], cache: &mut MlpCache) -> Result<f64> {
        Ok(self.spec.forward_cached(&self.params.values, x, cache)?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight-line re-implementation used as an oracle: no caches, explicit
    /// index arithmetic into the flat parameter array.
    fn reference_forward(spec: &MlpSpec, p: &[f64], x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut off = 0;
        let dims = spec.layer_dims();
        for (l, (fi, fo)) in dims.iter().copied().enumerate() {
            let mut next = vec![0.0; fo];
            for (j, n) in next.iter_mut().enumerate() {
                let mut s = p[off + fi * fo + j];
                for (i, c) in cur.iter().enumerate() {
                    s += p[off + j * fi + i] * c;
                }
                *n = if l + 1 == dims.len() { s } else { s.tanh() };
            }
            off += fi * fo + fo;
            cur = next;
        }
        cur
    }

    #[test]
    fn zero_params_give_zero_output() {
        let spec = MlpSpec::new(3, vec![5, 4], 2).unwrap();
        let p = vec![0.0; spec.num_params()];
        assert_eq!(spec.forward(&p, &[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layers() {
        // W = I, b = 0 in both layers: the pre-activation of the hidden layer is x
        // itself and the linear head passes tanh(x) through unchanged.
        let spec = MlpSpec::new(2, vec![2], 2).unwrap();
        let mut p = vec![0.0; spec.num_params()];
        p[0] = 1.0;
        p[3] = 1.0;
        p[6] = 1.0;
        p[9] = 1.0;
        let y = spec.forward(&p, &[1.0, 2.0]).unwrap();
        assert_eq!(y, vec![1f64.tanh(), 2f64.tanh()]);
    }

    #[test]
    fn matches_reference_forward() {
        let spec = MlpSpec::new(4, vec![7, 5], 3).unwrap();
        let mut rng = RunRng::new(5);
        for _ in 0..20 {
            let p: Vec<f64> = (0..spec.num_params()).map(|_| rng.normal()).collect();
            let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            let a = spec.forward(&p, &x).unwrap();
            let b = reference_forward(&spec, &p, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let spec = MlpSpec::new(3, vec![4], 1).unwrap();
        let p = vec![0.0; spec.num_params()];
        assert!(matches!(
            spec.forward(&p, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(MlpSpec::new(3, vec![], 1).is_err());
        assert!(MlpSpec::new(0, vec![4], 1).is_err());
        assert!(MlpSpec::new(3, vec![4, 0], 1).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let spec = MlpSpec::new(3, vec![6, 4], 2).unwrap();
        let mut rng = RunRng::new(9);
        let p: Vec<f64> = (0..spec.num_params()).map(|_| 0.5 * rng.normal()).collect();
        let x = [0.3, -0.7, 1.1];
        let w = [0.8, -1.3];
        let loss = |p: &[f64]| {
            let y = spec.forward(p, &x).unwrap();
            y[0] * w[0] + y[1] * w[1]
        };
        let mut cache = spec.new_cache();
        spec.forward_cached(&p, &x, &mut cache).unwrap();
        let mut g = vec![0.0; spec.num_params()];
        spec.backward(&p, &mut cache, &w, &mut g);
        let h = 1e-6;
        for k in 0..p.len() {
            let mut pp = p.clone();
            pp[k] += h;
            let mut pm = p.clone();
            pm[k] -= h;
            let fd = (loss(&pp) - loss(&pm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "k={k} fd={fd} bp={}", g[k]);
        }
    }
}
