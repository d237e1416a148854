use super::optim::l2_norm;
use crate::{Error, Result};

/// A loss made of independent per-sample terms whose gradients can be taken one
/// sample at a time.
pub trait SampleLoss {
    fn num_samples(&self) -> usize;

    fn num_params(&self) -> usize;

    /// Returns the loss of sample `i` and overwrites `grad` with its gradient.
    fn sample_loss_grad(&self, params: &[f64], i: usize, grad: &mut [f64]) -> Result<f64>;

    fn sample_loss(&self, params: &[f64], i: usize) -> Result<f64> {
        let mut g = vec![0.0; self.num_params()];
        self.sample_loss_grad(params, i, &mut g)
    }

    fn mean_loss(&self, params: &[f64]) -> Result<f64> {
        let n = self.num_samples();
        let mut total = 0.0;
        for i in 0..n {
            total += self.sample_loss(params, i)?;
        }
        Ok(total / n as f64)
    }
}

/// Per-sample gradients captured at one parameter point, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GradSampleMatrix {
    pub n_samples: usize,
    pub n_params: usize,
    pub rows: Vec<f64>,
    pub losses: Vec<f64>,
    pub norms: Vec<f64>,
}

impl GradSampleMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n_params..(i + 1) * self.n_params]
    }

    /// Mean of the rows, summed in sample order (bitwise equal to
    /// [`mean_loss_grad`]).
    pub fn mean_row(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_params];
        for i in 0..self.n_samples {
            for (a, g) in acc.iter_mut().zip(self.row(i)) {
                *a += g;
            }
        }
        let inv = 1.0 / self.n_samples as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        acc
    }

    /// Rows minus their mean (gradient noise).
    pub fn centered(&self) -> Vec<f64> {
        let mean = self.mean_row();
        let mut out = self.rows.clone();
        for i in 0..self.n_samples {
            for (o, m) in out[i * self.n_params..(i + 1) * self.n_params].iter_mut().zip(&mean) {
                *o -= m;
            }
        }
        out
    }
}

pub fn per_sample_grads(loss: &dyn SampleLoss, params: &[f64]) -> Result<GradSampleMatrix> {
    let n = loss.num_samples();
    if n == 0 {
        return Err(Error::Empty("per-sample gradient batch"));
    }
    let p = loss.num_params();
    let mut rows = vec![0.0; n * p];
    let mut losses = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    for i in 0..n {
        let row = &mut rows[i * p..(i + 1) * p];
        let l = loss.sample_loss_grad(params, i, row)?;
        if !l.is_finite() {
            return Err(Error::NonFinite(format!("loss of sample {i}")));
        }
        norms.push(l2_norm(row));
        losses.push(l);
    }
    Ok(GradSampleMatrix {
        n_samples: n,
        n_params: p,
        rows,
        losses,
        norms,
    })
}

/// Mean loss and its gradient over the samples `range`, accumulated one sample
/// at a time.
pub fn mean_loss_grad(loss: &dyn SampleLoss, params: &[f64], range: std::ops::Range<usize>) -> Result<(f64, Vec<f64>)> {
    if range.is_empty() {
        return Err(Error::Empty("mean-loss gradient batch"));
    }
    let p = loss.num_params();
    let n = range.len();
    let mut acc = vec![0.0; p];
    let mut scratch = vec![0.0; p];
    let mut total = 0.0;
    for i in range {
        let l = loss.sample_loss_grad(params, i, &mut scratch)?;
        if !l.is_finite() {
            return Err(Error::NonFinite(format!("loss of sample {i}")));
        }
        total += l;
        for (a, g) in acc.iter_mut().zip(&scratch) {
            *a += g;
        }
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok((total / n as f64, acc))
}
