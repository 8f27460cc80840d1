use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
    /// Row-wise softmax.
    Softmax,
    Relu,
    Identity,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

/// `log softmax` of a row, via log-sum-exp.
pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

impl Activation {
    pub fn apply(self, m: &mut Matrix) {
        match self {
            Activation::Identity => {}
            Activation::Tanh => m.data_mut().iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Relu => m.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Softplus => m.data_mut().iter_mut().for_each(|v| *v = softplus(*v)),
            Activation::Softmax => {
                let cols = m.cols();
                if cols > 0 {
                    m.data_mut().chunks_exact_mut(cols).for_each(softmax_in_place);
                }
            }
        }
    }

    /// Gradient w.r.t. the pre-activation given the pre-activation `pre`,
    /// the activation output `out` and the upstream gradient `d_out`.
    pub fn backward(self, pre: &Matrix, out: &Matrix, d_out: &Matrix) -> Matrix {
        let mut d = d_out.clone();
        match self {
            Activation::Identity => {}
            Activation::Tanh => {
                for (g, y) in d.data_mut().iter_mut().zip(out.data()) {
                    *g *= 1.0 - y * y;
                }
            }
            Activation::Relu => {
                for (g, x) in d.data_mut().iter_mut().zip(pre.data()) {
                    if *x <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Softplus => {
                for (g, x) in d.data_mut().iter_mut().zip(pre.data()) {
                    *g *= sigmoid(*x);
                }
            }
            Activation::Softmax => {
                let cols = out.cols();
                for (drow, yrow) in d
                    .data_mut()
                    .chunks_exact_mut(cols)
                    .zip(out.data().chunks_exact(cols))
                {
                    let dot: f64 = drow.iter().zip(yrow).map(|(g, y)| g * y).sum();
                    for (g, y) in drow.iter_mut().zip(yrow) {
                        *g = y * (*g - dot);
                    }
                }
            }
        }
        d
    }

    /// Whether the backward pass needs the pre-activation values.
    pub(crate) fn needs_pre(self) -> bool {
        matches!(self, Activation::Relu | Activation::Softplus)
    }
}
