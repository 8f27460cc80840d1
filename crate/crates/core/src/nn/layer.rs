//! Layer specifications and their batched forward/backward kernels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{sigmoid, Activation};
use super::matrix::{
    accumulate_column_sums, accumulate_dyt_x, add_row_bias, matmul_dy_w, matmul_xwt, Matrix,
};
use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    FullyConnected,
    GatedRecurrentUnit,
    InputNormalization,
    Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl LayerSpec {
    /// Fully connected layer followed by `activation`.
    pub fn dense(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::FullyConnected,
            input,
            output,
            activation,
        }
    }

    pub fn gru(input: usize, hidden: usize) -> Self {
        Self {
            kind: LayerKind::GatedRecurrentUnit,
            input,
            output: hidden,
            activation: Activation::Identity,
        }
    }

    pub fn normalization(width: usize) -> Self {
        Self {
            kind: LayerKind::InputNormalization,
            input: width,
            output: width,
            activation: Activation::Identity,
        }
    }

    pub fn activation(width: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Activation,
            input: width,
            output: width,
            activation,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.input == 0 || self.output == 0 {
            return Err(Error::Config(format!("layer widths must be positive: {self:?}")));
        }
        let square = matches!(
            self.kind,
            LayerKind::InputNormalization | LayerKind::Activation
        );
        if square && self.input != self.output {
            return Err(Error::Config(format!(
                "{:?} layer must preserve width: {self:?}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Frozen per-feature affine normalization `(x − mean) / std`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            std: vec![1.0; width],
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Layer {
    Dense {
        weight: ParamId,
        bias: ParamId,
    },
    Gru {
        w_ih: ParamId,
        w_hh: ParamId,
        b_ih: ParamId,
        b_hh: ParamId,
    },
    Norm(Normalization),
    Act,
}

#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Dense {
        input: Matrix,
        pre: Option<Matrix>,
        out: Matrix,
    },
    Gru {
        x: Matrix,
        h: Option<Matrix>,
        r: Matrix,
        z: Matrix,
        n: Matrix,
        gh_n: Matrix,
    },
    Norm,
    Act {
        pre: Matrix,
        out: Matrix,
    },
}

fn uniform_init<R: Rng + ?Sized>(rng: &mut R, len: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-limit..=limit)).collect()
}

impl Layer {
    pub(crate) fn build<R: Rng + ?Sized>(
        spec: &LayerSpec,
        prefix: &str,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        let (i, o) = (spec.input, spec.output);
        Ok(match spec.kind {
            LayerKind::FullyConnected => Layer::Dense {
                weight: store.add(format!("{prefix}.weight"), &[o, i], uniform_init(rng, o * i, i, o))?,
                bias: store.add(format!("{prefix}.bias"), &[o], vec![0.0; o])?,
            },
            LayerKind::GatedRecurrentUnit => {
                // Gate blocks are stacked [reset; update; candidate], each
                // initialised with its own fan.
                let w_ih = (0..3).flat_map(|_| uniform_init(rng, o * i, i, o)).collect();
                let w_hh = (0..3).flat_map(|_| uniform_init(rng, o * o, o, o)).collect();
                Layer::Gru {
                    w_ih: store.add(format!("{prefix}.w_ih"), &[3 * o, i], w_ih)?,
                    w_hh: store.add(format!("{prefix}.w_hh"), &[3 * o, o], w_hh)?,
                    b_ih: store.add(format!("{prefix}.b_ih"), &[3 * o], vec![0.0; 3 * o])?,
                    b_hh: store.add(format!("{prefix}.b_hh"), &[3 * o], vec![0.0; 3 * o])?,
                }
            }
            LayerKind::InputNormalization => Layer::Norm(Normalization::identity(i)),
            LayerKind::Activation => Layer::Act,
        })
    }

    /// Runs the layer; returns the output and, when `record`, its cache.
    pub(crate) fn forward(
        &self,
        spec: &LayerSpec,
        store: &ParamStore,
        x: Matrix,
        h0: Option<&Matrix>,
        record: bool,
    ) -> (Matrix, Option<Cache>) {
        match self {
            Layer::Dense { weight, bias } => {
                let mut y = matmul_xwt(&x, store.value(*weight), spec.output);
                add_row_bias(&mut y, store.value(*bias));
                let pre = (record && spec.activation.needs_pre()).then(|| y.clone());
                spec.activation.apply(&mut y);
                let cache = record.then(|| Cache::Dense {
                    input: x,
                    pre,
                    out: y.clone(),
                });
                (y, cache)
            }
            Layer::Gru {
                w_ih,
                w_hh,
                b_ih,
                b_hh,
            } => gru_forward(spec.output, store, [*w_ih, *w_hh, *b_ih, *b_hh], x, h0, record),
            Layer::Norm(norm) => {
                let mut y = x;
                let cols = y.cols();
                for row in y.data_mut().chunks_exact_mut(cols) {
                    for ((v, m), s) in row.iter_mut().zip(&norm.mean).zip(&norm.std) {
                        *v = (*v - m) / s;
                    }
                }
                (y, record.then_some(Cache::Norm))
            }
            Layer::Act => {
                let mut y = x;
                let pre = record.then(|| y.clone());
                spec.activation.apply(&mut y);
                let cache = pre.map(|pre| Cache::Act { pre, out: y.clone() });
                (y, cache)
            }
        }
    }

    /// Accumulates parameter gradients and returns `(d_input, d_state)`.
    pub(crate) fn backward(
        &self,
        spec: &LayerSpec,
        store: &mut ParamStore,
        cache: &Cache,
        d_out: &Matrix,
    ) -> Result<(Matrix, Option<Matrix>)> {
        match (self, cache) {
            (Layer::Dense { weight, bias }, Cache::Dense { input, pre, out }) => {
                let pre = pre.as_ref().unwrap_or(out);
                let dz = spec.activation.backward(pre, out, d_out);
                accumulate_dyt_x(&dz, input, store.grad_mut(*weight));
                accumulate_column_sums(&dz, store.grad_mut(*bias));
                Ok((matmul_dy_w(&dz, store.value(*weight), spec.input), None))
            }
            (
                Layer::Gru {
                    w_ih,
                    w_hh,
                    b_ih,
                    b_hh,
                },
                Cache::Gru { x, h, r, z, n, gh_n },
            ) => Ok(gru_backward(
                spec,
                store,
                [*w_ih, *w_hh, *b_ih, *b_hh],
                GruCacheRef { x, h: h.as_ref(), r, z, n, gh_n },
                d_out,
            )),
            (Layer::Norm(norm), Cache::Norm) => {
                let mut dx = d_out.clone();
                let cols = dx.cols();
                for row in dx.data_mut().chunks_exact_mut(cols) {
                    for (g, s) in row.iter_mut().zip(&norm.std) {
                        *g /= s;
                    }
                }
                Ok((dx, None))
            }
            (Layer::Act, Cache::Act { pre, out }) => {
                Ok((spec.activation.backward(pre, out, d_out), None))
            }
            _ => Err(Error::State("tape does not match layer".into())),
        }
    }
}

fn gru_forward(
    hidden: usize,
    store: &ParamStore,
    [w_ih, w_hh, b_ih, b_hh]: [ParamId; 4],
    x: Matrix,
    h0: Option<&Matrix>,
    record: bool,
) -> (Matrix, Option<Cache>) {
    let batch = x.rows();
    let mut gi = matmul_xwt(&x, store.value(w_ih), 3 * hidden);
    add_row_bias(&mut gi, store.value(b_ih));
    let gh = match h0 {
        Some(h) => {
            let mut gh = matmul_xwt(h, store.value(w_hh), 3 * hidden);
            add_row_bias(&mut gh, store.value(b_hh));
            gh
        }
        // A zero state contributes only the recurrent bias.
        None => {
            let mut gh = Matrix::zeros(batch, 3 * hidden);
            add_row_bias(&mut gh, store.value(b_hh));
            gh
        }
    };
    let mut h_new = Matrix::zeros(batch, hidden);
    let mut r = Matrix::zeros(batch, hidden);
    let mut z = Matrix::zeros(batch, hidden);
    let mut n = Matrix::zeros(batch, hidden);
    let mut gh_n = Matrix::zeros(batch, hidden);
    for b in 0..batch {
        let (gi_row, gh_row) = (gi.row(b), gh.row(b));
        for j in 0..hidden {
            let rv = sigmoid(gi_row[j] + gh_row[j]);
            let zv = sigmoid(gi_row[hidden + j] + gh_row[hidden + j]);
            let ghn = gh_row[2 * hidden + j];
            let nv = (gi_row[2 * hidden + j] + rv * ghn).tanh();
            let hp = h0.map_or(0.0, |h| h.get(b, j));
            h_new.set(b, j, (1.0 - zv) * nv + zv * hp);
            r.set(b, j, rv);
            z.set(b, j, zv);
            n.set(b, j, nv);
            gh_n.set(b, j, ghn);
        }
    }
    let cache = record.then(|| Cache::Gru {
        x,
        h: h0.cloned(),
        r,
        z,
        n,
        gh_n,
    });
    (h_new, cache)
}

struct GruCacheRef<'a> {
    x: &'a Matrix,
    h: Option<&'a Matrix>,
    r: &'a Matrix,
    z: &'a Matrix,
    n: &'a Matrix,
    gh_n: &'a Matrix,
}

fn gru_backward(
    spec: &LayerSpec,
    store: &mut ParamStore,
    [w_ih, w_hh, b_ih, b_hh]: [ParamId; 4],
    c: GruCacheRef<'_>,
    d_out: &Matrix,
) -> (Matrix, Option<Matrix>) {
    let hidden = spec.output;
    let batch = d_out.rows();
    let mut dgi = Matrix::zeros(batch, 3 * hidden);
    let mut dgh = Matrix::zeros(batch, 3 * hidden);
    let mut dh_direct = Matrix::zeros(batch, hidden);
    for b in 0..batch {
        for j in 0..hidden {
            let dh = d_out.get(b, j);
            let (rv, zv, nv) = (c.r.get(b, j), c.z.get(b, j), c.n.get(b, j));
            let hp = c.h.map_or(0.0, |h| h.get(b, j));
            let dn = dh * (1.0 - zv);
            let dz = dh * (hp - nv);
            dh_direct.set(b, j, dh * zv);
            let dn_pre = dn * (1.0 - nv * nv);
            let dr_pre = dn_pre * c.gh_n.get(b, j) * rv * (1.0 - rv);
            let dz_pre = dz * zv * (1.0 - zv);
            dgi.set(b, j, dr_pre);
            dgi.set(b, hidden + j, dz_pre);
            dgi.set(b, 2 * hidden + j, dn_pre);
            dgh.set(b, j, dr_pre);
            dgh.set(b, hidden + j, dz_pre);
            dgh.set(b, 2 * hidden + j, dn_pre * rv);
        }
    }
    accumulate_dyt_x(&dgi, c.x, store.grad_mut(w_ih));
    accumulate_column_sums(&dgi, store.grad_mut(b_ih));
    accumulate_column_sums(&dgh, store.grad_mut(b_hh));
    let dx = matmul_dy_w(&dgi, store.value(w_ih), spec.input);
    let dh = c.h.map(|h| {
        accumulate_dyt_x(&dgh, h, store.grad_mut(w_hh));
        let mut dh = matmul_dy_w(&dgh, store.value(w_hh), hidden);
        dh.add_assign(&dh_direct);
        dh
    });
    (dx, dh)
}
