//! Named parameter arrays with gradient buffers and Adam moments.

use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct Param {
    name: String,
    shape: Vec<usize>,
    value: Vec<f64>,
    grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Param {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], value: Vec<f64>) -> Result<ParamId> {
        let name = name.into();
        let len: usize = shape.iter().product();
        if value.len() != len || shape.is_empty() || len == 0 {
            return Err(Error::Shape(format!(
                "parameter {name}: {} values for shape {shape:?}",
                value.len()
            )));
        }
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        self.params.push(Param {
            name,
            shape: shape.to_vec(),
            grad: vec![0.0; len],
            m: vec![0.0; len],
            v: vec![0.0; len],
            value,
        });
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalars across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    #[inline]
    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].value
    }

    #[inline]
    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].grad
    }

    #[inline]
    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].grad
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Rounds every parameter to the nearest 32-bit real, matching what a
    /// checkpoint stores.
    pub fn quantize_f32(&mut self) {
        for p in &mut self.params {
            p.value.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    fn same_layout(&self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::Shape(format!(
                "stores hold {} and {} parameters",
                self.params.len(),
                other.params.len()
            )));
        }
        for (a, b) in self.params.iter().zip(&other.params) {
            if a.shape != b.shape {
                return Err(Error::Shape(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    a.name, a.shape, b.name, b.shape
                )));
            }
        }
        Ok(())
    }

    /// A copy whose parameter names have the prefix `from` replaced by `to`.
    /// Values and optimizer state are kept.
    pub fn renamed(&self, from: &str, to: &str) -> Result<ParamStore> {
        let mut out = self.clone();
        out.index.clear();
        for (i, p) in out.params.iter_mut().enumerate() {
            let rest = p.name.strip_prefix(from).ok_or_else(|| {
                Error::Config(format!("parameter {} does not start with {from}", p.name))
            })?;
            p.name = format!("{to}{rest}");
            out.index.insert(p.name.clone(), i);
        }
        Ok(out)
    }

    /// Overwrites every value with `other`'s. Layouts are matched by
    /// position and shape, so twins under different names are compatible.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        self.same_layout(other)?;
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            a.value.copy_from_slice(&b.value);
        }
        Ok(())
    }

    /// Largest elementwise distance between the two stores' values.
    pub fn max_abs_diff(&self, other: &ParamStore) -> Result<f64> {
        self.same_layout(other)?;
        Ok(self
            .params
            .iter()
            .zip(&other.params)
            .flat_map(|(a, b)| a.value.iter().zip(&b.value).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    /// One bias-corrected Adam update; gradients are cleared afterwards.
    ///
    /// A non-finite gradient rejects the whole step and leaves the store
    /// (including its gradients) untouched.
    pub fn step(&self, store: &mut ParamStore, learning_rate: f64) -> Result<()> {
        if let Some(p) = store
            .params
            .iter()
            .find(|p| p.grad.iter().any(|g| !g.is_finite()))
        {
            return Err(Error::NonFinite(format!("gradient of {}", p.name)));
        }
        store.step += 1;
        let t = store.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for p in &mut store.params {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                p.m[i] = self.beta1 * p.m[i] + (1.0 - self.beta1) * g;
                p.v[i] = self.beta2 * p.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = p.m[i] / c1;
                let v_hat = p.v[i] / c2;
                p.value[i] -= learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                p.grad[i] = 0.0;
            }
        }
        Ok(())
    }
}

/// `target ← (1 − rate)·target + rate·online`, elementwise.
pub fn polyak_update(target: &mut ParamStore, online: &ParamStore, rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Config(format!("polyak rate {rate} outside (0, 1]")));
    }
    target.same_layout(online)?;
    for (t, o) in target.params.iter_mut().zip(&online.params) {
        for (tv, ov) in t.value.iter_mut().zip(&o.value) {
            *tv = (1.0 - rate) * *tv + rate * ov;
        }
    }
    Ok(())
}
