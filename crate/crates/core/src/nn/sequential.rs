use rand::Rng;

use super::layer::{Cache, Layer, LayerKind, LayerSpec, Normalization};
use super::matrix::Matrix;
use super::params::ParamStore;
use crate::error::{Error, Result};

/// A chain of layers whose parameters live in an external [`ParamStore`].
///
/// At most one layer may be recurrent; its output doubles as the recurrent
/// state handed back to the caller.
#[derive(Debug, Clone)]
pub struct Sequential {
    name: String,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
}

/// Recorded activations of one batched forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    caches: Vec<Cache>,
    batch: usize,
}

#[derive(Debug, Clone)]
pub struct InputGradients {
    pub input: Matrix,
    /// Gradient w.r.t. the incoming recurrent state, when one was supplied.
    pub state: Option<Matrix>,
}

impl Sequential {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        specs: &[LayerSpec],
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config(format!("network {name} has no layers")));
        }
        for pair in specs.windows(2) {
            if pair[0].output != pair[1].input {
                return Err(Error::Config(format!(
                    "network {name}: width {} feeds a layer expecting {}",
                    pair[0].output, pair[1].input
                )));
            }
        }
        let recurrent = specs
            .iter()
            .filter(|s| s.kind == LayerKind::GatedRecurrentUnit)
            .count();
        if recurrent > 1 {
            return Err(Error::Config(format!(
                "network {name} has {recurrent} recurrent layers; at most one is supported"
            )));
        }
        let layers = specs
            .iter()
            .enumerate()
            .map(|(i, spec)| Layer::build(spec, &format!("{name}.{i}"), store, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.to_owned(),
            specs: specs.to_vec(),
            layers,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_width(&self) -> usize {
        self.specs[0].input
    }

    pub fn output_width(&self) -> usize {
        self.specs[self.specs.len() - 1].output
    }

    pub fn is_recurrent(&self) -> bool {
        self.recurrent_width().is_some()
    }

    pub fn recurrent_width(&self) -> Option<usize> {
        self.specs
            .iter()
            .find(|s| s.kind == LayerKind::GatedRecurrentUnit)
            .map(|s| s.output)
    }

    /// Installs frozen statistics on the normalization layer at `index`.
    pub fn set_normalization(&mut self, index: usize, norm: Normalization) -> Result<()> {
        let width = self.specs.get(index).map(|s| s.input);
        match (self.layers.get_mut(index), width) {
            (Some(Layer::Norm(slot)), Some(w)) => {
                if norm.mean.len() != w || norm.std.len() != w {
                    return Err(Error::Shape(format!(
                        "normalization of width {} for a {w}-wide layer",
                        norm.mean.len()
                    )));
                }
                if norm.std.iter().any(|s| !(*s > 0.0) || !s.is_finite())
                    || norm.mean.iter().any(|m| !m.is_finite())
                {
                    return Err(Error::Invalid("normalization std must be positive and finite".into()));
                }
                *slot = norm;
                Ok(())
            }
            _ => Err(Error::Config(format!(
                "layer {index} of {} is not a normalization layer",
                self.name
            ))),
        }
    }

    pub fn normalization(&self, index: usize) -> Option<&Normalization> {
        match self.layers.get(index) {
            Some(Layer::Norm(n)) => Some(n),
            _ => None,
        }
    }

    /// Multiplies the weights of the fully connected layer at `index` by `k`.
    pub fn scale_weights(&self, store: &mut ParamStore, index: usize, k: f64) -> Result<()> {
        match self.layers.get(index) {
            Some(Layer::Dense { weight, .. }) => {
                store.value_mut(*weight).iter_mut().for_each(|w| *w *= k);
                Ok(())
            }
            _ => Err(Error::Config(format!(
                "layer {index} of {} is not fully connected",
                self.name
            ))),
        }
    }

    fn run(
        &self,
        store: &ParamStore,
        x: &Matrix,
        h0: Option<&Matrix>,
        record: bool,
    ) -> Result<(Matrix, Option<Matrix>, Option<Tape>)> {
        if x.cols() != self.input_width() {
            return Err(Error::Shape(format!(
                "{}: input width {} but first layer expects {}",
                self.name,
                x.cols(),
                self.input_width()
            )));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("input to {}", self.name)));
        }
        if let Some(h) = h0 {
            let width = self.recurrent_width().ok_or_else(|| {
                Error::Config(format!("{} has no recurrent layer but got a state", self.name))
            })?;
            if h.cols() != width || h.rows() != x.rows() {
                return Err(Error::Shape(format!(
                    "{}: recurrent state {}x{} for batch {} width {width}",
                    self.name,
                    h.rows(),
                    h.cols(),
                    x.rows()
                )));
            }
            if !h.is_finite() {
                return Err(Error::NonFinite(format!("recurrent state of {}", self.name)));
            }
        }
        let batch = x.rows();
        let mut caches = Vec::with_capacity(if record { self.layers.len() } else { 0 });
        let mut state = None;
        let mut current = x.clone();
        for (i, (layer, spec)) in self.layers.iter().zip(&self.specs).enumerate() {
            let (out, cache) = layer.forward(spec, store, current, h0, record);
            if !out.is_finite() {
                return Err(Error::NonFinite(format!(
                    "activations of {}.{i} ({:?})",
                    self.name, spec.kind
                )));
            }
            if spec.kind == LayerKind::GatedRecurrentUnit {
                state = Some(out.clone());
            }
            caches.extend(cache);
            current = out;
        }
        let tape = record.then_some(Tape { caches, batch });
        Ok((current, state, tape))
    }

    /// Batched forward pass that records a tape for [`Sequential::backward`].
    pub fn forward_batch(
        &self,
        store: &ParamStore,
        x: &Matrix,
        h0: Option<&Matrix>,
    ) -> Result<(Matrix, Option<Matrix>, Tape)> {
        let (y, h, tape) = self.run(store, x, h0, true)?;
        Ok((y, h, tape.expect("recording pass yields a tape")))
    }

    /// Batched forward pass without recording.
    pub fn infer_batch(
        &self,
        store: &ParamStore,
        x: &Matrix,
        h0: Option<&Matrix>,
    ) -> Result<(Matrix, Option<Matrix>)> {
        let (y, h, _) = self.run(store, x, h0, false)?;
        Ok((y, h))
    }

    /// Single-sample forward pass. The recurrent state is returned iff the
    /// network contains a recurrent layer (a missing input state is zero).
    pub fn forward(
        &self,
        store: &ParamStore,
        input: &[f64],
        state: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let x = Matrix::row_vector(input);
        let h = state.map(Matrix::row_vector);
        let (y, h) = self.infer_batch(store, &x, h.as_ref())?;
        let h = match (h, self.recurrent_width()) {
            (Some(h), _) => Some(h.into_vec()),
            (None, Some(w)) => Some(vec![0.0; w]),
            (None, None) => None,
        };
        Ok((y.into_vec(), h))
    }

    /// Backpropagates `d_out` through a recorded pass, accumulating
    /// parameter gradients in `store`.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        tape: &Tape,
        d_out: &Matrix,
    ) -> Result<InputGradients> {
        if tape.caches.len() != self.layers.len() {
            return Err(Error::State(format!(
                "tape has {} entries for {} layers of {}",
                tape.caches.len(),
                self.layers.len(),
                self.name
            )));
        }
        if d_out.rows() != tape.batch || d_out.cols() != self.output_width() {
            return Err(Error::Shape(format!(
                "{}: output gradient {}x{} for batch {} width {}",
                self.name,
                d_out.rows(),
                d_out.cols(),
                tape.batch,
                self.output_width()
            )));
        }
        let mut grad = d_out.clone();
        let mut state = None;
        for ((layer, spec), cache) in self
            .layers
            .iter()
            .zip(&self.specs)
            .zip(&tape.caches)
            .rev()
        {
            let (dx, dh) = layer.backward(spec, store, cache, &grad)?;
            if dh.is_some() {
                state = dh;
            }
            grad = dx;
        }
        Ok(InputGradients { input: grad, state })
    }
}

/// A [`Sequential`] that owns its parameters and remembers its last forward
/// pass, so `backward` can be called without threading the tape by hand.
#[derive(Debug, Clone)]
pub struct Network {
    pub store: ParamStore,
    pub seq: Sequential,
    tape: Option<Tape>,
}

impl Network {
    pub fn new<R: Rng + ?Sized>(name: &str, specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let seq = Sequential::new(name, specs, &mut store, rng)?;
        Ok(Self {
            store,
            seq,
            tape: None,
        })
    }

    /// An independent copy whose network and parameter names use `name`.
    pub fn renamed(&self, name: &str) -> Result<Self> {
        let store = self.store.renamed(&format!("{}.", self.seq.name), &format!("{name}."))?;
        let mut seq = self.seq.clone();
        seq.name = name.to_owned();
        Ok(Self { store, seq, tape: None })
    }

    pub fn forward(&mut self, x: &Matrix, h0: Option<&Matrix>) -> Result<(Matrix, Option<Matrix>)> {
        let (y, h, tape) = self.seq.forward_batch(&self.store, x, h0)?;
        self.tape = Some(tape);
        Ok((y, h))
    }

    pub fn infer(&self, x: &Matrix, h0: Option<&Matrix>) -> Result<(Matrix, Option<Matrix>)> {
        self.seq.infer_batch(&self.store, x, h0)
    }

    /// Accumulates gradients for the most recent [`Network::forward`].
    pub fn backward(&mut self, d_out: &Matrix) -> Result<InputGradients> {
        let tape = self
            .tape
            .as_ref()
            .ok_or_else(|| Error::State("backward called before any forward pass".into()))?;
        self.seq.backward(&mut self.store, tape, d_out)
    }

    pub fn clear_tape(&mut self) {
        self.tape = None;
    }
}
