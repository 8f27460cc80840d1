//! Central finite-difference oracle for analytic parameter gradients.

use super::matrix::Matrix;
use super::params::ParamStore;
use super::sequential::Network;
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Compares the gradients already accumulated in `store` with central
/// differences of `loss` and returns the largest relative error
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
///
/// Parameter values are restored exactly after each probe.
pub fn finite_diff_check<F>(store: &mut ParamStore, step: f64, mut loss: F) -> Result<f64>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let mut worst = 0.0f64;
    for id in store.ids().collect::<Vec<_>>() {
        for i in 0..store.value(id).len() {
            let original = store.value(id)[i];
            store.value_mut(id)[i] = original + step;
            let up = loss(store)?;
            store.value_mut(id)[i] = original - step;
            let down = loss(store)?;
            store.value_mut(id)[i] = original;
            let numeric = (up - down) / (2.0 * step);
            let analytic = store.grad(id)[i];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

/// Scalar losses over a network output used by the gradient checks.
#[derive(Debug, Clone, PartialEq)]
pub enum Loss {
    /// `½ Σ (c ⊙ y)²`.
    WeightedSquares(Vec<f64>),
    /// `Σ c ⊙ y`.
    Linear(Vec<f64>),
    /// A constant; every gradient is zero.
    Constant(f64),
}

impl Loss {
    pub fn value(&self, y: &Matrix) -> f64 {
        match self {
            Loss::WeightedSquares(c) => y.data().iter().zip(c.iter().cycle()).map(|(v, c)| 0.5 * (c * v).powi(2)).sum(),
            Loss::Linear(c) => y.data().iter().zip(c.iter().cycle()).map(|(v, c)| c * v).sum(),
            Loss::Constant(k) => *k,
        }
    }

    pub fn gradient(&self, y: &Matrix) -> Matrix {
        let mut g = Matrix::zeros(y.rows(), y.cols());
        match self {
            Loss::WeightedSquares(c) => {
                for ((g, v), c) in g.data_mut().iter_mut().zip(y.data()).zip(c.iter().cycle()) {
                    *g = c * c * v;
                }
            }
            Loss::Linear(c) => {
                for (g, c) in g.data_mut().iter_mut().zip(c.iter().cycle()) {
                    *g = *c;
                }
            }
            Loss::Constant(_) => {}
        }
        g
    }
}

/// Runs forward and backward for `loss` on `net`, then checks the resulting
/// gradients against finite differences. Existing gradients are cleared first.
pub fn check_network(
    net: &mut Network,
    input: &Matrix,
    state: Option<&Matrix>,
    loss: &Loss,
) -> Result<f64> {
    net.store.zero_grad();
    let (y, _) = net.forward(input, state)?;
    net.backward(&loss.gradient(&y))?;
    let seq = net.seq.clone();
    finite_diff_check(&mut net.store, DEFAULT_STEP, |store| {
        let (y, _) = seq.infer_batch(store, input, state)?;
        Ok(loss.value(&y))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
    }

    fn two_layer(rng: &mut ChaCha8Rng) -> Network {
        let specs = [
            LayerSpec::dense(5, 7, Activation::Tanh),
            LayerSpec::dense(7, 3, Activation::Softplus),
        ];
        Network::new("fc", &specs, rng).unwrap()
    }

    #[test]
    fn random_two_layer_net_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = two_layer(&mut rng);
        let x = random_matrix(&mut rng, 4, 5, 1.0);
        let err = check_network(&mut net, &x, None, &Loss::WeightedSquares(vec![1.0, 0.5, 2.0])).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn gru_with_state_and_softmax_head_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let specs = [
            LayerSpec::normalization(4),
            LayerSpec::gru(4, 6),
            LayerSpec::dense(6, 3, Activation::Softmax),
        ];
        let mut net = Network::new("g", &specs, &mut rng).unwrap();
        let x = random_matrix(&mut rng, 3, 4, 1.0);
        let h = random_matrix(&mut rng, 3, 6, 0.8);
        let err = check_network(&mut net, &x, Some(&h), &Loss::Linear(vec![1.0, -2.0, 0.7])).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn sign_flipped_gradient_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut net = two_layer(&mut rng);
        let x = random_matrix(&mut rng, 2, 5, 1.0);
        let loss = Loss::WeightedSquares(vec![1.0]);
        net.store.zero_grad();
        let (y, _) = net.forward(&x, None).unwrap();
        net.backward(&loss.gradient(&y)).unwrap();
        let id = net.store.find("fc.1.bias").unwrap();
        net.store.grad_mut(id)[0] *= -1.0;
        let seq = net.seq.clone();
        let err = finite_diff_check(&mut net.store, DEFAULT_STEP, |s| {
            Ok(loss.value(&seq.infer_batch(s, &x, None)?.0))
        })
        .unwrap();
        assert!(err > 1e-1, "relative error {err}");
    }

    #[test]
    fn constant_loss_reports_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut net = two_layer(&mut rng);
        let x = random_matrix(&mut rng, 2, 5, 1.0);
        assert_eq!(check_network(&mut net, &x, None, &Loss::Constant(3.0)).unwrap(), 0.0);
    }
}
