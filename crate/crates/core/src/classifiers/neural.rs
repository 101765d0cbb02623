use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::adversarial::{softmax_rows, Activation, Adam, GradAt, Mlp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnParams {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for NnParams {
    fn default() -> Self {
        NnParams {
            hidden_dim: 64,
            learning_rate: 1e-3,
            batch_size: 256,
            epochs: 10,
        }
    }
}

/// One relu hidden layer and a softmax output, trained with Adam on
/// cross-entropy over shuffled minibatches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub net: Mlp<f64>,
}

impl NeuralModel {
    pub fn fit(
        x: &Array2<f64>,
        y: &[usize],
        seed: u64,
        p: &NnParams,
    ) -> Result<Self, ClassifierError> {
        if p.hidden_dim == 0 || p.batch_size == 0 || !(p.learning_rate > 0.0) {
            return Err(ClassifierError::InvalidParams(
                "nn needs hidden_dim, batch_size and learning_rate > 0".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Mlp::init(
            &[x.ncols(), p.hidden_dim, 2],
            Activation::Relu,
            Activation::Softmax,
            &mut rng,
        );
        let mut opt = Adam::new(p.learning_rate);
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        for _ in 0..p.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(p.batch_size) {
                let xb = x.select(Axis(0), chunk);
                let trace = net.forward_trace(xb.view())?;
                // d(mean CE)/d(logits) = (softmax - onehot) / batch
                let mut g = softmax_rows(trace.logits());
                for (mut row, &i) in g.rows_mut().into_iter().zip(chunk) {
                    row[y[i]] -= 1.0;
                }
                g /= chunk.len() as f64;
                let (grads, _) = net.backward(&trace, g, GradAt::Logits);
                opt.step(net.param_slices_mut(), &grads.slices(), 1.0);
            }
        }
        Ok(NeuralModel { net })
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Vec<f64>, ClassifierError> {
        let probs = self.net.forward(x.view())?;
        Ok(probs.column(1).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_a_linear_boundary() {
        let x = Array2::from_shape_fn((200, 2), |(i, j)| ((i * (j + 3)) % 17) as f64 / 8.0 - 1.0);
        let y: Vec<usize> = x
            .rows()
            .into_iter()
            .map(|r| usize::from(r[0] - r[1] > 0.0))
            .collect();
        let p = NnParams {
            epochs: 200,
            learning_rate: 1e-2,
            batch_size: 32,
            ..NnParams::default()
        };
        let m = NeuralModel::fit(&x, &y, 4, &p).unwrap();
        let hits = m
            .predict_proba(&x)
            .unwrap()
            .iter()
            .zip(&y)
            .filter(|(&q, &c)| usize::from(q > 0.5) == c)
            .count();
        assert!(hits >= 194, "{hits}/200");
    }

    #[test]
    fn probabilities_are_valid() {
        let x = Array2::from_shape_fn((10, 3), |(i, j)| (i + j) as f64);
        let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let m = NeuralModel::fit(&x, &y, 0, &NnParams::default()).unwrap();
        assert!(m
            .predict_proba(&x)
            .unwrap()
            .iter()
            .all(|q| (0.0..=1.0).contains(q)));
    }
}
