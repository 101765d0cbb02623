use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::ClassifierError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrParams {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams {
            learning_rate: 0.5,
            iterations: 500,
            l2: 1e-4,
        }
    }
}

/// Binary logistic regression trained by full-batch gradient descent from
/// zero weights, so it has no seed dependence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    pub fn fit(x: &Array2<f64>, y: &[usize], p: &LrParams) -> Result<Self, ClassifierError> {
        if !(p.learning_rate > 0.0 && p.l2 >= 0.0) {
            return Err(ClassifierError::InvalidParams(
                "lr needs learning_rate > 0 and l2 >= 0".into(),
            ));
        }
        let n = x.nrows() as f64;
        let yv: Array1<f64> = y.iter().map(|&c| c as f64).collect();
        let mut w = Array1::<f64>::zeros(x.ncols());
        let mut b = 0.0;
        for _ in 0..p.iterations {
            let residual = (x.dot(&w) + b).mapv(sigmoid) - &yv;
            let gw = x.t().dot(&residual) / n + &w * p.l2;
            let gb = residual.sum() / n;
            w.scaled_add(-p.learning_rate, &gw);
            b -= p.learning_rate * gb;
        }
        Ok(LogisticModel {
            weights: w.to_vec(),
            bias: b,
        })
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Vec<f64> {
        let w = Array1::from(self.weights.clone());
        (x.dot(&w) + self.bias).mapv(sigmoid).to_vec()
    }
}
