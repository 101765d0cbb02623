use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::tree::{Binner, NewtonGain, Tree, TreeBuilder};
use super::ClassifierError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    pub max_bins: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 200,
            max_depth: 3,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
            max_bins: 64,
        }
    }
}

/// Newton-boosted regression trees on the logistic loss. All rows and
/// features are used each round, so training is seed-free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    /// Prior log-odds of class 1.
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl Boosted {
    pub fn fit(x: &Array2<f64>, y: &[usize], p: &GbtParams) -> Result<Self, ClassifierError> {
        if !(p.learning_rate > 0.0 && p.lambda >= 0.0 && p.max_bins >= 2) {
            return Err(ClassifierError::InvalidParams(
                "gbt needs learning_rate > 0, lambda >= 0 and max_bins >= 2".into(),
            ));
        }
        let n = y.len();
        let pos = y.iter().filter(|&&c| c == 1).count() as f64;
        let base_score = (pos / (n as f64 - pos)).ln();
        let binner = Binner::fit(x, p.max_bins);
        let bins = binner.transform(x);
        let criterion = NewtonGain {
            lambda: p.lambda,
            min_child_weight: p.min_child_weight,
            shrinkage: p.learning_rate,
        };
        let mut margin = vec![base_score; n];
        let mut trees = Vec::with_capacity(p.n_rounds);
        // unused: every split considers all features
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..p.n_rounds {
            let stats: Vec<[f64; 2]> = margin
                .iter()
                .zip(y)
                .map(|(&m, &c)| {
                    let q = sigmoid(m);
                    [q - c as f64, (q * (1.0 - q)).max(1e-16)]
                })
                .collect();
            let tree = TreeBuilder {
                binner: &binner,
                bins: &bins,
                stats: &stats,
                criterion: &criterion,
                max_depth: p.max_depth,
                max_features: None,
            }
            .build((0..n as u32).collect(), &mut rng);
            for (m, row) in margin.iter_mut().zip(x.rows()) {
                *m += tree.eval(row);
            }
            trees.push(tree);
        }
        Ok(Boosted { base_score, trees })
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                sigmoid(self.base_score + self.trees.iter().map(|t| t.eval(row)).sum::<f64>())
            })
            .collect()
    }
}
