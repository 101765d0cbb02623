use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Binner, Gini, Tree, TreeBuilder};
use super::ClassifierError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means floor(sqrt(d)).
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_bins: usize,
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            max_depth: 12,
            max_features: None,
            min_samples_leaf: 1,
            max_bins: 64,
            bootstrap: true,
        }
    }
}

/// Bagged Gini trees; the forest probability is the mean leaf frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(
        x: &Array2<f64>,
        y: &[usize],
        seed: u64,
        p: &RfParams,
    ) -> Result<Self, ClassifierError> {
        if p.n_trees == 0 || p.max_bins < 2 {
            return Err(ClassifierError::InvalidParams(
                "rf needs n_trees >= 1 and max_bins >= 2".into(),
            ));
        }
        let (n, d) = x.dim();
        let binner = Binner::fit(x, p.max_bins);
        let bins = binner.transform(x);
        let stats: Vec<[f64; 2]> = y
            .iter()
            .map(|&c| if c == 1 { [0.0, 1.0] } else { [1.0, 0.0] })
            .collect();
        let criterion = Gini {
            min_samples_leaf: p.min_samples_leaf.max(1) as f64,
        };
        let mtry = p
            .max_features
            .unwrap_or(((d as f64).sqrt() as usize).max(1))
            .clamp(1, d.max(1));
        let builder = TreeBuilder {
            binner: &binner,
            bins: &bins,
            stats: &stats,
            criterion: &criterion,
            max_depth: p.max_depth,
            max_features: Some(mtry),
        };
        let trees = (0..p.n_trees)
            .map(|t| {
                // one independent stream per tree
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let rows: Vec<u32> = if p.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n as u32)).collect()
                } else {
                    (0..n as u32).collect()
                };
                builder.build(rows, &mut rng)
            })
            .collect();
        Ok(Forest { trees })
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Vec<f64> {
        let k = self.trees.len() as f64;
        x.rows()
            .into_iter()
            .map(|row| self.trees.iter().map(|t| t.eval(row)).sum::<f64>() / k)
            .collect()
    }
}
