use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Per-feature cut points learned from training data. Bin `b` of a value
/// `x` is the number of cut points strictly below `x`, so
/// `bin(x) <= k` exactly when `x <= cuts[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binner {
    pub cuts: Vec<Vec<f64>>,
}

impl Binner {
    /// At most `max_bins` bins per feature (`max_bins <= 256`).
    pub fn fit(x: &Array2<f64>, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, 256);
        let cuts = x
            .columns()
            .into_iter()
            .map(|col| {
                let mut v: Vec<f64> = col.to_vec();
                v.sort_by(f64::total_cmp);
                v.dedup();
                if v.len() <= max_bins {
                    v.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect()
                } else {
                    let mut sorted: Vec<f64> = col.to_vec();
                    sorted.sort_by(f64::total_cmp);
                    let n = sorted.len();
                    let top = sorted[n - 1];
                    let mut c: Vec<f64> = (1..max_bins)
                        .map(|i| sorted[n * i / max_bins])
                        .filter(|&q| q < top)
                        .collect();
                    c.dedup();
                    c
                }
            })
            .collect();
        Binner { cuts }
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }

    /// Feature-major bin indices.
    pub fn transform(&self, x: &Array2<f64>) -> Vec<Vec<u8>> {
        x.columns()
            .into_iter()
            .zip(&self.cuts)
            .map(|(col, cuts)| {
                col.iter()
                    .map(|&v| cuts.partition_point(|&c| c < v) as u8)
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf(value)],
        }
    }

    pub fn eval(&self, row: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

/// Split quality over two additive per-row statistics.
pub trait Criterion {
    /// Larger is better; a split is taken when children outscore the parent.
    fn score(&self, s: [f64; 2]) -> f64;
    fn leaf_value(&self, s: [f64; 2]) -> f64;
    /// Whether a child with these statistics is allowed.
    fn admissible(&self, s: [f64; 2]) -> bool;
}

/// Gini on per-row class indicators `[1{y=0}, 1{y=1}]`; leaves hold P(y=1).
pub struct Gini {
    pub min_samples_leaf: f64,
}

impl Criterion for Gini {
    fn score(&self, [a, b]: [f64; 2]) -> f64 {
        // n * (1 - gini) = (a^2 + b^2) / n
        let n = a + b;
        if n == 0.0 {
            0.0
        } else {
            (a * a + b * b) / n
        }
    }

    fn leaf_value(&self, [a, b]: [f64; 2]) -> f64 {
        b / (a + b)
    }

    fn admissible(&self, [a, b]: [f64; 2]) -> bool {
        a + b >= self.min_samples_leaf
    }
}

/// Second-order boosting gain on `[gradient, hessian]` sums.
pub struct NewtonGain {
    pub lambda: f64,
    pub min_child_weight: f64,
    pub shrinkage: f64,
}

impl Criterion for NewtonGain {
    fn score(&self, [g, h]: [f64; 2]) -> f64 {
        g * g / (h + self.lambda)
    }

    fn leaf_value(&self, [g, h]: [f64; 2]) -> f64 {
        -self.shrinkage * g / (h + self.lambda)
    }

    fn admissible(&self, [_, h]: [f64; 2]) -> bool {
        h >= self.min_child_weight
    }
}

pub struct TreeBuilder<'a, C> {
    pub binner: &'a Binner,
    pub bins: &'a [Vec<u8>],
    pub stats: &'a [[f64; 2]],
    pub criterion: &'a C,
    pub max_depth: usize,
    /// Features drawn per node; all when `None`.
    pub max_features: Option<usize>,
}

const MIN_GAIN: f64 = 1e-12;

impl<C: Criterion> TreeBuilder<'_, C> {
    /// Grows a tree on `rows` (duplicates allowed, e.g. a bootstrap sample).
    pub fn build<R: Rng + ?Sized>(&self, rows: Vec<u32>, rng: &mut R) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        self.grow(&mut tree, rows, 0, rng);
        tree
    }

    fn total(&self, rows: &[u32]) -> [f64; 2] {
        rows.iter().fold([0.0, 0.0], |[a, b], &r| {
            let s = self.stats[r as usize];
            [a + s[0], b + s[1]]
        })
    }

    fn grow<R: Rng + ?Sized>(
        &self,
        tree: &mut Tree,
        rows: Vec<u32>,
        depth: usize,
        rng: &mut R,
    ) -> usize {
        let id = tree.nodes.len();
        let total = self.total(&rows);
        tree.nodes
            .push(Node::Leaf(self.criterion.leaf_value(total)));
        if depth >= self.max_depth || rows.len() < 2 {
            return id;
        }
        let Some((feature, bin)) = self.best_split(&rows, total, rng) else {
            return id;
        };
        let col = &self.bins[feature];
        let (left, right): (Vec<u32>, Vec<u32>) = rows
            .into_iter()
            .partition(|&r| col[r as usize] as usize <= bin);
        let l = self.grow(tree, left, depth + 1, rng);
        let r = self.grow(tree, right, depth + 1, rng);
        tree.nodes[id] = Node::Split {
            feature,
            threshold: self.binner.cuts[feature][bin],
            left: l,
            right: r,
        };
        id
    }

    fn best_split<R: Rng + ?Sized>(
        &self,
        rows: &[u32],
        total: [f64; 2],
        rng: &mut R,
    ) -> Option<(usize, usize)> {
        let d = self.bins.len();
        let features: Vec<usize> = match self.max_features {
            Some(m) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let parent = self.criterion.score(total);
        let mut best: Option<(f64, usize, usize)> = None;
        let mut hist: Vec<[f64; 2]> = Vec::with_capacity(256);
        for f in features {
            let nb = self.binner.n_bins(f);
            if nb < 2 {
                continue;
            }
            hist.clear();
            hist.resize(nb, [0.0, 0.0]);
            let col = &self.bins[f];
            for &r in rows {
                let s = self.stats[r as usize];
                let h = &mut hist[col[r as usize] as usize];
                h[0] += s[0];
                h[1] += s[1];
            }
            let mut left = [0.0, 0.0];
            for (k, h) in hist[..nb - 1].iter().enumerate() {
                left = [left[0] + h[0], left[1] + h[1]];
                let right = [total[0] - left[0], total[1] - left[1]];
                if !(self.criterion.admissible(left) && self.criterion.admissible(right)) {
                    continue;
                }
                let gain = self.criterion.score(left) + self.criterion.score(right) - parent;
                if gain > MIN_GAIN && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, k));
                }
            }
        }
        best.map(|(_, f, k)| (f, k))
    }
}
