use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AdvError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    /// Row-wise softmax; only valid on the output layer.
    Softmax,
}

impl Activation {
    fn apply<T: Scalar>(self, z: &Array2<T>) -> Array2<T> {
        match self {
            Activation::Identity => z.clone(),
            Activation::Relu => z.mapv(|v| if v > T::zero() { v } else { T::zero() }),
            Activation::Sigmoid => z.mapv(|v| T::one() / (T::one() + (-v).exp())),
            Activation::Softmax => softmax_rows(z),
        }
    }

    /// Gradient w.r.t. the pre-activation given the gradient w.r.t. the
    /// activation output.
    fn backward<T: Scalar>(self, pre: &Array2<T>, out: &Array2<T>, grad: &Array2<T>) -> Array2<T> {
        match self {
            Activation::Identity => grad.clone(),
            Activation::Relu => {
                let mut g = grad.clone();
                Zip::from(&mut g).and(pre).for_each(|g, &z| {
                    if z <= T::zero() {
                        *g = T::zero();
                    }
                });
                g
            }
            Activation::Sigmoid => {
                let mut g = grad.clone();
                Zip::from(&mut g)
                    .and(out)
                    .for_each(|g, &s| *g = *g * s * (T::one() - s));
                g
            }
            Activation::Softmax => {
                // dz_i = p_i (g_i - sum_j g_j p_j)
                let mut g = grad.clone();
                for (mut grow, prow) in g.rows_mut().into_iter().zip(out.rows()) {
                    let dot = grow
                        .iter()
                        .zip(prow.iter())
                        .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                    grow.zip_mut_with(&prow, |gi, &pi| *gi = pi * (*gi - dot));
                }
                g
            }
        }
    }
}

pub fn softmax_rows<T: Scalar>(z: &Array2<T>) -> Array2<T> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.iter().copied().fold(T::zero(), |a, b| a + b);
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Fully connected layer computing `activation(x W + b)`; `weight` is
/// `in_dim x out_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Layer<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    bound = "T: Scalar",
    try_from = "Vec<Layer<T>>",
    into = "Vec<Layer<T>>"
)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> TryFrom<Vec<Layer<T>>> for Mlp<T> {
    type Error = AdvError;

    fn try_from(layers: Vec<Layer<T>>) -> Result<Self, AdvError> {
        Mlp::new(layers)
    }
}

impl<T> From<Mlp<T>> for Vec<Layer<T>> {
    fn from(m: Mlp<T>) -> Self {
        m.layers
    }
}

/// Values recorded during a forward pass, needed for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    /// Input of each layer.
    pub inputs: Vec<Array2<T>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Array2<T>>,
    pub output: Array2<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    /// Pre-activation of the output layer.
    pub fn logits(&self) -> &Array2<T> {
        self.pre.last().expect("at least one layer")
    }
}

/// Per-layer `(weight, bias)` gradients, same shapes as the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads<T> {
    pub layers: Vec<(Array2<T>, Array1<T>)>,
}

impl<T: Scalar> MlpGrads<T> {
    pub fn slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|(w, b)| {
                [
                    w.as_slice().expect("standard layout"),
                    b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> T {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Where backpropagation starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradAt {
    /// Gradient is w.r.t. the network output (after the final activation).
    Output,
    /// Gradient is w.r.t. the final pre-activation (e.g. logits of a fused
    /// softmax cross-entropy).
    Logits,
}

impl<T: Scalar> Mlp<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self, AdvError> {
        if layers.is_empty() {
            return Err(AdvError::InvalidNetwork("no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.ncols() {
                return Err(AdvError::InvalidNetwork(format!(
                    "layer {i}: bias/weight width differ"
                )));
            }
            if i > 0 && layers[i - 1].weight.ncols() != l.weight.nrows() {
                return Err(AdvError::InvalidNetwork(format!(
                    "layer {i}: input width does not chain"
                )));
            }
            let last = i + 1 == layers.len();
            if !last && matches!(l.activation, Activation::Softmax | Activation::Sigmoid) {
                return Err(AdvError::InvalidNetwork(format!(
                    "layer {i}: {:?} only allowed at output",
                    l.activation
                )));
            }
            if !l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(AdvError::InvalidNetwork(format!(
                    "layer {i}: non-finite parameter"
                )));
            }
        }
        // ndarray deserialization may produce non-standard layouts
        let layers = layers
            .into_iter()
            .map(|l| Layer {
                weight: l.weight.as_standard_layout().into_owned(),
                bias: l.bias.as_standard_layout().into_owned(),
                activation: l.activation,
            })
            .collect();
        Ok(Mlp { layers })
    }

    /// Glorot-uniform weights and zero biases. `dims` lists every width from
    /// input to output; hidden layers use `hidden`.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(dims.len() >= 2, "need input and output widths");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((w[0], w[1]), || {
                    T::of(rng.random_range(-bound..bound))
                });
                Layer {
                    weight,
                    bias: Array1::zeros(w[1]),
                    activation: if i + 2 == dims.len() { output } else { hidden },
                }
            })
            .collect();
        Mlp { layers }
    }

    /// Single identity layer of width `d`.
    pub fn identity(d: usize) -> Self {
        Mlp {
            layers: vec![Layer {
                weight: Array2::eye(d),
                bias: Array1::zeros(d),
                activation: Activation::Identity,
            }],
        }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.ncols()
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, x: &ArrayView2<T>) -> Result<(), AdvError> {
        if x.ncols() != self.in_dim() {
            return Err(AdvError::DimensionMismatch {
                expected: self.in_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>, AdvError> {
        Ok(self.forward_trace(x)?.output)
    }

    pub fn forward_trace(&self, x: ArrayView2<T>) -> Result<ForwardTrace<T>, AdvError> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_owned();
        for layer in &self.layers {
            let z = cur.dot(&layer.weight) + &layer.bias;
            let a = layer.activation.apply(&z);
            inputs.push(cur);
            pre.push(z);
            cur = a;
        }
        Ok(ForwardTrace {
            inputs,
            pre,
            output: cur,
        })
    }

    /// Reverse-mode pass. Returns parameter gradients and the gradient w.r.t.
    /// the network input.
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        grad: Array2<T>,
        at: GradAt,
    ) -> (MlpGrads<T>, Array2<T>) {
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut g = grad;
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let out = if i + 1 == n {
                &trace.output
            } else {
                &trace.inputs[i + 1]
            };
            let dz = if i + 1 == n && at == GradAt::Logits {
                g
            } else {
                layer.activation.backward(&trace.pre[i], out, &g)
            };
            // the transposed product may come back column-major; slices() needs row-major
            let dw = trace.inputs[i]
                .t()
                .dot(&dz)
                .as_standard_layout()
                .into_owned();
            let db = dz.sum_axis(Axis(0));
            g = dz.dot(&layer.weight.t());
            grads.push((dw, db));
        }
        grads.reverse();
        (MlpGrads { layers: grads }, g)
    }

    /// Mutable parameter slices in `(w0, b0, w1, b1, ...)` order, matching
    /// [`MlpGrads::slices`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}
