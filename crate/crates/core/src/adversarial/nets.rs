use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{softmax_rows, Activation, ForwardTrace, GradAt, Mlp, MlpGrads};
use super::{AdvConfig, AdvError};
use crate::scalar::Scalar;

/// Encoder-decoder generator. Sanitized output is
/// `decoder(encoder(x) + noise)` with isotropic Gaussian latent noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GeneratorNet<T> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
    pub latent_noise_sigma: T,
}

impl<T: Scalar> GeneratorNet<T> {
    pub fn new(encoder: Mlp<T>, decoder: Mlp<T>, latent_noise_sigma: T) -> Result<Self, AdvError> {
        if encoder.out_dim() != decoder.in_dim() {
            return Err(AdvError::InvalidNetwork(
                "encoder output must feed decoder input".into(),
            ));
        }
        if encoder.in_dim() != decoder.out_dim() {
            return Err(AdvError::InvalidNetwork(
                "generator must preserve the data width".into(),
            ));
        }
        if !(latent_noise_sigma >= T::zero()) {
            return Err(AdvError::InvalidNetwork("noise sigma must be >= 0".into()));
        }
        Ok(GeneratorNet {
            encoder,
            decoder,
            latent_noise_sigma,
        })
    }

    pub fn identity(d: usize) -> Self {
        GeneratorNet {
            encoder: Mlp::identity(d),
            decoder: Mlp::identity(d),
            latent_noise_sigma: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.out_dim()
    }

    /// Draws `rows x latent_dim` noise scaled by sigma, or `None` when sigma
    /// is zero.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Option<Array2<T>> {
        if self.latent_noise_sigma == T::zero() {
            return None;
        }
        let sigma = self.latent_noise_sigma;
        Some(Array2::from_shape_simple_fn(
            (rows, self.latent_dim()),
            || sigma * T::of(rng.sample::<f64, _>(StandardNormal)),
        ))
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        batch: ArrayView2<T>,
        rng: &mut R,
    ) -> Result<Array2<T>, AdvError> {
        let noise = self.sample_noise(batch.nrows(), rng);
        Ok(self.forward_trace(batch, noise.as_ref())?.1.output)
    }

    pub fn forward_trace(
        &self,
        batch: ArrayView2<T>,
        noise: Option<&Array2<T>>,
    ) -> Result<(ForwardTrace<T>, ForwardTrace<T>), AdvError> {
        let enc = self.encoder.forward_trace(batch)?;
        let latent = match noise {
            Some(eps) => &enc.output + eps,
            None => enc.output.clone(),
        };
        let dec = self.decoder.forward_trace(latent.view())?;
        Ok((enc, dec))
    }
}

/// Generator plus the private and utility discriminators, all reading the
/// sanitized output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdversarialNets<T> {
    pub generator: GeneratorNet<T>,
    pub private_head: Mlp<T>,
    pub utility_head: Mlp<T>,
}

impl<T: Scalar> AdversarialNets<T> {
    /// `d -> hidden -> latent -> hidden -> d` generator and `d -> hidden -> 2`
    /// softmax heads.
    pub fn init<R: Rng + ?Sized>(d: usize, cfg: &AdvConfig, sigma: f64, rng: &mut R) -> Self {
        let (h, z) = (cfg.hidden_dim, cfg.latent_dim);
        let encoder = Mlp::init(&[d, h, z], Activation::Relu, Activation::Identity, rng);
        let decoder = Mlp::init(&[z, h, d], Activation::Relu, Activation::Identity, rng);
        let private_head = Mlp::init(&[d, h, 2], Activation::Relu, Activation::Softmax, rng);
        let utility_head = Mlp::init(&[d, h, 2], Activation::Relu, Activation::Softmax, rng);
        AdversarialNets {
            generator: GeneratorNet {
                encoder,
                decoder,
                latent_noise_sigma: T::of(sigma),
            },
            private_head,
            utility_head,
        }
    }
}

/// Loss components of one batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossParts<T> {
    pub c: T,
    pub l_p: T,
    pub l_u: T,
    pub total: T,
}

/// Mean cross-entropy of softmax(logits) against class indices.
pub fn cross_entropy<T: Scalar>(logits: &Array2<T>, labels: &[usize]) -> T {
    let n = T::of(logits.nrows() as f64);
    let mut sum = T::zero();
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().fold(T::zero(), |a, &v| a + (v - max).exp()).ln() + max;
        sum = sum + (lse - row[y]);
    }
    sum / n
}

pub fn mse<T: Scalar>(a: &Array2<T>, b: ArrayView2<T>) -> T {
    let n = T::of(a.len() as f64);
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        / n
}

/// `C = MSE(D_hat, D)`, `l_p`, `l_u` cross-entropies, and
/// `L = alpha C - lambda_p l_p + lambda_u l_u`.
pub fn losses<T: Scalar>(
    d_hat: &Array2<T>,
    d: ArrayView2<T>,
    p_logits: &Array2<T>,
    u_logits: &Array2<T>,
    private: &[usize],
    utility: &[usize],
    cfg: &AdvConfig,
) -> LossParts<T> {
    let c = mse(d_hat, d);
    let l_p = cross_entropy(p_logits, private);
    let l_u = cross_entropy(u_logits, utility);
    LossParts {
        c,
        l_p,
        l_u,
        total: combine(c, l_p, l_u, cfg),
    }
}

pub fn combine<T: Scalar>(c: T, l_p: T, l_u: T, cfg: &AdvConfig) -> T {
    T::of(cfg.alpha) * c - T::of(cfg.lambda_p) * l_p + T::of(cfg.lambda_u) * l_u
}

/// Parameter set an update step acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateTarget {
    /// Ascends `L` (equivalently, minimizes the private discriminator's loss).
    PrivateDiscriminator,
    /// Descends `L` over encoder, decoder and utility discriminator.
    GeneratorAndUtility,
}

/// Exact gradients of `L` (not of `-L`) w.r.t. the targeted parameters.
/// Parameter sets outside the target are `None`.
#[derive(Clone, Debug)]
pub struct GradientSet<T> {
    pub target: UpdateTarget,
    pub private_head: Option<MlpGrads<T>>,
    pub encoder: Option<MlpGrads<T>>,
    pub decoder: Option<MlpGrads<T>>,
    pub utility_head: Option<MlpGrads<T>>,
    pub losses: LossParts<T>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn parts(&self) -> impl Iterator<Item = &MlpGrads<T>> {
        [
            &self.encoder,
            &self.decoder,
            &self.utility_head,
            &self.private_head,
        ]
        .into_iter()
        .flatten()
    }

    pub fn is_finite(&self) -> bool {
        self.parts().all(|g| g.is_finite())
    }
}

/// `(softmax(logits) - onehot(labels)) * coef / n`: gradient of
/// `coef * mean CE` w.r.t. the logits.
fn ce_logit_grad<T: Scalar>(logits: &Array2<T>, labels: &[usize], coef: T) -> Array2<T> {
    let n = T::of(logits.nrows() as f64);
    let mut g = softmax_rows(logits);
    for (mut row, &y) in g.rows_mut().into_iter().zip(labels) {
        row[y] = row[y] - T::one();
    }
    g.mapv_inplace(|v| v * coef / n);
    g
}

/// Forward pass over the whole stack followed by reverse-mode
/// differentiation of `L` w.r.t. the parameters of `target`.
pub fn backward<T: Scalar>(
    nets: &AdversarialNets<T>,
    batch: ArrayView2<T>,
    noise: Option<&Array2<T>>,
    private: &[usize],
    utility: &[usize],
    cfg: &AdvConfig,
    target: UpdateTarget,
) -> Result<GradientSet<T>, AdvError> {
    let (enc, dec) = nets.generator.forward_trace(batch, noise)?;
    let d_hat = &dec.output;
    let p = nets.private_head.forward_trace(d_hat.view())?;
    let u = nets.utility_head.forward_trace(d_hat.view())?;
    let parts = losses(d_hat, batch, p.logits(), u.logits(), private, utility, cfg);

    let dp = ce_logit_grad(p.logits(), private, -T::of(cfg.lambda_p));
    let (gp, dx_p) = nets.private_head.backward(&p, dp, GradAt::Logits);
    let set = match target {
        UpdateTarget::PrivateDiscriminator => GradientSet {
            target,
            private_head: Some(gp),
            encoder: None,
            decoder: None,
            utility_head: None,
            losses: parts,
        },
        UpdateTarget::GeneratorAndUtility => {
            let du = ce_logit_grad(u.logits(), utility, T::of(cfg.lambda_u));
            let (gu, dx_u) = nets.utility_head.backward(&u, du, GradAt::Logits);
            let scale = T::of(2.0 * cfg.alpha) / T::of(d_hat.len() as f64);
            let mut d_out = (d_hat - &batch).mapv(|v| v * scale);
            d_out = d_out + dx_p + dx_u;
            let (gd, d_latent) = nets.generator.decoder.backward(&dec, d_out, GradAt::Output);
            let (ge, _) = nets
                .generator
                .encoder
                .backward(&enc, d_latent, GradAt::Output);
            GradientSet {
                target,
                private_head: None,
                encoder: Some(ge),
                decoder: Some(gd),
                utility_head: Some(gu),
                losses: parts,
            }
        }
    };
    if !set.is_finite() {
        return Err(AdvError::NonFiniteGradient);
    }
    Ok(set)
}
