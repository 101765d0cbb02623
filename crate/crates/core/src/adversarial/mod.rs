//! Minimax sanitization: an encoder-decoder generator trained against a
//! private-label discriminator (maximized) and a utility-label discriminator
//! (minimized), optionally with Gaussian noise in the latent space.

mod adam;
mod checkpoint;
mod mlp;
mod nets;
mod train;

pub use adam::Adam;
pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use mlp::{softmax_rows, Activation, ForwardTrace, GradAt, Layer, Mlp, MlpGrads};
pub use nets::{
    backward, combine, cross_entropy, losses, mse, AdversarialNets, GeneratorNet, GradientSet,
    LossParts, UpdateTarget,
};
pub use train::{train, AdversarialSanitizer, EpochLosses, TrainTrace, Trainer};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetError;

#[derive(Debug, Error)]
pub enum AdvError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("schema fingerprint mismatch: expected {expected}, got {got}")]
    SchemaMismatch { expected: String, got: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty training data")]
    EmptyData,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvVariant {
    Alfr,
    /// Alfr plus latent Gaussian noise during training and sanitization.
    UaePupet,
}

impl AdvVariant {
    pub fn id(self) -> &'static str {
        match self {
            AdvVariant::Alfr => "alfr",
            AdvVariant::UaePupet => "uae_pupet",
        }
    }

    /// Name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            AdvVariant::Alfr => "alfr",
            AdvVariant::UaePupet => "uae_pupet (noisy-latent variant)",
        }
    }

    pub fn noise_sigma(self, cfg: &AdvConfig) -> f64 {
        match self {
            AdvVariant::Alfr => 0.0,
            AdvVariant::UaePupet => cfg.noise_sigma,
        }
    }
}

/// Stop once the validation score `M_u - M_p` has not improved by
/// `min_delta` for `patience` epochs; the best generator is kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStop {
    pub patience: usize,
    #[serde(default)]
    pub min_delta: f64,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

fn default_validation_fraction() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvConfig {
    pub alpha: f64,
    pub lambda_p: f64,
    pub lambda_u: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    /// Latent noise standard deviation of the noisy variant.
    pub noise_sigma: f64,
    pub seed: u64,
    pub early_stop: Option<EarlyStop>,
}

impl Default for AdvConfig {
    fn default() -> Self {
        AdvConfig {
            alpha: 1.0,
            lambda_p: 1.0,
            lambda_u: 1.0,
            learning_rate: 1e-3,
            batch_size: 256,
            epochs: 20,
            latent_dim: 32,
            hidden_dim: 64,
            noise_sigma: 0.1,
            seed: 0,
            early_stop: None,
        }
    }
}

impl AdvConfig {
    pub fn validate(&self) -> Result<(), AdvError> {
        let bad = |m: &str| Err(AdvError::InvalidConfig(m.to_string()));
        for (name, v) in [
            ("alpha", self.alpha),
            ("lambda_p", self.lambda_p),
            ("lambda_u", self.lambda_u),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be finite and >= 0"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be >= 0");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.latent_dim == 0 || self.hidden_dim == 0
        {
            return bad("batch_size, epochs, latent_dim and hidden_dim must be >= 1");
        }
        if let Some(es) = &self.early_stop {
            if es.patience == 0 || !(es.validation_fraction > 0.0 && es.validation_fraction < 1.0) {
                return bad("early_stop needs patience >= 1 and validation_fraction in (0, 1)");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        AdvConfig::default().validate().unwrap();
        let cfg = AdvConfig {
            epochs: 0,
            ..AdvConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = AdvConfig {
            lambda_p: -1.0,
            ..AdvConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let r: Result<AdvConfig, _> = serde_json::from_str(r#"{"epochs": 3, "lamda_p": 2}"#);
        assert!(r.is_err());
        let c: AdvConfig = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!((c.epochs, c.batch_size), (3, 256));
    }

    #[test]
    fn only_the_noisy_variant_uses_sigma() {
        let cfg = AdvConfig::default();
        assert_eq!(AdvVariant::Alfr.noise_sigma(&cfg), 0.0);
        assert_eq!(AdvVariant::UaePupet.noise_sigma(&cfg), 0.1);
    }
}
