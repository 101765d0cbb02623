pub mod adversarial;
pub mod classifiers;
pub mod dataset;
pub mod llm;
pub mod mechanism;
pub mod metrics;
pub mod prompting;
pub mod runner;
pub mod scalar;

pub use scalar::Scalar;

pub type Mlp64 = adversarial::Mlp<f64>;
pub type Mlp32 = adversarial::Mlp<f32>;
pub type GeneratorNet64 = adversarial::GeneratorNet<f64>;
pub type AdversarialSanitizer64 = adversarial::AdversarialSanitizer<f64>;
pub type AdversarialSanitizer32 = adversarial::AdversarialSanitizer<f32>;
pub type EncodedMatrix64 = dataset::EncodedMatrix<f64>;
pub type EncodedMatrix32 = dataset::EncodedMatrix<f32>;
