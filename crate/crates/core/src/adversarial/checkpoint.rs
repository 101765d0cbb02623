use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdvError, AdversarialSanitizer};
use crate::dataset::FeatureSchema;
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "tabsan-adversarial";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON envelope. Floats round-trip exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Checkpoint<T> {
    pub format: String,
    pub version: u32,
    pub schema_fingerprint: String,
    pub sanitizer: AdversarialSanitizer<T>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(sanitizer: AdversarialSanitizer<T>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            schema_fingerprint: sanitizer.schema.fingerprint(),
            sanitizer,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    /// Parses and checks format, version and that the stored fingerprint
    /// matches both the stored schema and `expected`.
    pub fn from_json(text: &str, expected: &FeatureSchema) -> Result<Self, AdvError> {
        let cp: Checkpoint<T> =
            serde_json::from_str(text).map_err(|e| AdvError::Checkpoint(e.to_string()))?;
        if cp.format != CHECKPOINT_FORMAT {
            return Err(AdvError::Checkpoint(format!(
                "unknown format `{}`",
                cp.format
            )));
        }
        if cp.version != CHECKPOINT_VERSION {
            return Err(AdvError::Checkpoint(format!(
                "unsupported version {}",
                cp.version
            )));
        }
        if cp.schema_fingerprint != cp.sanitizer.schema.fingerprint() {
            return Err(AdvError::Checkpoint(
                "stored fingerprint does not match stored schema".into(),
            ));
        }
        let want = expected.fingerprint();
        if cp.schema_fingerprint != want {
            return Err(AdvError::SchemaMismatch {
                expected: want,
                got: cp.schema_fingerprint,
            });
        }
        if !(cp.sanitizer.generator.encoder.is_finite()
            && cp.sanitizer.generator.decoder.is_finite())
        {
            return Err(AdvError::Checkpoint("non-finite parameters".into()));
        }
        Ok(cp)
    }
}

pub fn save_checkpoint<T: Scalar>(
    sanitizer: &AdversarialSanitizer<T>,
    path: impl AsRef<Path>,
) -> Result<(), AdvError> {
    let path = path.as_ref();
    std::fs::write(path, Checkpoint::new(sanitizer.clone()).to_json()).map_err(|e| AdvError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
    expected: &FeatureSchema,
) -> Result<AdversarialSanitizer<T>, AdvError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AdvError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(Checkpoint::from_json(&text, expected)?.sanitizer)
}
