use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RunError;
use crate::adversarial::{AdvConfig, AdvVariant};
use crate::classifiers::{ClassifierKind, ClassifierParams};
use crate::llm::{ChatSettings, LiveConfig, MockTransform, DAY};
use crate::prompting::{FallbackPolicy, VariantTag};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// gender private, income utility
    #[default]
    Task1,
    /// income private, gender utility
    Task2,
}

impl Task {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Task::Task1),
            2 => Some(Task::Task2),
            _ => None,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Task::Task1 => "task1",
            Task::Task2 => "task2",
        }
    }
}

/// A sanitization mechanism; serialized as its id (`none`, `alfr`,
/// `uae_pupet`, `llm:p1`, `llm:p2`, `llm:combined`, `llm:unsupervised`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MechanismSpec {
    None,
    Adversarial(AdvVariant),
    Llm(VariantTag),
}

impl MechanismSpec {
    pub fn id(self) -> String {
        match self {
            MechanismSpec::None => "none".into(),
            MechanismSpec::Adversarial(v) => v.id().into(),
            MechanismSpec::Llm(v) => format!("llm:{}", v.id()),
        }
    }

    /// Name used in reports.
    pub fn label(self) -> String {
        match self {
            MechanismSpec::None => "No mechanism".into(),
            MechanismSpec::Adversarial(v) => v.label().into(),
            MechanismSpec::Llm(v) => {
                let sup = if v.is_supervised() {
                    "supervised"
                } else {
                    "unsupervised"
                };
                format!("LLM ({}, {sup})", v.id())
            }
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "none" => Some(MechanismSpec::None),
            "alfr" => Some(MechanismSpec::Adversarial(AdvVariant::Alfr)),
            "uae_pupet" | "uae-pupet" => Some(MechanismSpec::Adversarial(AdvVariant::UaePupet)),
            _ => s
                .strip_prefix("llm:")
                .and_then(VariantTag::parse)
                .map(MechanismSpec::Llm),
        }
    }

    pub fn uses_llm(self) -> bool {
        matches!(self, MechanismSpec::Llm(_))
    }
}

impl fmt::Display for MechanismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl TryFrom<String> for MechanismSpec {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        MechanismSpec::parse(&s).ok_or_else(|| format!("unknown mechanism `{s}`"))
    }
}

impl From<MechanismSpec> for String {
    fn from(m: MechanismSpec) -> String {
        m.id()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Live,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// JSON list of scripted mock replies.
    pub mock_script: Option<PathBuf>,
    /// Reply synthesis for unscripted mock requests; `None` makes every
    /// unscripted request a miss.
    pub mock_transform: Option<MockTransform>,
    pub live: LiveConfig,
    pub chat: ChatSettings,
    pub parallelism: usize,
    pub fallback_policy: FallbackPolicy,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            mock_script: None,
            mock_transform: Some(MockTransform::echo()),
            live: LiveConfig::default(),
            chat: ChatSettings::default(),
            parallelism: 4,
            fallback_policy: FallbackPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub token_limit: u64,
    pub window_secs: u64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            token_limit: 500_000,
            window_secs: DAY.as_secs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub mechanisms: Vec<MechanismSpec>,
    pub classifiers: Vec<ClassifierKind>,
    pub seeds: Vec<u64>,
    pub test_size: usize,
    /// Cap on auxiliary rows; all remaining rows when `None`.
    pub aux_size: Option<usize>,
    pub data_path: PathBuf,
    /// Schema JSON; the built-in census schema when `None`.
    pub schema_path: Option<PathBuf>,
    /// Per-file prompt template overrides.
    pub templates_dir: Option<PathBuf>,
    pub backend: BackendConfig,
    pub budget: BudgetConfig,
    pub adversarial: AdvConfig,
    pub classifier: ClassifierParams,
    /// Retrain attackers on sanitized auxiliary data (off by default).
    pub adaptive_attacker: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Task1,
            mechanisms: vec![MechanismSpec::None],
            classifiers: ClassifierKind::OFFLINE.to_vec(),
            seeds: (0..5).collect(),
            test_size: 1000,
            aux_size: None,
            data_path: PathBuf::from("data/adult.csv"),
            schema_path: None,
            templates_dir: None,
            backend: BackendConfig::default(),
            budget: BudgetConfig::default(),
            adversarial: AdvConfig::default(),
            classifier: ClassifierParams::default(),
            adaptive_attacker: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a JSON config; relative paths inside resolve against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_path);
        let optional = [
            self.schema_path.as_mut(),
            self.templates_dir.as_mut(),
            self.backend.mock_script.as_mut(),
        ];
        optional.into_iter().flatten().for_each(fix);
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.seeds.is_empty() {
            return Err(RunError::Config("at least one seed is required".into()));
        }
        if self.test_size == 0 {
            return Err(RunError::Config("test_size must be positive".into()));
        }
        if self.classifiers.is_empty() {
            return Err(RunError::Config(
                "at least one classifier is required".into(),
            ));
        }
        if self.backend.parallelism == 0 {
            return Err(RunError::Config(
                "backend.parallelism must be positive".into(),
            ));
        }
        self.adversarial
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))?;
        Ok(())
    }

    /// Mechanisms in evaluation order: `none` first, duplicates removed.
    pub fn mechanism_order(&self) -> Vec<MechanismSpec> {
        let mut out = vec![MechanismSpec::None];
        for &m in &self.mechanisms {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }

    pub fn needs_backend(&self) -> bool {
        self.mechanisms.iter().any(|m| m.uses_llm())
            || self.classifiers.iter().any(|c| c.needs_backend())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mechanism_ids_round_trip() {
        for m in [
            MechanismSpec::None,
            MechanismSpec::Adversarial(AdvVariant::Alfr),
            MechanismSpec::Adversarial(AdvVariant::UaePupet),
        ]
        .into_iter()
        .chain(VariantTag::ALL.map(MechanismSpec::Llm))
        {
            assert_eq!(MechanismSpec::parse(&m.id()), Some(m));
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<MechanismSpec>(&json).unwrap(), m);
        }
        assert!(MechanismSpec::parse("llm:p9").is_none());
        assert_eq!(
            MechanismSpec::Adversarial(AdvVariant::UaePupet).label(),
            "uae_pupet (noisy-latent variant)"
        );
    }

    #[test]
    fn none_is_always_first() {
        let cfg = ExperimentConfig {
            mechanisms: vec![
                MechanismSpec::Llm(VariantTag::P1),
                MechanismSpec::None,
                MechanismSpec::Adversarial(AdvVariant::Alfr),
                MechanismSpec::Llm(VariantTag::P1),
            ],
            ..ExperimentConfig::default()
        };
        let ids: Vec<String> = cfg.mechanism_order().iter().map(|m| m.id()).collect();
        assert_eq!(ids, vec!["none", "llm:p1", "alfr"]);
    }

    #[test]
    fn config_json_is_strict_and_validated() {
        let cfg = ExperimentConfig::from_json(
            r#"{"task": "task2", "mechanisms": ["alfr"], "seeds": [3]}"#,
        )
        .unwrap();
        assert_eq!(cfg.task, Task::Task2);
        assert_eq!(cfg.test_size, 1000);
        assert!(ExperimentConfig::from_json(r#"{"seedz": [1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"seeds": []}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"mechanisms": ["magic"]}"#).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.json");
        std::fs::write(&path, r#"{"data_path": "adult.csv"}"#).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.data_path, dir.path().join("adult.csv"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seeds.push(9);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn default_budget_is_one_day() {
        assert_eq!(BudgetConfig::default().window_secs, 86_400);
    }
}
