//! Experiment orchestration: per seed, split the data, fit attackers on the
//! auxiliary rows, sanitize the test rows with every mechanism, score every
//! attacker on the result, then aggregate over seeds.

mod aggregate;
mod config;
mod emit;
mod fixtures;
mod report;

use aggregate::aggregate;
pub use config::{BackendConfig, BackendKind, BudgetConfig, ExperimentConfig, MechanismSpec, Task};
pub use emit::{emit_report, histogram_file_name, ReportFormat};
pub use fixtures::{verify_published_fixtures, FixtureCheck, FIXTURE_TOLERANCE};
pub use report::{
    CellResult, ClassifierScores, ColumnDistortion, DistortionDigest, EvaluationReport, Failure,
    FairnessEntry, FairnessVariant, MeanStd, MechanismReport, Provenance, SeedRun, Summary,
    TargetSummary, REPORT_FORMAT, REPORT_VERSION,
};

use std::collections::BTreeMap;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adversarial::{AdvConfig, AdvError, AdvVariant, AdversarialSanitizer};
use crate::classifiers::{
    fit, llm_zero_shot_predict, ClassifierError, ClassifierKind, Target, TrainedClassifier,
    ZeroShotOptions,
};
use crate::dataset::{
    load_csv, majority_rate, split_rows, DatasetError, FeatureSchema, RecordTable,
};
use crate::llm::{ChatBackend, LiveBackend, LlmError, LlmSanitizer, MockBackend, TokenBudget};
use crate::mechanism::MechanismOutput;
use crate::metrics::{
    distortion, fairness, score, DistortionSummary, FairnessScores, MetricsError, DEFAULT_BINS,
};
use crate::prompting::{PromptError, PromptTemplates};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Adversarial(#[from] AdvError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("seed {seed}, mechanism {mechanism}, stage {stage}: {message}")]
    Stage {
        seed: u64,
        mechanism: String,
        stage: &'static str,
        message: String,
    },
}

impl RunError {
    fn at<'a>(
        seed: u64,
        mechanism: &'a str,
        stage: &'static str,
    ) -> impl FnOnce(RunError) -> RunError + 'a {
        move |e| RunError::Stage {
            seed,
            mechanism: mechanism.to_string(),
            stage,
            message: e.to_string(),
        }
    }
}

/// Loaded data plus the shared LLM resources of one run.
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Full table with the task's roles applied.
    pub table: RecordTable,
    pub templates: PromptTemplates,
    pub backend: Option<Box<dyn ChatBackend>>,
    pub budget: TokenBudget,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, RunError> {
        config.validate()?;
        let schema = match &config.schema_path {
            Some(p) => FeatureSchema::from_path(p)?,
            None => FeatureSchema::adult(),
        };
        let table = load_csv(&config.data_path, &schema)?;
        Self::with_table(config, table)
    }

    /// `table` carries the task-1 roles of its schema; task 2 swaps them.
    pub fn with_table(config: ExperimentConfig, table: RecordTable) -> Result<Self, RunError> {
        config.validate()?;
        let table = match config.task {
            Task::Task1 => table,
            Task::Task2 => table.with_swapped_roles(),
        };
        if table.len() <= config.test_size {
            return Err(RunError::Config(format!(
                "{} rows cannot hold a {}-row test split",
                table.len(),
                config.test_size
            )));
        }
        let templates = match &config.templates_dir {
            Some(d) => PromptTemplates::from_dir(d)?,
            None => PromptTemplates::default(),
        };
        let backend = if config.needs_backend() {
            Some(build_backend(&config.backend)?)
        } else {
            None
        };
        let budget = TokenBudget::new(
            config.budget.token_limit,
            Duration::from_secs(config.budget.window_secs),
        );
        Ok(Experiment {
            config,
            table,
            templates,
            backend,
            budget,
        })
    }

    /// Auxiliary (attacker training) and test rows of one seed.
    pub fn split(&self, seed: u64) -> Result<(RecordTable, RecordTable), RunError> {
        let s = split_rows(&self.table, self.config.test_size, seed)?;
        let aux = match self.config.aux_size {
            Some(k) if k < s.train.len() => {
                let mut idx: Vec<usize> = (0..s.train.len()).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(2);
                idx.shuffle(&mut rng);
                idx.truncate(k);
                idx.sort_unstable();
                s.train.select(&idx)
            }
            _ => s.train,
        };
        Ok((aux, s.test))
    }

    fn backend(&self) -> Result<&dyn ChatBackend, RunError> {
        self.backend.as_deref().ok_or_else(|| {
            RunError::Config("an LLM mechanism or classifier needs a backend".into())
        })
    }

    pub fn adversarial_config(&self, seed: u64) -> AdvConfig {
        AdvConfig {
            seed,
            ..self.config.adversarial.clone()
        }
    }

    pub fn train_adversarial(
        &self,
        variant: AdvVariant,
        aux: &RecordTable,
        seed: u64,
    ) -> Result<AdversarialSanitizer<f64>, RunError> {
        Ok(AdversarialSanitizer::fit(
            aux,
            &self.adversarial_config(seed),
            variant,
        )?)
    }

    pub fn llm_sanitizer(&self, variant: crate::prompting::VariantTag) -> LlmSanitizer {
        LlmSanitizer {
            variant,
            templates: self.templates.clone(),
            settings: self.config.backend.chat.clone(),
            policy: self.config.backend.fallback_policy,
            parallelism: self.config.backend.parallelism,
        }
    }

    /// Applies `mechanism` to `table`; adversarial mechanisms are trained
    /// on `aux` first.
    pub fn apply(
        &self,
        mechanism: MechanismSpec,
        aux: &RecordTable,
        table: &RecordTable,
        seed: u64,
    ) -> Result<MechanismOutput, RunError> {
        match mechanism {
            MechanismSpec::None => Ok(MechanismOutput::identity(table)),
            MechanismSpec::Adversarial(v) => Ok(self
                .train_adversarial(v, aux, seed)?
                .sanitize_table(table)?),
            MechanismSpec::Llm(v) => {
                Ok(self
                    .llm_sanitizer(v)
                    .sanitize_table(table, self.backend()?, &self.budget)?)
            }
        }
    }

    /// Offline attackers for both targets, trained on `aux`.
    pub fn fit_attackers(
        &self,
        aux: &RecordTable,
        seed: u64,
    ) -> Result<BTreeMap<(ClassifierKind, Target), TrainedClassifier>, RunError> {
        let mut out = BTreeMap::new();
        for &kind in &self.config.classifiers {
            for target in Target::BOTH {
                let m = fit(kind, target, aux, seed, &self.config.classifier)?;
                out.insert((kind, target), m);
            }
        }
        Ok(out)
    }

    fn predict(
        &self,
        model: &TrainedClassifier,
        table: &RecordTable,
    ) -> Result<(Vec<usize>, Option<usize>), RunError> {
        match model.fallback_class() {
            None => Ok((model.predict(table)?, None)),
            Some(fallback) => {
                let options = ZeroShotOptions {
                    settings: self.config.backend.chat.clone(),
                    templates: self.templates.clone(),
                    parallelism: self.config.backend.parallelism,
                    fallback_class: fallback,
                };
                let z = llm_zero_shot_predict(
                    table,
                    model.target,
                    self.backend()?,
                    &self.budget,
                    &options,
                )?;
                Ok((z.predictions, Some(z.fallback_count)))
            }
        }
    }
}

pub fn build_backend(cfg: &BackendConfig) -> Result<Box<dyn ChatBackend>, RunError> {
    match cfg.kind {
        BackendKind::Mock => {
            let entries = match &cfg.mock_script {
                Some(p) => MockBackend::load_script(p)?,
                None => Vec::new(),
            };
            Ok(Box::new(MockBackend::new(
                entries,
                cfg.mock_transform.clone(),
            )))
        }
        BackendKind::Live => Ok(Box::new(LiveBackend::from_env(cfg.live.clone())?)),
    }
}

/// Everything measured for one (seed, mechanism).
#[derive(Clone, Debug)]
pub(crate) struct SeedMechanismResult {
    pub run: SeedRun,
    pub cells: Vec<CellResult>,
    pub fairness: Vec<(
        ClassifierKind,
        FairnessVariant,
        Result<FairnessScores, String>,
    )>,
    pub distortion: DistortionSummary,
}

struct SeedContext<'a> {
    seed: u64,
    aux: &'a RecordTable,
    test: &'a RecordTable,
    attackers: &'a BTreeMap<(ClassifierKind, Target), TrainedClassifier>,
    /// Raw-test predictions per attacker, filled by the `none` mechanism.
    baseline: BTreeMap<(ClassifierKind, Target), Vec<usize>>,
    majority: [f64; 2],
}

impl Experiment {
    fn evaluate_mechanism(
        &self,
        ctx: &mut SeedContext<'_>,
        mechanism: MechanismSpec,
    ) -> Result<SeedMechanismResult, RunError> {
        let (seed, id) = (ctx.seed, mechanism.id());
        let out = self
            .apply(mechanism, ctx.aux, ctx.test, seed)
            .map_err(RunError::at(seed, &id, "sanitize"))?;
        let adaptive;
        let attackers = if self.config.adaptive_attacker && mechanism != MechanismSpec::None {
            let sanitized_aux = self
                .apply(mechanism, ctx.aux, ctx.aux, seed)
                .map_err(RunError::at(seed, &id, "sanitize_aux"))?;
            adaptive = self
                .fit_attackers(&sanitized_aux.table, seed)
                .map_err(RunError::at(seed, &id, "fit_adaptive"))?;
            &adaptive
        } else {
            ctx.attackers
        };

        let sanitized = &out.table;
        let counts = out.counts();
        let mut cells = Vec::new();
        let mut predictions: BTreeMap<(ClassifierKind, Target), Vec<usize>> = BTreeMap::new();
        if !sanitized.is_empty() {
            for (&(kind, target), model) in attackers {
                let (pred, fallback_rows) = self
                    .predict(model, sanitized)
                    .map_err(RunError::at(seed, &id, "predict"))?;
                let labels = target.labels(sanitized);
                let s = score(&pred, &labels)
                    .map_err(|e| RunError::at(seed, &id, "score")(e.into()))?;
                if mechanism == MechanismSpec::None {
                    ctx.baseline.insert((kind, target), pred.clone());
                }
                let raw = ctx
                    .baseline
                    .get(&(kind, target))
                    .map(|b| out.source_rows.iter().map(|&i| b[i]).collect::<Vec<_>>())
                    .unwrap_or_else(|| pred.clone());
                let r =
                    score(&raw, &labels).map_err(|e| RunError::at(seed, &id, "score")(e.into()))?;
                cells.push(CellResult {
                    seed,
                    mechanism: id.clone(),
                    classifier: kind,
                    target,
                    accuracy: s.accuracy,
                    f1: s.f1,
                    raw_accuracy: r.accuracy,
                    raw_f1: r.f1,
                    evaluated_rows: pred.len(),
                    fallback_rows,
                });
                predictions.insert((kind, target), pred);
            }
        }

        let schema = &sanitized.schema;
        let private = Target::Private.labels(sanitized);
        let utility = Target::Utility.labels(sanitized);
        let mut fair = Vec::new();
        for &kind in &self.config.classifiers {
            for variant in FairnessVariant::BOTH {
                let (target, labels, groups, attr) = match variant {
                    FairnessVariant::UtilityByPrivate => (
                        Target::Utility,
                        &utility,
                        &private,
                        &schema.private_column().name,
                    ),
                    FairnessVariant::PrivateByUtility => (
                        Target::Private,
                        &private,
                        &utility,
                        &schema.utility_column().name,
                    ),
                };
                if let Some(pred) = predictions.get(&(kind, target)) {
                    let f = fairness(pred, labels, groups, attr).map_err(|e| e.to_string());
                    fair.push((kind, variant, f));
                }
            }
        }

        let dist = distortion(ctx.test, sanitized, &out.source_rows, DEFAULT_BINS)
            .map_err(|e| RunError::at(seed, &id, "distortion")(e.into()))?;
        let test_rows = ctx.test.len();
        Ok(SeedMechanismResult {
            run: SeedRun {
                seed,
                mechanism: id,
                test_rows,
                evaluated_rows: sanitized.len(),
                coverage: sanitized.len() as f64 / test_rows as f64,
                sanitized: counts.sanitized,
                passthrough: counts.passthrough,
                dropped: counts.dropped,
                majority_rate_private: ctx.majority[0],
                majority_rate_utility: ctx.majority[1],
                settings: out.settings,
            },
            cells,
            fairness: fair,
            distortion: dist,
        })
    }

    /// Runs every seed and mechanism. Stage failures are recorded in the
    /// report and the remaining work continues.
    pub fn run(&self) -> Result<EvaluationReport, RunError> {
        let mut results: Vec<SeedMechanismResult> = Vec::new();
        let mut failures = Vec::new();
        let mechanisms = self.config.mechanism_order();
        for &seed in &self.config.seeds {
            log::info!("seed {seed}: splitting and fitting attackers");
            let (aux, test) = self.split(seed)?;
            let attackers = match self.fit_attackers(&aux, seed) {
                Ok(a) => a,
                Err(e) => {
                    failures.push(Failure {
                        seed,
                        mechanism: "*".into(),
                        stage: "fit_attackers".into(),
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            let mut ctx = SeedContext {
                seed,
                aux: &aux,
                test: &test,
                attackers: &attackers,
                baseline: BTreeMap::new(),
                majority: [
                    majority_rate(&Target::Private.labels(&test))?,
                    majority_rate(&Target::Utility.labels(&test))?,
                ],
            };
            for &m in &mechanisms {
                log::info!("seed {seed}: mechanism {m}");
                match self.evaluate_mechanism(&mut ctx, m) {
                    Ok(r) => results.push(r),
                    Err(e) => {
                        let (stage, message) = match e {
                            RunError::Stage { stage, message, .. } => (stage.to_string(), message),
                            other => ("evaluate".to_string(), other.to_string()),
                        };
                        log::warn!("seed {seed}, {m}: {stage} failed: {message}");
                        failures.push(Failure {
                            seed,
                            mechanism: m.id(),
                            stage,
                            message,
                        });
                    }
                }
            }
        }
        Ok(aggregate(self, results, failures))
    }
}

/// Loads the configured data and runs the experiment.
pub fn run(config: ExperimentConfig) -> Result<EvaluationReport, RunError> {
    Experiment::new(config)?.run()
}
