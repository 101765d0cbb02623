//! Attack classifiers that infer the private or utility label from the
//! sanitize features. Every model sees only the encoded feature matrix;
//! label columns are not part of a record, so they cannot leak in.

mod boost;
mod forest;
mod logistic;
mod neural;
mod tree;
mod zero_shot;

pub use boost::{Boosted, GbtParams};
pub use forest::{Forest, RfParams};
pub use logistic::{LogisticModel, LrParams};
pub use neural::{NeuralModel, NnParams};
pub use tree::{Binner, Node, Tree};
pub use zero_shot::{llm_zero_shot_predict, ZeroShotOptions, ZeroShotPredictions};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversarial::AdvError;
use crate::dataset::{
    encode_rows, majority_class, Column, ColumnKind, DatasetError, FeatureSchema, Labels,
    RecordTable,
};
use crate::llm::LlmError;
use crate::prompting::PromptError;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training labels contain a single class")]
    SingleClassTrainingSet,
    #[error("target column `{0}` is not binary")]
    NonBinaryTarget(String),
    #[error("schema fingerprint mismatch: model {expected}, table {got}")]
    SchemaMismatch { expected: String, got: String },
    #[error("the zero-shot classifier needs a chat backend")]
    BackendRequired,
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Network(#[from] AdvError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Lr,
    Rf,
    Gbt,
    Nn,
    LlmZeroShot,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] =
        [Self::Lr, Self::Rf, Self::Gbt, Self::Nn, Self::LlmZeroShot];
    pub const OFFLINE: [ClassifierKind; 4] = [Self::Lr, Self::Rf, Self::Gbt, Self::Nn];

    pub fn id(self) -> &'static str {
        match self {
            Self::Lr => "lr",
            Self::Rf => "rf",
            Self::Gbt => "gbt",
            Self::Nn => "nn",
            Self::LlmZeroShot => "llm_zero_shot",
        }
    }

    /// Name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::Lr => "LR",
            Self::Rf => "RF",
            Self::Gbt => "GBT (xgboost-family)",
            Self::Nn => "NN",
            Self::LlmZeroShot => "LLM zero-shot",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s))
    }

    pub fn needs_backend(self) -> bool {
        self == Self::LlmZeroShot
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Private,
    Utility,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::Private, Target::Utility];

    pub fn id(self) -> &'static str {
        match self {
            Target::Private => "private",
            Target::Utility => "utility",
        }
    }

    pub fn column(self, schema: &FeatureSchema) -> &Column {
        match self {
            Target::Private => schema.private_column(),
            Target::Utility => schema.utility_column(),
        }
    }

    pub fn label_of(self, l: &Labels) -> usize {
        match self {
            Target::Private => l.private,
            Target::Utility => l.utility,
        }
    }

    pub fn labels(self, table: &RecordTable) -> Vec<usize> {
        table.labels.iter().map(|l| self.label_of(l)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierParams {
    pub lr: LrParams,
    pub rf: RfParams,
    pub gbt: GbtParams,
    pub nn: NnParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Lr(LogisticModel),
    Rf(Forest),
    Gbt(Boosted),
    Nn(NeuralModel),
    /// No offline parameters; answers come from a chat backend and fall
    /// back to the training majority class.
    LlmZeroShot {
        fallback_class: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub kind: ClassifierKind,
    pub target: Target,
    /// Training schema including the normalization statistics used to
    /// encode every table this model sees.
    pub schema: FeatureSchema,
    pub schema_fingerprint: String,
    pub seed: u64,
    pub model: Model,
}

/// Continuous-feature statistics from `table`; constant columns get unit
/// scale instead of failing, since a classifier can simply ignore them.
fn classifier_schema(table: &RecordTable) -> FeatureSchema {
    let mut schema = table.schema.clone();
    let n = table.len() as f64;
    for (i, col) in table.schema.features().enumerate() {
        if let ColumnKind::Continuous { .. } = col.kind {
            let vals = || {
                table
                    .rows
                    .iter()
                    .map(|r| r.values[i].as_number().unwrap_or(0.0))
            };
            let mean = vals().sum::<f64>() / n;
            let sd = (vals().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            schema.set_stats(&col.name, mean, if sd > 1e-12 { sd } else { 1.0 });
        }
    }
    schema
}

/// Trains `kind` to predict `target` from the sanitize features of `train`.
pub fn fit(
    kind: ClassifierKind,
    target: Target,
    train: &RecordTable,
    seed: u64,
    params: &ClassifierParams,
) -> Result<TrainedClassifier, ClassifierError> {
    if train.is_empty() {
        return Err(DatasetError::EmptyTable.into());
    }
    let column = target.column(&train.schema);
    if column.categories().map(<[String]>::len) != Some(2) {
        return Err(ClassifierError::NonBinaryTarget(column.name.clone()));
    }
    let y = target.labels(train);
    if y.iter().all(|&c| c == y[0]) {
        return Err(ClassifierError::SingleClassTrainingSet);
    }
    let schema = classifier_schema(train);
    let x: Array2<f64> = encode_rows(&schema, &train.rows)?.values;
    let model = match kind {
        ClassifierKind::Lr => Model::Lr(LogisticModel::fit(&x, &y, &params.lr)?),
        ClassifierKind::Rf => Model::Rf(Forest::fit(&x, &y, seed, &params.rf)?),
        ClassifierKind::Gbt => Model::Gbt(Boosted::fit(&x, &y, &params.gbt)?),
        ClassifierKind::Nn => Model::Nn(NeuralModel::fit(&x, &y, seed, &params.nn)?),
        ClassifierKind::LlmZeroShot => Model::LlmZeroShot {
            fallback_class: majority_class(&y),
        },
    };
    Ok(TrainedClassifier {
        kind,
        target,
        schema_fingerprint: schema.fingerprint(),
        schema,
        seed,
        model,
    })
}

impl TrainedClassifier {
    fn check_schema(&self, table: &RecordTable) -> Result<(), ClassifierError> {
        let got = table.schema.fingerprint();
        if got != self.schema_fingerprint {
            return Err(ClassifierError::SchemaMismatch {
                expected: self.schema_fingerprint.clone(),
                got,
            });
        }
        Ok(())
    }

    /// Probability of class 1 per row.
    pub fn predict_proba(&self, table: &RecordTable) -> Result<Vec<f64>, ClassifierError> {
        self.check_schema(table)?;
        if table.is_empty() {
            return Ok(Vec::new());
        }
        let x: Array2<f64> = encode_rows(&self.schema, &table.rows)?.values;
        match &self.model {
            Model::Lr(m) => Ok(m.predict_proba(&x)),
            Model::Rf(m) => Ok(m.predict_proba(&x)),
            Model::Gbt(m) => Ok(m.predict_proba(&x)),
            Model::Nn(m) => Ok(m.predict_proba(&x)?),
            Model::LlmZeroShot { .. } => Err(ClassifierError::BackendRequired),
        }
    }

    /// Class index per row; ties at probability 0.5 go to class 0.
    pub fn predict(&self, table: &RecordTable) -> Result<Vec<usize>, ClassifierError> {
        Ok(self
            .predict_proba(table)?
            .into_iter()
            .map(|p| usize::from(p > 0.5))
            .collect())
    }

    /// Fallback class of a zero-shot model (training majority).
    pub fn fallback_class(&self) -> Option<usize> {
        match self.model {
            Model::LlmZeroShot { fallback_class } => Some(fallback_class),
            _ => None,
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::dataset::test_support::toy_schema;
    use crate::dataset::{Labels, Record, RecordTable, Value};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Toy-schema table whose private label is `age > 50` and utility
    /// label is `color == blue`, with `noise` of each flipped at random.
    pub fn learnable_table(n: usize, noise: f64, seed: u64) -> RecordTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let age = rng.random_range(18..90) as f64;
            let color = rng.random_range(0..3usize);
            let score: f64 = rng.random_range(-2.0..2.0);
            let mut p = usize::from(age > 50.0);
            let mut u = usize::from(color == 2);
            if rng.random_bool(noise) {
                p = 1 - p;
            }
            if rng.random_bool(noise) {
                u = 1 - u;
            }
            rows.push(Record::new(vec![
                Value::Number(age),
                Value::Category(color),
                Value::Number(score),
            ]));
            labels.push(Labels {
                private: p,
                utility: u,
            });
        }
        RecordTable::new(toy_schema(), rows, labels).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::learnable_table;
    use super::*;
    use crate::dataset::{layout_for, Record, Value};
    use crate::metrics::accuracy;

    fn fast_params() -> ClassifierParams {
        ClassifierParams {
            rf: RfParams {
                n_trees: 15,
                ..RfParams::default()
            },
            gbt: GbtParams {
                n_rounds: 40,
                ..GbtParams::default()
            },
            nn: NnParams {
                epochs: 30,
                learning_rate: 1e-2,
                ..NnParams::default()
            },
            ..ClassifierParams::default()
        }
    }

    #[test]
    fn feature_layout_never_includes_label_columns() {
        let t = learnable_table(10, 0.0, 1);
        let s = classifier_schema(&t);
        let names: Vec<String> = layout_for(&s).into_iter().map(|l| l.column).collect();
        assert_eq!(names, vec!["age", "color", "score"]);
        for r in &t.rows {
            assert_eq!(r.values.len(), s.n_features());
        }
    }

    #[test]
    fn every_offline_kind_learns_both_targets() {
        let train = learnable_table(600, 0.0, 2);
        let test = learnable_table(300, 0.0, 3);
        for kind in ClassifierKind::OFFLINE {
            for target in Target::BOTH {
                let m = fit(kind, target, &train, 7, &fast_params()).unwrap();
                let acc = accuracy(&m.predict(&test).unwrap(), &target.labels(&test)).unwrap();
                assert!(acc >= 0.95, "{kind:?} {target:?} accuracy {acc}");
            }
        }
    }

    #[test]
    fn fitting_twice_with_one_seed_is_identical() {
        let train = learnable_table(300, 0.2, 4);
        let test = learnable_table(100, 0.2, 5);
        for kind in ClassifierKind::OFFLINE {
            let a = fit(kind, Target::Private, &train, 11, &fast_params()).unwrap();
            let b = fit(kind, Target::Private, &train, 11, &fast_params()).unwrap();
            assert_eq!(a, b, "{kind:?}");
            assert_eq!(a.predict(&test).unwrap(), b.predict(&test).unwrap());
        }
    }

    #[test]
    fn single_class_training_set_is_rejected() {
        let mut t = learnable_table(20, 0.0, 6);
        for l in &mut t.labels {
            l.private = 1;
        }
        for kind in ClassifierKind::ALL {
            assert!(matches!(
                fit(kind, Target::Private, &t, 0, &fast_params()),
                Err(ClassifierError::SingleClassTrainingSet)
            ));
        }
    }

    #[test]
    fn constant_features_yield_the_majority_class() {
        let mut t = learnable_table(30, 0.0, 7);
        for (i, (r, l)) in t.rows.iter_mut().zip(&mut t.labels).enumerate() {
            *r = Record::new(vec![
                Value::Number(40.0),
                Value::Category(1),
                Value::Number(0.5),
            ]);
            l.utility = usize::from(i % 3 == 0);
        }
        for kind in ClassifierKind::OFFLINE {
            let m = fit(kind, Target::Utility, &t, 3, &fast_params()).unwrap();
            assert_eq!(m.predict(&t).unwrap(), vec![0; 30], "{kind:?}");
        }
    }

    #[test]
    fn predictions_are_rowwise() {
        let train = learnable_table(300, 0.1, 8);
        let test = learnable_table(50, 0.1, 9);
        let perm: Vec<usize> = (0..50).map(|i| (i * 17) % 50).collect();
        let shuffled = test.select(&perm);
        for kind in ClassifierKind::OFFLINE {
            let m = fit(kind, Target::Private, &train, 1, &fast_params()).unwrap();
            let p = m.predict(&test).unwrap();
            let q = m.predict(&shuffled).unwrap();
            let expected: Vec<usize> = perm.iter().map(|&i| p[i]).collect();
            assert_eq!(q, expected, "{kind:?}");
        }
    }

    #[test]
    fn foreign_schema_is_rejected() {
        let t = learnable_table(40, 0.0, 10);
        let m = fit(ClassifierKind::Lr, Target::Private, &t, 0, &fast_params()).unwrap();
        let swapped = t.with_swapped_roles();
        assert!(matches!(
            m.predict(&swapped),
            Err(ClassifierError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn zero_shot_model_needs_a_backend() {
        let t = learnable_table(40, 0.0, 11);
        let m = fit(
            ClassifierKind::LlmZeroShot,
            Target::Private,
            &t,
            0,
            &fast_params(),
        )
        .unwrap();
        assert!(matches!(
            m.predict(&t),
            Err(ClassifierError::BackendRequired)
        ));
        assert_eq!(
            m.fallback_class(),
            Some(majority_class(&Target::Private.labels(&t)))
        );
    }

    #[test]
    fn trained_models_survive_serialization() {
        let train = learnable_table(200, 0.1, 12);
        for kind in ClassifierKind::OFFLINE {
            let m = fit(kind, Target::Utility, &train, 5, &fast_params()).unwrap();
            let back: TrainedClassifier =
                serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            assert_eq!(
                back.predict(&train).unwrap(),
                m.predict(&train).unwrap(),
                "{kind:?}"
            );
        }
    }

    #[test]
    fn kind_ids_parse_back() {
        for k in ClassifierKind::ALL {
            assert_eq!(ClassifierKind::parse(k.id()), Some(k));
        }
        assert_eq!(ClassifierKind::Gbt.label(), "GBT (xgboost-family)");
    }
}
