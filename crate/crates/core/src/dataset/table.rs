use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, FeatureSchema};
use super::DatasetError;

/// One cell. Categorical cells hold an index into the column vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Category(usize),
    Number(f64),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match *self {
            Value::Number(v) => Some(v),
            Value::Category(_) => None,
        }
    }

    pub fn as_category(&self) -> Option<usize> {
        match *self {
            Value::Category(c) => Some(c),
            Value::Number(_) => None,
        }
    }
}

/// Values of the sanitize features, in schema feature order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub values: Vec<Value>,
}

impl Record {
    pub fn new(values: Vec<Value>) -> Self {
        Record { values }
    }

    pub fn get(&self, schema: &FeatureSchema, name: &str) -> Option<Value> {
        schema.feature_position(name).map(|i| self.values[i])
    }

    /// Human-readable text of feature `i` (vocabulary string or number).
    pub fn text(&self, schema: &FeatureSchema, i: usize) -> String {
        format_value(schema, i, self.values[i])
    }
}

pub(crate) fn format_value(schema: &FeatureSchema, i: usize, value: Value) -> String {
    let col = schema.feature(i);
    match (value, &col.kind) {
        (Value::Category(c), ColumnKind::Categorical { categories }) => categories[c].clone(),
        (Value::Number(v), ColumnKind::Continuous { integer, .. }) => {
            if *integer && v.fract() == 0.0 && v.abs() < 1e15 {
                format!("{}", v as i64)
            } else {
                format!("{v}")
            }
        }
        (v, _) => format!("{v:?}"),
    }
}

/// Private and utility label of a row, as indices into the label columns'
/// vocabularies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labels {
    pub private: usize,
    pub utility: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordTable {
    pub schema: FeatureSchema,
    pub rows: Vec<Record>,
    pub labels: Vec<Labels>,
    /// Rows skipped at load time because of missing (`?`) values.
    pub dropped_missing: usize,
}

impl RecordTable {
    /// Builds a table after checking every row against the schema.
    pub fn new(
        schema: FeatureSchema,
        rows: Vec<Record>,
        labels: Vec<Labels>,
    ) -> Result<Self, DatasetError> {
        let table = RecordTable {
            schema,
            rows,
            labels,
            dropped_missing: 0,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.rows.len() != self.labels.len() {
            return Err(DatasetError::LabelCount {
                rows: self.rows.len(),
                labels: self.labels.len(),
            });
        }
        let n_feat = self.schema.n_features();
        for (r, row) in self.rows.iter().enumerate() {
            if row.values.len() != n_feat {
                return Err(DatasetError::InvalidRow {
                    row: r,
                    reason: format!("{} values for {} features", row.values.len(), n_feat),
                });
            }
            for (i, (value, col)) in row.values.iter().zip(self.schema.features()).enumerate() {
                let ok = match (value, &col.kind) {
                    (Value::Category(c), ColumnKind::Categorical { categories }) => {
                        *c < categories.len()
                    }
                    (Value::Number(v), ColumnKind::Continuous { .. }) => v.is_finite(),
                    _ => false,
                };
                if !ok {
                    return Err(DatasetError::InvalidRow {
                        row: r,
                        reason: format!("bad value {value:?} for feature {i} `{}`", col.name),
                    });
                }
            }
        }
        for (r, l) in self.labels.iter().enumerate() {
            if l.private >= 2 || l.utility >= 2 {
                return Err(DatasetError::InvalidRow {
                    row: r,
                    reason: format!("label out of range {l:?}"),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn private_labels(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.private).collect()
    }

    pub fn utility_labels(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.utility).collect()
    }

    /// New table holding the given rows (by index, in the given order).
    pub fn select(&self, indices: &[usize]) -> RecordTable {
        RecordTable {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dropped_missing: 0,
        }
    }

    /// Same records with private and utility roles exchanged.
    pub fn with_swapped_roles(&self) -> RecordTable {
        RecordTable {
            schema: self.schema.with_swapped_roles(),
            rows: self.rows.clone(),
            labels: self
                .labels
                .iter()
                .map(|l| Labels {
                    private: l.utility,
                    utility: l.private,
                })
                .collect(),
            dropped_missing: self.dropped_missing,
        }
    }

    pub fn with_schema(mut self, schema: FeatureSchema) -> Result<RecordTable, DatasetError> {
        if schema.fingerprint() != self.schema.fingerprint() {
            return Err(DatasetError::SchemaMismatch);
        }
        self.schema = schema;
        Ok(self)
    }
}

/// Fraction of the most frequent class: the accuracy of the best constant
/// predictor.
pub fn majority_rate(labels: &[usize]) -> Result<f64, DatasetError> {
    if labels.is_empty() {
        return Err(DatasetError::EmptyTable);
    }
    let k = labels.iter().max().copied().unwrap_or(0) + 1;
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let best = counts.iter().max().copied().unwrap_or(0);
    Ok(best as f64 / labels.len() as f64)
}

/// Index of the most frequent class; ties go to the lower index.
pub fn majority_class(labels: &[usize]) -> usize {
    let k = labels.iter().max().copied().unwrap_or(0) + 1;
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}
