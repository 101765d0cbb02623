//! Tabular data: schema, records, CSV ingestion, numeric encoding and
//! seeded splitting.

mod csv_io;
mod encode;
mod schema;
mod split;
mod table;

pub use csv_io::{load_csv, read_csv, save_csv, write_csv};
pub use encode::{
    decode, decode_rows, encode, encode_rows, fit_normalization, layout_for, EncodedMatrix, Slice,
};
pub use schema::{Column, ColumnKind, FeatureSchema, Roles};
pub use split::{split, split_rows, DatasetSplit};
pub use table::{majority_class, majority_rate, Labels, Record, RecordTable, Value};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: unknown category `{value}` for column `{column}`")]
    UnknownCategory {
        column: String,
        value: String,
        row: usize,
    },
    #[error("row {row}: malformed number in column `{column}`")]
    MalformedNumber { column: String, row: usize },
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("table is empty")]
    EmptyTable,
    #[error("continuous column `{0}` is constant")]
    DegenerateColumn(String),
    #[error("schema has no fitted normalization statistics")]
    MissingStats,
    #[error("matrix layout does not match schema")]
    LayoutMismatch,
    #[error("schema fingerprint mismatch")]
    SchemaMismatch,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn toy_schema() -> FeatureSchema {
        let mut s = FeatureSchema::new(
            vec![
                Column::continuous("age", true),
                Column::categorical("color", &["red", "green", "blue"]),
                Column::continuous("score", false),
                Column::categorical("g", &["a", "b"]),
                Column::categorical("y", &["n", "p"]),
            ],
            Roles {
                private_feature: "g".into(),
                utility_feature: "y".into(),
                sanitize_features: vec!["age".into(), "color".into(), "score".into()],
            },
        )
        .unwrap();
        s.set_stats("age", 40.0, 10.0);
        s.set_stats("score", 0.0, 1.0);
        s
    }

    pub fn toy_table(n: usize, seed: u64) -> RecordTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                Record::new(vec![
                    Value::Number(rng.random_range(18..90) as f64),
                    Value::Category(rng.random_range(0..3)),
                    Value::Number(rng.random_range(-2.0..2.0)),
                ])
            })
            .collect();
        let labels = (0..n)
            .map(|_| Labels {
                private: rng.random_range(0..2),
                utility: rng.random_range(0..2),
            })
            .collect();
        RecordTable::new(toy_schema(), rows, labels).unwrap()
    }
}
