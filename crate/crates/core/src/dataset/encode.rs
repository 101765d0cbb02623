use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, FeatureSchema};
use super::table::{Labels, Record, RecordTable, Value};
use super::DatasetError;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub column: String,
    pub start: usize,
    pub len: usize,
}

/// Numeric view of the sanitize features: one-hot categorical slices and
/// z-scored continuous columns, laid out in schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedMatrix<T> {
    pub values: Array2<T>,
    pub layout: Vec<Slice>,
    pub n_dims: usize,
}

impl<T> EncodedMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }
}

pub fn layout_for(schema: &FeatureSchema) -> Vec<Slice> {
    let mut start = 0;
    schema
        .features()
        .map(|c| {
            let len = c.encoded_width();
            let s = Slice {
                column: c.name.clone(),
                start,
                len,
            };
            start += len;
            s
        })
        .collect()
}

/// Computes per-column mean and population standard deviation of the
/// continuous features from `table` alone.
pub fn fit_normalization(table: &RecordTable) -> Result<FeatureSchema, DatasetError> {
    if table.is_empty() {
        return Err(DatasetError::EmptyTable);
    }
    let mut schema = table.schema.clone();
    let n = table.len() as f64;
    for (i, col) in table.schema.features().enumerate() {
        if col.is_categorical() {
            continue;
        }
        let vals = table
            .rows
            .iter()
            .map(|r| r.values[i].as_number().unwrap_or(f64::NAN));
        let mean = vals.clone().sum::<f64>() / n;
        let var = vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 1e-12 && sd.is_finite()) {
            return Err(DatasetError::DegenerateColumn(col.name.clone()));
        }
        schema.set_stats(&col.name, mean, sd);
    }
    Ok(schema)
}

pub fn encode<T: Scalar>(table: &RecordTable) -> Result<EncodedMatrix<T>, DatasetError> {
    encode_rows(&table.schema, &table.rows)
}

pub fn encode_rows<T: Scalar>(
    schema: &FeatureSchema,
    rows: &[Record],
) -> Result<EncodedMatrix<T>, DatasetError> {
    if !schema.has_stats() {
        return Err(DatasetError::MissingStats);
    }
    let layout = layout_for(schema);
    let n_dims = layout.iter().map(|s| s.len).sum();
    let mut values = Array2::<T>::zeros((rows.len(), n_dims));
    for (r, row) in rows.iter().enumerate() {
        for (i, (col, slice)) in schema.features().zip(&layout).enumerate() {
            match row.values[i] {
                Value::Category(c) => values[[r, slice.start + c]] = T::one(),
                Value::Number(v) => {
                    let (m, s) = col.stats().expect("checked has_stats");
                    values[[r, slice.start]] = T::of((v - m) / s);
                }
            }
        }
    }
    Ok(EncodedMatrix {
        values,
        layout,
        n_dims,
    })
}

/// Projects a (possibly non one-hot) matrix back to records. Categorical
/// slices decode by argmax with the first maximal index winning; continuous
/// values are de-normalized, and integer columns rounded and clamped at 0.
pub fn decode_rows<T: Scalar>(
    matrix: &EncodedMatrix<T>,
    schema: &FeatureSchema,
) -> Result<Vec<Record>, DatasetError> {
    if matrix.layout != layout_for(schema) || matrix.values.ncols() != matrix.n_dims {
        return Err(DatasetError::LayoutMismatch);
    }
    if !schema.has_stats() {
        return Err(DatasetError::MissingStats);
    }
    let mut out = Vec::with_capacity(matrix.n_rows());
    for row in matrix.values.rows() {
        let values = schema
            .features()
            .zip(&matrix.layout)
            .map(|(col, slice)| decode_cell(col, slice, row))
            .collect();
        out.push(Record::new(values));
    }
    Ok(out)
}

fn decode_cell<T: Scalar>(col: &super::Column, slice: &Slice, row: ArrayView1<T>) -> Value {
    match &col.kind {
        ColumnKind::Categorical { .. } => {
            let mut best = 0;
            for k in 1..slice.len {
                // NaN never wins
                if row[slice.start + k] > row[slice.start + best] {
                    best = k;
                }
            }
            Value::Category(best)
        }
        ColumnKind::Continuous { integer, .. } => {
            let (m, s) = col.stats().expect("checked has_stats");
            let mut v = row[slice.start].as_f64() * s + m;
            if !v.is_finite() {
                v = m;
            }
            if *integer {
                v = v.round().max(0.0);
            }
            Value::Number(v)
        }
    }
}

pub fn decode<T: Scalar>(
    matrix: &EncodedMatrix<T>,
    schema: &FeatureSchema,
    labels: Vec<Labels>,
) -> Result<RecordTable, DatasetError> {
    let rows = decode_rows(matrix, schema)?;
    RecordTable::new(schema.clone(), rows, labels)
}
