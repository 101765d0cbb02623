use std::io::{Read, Write};
use std::path::Path;

use super::schema::{ColumnKind, FeatureSchema};
use super::table::{format_value, Labels, Record, RecordTable, Value};
use super::DatasetError;

const MISSING: &str = "?";

/// Loads a headered CSV file. Columns not declared in the schema are ignored;
/// rows containing `?` in any used column are dropped and counted.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
) -> Result<RecordTable, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<RecordTable, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(DatasetError::Csv)?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let feature_pos: Vec<usize> = schema
        .features()
        .map(|c| find(&c.name))
        .collect::<Result<_, _>>()?;
    let private_pos = find(&schema.roles().private_feature)?;
    let utility_pos = find(&schema.roles().utility_feature)?;
    let private_col = schema.private_column();
    let utility_col = schema.utility_column();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0;
    for (row_idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(DatasetError::Csv)?;
        let used = feature_pos.iter().chain([&private_pos, &utility_pos]);
        if used
            .clone()
            .any(|&p| rec.get(p).map_or(true, |v| v == MISSING))
        {
            dropped += 1;
            continue;
        }
        let mut values = Vec::with_capacity(feature_pos.len());
        for (col, &p) in schema.features().zip(&feature_pos) {
            let raw = &rec[p];
            values.push(parse_cell(col, raw, row_idx)?);
        }
        let label = |col: &super::Column, p: usize| {
            col.category_index(&rec[p])
                .ok_or_else(|| DatasetError::UnknownCategory {
                    column: col.name.clone(),
                    value: rec[p].to_string(),
                    row: row_idx,
                })
        };
        labels.push(Labels {
            private: label(private_col, private_pos)?,
            utility: label(utility_col, utility_pos)?,
        });
        rows.push(Record::new(values));
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing values");
    }
    let mut table = RecordTable::new(schema.clone(), rows, labels)?;
    table.dropped_missing = dropped;
    Ok(table)
}

fn parse_cell(col: &super::Column, raw: &str, row: usize) -> Result<Value, DatasetError> {
    match &col.kind {
        ColumnKind::Categorical { .. } => {
            col.category_index(raw).map(Value::Category).ok_or_else(|| {
                DatasetError::UnknownCategory {
                    column: col.name.clone(),
                    value: raw.to_string(),
                    row,
                }
            })
        }
        ColumnKind::Continuous { .. } => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Value::Number(v)),
            _ => Err(DatasetError::MalformedNumber {
                column: col.name.clone(),
                row,
            }),
        },
    }
}

/// Writes features followed by the private and utility label columns.
pub fn write_csv<W: Write>(table: &RecordTable, writer: W) -> Result<(), DatasetError> {
    let schema = &table.schema;
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.features().map(|c| c.name.as_str()).collect();
    header.push(&schema.roles().private_feature);
    header.push(&schema.roles().utility_feature);
    w.write_record(&header).map_err(DatasetError::Csv)?;
    let pc = schema.private_column().categories().expect("validated");
    let uc = schema.utility_column().categories().expect("validated");
    for (row, l) in table.rows.iter().zip(&table.labels) {
        let mut fields: Vec<String> = (0..row.values.len())
            .map(|i| format_value(schema, i, row.values[i]))
            .collect();
        fields.push(pc[l.private].clone());
        fields.push(uc[l.utility].clone());
        w.write_record(&fields).map_err(DatasetError::Csv)?;
    }
    w.flush().map_err(|e| DatasetError::Io {
        path: "<writer>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn save_csv(table: &RecordTable, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    write_csv(table, std::io::BufWriter::new(file))
}
