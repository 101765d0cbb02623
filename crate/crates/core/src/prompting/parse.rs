use serde::{Deserialize, Serialize};

use crate::dataset::{Column, ColumnKind, FeatureSchema, Record, Value};
use crate::mechanism::RecordStatus;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    Malformed,
    Refusal,
}

impl ParseStatus {
    pub fn id(self) -> &'static str {
        match self {
            ParseStatus::Ok => "ok",
            ParseStatus::Malformed => "malformed",
            ParseStatus::Refusal => "refusal",
        }
    }
}

/// `status == Ok` exactly when `record` is present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub status: ParseStatus,
    pub record: Option<Record>,
    pub raw: String,
    pub diagnostics: Vec<String>,
}

impl ParsedResponse {
    pub fn malformed(raw: impl Into<String>, why: impl Into<String>) -> Self {
        ParsedResponse {
            status: ParseStatus::Malformed,
            record: None,
            raw: raw.into(),
            diagnostics: vec![why.into()],
        }
    }
}

/// Lowercase alphanumerics only, so `Marital Status`, `marital_status` and
/// `marital-status` compare equal.
fn key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn strip_decoration(s: &str) -> &str {
    let mut s = s.trim();
    loop {
        let before = s;
        s = s.trim_start_matches(['-', '*', '•', '#', '>', '`']).trim();
        s = s.trim_matches(['*', '`', '"', '\'', '_']).trim();
        if let Some(rest) = numbered_prefix(s) {
            s = rest.trim();
        }
        if s == before {
            return s;
        }
    }
}

/// Strips a list marker like `3.` or `12)`.
fn numbered_prefix(s: &str) -> Option<&str> {
    let digits = s.chars().take_while(char::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = &s[digits..];
    rest.strip_prefix(['.', ')']).filter(|r| r.starts_with(' '))
}

fn parse_value(col: &Column, raw: &str) -> Result<Value, String> {
    let v = raw.trim().trim_end_matches(['.', ',', ';']).trim();
    let v = v.trim_matches(['*', '`', '"', '\'']).trim();
    match &col.kind {
        ColumnKind::Categorical { categories } => categories
            .iter()
            .position(|c| c == v)
            .or_else(|| categories.iter().position(|c| c.eq_ignore_ascii_case(v)))
            .map(Value::Category)
            .ok_or_else(|| format!("`{v}` is not a category of {}", col.name)),
        ColumnKind::Continuous { integer, .. } => {
            let num: f64 = v
                .replace(',', "")
                .parse()
                .map_err(|_| format!("`{v}` is not a number for {}", col.name))?;
            if !num.is_finite() {
                return Err(format!("non-finite value for {}", col.name));
            }
            if *integer {
                if num < 0.0 {
                    return Err(format!("negative value for integer column {}", col.name));
                }
                return Ok(Value::Number(num.round()));
            }
            Ok(Value::Number(num))
        }
    }
}

/// Extracts one `name: value` (or `name = value`) line per expected column.
/// The first line naming a column wins; lines naming no column are ignored.
pub fn parse_response(
    raw: &str,
    schema: &FeatureSchema,
    expected_columns: &[String],
    refusal_phrases: &[String],
) -> ParsedResponse {
    let features: Vec<&Column> = schema.features().collect();
    if expected_columns.len() != features.len()
        || expected_columns
            .iter()
            .zip(&features)
            .any(|(e, c)| *e != c.name)
    {
        return ParsedResponse::malformed(
            raw,
            "expected columns differ from the schema's sanitize features",
        );
    }
    let keys: Vec<(String, String)> = features
        .iter()
        .map(|c| (key(&c.name), key(c.display())))
        .collect();
    let mut found: Vec<Option<Result<Value, String>>> = vec![None; features.len()];
    for line in raw.lines() {
        let line = strip_decoration(line);
        let Some(sep) = line.find([':', '=']) else {
            continue;
        };
        let (name, value) = (key(strip_decoration(&line[..sep])), &line[sep + 1..]);
        let Some(i) = keys.iter().position(|(a, b)| *a == name || *b == name) else {
            continue;
        };
        if found[i].is_none() {
            found[i] = Some(parse_value(features[i], value));
        }
    }
    let mut diagnostics = Vec::new();
    let mut values = Vec::with_capacity(features.len());
    for (slot, col) in found.into_iter().zip(&features) {
        match slot {
            Some(Ok(v)) => values.push(v),
            Some(Err(e)) => diagnostics.push(e),
            None => diagnostics.push(format!("missing {}", col.name)),
        }
    }
    if diagnostics.is_empty() {
        return ParsedResponse {
            status: ParseStatus::Ok,
            record: Some(Record::new(values)),
            raw: raw.to_string(),
            diagnostics,
        };
    }
    let lower = raw.to_lowercase();
    let refused = refusal_phrases.iter().any(|p| lower.contains(p.as_str()));
    ParsedResponse {
        status: if refused {
            ParseStatus::Refusal
        } else {
            ParseStatus::Malformed
        },
        record: None,
        raw: raw.to_string(),
        diagnostics,
    }
}

/// Handling of non-Ok replies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    Drop,
    Passthrough,
    /// Re-ask up to n more times, then drop.
    Retry(u32),
}

impl Default for FallbackPolicy {
    fn default() -> Self {
        FallbackPolicy::Retry(2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FallbackDecision {
    Keep(Record, RecordStatus),
    Retry,
    Drop,
}

/// Decides what to do after the `attempts`-th reply (1-based) for a record.
pub fn apply_fallback(
    parsed: &ParsedResponse,
    original: &Record,
    policy: FallbackPolicy,
    attempts: u32,
) -> FallbackDecision {
    if let (ParseStatus::Ok, Some(r)) = (parsed.status, &parsed.record) {
        return FallbackDecision::Keep(r.clone(), RecordStatus::Sanitized);
    }
    match policy {
        FallbackPolicy::Drop => FallbackDecision::Drop,
        FallbackPolicy::Passthrough => {
            FallbackDecision::Keep(original.clone(), RecordStatus::Passthrough)
        }
        FallbackPolicy::Retry(n) if attempts <= n => FallbackDecision::Retry,
        FallbackPolicy::Retry(_) => FallbackDecision::Drop,
    }
}
