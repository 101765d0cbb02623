//! Record-to-text prompting and tolerant parsing of model replies.

mod classify;
mod parse;
mod template;

pub use classify::{build_classification_prompt, format_choices, parse_class_answer};
pub use parse::{
    apply_fallback, parse_response, FallbackDecision, FallbackPolicy, ParseStatus, ParsedResponse,
};
pub use template::{PromptTemplates, Template, PLACEHOLDERS};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FeatureSchema, Labels, Record};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("this variant requires the true labels")]
    LabelsRequired,
    #[error("the unsupervised variant must not receive labels")]
    LabelsForbidden,
    #[error("template references unknown placeholder `{{{0}}}`")]
    UnknownPlaceholder(String),
    #[error("malformed template: {0}")]
    MalformedTemplate(String),
    #[error("record has {got} values, schema has {expected} features")]
    RecordShape { expected: usize, got: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantTag {
    P1,
    P2,
    Combined,
    Unsupervised,
}

impl VariantTag {
    pub const ALL: [VariantTag; 4] = [
        VariantTag::P1,
        VariantTag::P2,
        VariantTag::Combined,
        VariantTag::Unsupervised,
    ];

    pub fn is_supervised(self) -> bool {
        self != VariantTag::Unsupervised
    }

    pub fn id(self) -> &'static str {
        match self {
            VariantTag::P1 => "p1",
            VariantTag::P2 => "p2",
            VariantTag::Combined => "combined",
            VariantTag::Unsupervised => "unsupervised",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        VariantTag::ALL
            .into_iter()
            .find(|t| t.id().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptVariant {
    pub tag: VariantTag,
    pub instruction_text: String,
}

impl PromptVariant {
    pub fn from_templates(tag: VariantTag, templates: &PromptTemplates) -> Self {
        PromptVariant {
            tag,
            instruction_text: templates.instruction(tag).text().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub record_index: usize,
    pub text: String,
    pub expected_columns: Vec<String>,
    pub variant: VariantTag,
}

/// `My <feature> is <value>.` for each sanitize feature, in schema order.
pub fn render_record_text(record: &Record, schema: &FeatureSchema) -> String {
    schema
        .features()
        .enumerate()
        .map(|(i, col)| format!("My {} is {}.", col.display(), record.text(schema, i)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lines `name: <value>` in schema order, as requested of the model.
pub fn output_columns_block(schema: &FeatureSchema) -> String {
    schema
        .features()
        .map(|c| format!("{}: <value>", c.name))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The reply format a compliant model produces for `record`.
pub fn format_output(record: &Record, schema: &FeatureSchema) -> String {
    (0..schema.n_features())
        .map(|i| format!("{}: {}", schema.feature(i).name, record.text(schema, i)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Values available to every template: role names, label texts (when
/// given), the rendered record and one `{<column>}` entry per feature.
pub(crate) fn base_values<'a>(
    record: &Record,
    schema: &'a FeatureSchema,
    labels: Option<Labels>,
) -> BTreeMap<&'a str, String> {
    let mut v = BTreeMap::new();
    v.insert(
        "private_feature",
        schema.private_column().display().to_string(),
    );
    v.insert(
        "utility_feature",
        schema.utility_column().display().to_string(),
    );
    if let Some(l) = labels {
        let cat =
            |c: &crate::dataset::Column, i: usize| c.categories().expect("validated")[i].clone();
        v.insert("private_label", cat(schema.private_column(), l.private));
        v.insert("utility_label", cat(schema.utility_column(), l.utility));
    }
    v.insert("record", render_record_text(record, schema));
    v.insert("columns", output_columns_block(schema));
    for (i, col) in schema.features().enumerate() {
        v.insert(col.name.as_str(), record.text(schema, i));
    }
    v
}

/// Record text, supervision sentence (supervised variants only), the
/// variant's instruction and the output-format request, separated by blank
/// lines.
pub fn build_prompt(
    record_index: usize,
    record: &Record,
    labels: Option<Labels>,
    schema: &FeatureSchema,
    tag: VariantTag,
    templates: &PromptTemplates,
) -> Result<PromptBundle, PromptError> {
    if record.values.len() != schema.n_features() {
        return Err(PromptError::RecordShape {
            expected: schema.n_features(),
            got: record.values.len(),
        });
    }
    match (tag.is_supervised(), labels) {
        (true, None) => return Err(PromptError::LabelsRequired),
        (false, Some(_)) => return Err(PromptError::LabelsForbidden),
        _ => {}
    }
    let values = base_values(record, schema, labels);
    let mut parts = vec![values["record"].clone()];
    if tag.is_supervised() {
        parts.push(templates.supervision.render(&values)?);
    }
    parts.push(templates.instruction(tag).render(&values)?);
    parts.push(templates.output_format.render(&values)?);
    Ok(PromptBundle {
        record_index,
        text: parts.join("\n\n"),
        expected_columns: schema.features().map(|c| c.name.clone()).collect(),
        variant: tag,
    })
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '<' | '>' | '=' | '-' | '_' | '≤' | '≥')
}

/// Byte spans of `needle` in `haystack` (ASCII case-insensitive) that are
/// not glued to neighbouring token characters.
pub fn token_spans(haystack: &str, needle: &str) -> Vec<(usize, usize)> {
    if needle.is_empty() {
        return Vec::new();
    }
    let hay = haystack.to_lowercase();
    let pat = needle.to_lowercase();
    // lowercasing may change byte lengths for non-ASCII text; fall back to exact
    let (hay, pat) = if hay.len() == haystack.len() && pat.len() == needle.len() {
        (hay, pat)
    } else {
        (haystack.to_string(), needle.to_string())
    };
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = hay[from..].find(&pat) {
        let start = from + pos;
        let end = start + pat.len();
        let before = hay[..start].chars().next_back();
        let after = hay[end..].chars().next();
        let glued_before =
            before.is_some_and(is_token_char) && pat.chars().next().is_some_and(is_token_char);
        let glued_after =
            after.is_some_and(is_token_char) && pat.chars().next_back().is_some_and(is_token_char);
        if !glued_before && !glued_after {
            out.push((start, end));
        }
        from = start + pat.chars().next().map_or(1, char::len_utf8);
    }
    out
}

/// Number of standalone occurrences of `needle` (see [`token_spans`]).
pub fn count_token(haystack: &str, needle: &str) -> usize {
    token_spans(haystack, needle).len()
}
