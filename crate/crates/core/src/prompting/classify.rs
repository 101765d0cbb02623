use super::{base_values, token_spans, PromptError, PromptTemplates};
use crate::dataset::{Column, FeatureSchema, Record};

/// `"a", "b" or "c"`.
pub fn format_choices(categories: &[String]) -> String {
    let quoted: Vec<String> = categories.iter().map(|c| format!("\"{c}\"")).collect();
    match quoted.split_last() {
        Some((last, rest)) if !rest.is_empty() => format!("{} or {last}", rest.join(", ")),
        _ => quoted.concat(),
    }
}

/// Zero-shot question asking for `target`'s class from the record text.
/// Labels are never included.
pub fn build_classification_prompt(
    record: &Record,
    schema: &FeatureSchema,
    target: &Column,
    templates: &PromptTemplates,
) -> Result<String, PromptError> {
    let categories = target.categories().ok_or_else(|| {
        PromptError::MalformedTemplate(format!("target `{}` is not categorical", target.name))
    })?;
    let mut values = base_values(record, schema, None);
    values.insert("target_feature", target.display().to_string());
    values.insert("choices", format_choices(categories));
    templates.classify.render(&values)
}

/// Class named in the answer. Matches contained in a longer match of
/// another class are ignored (`<=50K` does not also count as `>50K`);
/// answers naming zero or several classes are unparseable.
pub fn parse_class_answer(answer: &str, categories: &[String]) -> Option<usize> {
    let spans: Vec<(usize, (usize, usize))> = categories
        .iter()
        .enumerate()
        .flat_map(|(k, c)| token_spans(answer, c).into_iter().map(move |s| (k, s)))
        .collect();
    let outer = |&(k, (a, b)): &(usize, (usize, usize))| {
        !spans
            .iter()
            .any(|&(j, (c, d))| j != k && c <= a && b <= d && (d - c) > (b - a))
    };
    let mut named: Vec<usize> = spans.iter().filter(|s| outer(s)).map(|s| s.0).collect();
    named.sort_unstable();
    named.dedup();
    match named.as_slice() {
        [k] => Some(*k),
        _ => None,
    }
}
