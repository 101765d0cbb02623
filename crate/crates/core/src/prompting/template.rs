use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PromptError, VariantTag};

/// Placeholders every template may use in addition to `{<column name>}`.
pub const PLACEHOLDERS: &[&str] = &[
    "private_feature",
    "utility_feature",
    "private_label",
    "utility_label",
    "record",
    "columns",
    "target_feature",
    "choices",
];

/// Text with `{name}` placeholders. `{{` and `}}` are literal braces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Template(String);

impl Template {
    pub fn new(text: impl Into<String>) -> Self {
        Template(text.into())
    }

    pub fn text(&self) -> &str {
        &self.0
    }

    /// Names referenced by the template, in order of first appearance.
    pub fn placeholders(&self) -> Result<Vec<String>, PromptError> {
        let mut out: Vec<String> = Vec::new();
        for piece in self.pieces()? {
            if let Piece::Slot(name) = piece {
                if !out.iter().any(|n| n == name) {
                    out.push(name.to_string());
                }
            }
        }
        Ok(out)
    }

    pub fn references(&self, name: &str) -> bool {
        self.placeholders()
            .is_ok_and(|p| p.iter().any(|n| n == name))
    }

    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.0.len() * 2);
        for piece in self.pieces()? {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => match values.get(name) {
                    Some(v) => out.push_str(v),
                    None => return Err(PromptError::UnknownPlaceholder(name.to_string())),
                },
            }
        }
        Ok(out)
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.0.as_bytes()))
    }

    fn pieces(&self) -> Result<Vec<Piece<'_>>, PromptError> {
        let s = self.0.as_str();
        let mut pieces = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            if let Some(r) = rest.strip_prefix("{{") {
                pieces.push(Piece::Text("{"));
                rest = r;
            } else if let Some(r) = rest.strip_prefix("}}") {
                pieces.push(Piece::Text("}"));
                rest = r;
            } else if let Some(r) = rest.strip_prefix('{') {
                let end = r
                    .find('}')
                    .ok_or_else(|| PromptError::MalformedTemplate("unclosed `{`".into()))?;
                let name = &r[..end];
                if name.is_empty() || name.contains('{') || name.chars().any(char::is_whitespace) {
                    return Err(PromptError::MalformedTemplate(format!(
                        "bad placeholder `{{{name}}}`"
                    )));
                }
                pieces.push(Piece::Slot(name));
                rest = &r[end + 1..];
            } else if rest.starts_with('}') {
                return Err(PromptError::MalformedTemplate("stray `}`".into()));
            } else {
                let end = rest.find(['{', '}']).unwrap_or(rest.len());
                pieces.push(Piece::Text(&rest[..end]));
                rest = &rest[end..];
            }
        }
        Ok(pieces)
    }
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

/// All prompt wording. Defaults ship with the crate; any file present in a
/// template directory overrides the corresponding default.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub p1: Template,
    pub p2: Template,
    pub combined: Template,
    pub unsupervised: Template,
    pub supervision: Template,
    pub output_format: Template,
    pub classify: Template,
    /// Lowercase phrases marking a refusal.
    pub refusal_phrases: Vec<String>,
}

const FILES: [&str; 7] = [
    "p1.txt",
    "p2.txt",
    "combined.txt",
    "unsupervised.txt",
    "supervision.txt",
    "output_format.txt",
    "classify.txt",
];

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            p1: Template::new(include_str!("../../assets/prompts/p1.txt")),
            p2: Template::new(include_str!("../../assets/prompts/p2.txt")),
            combined: Template::new(include_str!("../../assets/prompts/combined.txt")),
            unsupervised: Template::new(include_str!("../../assets/prompts/unsupervised.txt")),
            supervision: Template::new(include_str!("../../assets/prompts/supervision.txt")),
            output_format: Template::new(include_str!("../../assets/prompts/output_format.txt")),
            classify: Template::new(include_str!("../../assets/prompts/classify.txt")),
            refusal_phrases: [
                "i cannot",
                "i can't",
                "i can not",
                "i won't",
                "i'm sorry",
                "i am sorry",
                "i'm unable",
                "i am unable",
                "cannot assist",
                "can't assist",
                "cannot help with",
                "as an ai",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

impl PromptTemplates {
    /// Reads `<dir>/<name>.txt` overrides and an optional `refusals.txt`
    /// (one phrase per line).
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let mut t = PromptTemplates::default();
        for file in FILES {
            let path = dir.join(file);
            if path.exists() {
                let text = read(&path)?;
                *t.slot_mut(file) = Template::new(text);
            }
        }
        let refusals = dir.join("refusals.txt");
        if refusals.exists() {
            t.refusal_phrases = read(&refusals)?
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect();
        }
        t.validate()?;
        Ok(t)
    }

    fn slot_mut(&mut self, file: &str) -> &mut Template {
        match file {
            "p1.txt" => &mut self.p1,
            "p2.txt" => &mut self.p2,
            "combined.txt" => &mut self.combined,
            "unsupervised.txt" => &mut self.unsupervised,
            "supervision.txt" => &mut self.supervision,
            "output_format.txt" => &mut self.output_format,
            _ => &mut self.classify,
        }
    }

    pub fn instruction(&self, tag: VariantTag) -> &Template {
        match tag {
            VariantTag::P1 => &self.p1,
            VariantTag::P2 => &self.p2,
            VariantTag::Combined => &self.combined,
            VariantTag::Unsupervised => &self.unsupervised,
        }
    }

    /// Instruction templates must name both features; only the supervision
    /// template may carry label values.
    pub fn validate(&self) -> Result<(), PromptError> {
        let all = [
            &self.p1,
            &self.p2,
            &self.combined,
            &self.unsupervised,
            &self.supervision,
            &self.output_format,
            &self.classify,
        ];
        for t in all {
            t.placeholders()?;
        }
        for tag in VariantTag::ALL {
            let t = self.instruction(tag);
            for f in ["private_feature", "utility_feature"] {
                if !t.references(f) {
                    return Err(PromptError::MalformedTemplate(format!(
                        "{tag:?} instruction must reference {{{f}}}"
                    )));
                }
            }
            for l in ["private_label", "utility_label"] {
                if t.references(l) {
                    return Err(PromptError::MalformedTemplate(format!(
                        "{tag:?} instruction must not reference {{{l}}}"
                    )));
                }
            }
        }
        if !self.output_format.references("columns") {
            return Err(PromptError::MalformedTemplate(
                "output format must reference {columns}".into(),
            ));
        }
        for p in ["record", "target_feature", "choices"] {
            if !self.classify.references(p) {
                return Err(PromptError::MalformedTemplate(format!(
                    "classify template must reference {{{p}}}"
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of each template, keyed by file name.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        let mut t = self.clone();
        FILES
            .iter()
            .map(|f| (f.to_string(), t.slot_mut(f).sha256()))
            .collect()
    }
}

fn read(path: &Path) -> Result<String, PromptError> {
    std::fs::read_to_string(path).map_err(|e| PromptError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vals<'a>(pairs: &[(&'a str, &str)]) -> BTreeMap<&'a str, String> {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn renders_placeholders_and_escapes() {
        let t = Template::new("a {x} b {{lit}} {y}{x}");
        assert_eq!(t.placeholders().unwrap(), vec!["x", "y"]);
        assert_eq!(
            t.render(&vals(&[("x", "1"), ("y", "2")])).unwrap(),
            "a 1 b {lit} 21"
        );
    }

    #[test]
    fn unknown_or_malformed_placeholders_fail() {
        let t = Template::new("hi {who}");
        assert!(
            matches!(t.render(&vals(&[])), Err(PromptError::UnknownPlaceholder(n)) if n == "who")
        );
        assert!(Template::new("open {x").placeholders().is_err());
        assert!(Template::new("stray } here").placeholders().is_err());
        assert!(Template::new("{a b}").placeholders().is_err());
    }

    #[test]
    fn shipped_defaults_are_valid() {
        let t = PromptTemplates::default();
        t.validate().unwrap();
        assert_eq!(t.hashes().len(), 7);
        assert_ne!(t.p1, t.p2);
    }

    #[test]
    fn directory_overrides_one_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("p2.txt"),
            "hide {private_feature}, keep {utility_feature}",
        )
        .unwrap();
        std::fs::write(dir.path().join("refusals.txt"), "Nope\n\n").unwrap();
        let t = PromptTemplates::from_dir(dir.path()).unwrap();
        assert_eq!(
            t.p2.text(),
            "hide {private_feature}, keep {utility_feature}"
        );
        assert_eq!(t.p1, PromptTemplates::default().p1);
        assert_eq!(t.refusal_phrases, vec!["nope"]);
    }

    #[test]
    fn instruction_carrying_labels_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("unsupervised.txt"),
            "{private_feature} is {private_label}; keep {utility_feature}",
        )
        .unwrap();
        assert!(PromptTemplates::from_dir(dir.path()).is_err());
    }
}
