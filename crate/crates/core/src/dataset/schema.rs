use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DatasetError;

/// Storage kind of a column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous {
        /// Count-like columns are rounded and clamped at zero when decoded.
        #[serde(default)]
        integer: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stddev: Option<f64>,
    },
    Categorical {
        categories: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// Name used when the column is mentioned in natural-language prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl Column {
    pub fn continuous(name: &str, integer: bool) -> Self {
        Column {
            name: name.to_string(),
            display_name: None,
            kind: ColumnKind::Continuous {
                integer,
                mean: None,
                stddev: None,
            },
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        Column {
            name: name.to_string(),
            display_name: None,
            kind: ColumnKind::Categorical {
                categories: categories.iter().map(|c| c.to_string()).collect(),
            },
        }
    }

    pub fn with_display_name(mut self, display: &str) -> Self {
        self.display_name = Some(display.to_string());
        self
    }

    pub fn display(&self) -> &str {
        self.display_name.as_deref().unwrap_or(&self.name)
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Categorical { categories } => Some(categories),
            ColumnKind::Continuous { .. } => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }

    pub fn category_index(&self, value: &str) -> Option<usize> {
        self.categories()?.iter().position(|c| c == value)
    }

    /// Fitted `(mean, stddev)` of a continuous column.
    pub fn stats(&self) -> Option<(f64, f64)> {
        match self.kind {
            ColumnKind::Continuous {
                mean: Some(m),
                stddev: Some(s),
                ..
            } => Some((m, s)),
            _ => None,
        }
    }

    pub fn is_integer(&self) -> bool {
        matches!(self.kind, ColumnKind::Continuous { integer: true, .. })
    }

    /// Width of the column in the encoded matrix.
    pub fn encoded_width(&self) -> usize {
        match &self.kind {
            ColumnKind::Categorical { categories } => categories.len(),
            ColumnKind::Continuous { .. } => 1,
        }
    }
}

/// Assignment of columns to the private label, the utility label and the
/// features handed to a sanitizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roles {
    pub private_feature: String,
    pub utility_feature: String,
    pub sanitize_features: Vec<String>,
}

#[derive(Deserialize)]
struct RawSchema {
    columns: Vec<Column>,
    roles: Roles,
}

/// Column declarations plus role assignment. Always validated: the only way
/// to obtain one is [`FeatureSchema::new`] (deserialization goes through it).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct FeatureSchema {
    columns: Vec<Column>,
    roles: Roles,
    #[serde(skip)]
    feature_idx: Vec<usize>,
}

impl TryFrom<RawSchema> for FeatureSchema {
    type Error = DatasetError;

    fn try_from(raw: RawSchema) -> Result<Self, Self::Error> {
        FeatureSchema::new(raw.columns, raw.roles)
    }
}

impl FeatureSchema {
    /// Validates the schema. `sanitize_features` is reordered to schema
    /// column order.
    pub fn new(columns: Vec<Column>, mut roles: Roles) -> Result<Self, DatasetError> {
        let invalid = |msg: String| Err(DatasetError::InvalidSchema(msg));
        let mut names = HashSet::new();
        for col in &columns {
            if !names.insert(col.name.as_str()) {
                return invalid(format!("duplicate column `{}`", col.name));
            }
            match &col.kind {
                ColumnKind::Categorical { categories } => {
                    if categories.len() < 2 {
                        return invalid(format!(
                            "column `{}` needs at least 2 categories",
                            col.name
                        ));
                    }
                    let distinct: HashSet<_> = categories.iter().collect();
                    if distinct.len() != categories.len() {
                        return invalid(format!("column `{}` has duplicate categories", col.name));
                    }
                }
                ColumnKind::Continuous { stddev, mean, .. } => {
                    if let Some(s) = stddev {
                        if !(s.is_finite() && *s > 0.0) {
                            return invalid(format!("column `{}` has stddev {s}", col.name));
                        }
                    }
                    if mean.is_some() != stddev.is_some() {
                        return invalid(format!("column `{}` has partial statistics", col.name));
                    }
                }
            }
        }
        if roles.private_feature == roles.utility_feature {
            return invalid("private and utility feature must differ".into());
        }
        for label in [&roles.private_feature, &roles.utility_feature] {
            let Some(col) = columns.iter().find(|c| &c.name == label) else {
                return invalid(format!("label column `{label}` not declared"));
            };
            if col.categories().map(|c| c.len()) != Some(2) {
                return invalid(format!("label column `{label}` must be binary categorical"));
            }
            if roles.sanitize_features.contains(label) {
                return invalid(format!("label column `{label}` cannot be sanitized"));
            }
        }
        let mut seen = HashSet::new();
        for f in &roles.sanitize_features {
            if !names.contains(f.as_str()) {
                return invalid(format!("sanitize feature `{f}` not declared"));
            }
            if !seen.insert(f) {
                return invalid(format!("sanitize feature `{f}` listed twice"));
            }
        }
        if roles.sanitize_features.is_empty() {
            return invalid("no sanitize features".into());
        }
        let feature_idx: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| roles.sanitize_features.contains(&c.name))
            .map(|(i, _)| i)
            .collect();
        roles.sanitize_features = feature_idx
            .iter()
            .map(|&i| columns[i].name.clone())
            .collect();
        Ok(FeatureSchema {
            columns,
            roles,
            feature_idx,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(text).map_err(|e| DatasetError::InvalidSchema(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    /// The bundled UCI Adult schema with Task 1 roles (private: sex,
    /// utility: income). `fnlwgt` is not declared, so loaders ignore it.
    pub fn adult() -> Self {
        Self::from_json(include_str!("../../assets/adult_schema.json"))
            .expect("bundled adult schema is valid")
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Sanitize-feature columns, in schema order. Records store one value per
    /// entry of this list.
    pub fn features(&self) -> impl ExactSizeIterator<Item = &Column> + '_ {
        self.feature_idx.iter().map(move |&i| &self.columns[i])
    }

    pub fn n_features(&self) -> usize {
        self.feature_idx.len()
    }

    pub fn feature(&self, i: usize) -> &Column {
        &self.columns[self.feature_idx[i]]
    }

    pub fn feature_position(&self, name: &str) -> Option<usize> {
        self.features().position(|c| c.name == name)
    }

    pub fn private_column(&self) -> &Column {
        self.column(&self.roles.private_feature).expect("validated")
    }

    pub fn utility_column(&self) -> &Column {
        self.column(&self.roles.utility_feature).expect("validated")
    }

    /// Task 2 style role reversal.
    pub fn with_swapped_roles(&self) -> Self {
        let mut out = self.clone();
        std::mem::swap(
            &mut out.roles.private_feature,
            &mut out.roles.utility_feature,
        );
        out
    }

    pub fn has_stats(&self) -> bool {
        self.features()
            .all(|c| c.is_categorical() || c.stats().is_some())
    }

    pub(crate) fn set_stats(&mut self, name: &str, m: f64, s: f64) {
        if let Some(col) = self.columns.iter_mut().find(|c| c.name == name) {
            if let ColumnKind::Continuous { mean, stddev, .. } = &mut col.kind {
                *mean = Some(m);
                *stddev = Some(s);
            }
        }
    }

    /// Stable hash over names, kinds, vocabularies and roles. Normalization
    /// statistics are excluded: they vary per split but do not change what a
    /// record means.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            columns: Vec<(&'a str, Option<&'a [String]>, bool)>,
            roles: &'a Roles,
        }
        let view = View {
            columns: self
                .columns
                .iter()
                .map(|c| (c.name.as_str(), c.categories(), c.is_integer()))
                .collect(),
            roles: &self.roles,
        };
        let bytes = serde_json::to_vec(&view).expect("serializable");
        hex::encode(Sha256::digest(&bytes))[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles(p: &str, u: &str, f: &[&str]) -> Roles {
        Roles {
            private_feature: p.into(),
            utility_feature: u.into(),
            sanitize_features: f.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn cols() -> Vec<Column> {
        vec![
            Column::continuous("x", false),
            Column::categorical("color", &["red", "blue"]),
            Column::categorical("g", &["a", "b"]),
            Column::categorical("y", &["n", "p"]),
        ]
    }

    #[test]
    fn rejects_label_in_sanitize_list() {
        let err = FeatureSchema::new(cols(), roles("g", "y", &["x", "g"])).unwrap_err();
        assert!(matches!(err, DatasetError::InvalidSchema(_)));
    }

    #[test]
    fn rejects_same_private_and_utility() {
        assert!(FeatureSchema::new(cols(), roles("g", "g", &["x"])).is_err());
    }

    #[test]
    fn rejects_degenerate_vocabularies() {
        let mut c = cols();
        c[1] = Column::categorical("color", &["red"]);
        assert!(FeatureSchema::new(c, roles("g", "y", &["x", "color"])).is_err());
        let mut c = cols();
        c[1] = Column::categorical("color", &["red", "red"]);
        assert!(FeatureSchema::new(c, roles("g", "y", &["x", "color"])).is_err());
    }

    #[test]
    fn sanitize_features_follow_column_order() {
        let s = FeatureSchema::new(cols(), roles("g", "y", &["color", "x"])).unwrap();
        assert_eq!(s.roles().sanitize_features, vec!["x", "color"]);
        assert_eq!(s.feature(0).name, "x");
    }

    #[test]
    fn fingerprint_ignores_stats_but_not_roles() {
        let s = FeatureSchema::new(cols(), roles("g", "y", &["x", "color"])).unwrap();
        let mut t = s.clone();
        t.set_stats("x", 1.0, 2.0);
        assert_eq!(s.fingerprint(), t.fingerprint());
        assert_ne!(s.fingerprint(), s.with_swapped_roles().fingerprint());
    }

    #[test]
    fn adult_schema_loads() {
        let s = FeatureSchema::adult();
        assert_eq!(s.roles().private_feature, "sex");
        assert_eq!(s.n_features(), 12);
        assert!(s.column("fnlwgt").is_none());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(FeatureSchema::from_json(&json).unwrap(), s);
    }
}
