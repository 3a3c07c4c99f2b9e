//! Column descriptions and the plain-text schema sidecar format.
//!
//! A sidecar file declares only what cannot be inferred: the class column,
//! which columns are categorical (optionally with an explicit level order),
//! and the tokens that mean "missing". Everything else defaults: columns are
//! numeric unless declared categorical, and level orders are derived
//! lexicographically from the data.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Tokens treated as MISSING when no override is given.
pub const DEFAULT_MISSING_TOKENS: &[&str] = &["?", ""];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeKind {
    Numeric,
    /// Ordered level list; level i encodes to the 1-based index i.
    /// An empty list means "derive lexicographically from the data".
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDescriptor {
    pub name: String,
    pub kind: AttributeKind,
}

impl AttributeDescriptor {
    pub fn numeric(name: impl Into<String>) -> Self {
        AttributeDescriptor {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Result<Self> {
        let name = name.into();
        let unique: BTreeSet<&str> = levels.iter().map(String::as_str).collect();
        if unique.len() != levels.len() {
            return Err(Error::Schema(format!(
                "column {name}: level list contains duplicates"
            )));
        }
        Ok(AttributeDescriptor {
            name,
            kind: AttributeKind::Categorical { levels },
        })
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, AttributeKind::Categorical { .. })
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            AttributeKind::Categorical { levels } => Some(levels),
            AttributeKind::Numeric => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    /// Feature columns in file order; the class column is not among them.
    pub attributes: Vec<AttributeDescriptor>,
    pub class_attribute: String,
    pub missing_tokens: Vec<String>,
}

impl Schema {
    pub fn new(
        attributes: Vec<AttributeDescriptor>,
        class_attribute: impl Into<String>,
        missing_tokens: Vec<String>,
    ) -> Result<Self> {
        let class_attribute = class_attribute.into();
        if attributes.is_empty() {
            return Err(Error::Schema("no feature columns".into()));
        }
        let mut seen = BTreeSet::new();
        for attr in &attributes {
            if !seen.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate column name {:?}",
                    attr.name
                )));
            }
            if attr.name == class_attribute {
                return Err(Error::Schema(format!(
                    "class column {class_attribute:?} also appears as a feature column"
                )));
            }
        }
        Ok(Schema {
            attributes,
            class_attribute,
            missing_tokens,
        })
    }

    /// Number of feature columns.
    pub fn n(&self) -> usize {
        self.attributes.len()
    }

    pub fn attribute(&self, name: &str) -> Option<(usize, &AttributeDescriptor)> {
        self.attributes
            .iter()
            .enumerate()
            .find(|(_, a)| a.name == name)
    }

    pub fn is_missing_token(&self, text: &str) -> bool {
        self.missing_tokens.iter().any(|t| t == text)
    }
}

/// Parsed sidecar declarations, merged with a CSV header to build a [`Schema`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchemaConfig {
    pub class_column: Option<String>,
    pub missing_tokens: Option<Vec<String>>,
    /// (column, explicit level order); `None` levels mean "derive".
    pub categorical: Vec<(String, Option<Vec<String>>)>,
    pub numeric: Vec<String>,
}

impl SchemaConfig {
    /// Parses the sidecar text. Recognized lines (blank lines and `#` comments
    /// are skipped):
    ///
    /// ```text
    /// class = Class
    /// missing = ?, ""
    /// categorical Z1 = K11, K12, K13
    /// categorical Z3
    /// numeric Z2
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SchemaConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let (head, value) = match line.split_once('=') {
                Some((h, v)) => (h.trim(), Some(v.trim())),
                None => (line, None),
            };
            let mut words = head.split_whitespace();
            let keyword = words.next().unwrap_or("");
            let column = words.next();
            if words.next().is_some() {
                return Err(Error::Schema(format!(
                    "line {lineno}: too many words before '='"
                )));
            }
            match (keyword, column, value) {
                ("class" | "class_column", None, Some(v)) if !v.is_empty() => {
                    cfg.class_column = Some(v.to_string());
                }
                ("missing" | "missing_tokens", None, Some(v)) => {
                    cfg.missing_tokens = Some(parse_token_list(v));
                }
                ("categorical", Some(col), levels) => {
                    let levels = match levels {
                        Some("") => {
                            return Err(Error::Schema(format!("line {lineno}: empty level list")));
                        }
                        Some(v) => Some(parse_token_list(v)),
                        None => None,
                    };
                    cfg.categorical.push((col.to_string(), levels));
                }
                ("numeric", Some(col), None) => {
                    cfg.numeric.push(col.to_string());
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "line {lineno}: unrecognized entry {line:?}"
                    )));
                }
            }
        }
        Ok(cfg)
    }

    /// Combines the declarations with a CSV header into a full schema plus the
    /// class column's position in the header.
    pub fn resolve(&self, header: &[String]) -> Result<(Schema, usize)> {
        let mut seen = BTreeSet::new();
        for name in header {
            if !seen.insert(name.as_str()) {
                return Err(Error::HeaderMismatch(format!(
                    "duplicate column {name:?} in the header"
                )));
            }
        }
        let class = self
            .class_column
            .clone()
            .ok_or_else(|| Error::Schema("no class column declared".into()))?;
        let class_index = header
            .iter()
            .position(|h| *h == class)
            .ok_or_else(|| Error::HeaderMismatch(format!("class column {class:?} not found")))?;

        for (col, _) in &self.categorical {
            if col == &class {
                return Err(Error::Schema(format!(
                    "class column {class:?} cannot be declared categorical"
                )));
            }
            if !header.contains(col) {
                return Err(Error::HeaderMismatch(format!(
                    "declared column {col:?} not found in the header"
                )));
            }
        }
        for col in &self.numeric {
            if !header.contains(col) {
                return Err(Error::HeaderMismatch(format!(
                    "declared column {col:?} not found in the header"
                )));
            }
            if self.categorical.iter().any(|(c, _)| c == col) {
                return Err(Error::Schema(format!(
                    "column {col:?} declared both numeric and categorical"
                )));
            }
        }

        let mut attributes = Vec::new();
        for (i, name) in header.iter().enumerate() {
            if i == class_index {
                continue;
            }
            let attr = match self.categorical.iter().find(|(c, _)| c == name) {
                Some((_, Some(levels))) => {
                    AttributeDescriptor::categorical(name.clone(), levels.clone())?
                }
                Some((_, None)) => AttributeDescriptor::categorical(name.clone(), Vec::new())?,
                None => AttributeDescriptor::numeric(name.clone()),
            };
            attributes.push(attr);
        }

        let missing = self.missing_tokens.clone().unwrap_or_else(|| {
            DEFAULT_MISSING_TOKENS
                .iter()
                .map(|s| s.to_string())
                .collect()
        });
        let schema = Schema::new(attributes, class, missing)?;
        Ok((schema, class_index))
    }
}

/// Splits a comma-separated list; items may be wrapped in double quotes so the
/// empty string stays expressible.
fn parse_token_list(text: &str) -> Vec<String> {
    text.split(',').map(|item| unquote(item.trim())).collect()
}

fn unquote(s: &str) -> String {
    if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') {
        s[1..s.len() - 1].to_string()
    } else {
        s.to_string()
    }
}
