use std::fmt;

use crate::error::{Error, Result};

pub const DEFAULT_TECHNIQUES: [&str; 6] = [
    "breathy",
    "falsetto",
    "mixed_voice",
    "resonance",
    "vibrato",
    "glissando",
];

pub const VIBRATO: &str = "vibrato";
pub const GLISSANDO: &str = "glissando";

/// Ordered technique names; a name's index is its row in the technique matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVocabulary {
    names: Vec<String>,
}

impl LabelVocabulary {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::invalid("technique vocabulary is empty"));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::invalid(format!("technique name {} is empty", i + 1)));
            }
            if name
                .chars()
                .any(|c| c == ',' || c == '#' || c.is_whitespace() || c.is_control())
            {
                return Err(Error::invalid(format!(
                    "technique name {name:?} contains a comma, '#', whitespace or control character"
                )));
            }
            if names[..i].contains(name) {
                return Err(Error::invalid(format!("duplicate technique name `{name}`")));
            }
        }
        Ok(Self { names })
    }

    /// Parses a comma-separated list such as `vibrato,breathy`.
    pub fn from_comma_list(list: &str) -> Result<Self> {
        Self::new(list.split(',').map(str::trim))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub(crate) fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownTechnique {
            name: name.to_string(),
            vocabulary: self.to_string(),
        })
    }
}

impl Default for LabelVocabulary {
    fn default() -> Self {
        Self {
            names: DEFAULT_TECHNIQUES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for LabelVocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_order() {
        let v = LabelVocabulary::default();
        assert_eq!(v.len(), 6);
        assert_eq!(v.index_of("vibrato"), Some(4));
        assert_eq!(v.index_of("glissando"), Some(5));
    }

    #[test]
    fn rejects_bad_names() {
        assert!(LabelVocabulary::new(Vec::<String>::new()).is_err());
        assert!(LabelVocabulary::new(["a", "a"]).is_err());
        assert!(LabelVocabulary::new(["a b"]).is_err());
        assert!(LabelVocabulary::new([""]).is_err());
        assert!(LabelVocabulary::from_comma_list("a,,b").is_err());
    }

    #[test]
    fn comma_list() {
        let v = LabelVocabulary::from_comma_list("vibrato, breathy").unwrap();
        assert_eq!(v.names(), ["vibrato", "breathy"]);
        assert_eq!(v.to_string(), "vibrato,breathy");
    }
}
