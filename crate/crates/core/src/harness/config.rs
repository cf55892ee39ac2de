//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use super::HarnessError;

/// Parsed `key = value` lines. Blank lines and `#` comments are ignored;
/// a repeated key is an error.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, String>,
}

impl KeyValueConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    i + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(HarnessError::Config(format!("line {}: empty key", i + 1)));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(HarnessError::Config(format!(
                    "line {}: duplicate key '{key}'",
                    i + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|_| {
                    HarnessError::Config(format!("invalid value '{v}' for key '{key}'"))
                })
            })
            .transpose()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Rejects keys outside `known`.
    pub fn ensure_known(&self, known: &[&str]) -> Result<(), HarnessError> {
        for key in self.entries.keys() {
            if !known.contains(&key.as_str()) {
                return Err(HarnessError::Config(format!(
                    "unknown config key '{key}' (valid: {})",
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let c = KeyValueConfig::parse("# header\n a = 1 \nb=two # trailing\n\n").unwrap();
        assert_eq!(c.get("a"), Some("1"));
        assert_eq!(c.get("b"), Some("two"));
        assert_eq!(c.get_parsed::<u32>("a").unwrap(), Some(1));
        assert_eq!(c.get_parsed::<u32>("missing").unwrap(), None);
        assert!(c.get_parsed::<u32>("b").is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(KeyValueConfig::parse("novalue\n").is_err());
        assert!(KeyValueConfig::parse("= 3\n").is_err());
        assert!(KeyValueConfig::parse("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn unknown_keys() {
        let c = KeyValueConfig::parse("a = 1\n").unwrap();
        assert!(c.ensure_known(&["a", "b"]).is_ok());
        assert!(c.ensure_known(&["b"]).is_err());
    }
}
