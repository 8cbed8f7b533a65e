//! Line-oriented `key = value` configs.
//!
//! `#` starts a comment. Keys are dotted (`model.fair.p`), values are
//! trimmed strings. Duplicate keys are rejected. The canonical form is the
//! sorted `key = value` lines; its SHA-256 is the config hash.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    /// 1-based; `None` for keys that are missing or came from the command line.
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        write!(f, ": ")?;
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: Option<usize>,
}

#[derive(Debug)]
pub struct Config {
    path: String,
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .split('.')
            .all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'))
}

impl Config {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let err = |key: Option<&str>, message: String| ConfigError {
                path: path.to_string(),
                line: Some(line),
                key: key.map(str::to_string),
                message,
            };
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(None, format!("expected `key = value`, found `{content}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            if !valid_key(key) {
                return Err(err(Some(key), "malformed key".into()));
            }
            if value.is_empty() {
                return Err(err(Some(key), "empty value".into()));
            }
            let entry = Entry {
                value: value.to_string(),
                line: Some(line),
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(err(
                    Some(key),
                    format!("duplicate key, first set on line {}", prev.line.unwrap()),
                ));
            }
        }
        Ok(Self {
            path: path.to_string(),
            entries,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    /// Command-line override; replaces any value from the file.
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: None,
            },
        );
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .map(|(k, e)| format!("{k} = {}\n", e.value))
            .collect()
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            path: self.path.clone(),
            line: self.entries.get(key).and_then(|e| e.line),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let entry = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(&entry.value)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| self.error(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?.ok_or_else(|| self.error(key, "required key is missing"))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse()
                    .map_err(|e| self.error(key, format!("cannot parse list item `{item}`: {e}")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// Rows separated by `;`, entries by `,`.
    pub fn matrix(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(';')
            .map(|row| {
                row.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|e| self.error(key, format!("cannot parse `{}`: {e}", x.trim())))
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()
            .map(Some)
    }

    pub fn keys_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .keys()
            .map(String::as_str)
            .filter(move |k| k.starts_with(prefix))
    }

    /// Fails on the first key nothing read.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        match self.entries.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(self.error(k, "unknown key")),
            None => Ok(()),
        }
    }
}
