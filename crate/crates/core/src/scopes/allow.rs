use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

const DEFAULT: &str = include_str!("../../data/default_allow_list.txt");

#[derive(Debug, Error)]
pub enum AllowListError {
    #[error("allow-list line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cannot read allow-list {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Libraries a weakly self-contained function may depend on, keyed by
/// top-level package name.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AllowList {
    libraries: BTreeSet<String>,
    exports: BTreeMap<String, BTreeSet<String>>,
}

impl AllowList {
    /// Format: one library per line, `#` comments, optional
    /// `lib: name, name` export table.
    pub fn parse(text: &str) -> Result<Self, AllowListError> {
        let mut out = AllowList::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (lib, table) = match line.split_once(':') {
                Some((l, t)) => (l.trim(), Some(t)),
                None => (line, None),
            };
            if lib.is_empty() || !lib.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(AllowListError::Malformed {
                    line: i + 1,
                    reason: format!("invalid library name {lib:?}"),
                });
            }
            out.libraries.insert(lib.to_string());
            if let Some(table) = table {
                let names = out.exports.entry(lib.to_string()).or_default();
                for n in table.split(',').map(str::trim).filter(|n| !n.is_empty()) {
                    names.insert(n.to_string());
                }
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, AllowListError> {
        let text = std::fs::read_to_string(path).map_err(|source| AllowListError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The shipped list of 37 libraries.
    pub fn default_list() -> Self {
        Self::parse(DEFAULT).expect("bundled allow-list parses")
    }

    pub fn from_libraries<I, S>(libs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AllowList {
            libraries: libs.into_iter().map(Into::into).collect(),
            exports: BTreeMap::new(),
        }
    }

    pub fn contains(&self, library: &str) -> bool {
        self.libraries.contains(library)
    }

    pub fn libraries(&self) -> impl Iterator<Item = &str> {
        self.libraries.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.libraries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.libraries.is_empty()
    }

    /// Whether `library`'s export table lists `name`.
    pub fn exports(&self, library: &str, name: &str) -> bool {
        self.exports.get(library).is_some_and(|t| t.contains(name))
    }

    /// A list containing every library of `self` and of `other`.
    pub fn union(&self, other: &AllowList) -> AllowList {
        let mut out = self.clone();
        out.libraries.extend(other.libraries.iter().cloned());
        for (k, v) in &other.exports {
            out.exports.entry(k.clone()).or_default().extend(v.iter().cloned());
        }
        out
    }
}
