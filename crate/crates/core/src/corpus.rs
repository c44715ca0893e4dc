//! Corpus acquisition and the commit-window filter.
//!
//! A source is either a local directory or a repository URL (cloned into a
//! cache directory). Inside a git work tree each file is dated by its
//! last-modifying commit; files are kept only when that date falls inside the
//! configured window. Granularity is per file.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use chrono::NaiveDate;
use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::par::{self, Exec};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("source unreachable: {source_name}: {reason}")]
    SourceUnreachable { source_name: String, reason: String },
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Window {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub sources: Vec<String>,
    /// `None` disables temporal filtering.
    pub window: Option<Window>,
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    /// Where repository URLs are cloned. Defaults to the system temp dir.
    #[serde(default)]
    pub clone_dir: Option<PathBuf>,
}

impl CorpusSpec {
    pub fn local(path: impl Into<String>) -> Self {
        CorpusSpec {
            sources: vec![path.into()],
            window: None,
            include: vec!["**/*.py".into()],
            exclude: Vec::new(),
            clone_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.sources.is_empty() {
            return Err(CorpusError::InvalidSpec("at least one source is required".into()));
        }
        if let Some(w) = self.window {
            if w.start > w.end {
                return Err(CorpusError::InvalidSpec(format!("window start {} is after end {}", w.start, w.end)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub content: Arc<[u8]>,
    pub commit: Option<String>,
    pub date: Option<NaiveDate>,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: Vec<u8>, commit: Option<String>, date: Option<NaiveDate>) -> Self {
        SourceFile {
            path: path.into(),
            content: content.into(),
            commit,
            date,
        }
    }

    /// Content as text; `None` for binary or non-UTF-8 bytes.
    pub fn text(&self) -> Option<&str> {
        if self.content.contains(&0) {
            return None;
        }
        std::str::from_utf8(&self.content).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CorpusSnapshot {
    pub snapshot_id: String,
    pub files: Vec<SourceFile>,
    /// Files left out during acquisition (e.g. no VCS history under a window).
    pub warnings: Vec<SkipRecord>,
    pub temporal_filter: bool,
}

impl CorpusSnapshot {
    pub fn manifest(&self) -> SnapshotManifest {
        SnapshotManifest {
            snapshot_id: self.snapshot_id.clone(),
            temporal_granularity: "file".into(),
            temporal_filter: self.temporal_filter,
            files: self
                .files
                .iter()
                .map(|f| ManifestFile {
                    path: f.path.clone(),
                    commit: f.commit.clone(),
                    date: f.date,
                })
                .collect(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub commit: Option<String>,
    pub date: Option<NaiveDate>,
}

/// On-disk snapshot manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub snapshot_id: String,
    /// Recency is judged per file, not per function.
    pub temporal_granularity: String,
    pub temporal_filter: bool,
    pub files: Vec<ManifestFile>,
    #[serde(default)]
    pub warnings: Vec<SkipRecord>,
}

fn globset(patterns: &[String]) -> Result<GlobSet, CorpusError> {
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        let g = Glob::new(p).map_err(|e| CorpusError::InvalidSpec(format!("bad glob {p}: {e}")))?;
        b.add(g);
    }
    b.build().map_err(|e| CorpusError::InvalidSpec(e.to_string()))
}

fn is_url(source: &str) -> bool {
    source.contains("://") || source.starts_with("git@")
}

/// Acquires every source and applies globs and the commit window.
pub fn acquire(spec: &CorpusSpec) -> Result<CorpusSnapshot, CorpusError> {
    acquire_with(spec, Exec::default())
}

/// Files and skip records from one source.
type Scanned = (Vec<SourceFile>, Vec<SkipRecord>);

pub fn acquire_with(spec: &CorpusSpec, exec: Exec) -> Result<CorpusSnapshot, CorpusError> {
    spec.validate()?;
    let include = globset(&spec.include)?;
    let exclude = globset(&spec.exclude)?;
    let labels = source_labels(&spec.sources);

    let per_source: Vec<Result<Scanned, CorpusError>> =
        par::map(exec, &spec.sources.iter().zip(labels).collect::<Vec<_>>(), |(source, label)| {
            let root = materialize(source, spec)?;
            scan_source(&root, label.as_deref(), spec.window, &include, &exclude)
        });

    let mut files = Vec::new();
    let mut warnings = Vec::new();
    for r in per_source {
        let (f, w) = r?;
        files.extend(f);
        warnings.extend(w);
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    warnings.sort_by(|a, b| a.path.cmp(&b.path));
    let snapshot_id = snapshot_id(&files);
    Ok(CorpusSnapshot {
        snapshot_id,
        files,
        warnings,
        temporal_filter: spec.window.is_some(),
    })
}

/// With several sources, paths are prefixed by a per-source label.
fn source_labels(sources: &[String]) -> Vec<Option<String>> {
    if sources.len() <= 1 {
        return vec![None; sources.len()];
    }
    let mut seen: HashMap<String, usize> = HashMap::new();
    sources
        .iter()
        .map(|s| {
            let base = s
                .trim_end_matches(['/', '\\'])
                .rsplit(['/', '\\', ':'])
                .next()
                .unwrap_or("src")
                .trim_end_matches(".git")
                .to_string();
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            Some(if *n == 1 { base } else { format!("{base}-{n}") })
        })
        .collect()
}

fn materialize(source: &str, spec: &CorpusSpec) -> Result<PathBuf, CorpusError> {
    if !is_url(source) {
        let p = PathBuf::from(source);
        if !p.is_dir() {
            return Err(CorpusError::SourceUnreachable {
                source_name: source.to_string(),
                reason: "not a directory".into(),
            });
        }
        return Ok(p);
    }
    let base = spec.clone_dir.clone().unwrap_or_else(|| std::env::temp_dir().join("benchforge-clones"));
    let dest = base.join(hex::encode(&Sha256::digest(source.as_bytes())[..8]));
    if dest.join(".git").is_dir() {
        return Ok(dest);
    }
    std::fs::create_dir_all(&base).map_err(|e| CorpusError::SourceUnreachable {
        source_name: source.to_string(),
        reason: e.to_string(),
    })?;
    let out = Command::new("git")
        .args(["clone", "--quiet", source])
        .arg(&dest)
        .output()
        .map_err(|e| CorpusError::SourceUnreachable {
            source_name: source.to_string(),
            reason: e.to_string(),
        })?;
    if !out.status.success() {
        return Err(CorpusError::SourceUnreachable {
            source_name: source.to_string(),
            reason: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    Ok(dest)
}

/// Last-modifying commit (id, committer date) for every path under `root`,
/// relative to `root`. `None` when `root` is not inside a git work tree.
fn git_history(root: &Path) -> Option<HashMap<String, (String, NaiveDate)>> {
    let out = Command::new("git")
        .arg("-C")
        .arg(root)
        .args(["log", "--format=%x1e%H %cs", "--name-only", "--no-renames", "--relative", "--", "."])
        .output()
        .ok()?;
    if !out.status.success() {
        return None;
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let mut map = HashMap::new();
    for entry in text.split('\x1e').filter(|e| !e.trim().is_empty()) {
        let mut lines = entry.lines();
        let header = lines.next()?;
        let (commit, date) = header.split_once(' ')?;
        let date = NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d").ok()?;
        for path in lines.map(str::trim).filter(|l| !l.is_empty()) {
            // Log is newest-first; the first sighting is the last modification.
            map.entry(path.to_string()).or_insert_with(|| (commit.to_string(), date));
        }
    }
    Some(map)
}

fn scan_source(
    root: &Path,
    label: Option<&str>,
    window: Option<Window>,
    include: &GlobSet,
    exclude: &GlobSet,
) -> Result<(Vec<SourceFile>, Vec<SkipRecord>), CorpusError> {
    let history = git_history(root);
    let mut rels = Vec::new();
    walk(root, root, &mut rels).map_err(|e| CorpusError::SourceUnreachable {
        source_name: root.display().to_string(),
        reason: e.to_string(),
    })?;
    rels.sort();

    let mut files = Vec::new();
    let mut warnings = Vec::new();
    for rel in rels {
        if !include.is_match(&rel) || exclude.is_match(&rel) {
            continue;
        }
        let shown = match label {
            Some(l) => format!("{l}/{rel}"),
            None => rel.clone(),
        };
        let meta = history.as_ref().and_then(|h| h.get(&rel)).cloned();
        if let Some(w) = window {
            match &meta {
                None => {
                    log::warn!("{shown}: no commit history, excluded under temporal filter");
                    warnings.push(SkipRecord {
                        path: shown,
                        reason: "vcs-metadata-missing".into(),
                    });
                    continue;
                }
                Some((_, date)) if !w.contains(*date) => continue,
                Some(_) => {}
            }
        }
        let content = std::fs::read(root.join(&rel)).map_err(|e| CorpusError::SourceUnreachable {
            source_name: shown.clone(),
            reason: e.to_string(),
        })?;
        let (commit, date) = match meta {
            Some((c, d)) => (Some(c), Some(d)),
            None => (None, None),
        };
        files.push(SourceFile::new(shown, content, commit, date));
    }
    Ok((files, warnings))
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        let name = entry.file_name();
        if name == ".git" {
            continue;
        }
        let ft = entry.file_type()?;
        if ft.is_dir() {
            walk(root, &path, out)?;
        } else if ft.is_file() {
            if let Ok(rel) = path.strip_prefix(root) {
                out.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
    }
    Ok(())
}

fn snapshot_id(files: &[SourceFile]) -> String {
    let mut h = Sha256::new();
    for f in files {
        h.update(f.path.as_bytes());
        h.update([0]);
        h.update(Sha256::digest(&f.content));
        h.update(f.commit.as_deref().unwrap_or("-").as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

/// Units ready for parsing, in path order, plus skip records for files that
/// are not text.
pub fn enumerate_units(snapshot: &CorpusSnapshot) -> (Vec<SourceFile>, Vec<SkipRecord>) {
    let mut ordered: BTreeMap<&str, &SourceFile> = BTreeMap::new();
    for f in &snapshot.files {
        ordered.insert(&f.path, f);
    }
    let mut units = Vec::new();
    let mut skips = Vec::new();
    for (path, f) in ordered {
        if f.text().is_some() {
            units.push(f.clone());
        } else {
            skips.push(SkipRecord {
                path: path.to_string(),
                reason: "not-decodable-text".into(),
            });
        }
    }
    (units, skips)
}
