//! Pipeline configuration, stage sequencing, content-addressed caching and
//! the run manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bridge::{python_available, BridgeConfig, ExecBridge};
use crate::corpus::{acquire_with, enumerate_units, CorpusError, CorpusSpec, SkipRecord, Window};
use crate::flow::{build_cfg, cyclomatic, dedup_indices, normalized_hash, testability, CcRange, Verdict};
use crate::judge::{function_message, DifficultyLabel, HttpProvider, JudgeClient, JudgeError, Templates};
use crate::package::{assemble, dry_run, generate_instruction, instance_id, validate_instance, InstanceParts, Instruction};
use crate::par::{self, Exec};
use crate::scopes::{analyze_function, classify, AllowList, AllowListError, Classification};
use crate::synth::{coverage_gate, generate_suite, ground_truth_source, infer_strategies, GateDecision, SuiteParams, TestSuite};
use crate::syntax::{extract_functions, parse_source, FunctionRecord};

/// Bumped whenever cached artifacts change meaning.
const CACHE_VERSION: &str = "1";
pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    AllowList(#[from] AllowListError),
    #[error("bridge unavailable: {0}")]
    BridgeUnavailable(String),
    #[error("infrastructure failure while processing {function}: {detail}")]
    Infrastructure { function: String, detail: String },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OrchestratorError + '_ {
    move |source| OrchestratorError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---- configuration ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub sources: Vec<String>,
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default = "default_include")]
    pub include: Vec<String>,
    #[serde(default)]
    pub exclude: Vec<String>,
    #[serde(default)]
    pub clone_dir: Option<PathBuf>,
}

fn default_include() -> Vec<String> {
    vec!["**/*.py".into()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub cc_min: u32,
    pub cc_max: u32,
}

impl Default for FilterSection {
    fn default() -> Self {
        let r = CcRange::default();
        FilterSection {
            cc_min: r.min,
            cc_max: r.max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub target: usize,
    pub budget: usize,
    pub coverage_threshold: f64,
    pub tolerance: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            target: crate::synth::DEFAULT_TARGET,
            budget: crate::synth::DEFAULT_BUDGET,
            coverage_threshold: 1.0,
            tolerance: crate::harness::DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeProvider {
    Stub,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgeSection {
    pub provider: JudgeProvider,
    pub concurrency: usize,
    pub timeout_secs: u64,
    pub templates: Option<PathBuf>,
}

impl Default for JudgeSection {
    fn default() -> Self {
        JudgeSection {
            provider: JudgeProvider::Stub,
            concurrency: 4,
            timeout_secs: 60,
            templates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeSection {
    pub python: Option<String>,
    pub call_timeout_secs: f64,
    pub memory_mb: Option<u64>,
}

impl Default for BridgeSection {
    fn default() -> Self {
        BridgeSection {
            python: None,
            call_timeout_secs: 5.0,
            memory_mb: Some(1024),
        }
    }
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Parse,
    Classify,
    Testability,
    Complexity,
    Dedup,
    Judge,
    Synthesize,
    Package,
    DryRun,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Parse => "parse",
            Stage::Classify => "classify",
            Stage::Testability => "testability",
            Stage::Complexity => "complexity",
            Stage::Dedup => "dedup",
            Stage::Judge => "judge",
            Stage::Synthesize => "synthesize",
            Stage::Package => "package",
            Stage::DryRun => "dry-run",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageSection {
    /// Last stage to run; later stages are left pending.
    pub stop_after: Stage,
    pub dry_run: bool,
    pub parallel: bool,
}

impl Default for StageSection {
    fn default() -> Self {
        StageSection {
            stop_after: Stage::DryRun,
            dry_run: true,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    /// Output root. Not part of the manifest snapshot so that runs into
    /// different roots remain comparable.
    #[serde(default, skip_serializing)]
    pub output: PathBuf,
    #[serde(default = "default_language")]
    pub subject_language: String,
    #[serde(default)]
    pub allow_list: Option<PathBuf>,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub judge: JudgeSection,
    #[serde(default)]
    pub bridge: BridgeSection,
    #[serde(default)]
    pub stages: StageSection,
}

fn default_language() -> String {
    "python".into()
}

impl PipelineConfig {
    /// Defaults for a local corpus; the seed still has to be set.
    pub fn for_corpus(source: impl Into<String>, output: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            seed: None,
            output: output.into(),
            subject_language: default_language(),
            allow_list: None,
            corpus: CorpusSection {
                sources: vec![source.into()],
                window: None,
                include: default_include(),
                exclude: Vec::new(),
                clone_dir: None,
            },
            filter: FilterSection::default(),
            synth: SynthSection::default(),
            judge: JudgeSection::default(),
            bridge: BridgeSection::default(),
            stages: StageSection::default(),
        }
    }

    /// Parses TOML; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, OrchestratorError> {
        let mut c: PipelineConfig = toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        // Path::join keeps absolute paths as they are.
        c.output = base.join(&c.output);
        c.allow_list = c.allow_list.as_deref().map(|p| base.join(p));
        c.judge.templates = c.judge.templates.as_deref().map(|p| base.join(p));
        c.corpus.clone_dir = c.corpus.clone_dir.as_deref().map(|p| base.join(p));
        c.corpus.sources = c
            .corpus
            .sources
            .iter()
            .map(|s| {
                if s.contains("://") || s.starts_with("git@") || Path::new(s).is_absolute() {
                    s.clone()
                } else {
                    base.join(s).to_string_lossy().into_owned()
                }
            })
            .collect();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Config(m));
        if self.seed.is_none() {
            return bad("seed is required (config `seed` or --seed)".into());
        }
        if self.subject_language != "python" {
            return bad(format!("subject language {:?} has no grammar", self.subject_language));
        }
        let f = self.filter;
        if f.cc_min < 1 || f.cc_min > f.cc_max {
            return bad(format!("CC range [{}, {}] must satisfy 1 <= min <= max", f.cc_min, f.cc_max));
        }
        let s = self.synth;
        if !(1..=100_000).contains(&s.target) {
            return bad(format!("target {} outside 1..=100000", s.target));
        }
        if !(1..=10_000_000).contains(&s.budget) {
            return bad(format!("budget {} outside 1..=10000000", s.budget));
        }
        if !(0.0..=1.0).contains(&s.coverage_threshold) {
            return bad(format!("coverage threshold {} outside [0, 1]", s.coverage_threshold));
        }
        if !(s.tolerance >= 0.0 && s.tolerance.is_finite()) {
            return bad(format!("tolerance {} must be finite and non-negative", s.tolerance));
        }
        if !(self.bridge.call_timeout_secs > 0.0 && self.bridge.call_timeout_secs <= 3600.0) {
            return bad("bridge call timeout must be in (0, 3600] seconds".into());
        }
        if self.judge.concurrency == 0 {
            return bad("judge concurrency must be at least 1".into());
        }
        self.corpus_spec().validate()?;
        Ok(())
    }

    pub fn corpus_spec(&self) -> CorpusSpec {
        CorpusSpec {
            sources: self.corpus.sources.clone(),
            window: self.corpus.window,
            include: self.corpus.include.clone(),
            exclude: self.corpus.exclude.clone(),
            clone_dir: self.corpus.clone_dir.clone(),
        }
    }

    pub fn cc_range(&self) -> CcRange {
        CcRange {
            min: self.filter.cc_min,
            max: self.filter.cc_max,
        }
    }

    pub fn bridge_config(&self) -> BridgeConfig {
        let mut b = BridgeConfig::default();
        if let Some(p) = &self.bridge.python {
            b.python = p.clone();
        }
        b.call_timeout = Duration::from_secs_f64(self.bridge.call_timeout_secs);
        b.memory_mb = self.bridge.memory_mb;
        b
    }

    pub fn exec(&self) -> Exec {
        if self.stages.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    pub fn instances_dir(&self) -> PathBuf {
        self.output.join("instances")
    }

    pub fn work_dir(&self) -> PathBuf {
        self.output.join("work")
    }
}

/// Per-function seed derived from the run seed and the instance id.
/// Records that are extracted but never benchmark candidates.
pub fn candidacy_exclusion(f: &FunctionRecord) -> Option<&'static str> {
    if f.decorated {
        Some("decorated-function")
    } else if f.is_method {
        Some("method")
    } else if f.is_async {
        Some("async-function")
    } else {
        None
    }
}

pub fn function_seed(run_seed: u64, instance_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(instance_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

// ---- manifest ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disposition {
    pub function: String,
    pub qualified_name: String,
    /// Last stage the function entered.
    pub stage: Stage,
    /// `accepted`, `pending`, or the rejection reason.
    pub outcome: String,
    pub classification: Option<Classification>,
    pub cc: Option<u32>,
    pub instance_id: Option<String>,
    pub detail: Option<String>,
}

impl Disposition {
    pub fn accepted(&self) -> bool {
        self.outcome == "accepted"
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub recalled: usize,
    pub parsed: usize,
    pub self_contained: usize,
    pub weakly_self_contained: usize,
    pub discarded: usize,
    pub testable: usize,
    pub cc_passed: usize,
    pub deduped: usize,
    pub judged: usize,
    pub suite_accepted: usize,
    pub dry_run_accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PipelineConfig,
    pub snapshot_id: String,
    pub judge_provider: String,
    pub completed_through: Stage,
    pub counts: FunnelCounts,
    pub accepted: Vec<String>,
    pub file_skips: Vec<SkipRecord>,
    pub dispositions: Vec<Disposition>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Funnel conservation and stage-to-stage consistency; empty when sound.
    pub fn consistency_problems(&self) -> Vec<String> {
        let c = &self.counts;
        let mut p = Vec::new();
        if self.dispositions.len() != c.recalled {
            p.push(format!("{} dispositions for {} recalled functions", self.dispositions.len(), c.recalled));
        }
        let mut ids = BTreeSet::new();
        for d in &self.dispositions {
            if !ids.insert(&d.function) {
                p.push(format!("{} has more than one disposition", d.function));
            }
        }
        let dropped = |s: Stage| self.dispositions.iter().filter(|d| d.stage == s && !d.accepted() && d.outcome != "pending").count();
        let chain = [
            (Stage::Parse, c.recalled, c.parsed),
            (Stage::Classify, c.parsed, c.self_contained + c.weakly_self_contained),
            (Stage::Testability, c.self_contained + c.weakly_self_contained, c.testable),
            (Stage::Complexity, c.testable, c.cc_passed),
            (Stage::Dedup, c.cc_passed, c.deduped),
            (Stage::Judge, c.deduped, c.judged),
            (Stage::Synthesize, c.judged, c.suite_accepted),
        ];
        for (stage, input, output) in chain {
            if output > input {
                p.push(format!("{}: output {output} exceeds input {input}", stage.as_str()));
            } else if self.completed_through >= stage && input - output != dropped(stage) {
                p.push(format!("{}: {} dropped but {} records", stage.as_str(), input - output, dropped(stage)));
            }
        }
        if c.self_contained + c.weakly_self_contained + c.discarded != c.parsed {
            p.push("classification counts do not sum to parsed".into());
        }
        let accepted = self.dispositions.iter().filter(|d| d.accepted()).count();
        if accepted != c.dry_run_accepted || accepted != self.accepted.len() {
            p.push(format!("{accepted} accepted records, counts say {}", c.dry_run_accepted));
        }
        let pending_packaged = self.dispositions.iter().filter(|d| d.outcome == "pending" && d.stage >= Stage::Package).count();
        let tail = dropped(Stage::Package) + dropped(Stage::DryRun) + accepted + pending_packaged;
        if self.completed_through >= Stage::Package && c.suite_accepted != tail {
            p.push(format!("{} suites accepted but {tail} package or dry-run records", c.suite_accepted));
        }
        p
    }

    pub fn funnel_markdown(&self) -> String {
        let c = &self.counts;
        let mut s = String::from("| stage | count |\n|---|---:|\n");
        for (k, v) in [
            ("recalled", c.recalled),
            ("parsed", c.parsed),
            ("self-contained", c.self_contained),
            ("weakly self-contained", c.weakly_self_contained),
            ("discarded", c.discarded),
            ("testable", c.testable),
            ("CC in range", c.cc_passed),
            ("after dedup", c.deduped),
            ("judged suitable", c.judged),
            ("suite accepted", c.suite_accepted),
            ("dry-run accepted", c.dry_run_accepted),
        ] {
            s.push_str(&format!("| {k} | {v} |\n"));
        }
        let mut reasons: BTreeMap<(Stage, &str), usize> = BTreeMap::new();
        for d in self.dispositions.iter().filter(|d| !d.accepted()) {
            let reason = d.outcome.split(':').next().unwrap_or(&d.outcome);
            *reasons.entry((d.stage, reason)).or_default() += 1;
        }
        if !reasons.is_empty() {
            s.push_str("\n| stage | outcome | functions |\n|---|---|---:|\n");
            for ((stage, reason), n) in reasons {
                s.push_str(&format!("| {} | {reason} | {n} |\n", stage.as_str()));
            }
        }
        s
    }
}

// ---- cache ----

/// Content-addressed JSON artifacts under `work/cache/<kind>/<key>.json`.
#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into() }
    }

    pub fn key(parts: &[&[u8]]) -> String {
        let mut h = Sha256::new();
        h.update(CACHE_VERSION.as_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        hex::encode(&h.finalize()[..16])
    }

    fn path(&self, kind: &str, key: &str) -> PathBuf {
        self.root.join(kind).join(format!("{key}.json"))
    }

    pub fn get<T: DeserializeOwned>(&self, kind: &str, key: &str) -> Option<T> {
        let text = std::fs::read_to_string(self.path(kind, key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Writes through a temp file and rename so an interrupted write never
    /// leaves a truncated artifact.
    pub fn put<T: Serialize>(&self, kind: &str, key: &str, value: &T) -> Result<(), OrchestratorError> {
        let dir = self.root.join(kind);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(&dir))?;
        serde_json::to_writer(&mut tmp, value).expect("cache value serializes");
        let path = self.path(kind, key);
        tmp.persist(&path).map_err(|e| OrchestratorError::Io { path, source: e.error })?;
        Ok(())
    }
}

// ---- pipeline ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct JudgeRecord {
    suitable: bool,
    reason: String,
    transcripts: Vec<String>,
    difficulty: Option<DifficultyLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum SynthRecord {
    Built { suite: TestSuite, gate: GateDecision },
    Failed { reason: String, detail: String },
}

pub struct PipelineRun {
    pub manifest: RunManifest,
    pub cache: CacheStats,
}

struct Candidate {
    function: FunctionRecord,
    disposition: Disposition,
    cls: Classification,
}

fn reject(d: &mut Disposition, stage: Stage, outcome: impl Into<String>, detail: Option<String>) {
    d.stage = stage;
    d.outcome = outcome.into();
    d.detail = detail;
}

fn judge_client(config: &PipelineConfig) -> Result<JudgeClient, JudgeError> {
    let client = match config.judge.provider {
        JudgeProvider::Stub => JudgeClient::stub(),
        JudgeProvider::Http => {
            let p = HttpProvider::from_env(Duration::from_secs(config.judge.timeout_secs))?;
            JudgeClient::new(Arc::new(p))
        }
    };
    let client = match &config.judge.templates {
        Some(dir) => client.with_templates(Templates::from_dir(dir)?),
        None => client,
    };
    Ok(client
        .with_concurrency(config.judge.concurrency)
        .with_transcript_dir(config.work_dir().join("transcripts")))
}

/// Runs every stage through `config.stages.stop_after` and writes the run
/// manifest last.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun, OrchestratorError> {
    config.validate()?;
    let seed = config.seed.expect("validated");
    let stop = config.stages.stop_after;
    let exec = config.exec();
    let allow = match &config.allow_list {
        Some(p) => AllowList::load(p)?,
        None => AllowList::default_list(),
    };
    if stop >= Stage::Synthesize && !python_available() {
        return Err(OrchestratorError::BridgeUnavailable(format!(
            "`{}` cannot be executed",
            config.bridge_config().python
        )));
    }
    let work = config.work_dir();
    std::fs::create_dir_all(&work).map_err(io_err(&work))?;
    let cache = Cache::new(work.join("cache"));
    let mut stats = CacheStats::default();

    // Ingest.
    let snapshot = acquire_with(&config.corpus_spec(), exec)?;
    let snap_path = work.join("snapshot.json");
    std::fs::write(&snap_path, serde_json::to_string_pretty(&snapshot.manifest()).expect("serializes")).map_err(io_err(&snap_path))?;
    info!("ingested {} files (snapshot {})", snapshot.files.len(), &snapshot.snapshot_id[..12]);
    let (units, mut file_skips) = enumerate_units(&snapshot);
    file_skips.extend(snapshot.warnings.iter().cloned());

    let mut dispositions: Vec<Disposition> = Vec::new();
    let mut counts = FunnelCounts::default();
    let mut candidates: Vec<Candidate> = Vec::new();

    if stop >= Stage::Parse {
        // Parse, classify and run the structural filters per file.
        let per_file = par::map(exec, &units, |unit| {
            let mut out: Vec<(Option<FunctionRecord>, Disposition, Option<Classification>)> = Vec::new();
            let tree = match parse_source(unit) {
                Ok(t) => t,
                Err(_) => return (out, Some(SkipRecord { path: unit.path.clone(), reason: "not-parsable".into() })),
            };
            let ex = extract_functions(&tree, unit);
            for s in ex.skipped {
                out.push((
                    None,
                    Disposition {
                        function: format!("{}::{}@{}", s.path, s.name, s.span.start),
                        qualified_name: s.name.clone(),
                        stage: Stage::Parse,
                        outcome: s.reason.clone(),
                        classification: None,
                        cc: None,
                        instance_id: None,
                        detail: None,
                    },
                    None,
                ));
            }
            for f in ex.records {
                if let Some(reason) = candidacy_exclusion(&f) {
                    out.push((
                        None,
                        Disposition {
                            function: f.id(),
                            qualified_name: f.qualified_name.clone(),
                            stage: Stage::Parse,
                            outcome: reason.into(),
                            classification: None,
                            cc: None,
                            instance_id: None,
                            detail: None,
                        },
                        None,
                    ));
                    continue;
                }
                let mut d = Disposition {
                    function: f.id(),
                    qualified_name: f.qualified_name.clone(),
                    stage: Stage::Classify,
                    outcome: "pending".into(),
                    classification: None,
                    cc: None,
                    instance_id: None,
                    detail: None,
                };
                let report = analyze_function(&f);
                let cls = classify(&report, &allow);
                d.classification = Some(cls);
                if cls == Classification::Discard {
                    let outside: Vec<String> = report
                        .attribution
                        .iter()
                        .filter(|(_, lib)| !allow.contains(lib))
                        .map(|(n, lib)| format!("{n}->{lib}"))
                        .collect();
                    reject(&mut d, Stage::Classify, "discarded-dependencies", Some(outside.join(", ")));
                } else if stop >= Stage::Testability {
                    d.stage = Stage::Testability;
                    match build_cfg(&f) {
                        Err(e) => reject(&mut d, Stage::Testability, "cfg-error", Some(e.to_string())),
                        Ok(cfg) => match testability(&cfg).verdict {
                            Verdict::Reject(r) => reject(&mut d, Stage::Testability, r.as_str(), None),
                            Verdict::Pass if stop >= Stage::Complexity => {
                                d.stage = Stage::Complexity;
                                match cyclomatic(&cfg) {
                                    Err(e) => reject(&mut d, Stage::Complexity, "cfg-inconsistent", Some(e.to_string())),
                                    Ok(cc) => {
                                        d.cc = Some(cc);
                                        if !config.cc_range().contains(cc) {
                                            reject(&mut d, Stage::Complexity, "cc-out-of-range", Some(format!("cc={cc}")));
                                        }
                                    }
                                }
                            }
                            Verdict::Pass => {}
                        },
                    }
                }
                out.push((Some(f), d, Some(cls)));
            }
            (out, None)
        });
        for (items, skip) in per_file {
            file_skips.extend(skip);
            for (f, d, cls) in items {
                counts.recalled += 1;
                let Some(f) = f else {
                    dispositions.push(d);
                    continue;
                };
                counts.parsed += 1;
                match cls {
                    Some(Classification::SelfContained) => counts.self_contained += 1,
                    Some(Classification::WeaklySelfContained) => counts.weakly_self_contained += 1,
                    _ => counts.discarded += 1,
                }
                if d.stage > Stage::Testability || (d.stage == Stage::Testability && d.outcome == "pending") {
                    counts.testable += 1;
                }
                if d.stage == Stage::Complexity && d.outcome == "pending" {
                    counts.cc_passed += 1;
                }
                if d.outcome == "pending" && stop >= Stage::Dedup && d.stage == Stage::Complexity {
                    candidates.push(Candidate {
                        cls: cls.expect("classified"),
                        function: f,
                        disposition: d,
                    });
                } else {
                    dispositions.push(d);
                }
            }
        }
    }

    // Dedup on (name, normalized body), first occurrence in path order wins.
    if stop >= Stage::Dedup {
        let keys: Vec<(String, String)> = candidates.iter().map(|c| (c.function.name.clone(), normalized_hash(&c.function))).collect();
        let keep: BTreeSet<usize> = dedup_indices(&keys).into_iter().collect();
        let mut first: BTreeMap<&(String, String), String> = BTreeMap::new();
        for &i in &keep {
            first.insert(&keys[i], candidates[i].disposition.function.clone());
        }
        let mut kept = Vec::new();
        for (i, mut c) in std::mem::take(&mut candidates).into_iter().enumerate() {
            c.disposition.stage = Stage::Dedup;
            if keep.contains(&i) {
                kept.push(c);
            } else {
                let orig = first[&keys[i]].clone();
                reject(&mut c.disposition, Stage::Dedup, "duplicate", Some(format!("duplicate of {orig}")));
                dispositions.push(c.disposition);
            }
        }
        candidates = kept;
        counts.deduped = candidates.len();
    }

    // Judge.
    let client = judge_client(config);
    let judge_name = match &client {
        Ok(c) => c.provider_name(),
        Err(e) => format!("unavailable: {e}"),
    };
    let mut judged: Vec<(Candidate, JudgeRecord)> = Vec::new();
    if stop >= Stage::Judge {
        let results = par::map(exec, &candidates, |c| -> Result<(JudgeRecord, bool), JudgeError> {
            let client = client.as_ref().map_err(|e| JudgeError::ProviderUnavailable(e.to_string()))?;
            let key = Cache::key(&[
                b"judge",
                judge_name.as_bytes(),
                c.cls.label().as_bytes(),
                c.function.id().as_bytes(),
                function_message(&c.function).as_bytes(),
                format!("{:?}", config.judge.templates).as_bytes(),
            ]);
            if let Some(r) = cache.get::<JudgeRecord>("judge", &key) {
                return Ok((r, true));
            }
            let v = client.assess_suitability(&c.function, c.cls)?;
            let mut rec = JudgeRecord {
                suitable: v.suitable,
                reason: v.reason,
                transcripts: vec![v.transcript],
                difficulty: None,
            };
            if rec.suitable {
                let d = client.assess_difficulty(&c.function, c.cls)?;
                rec.transcripts.push(d.transcript.clone());
                rec.difficulty = Some(d);
            }
            // Failed puts only cost a recomputation on resume.
            let _ = cache.put("judge", &key, &rec);
            Ok((rec, false))
        });
        for (mut c, r) in std::mem::take(&mut candidates).into_iter().zip(results) {
            c.disposition.stage = Stage::Judge;
            match r {
                Err(e) => {
                    warn!("judge unavailable for {}: {e}", c.disposition.function);
                    reject(&mut c.disposition, Stage::Judge, "judge-unavailable", Some(e.to_string()));
                    dispositions.push(c.disposition);
                }
                Ok((rec, hit)) => {
                    if hit {
                        stats.hits += 1;
                    } else {
                        stats.misses += 1;
                    }
                    if rec.suitable {
                        judged.push((c, rec));
                    } else {
                        reject(&mut c.disposition, Stage::Judge, "unsuitable", Some(rec.reason.clone()));
                        dispositions.push(c.disposition);
                    }
                }
            }
        }
        counts.judged = judged.len();
    } else {
        dispositions.extend(std::mem::take(&mut candidates).into_iter().map(|c| c.disposition));
    }

    // Synthesize and gate on coverage.
    let bridge_config = config.bridge_config();
    let mut built: Vec<(Candidate, JudgeRecord, TestSuite, GateDecision)> = Vec::new();
    if stop >= Stage::Synthesize {
        let results = par::map(exec, &judged, |(c, _)| -> Result<(SynthRecord, bool), String> {
            let id = instance_id(&c.function);
            let params = SuiteParams {
                target: config.synth.target,
                budget: config.synth.budget,
                seed: function_seed(seed, &id),
            };
            let gt = ground_truth_source(&c.function);
            let key = Cache::key(&[
                b"synth",
                gt.as_bytes(),
                c.function.name.as_bytes(),
                c.cls.label().as_bytes(),
                &params.seed.to_le_bytes(),
                &(params.target as u64).to_le_bytes(),
                &(params.budget as u64).to_le_bytes(),
                &config.synth.coverage_threshold.to_le_bytes(),
            ]);
            if let Some(r) = cache.get::<SynthRecord>("synth", &key) {
                return Ok((r, true));
            }
            let rec = match infer_strategies(&c.function, c.cls) {
                Err(e) => SynthRecord::Failed {
                    reason: e.reason().into(),
                    detail: e.to_string(),
                },
                Ok(plan) => {
                    let mut bridge = ExecBridge::spawn(bridge_config.clone()).map_err(|e| e.to_string())?;
                    let rec = match generate_suite(&c.function, &plan, params, &mut bridge) {
                        Err(crate::synth::SynthError::BridgeFailure(e)) => return Err(e.to_string()),
                        Err(e) => SynthRecord::Failed {
                            reason: e.reason().into(),
                            detail: e.to_string(),
                        },
                        Ok(suite) => match coverage_gate(&suite, &c.function, config.synth.coverage_threshold, &mut bridge) {
                            Err(crate::synth::SynthError::BridgeFailure(e)) => return Err(e.to_string()),
                            Err(e) => SynthRecord::Failed {
                                reason: e.reason().into(),
                                detail: e.to_string(),
                            },
                            Ok(gate) => SynthRecord::Built { suite, gate },
                        },
                    };
                    let _ = bridge.shutdown();
                    rec
                }
            };
            let _ = cache.put("synth", &key, &rec);
            Ok((rec, false))
        });
        for ((mut c, j), r) in std::mem::take(&mut judged).into_iter().zip(results) {
            c.disposition.stage = Stage::Synthesize;
            let (rec, hit) = r.map_err(|detail| OrchestratorError::Infrastructure {
                function: c.disposition.function.clone(),
                detail,
            })?;
            if hit {
                stats.hits += 1;
            } else {
                stats.misses += 1;
            }
            match rec {
                SynthRecord::Failed { reason, detail } => {
                    reject(&mut c.disposition, Stage::Synthesize, reason, Some(detail));
                    dispositions.push(c.disposition);
                }
                SynthRecord::Built { suite, gate } if !gate.accepted => {
                    let detail = format!(
                        "coverage {}/{} ({:.3}), {} replay failures, shortfall {:?}",
                        gate.report.covered.len(),
                        gate.report.total.len(),
                        gate.report.ratio,
                        gate.replay_failures,
                        suite.shortfall
                    );
                    reject(&mut c.disposition, Stage::Synthesize, "coverage-gate", Some(detail));
                    dispositions.push(c.disposition);
                }
                SynthRecord::Built { suite, gate } => built.push((c, j, suite, gate)),
            }
        }
        counts.suite_accepted = built.len();
    } else {
        dispositions.extend(judged.into_iter().map(|(c, _)| c.disposition));
    }

    // Package, validate and dry-run.
    let instances_dir = config.instances_dir();
    let mut accepted_ids: Vec<String> = Vec::new();
    if stop >= Stage::Package {
        std::fs::create_dir_all(&instances_dir).map_err(io_err(&instances_dir))?;
        let client_ref = client.as_ref().ok();
        let results = par::map(exec, &built, |(c, j, suite, gate)| -> Result<(Disposition, bool), String> {
            let mut d = c.disposition.clone();
            d.stage = Stage::Package;
            let key = Cache::key(&[
                b"instruction",
                judge_name.as_bytes(),
                c.cls.label().as_bytes(),
                c.function.id().as_bytes(),
                function_message(&c.function).as_bytes(),
            ]);
            let (instruction, hit) = match cache.get::<Instruction>("instruction", &key) {
                Some(i) => (i, true),
                None => {
                    let i = generate_instruction(&c.function, c.cls, client_ref);
                    let _ = cache.put("instruction", &key, &i);
                    (i, false)
                }
            };
            let difficulty = j.difficulty.clone().expect("suitable functions carry a difficulty");
            let mut transcripts = j.transcripts.clone();
            transcripts.extend(instruction.transcript.clone());
            let instance = match assemble(&InstanceParts {
                function: &c.function,
                classification: c.cls,
                difficulty: &difficulty,
                instruction: &instruction,
                suite,
                coverage: &gate.report,
                transcripts,
                tolerance: config.synth.tolerance,
            }) {
                Ok(i) => i,
                Err(e) => {
                    reject(&mut d, Stage::Package, "package-error", Some(e.to_string()));
                    return Ok((d, hit));
                }
            };
            d.instance_id = Some(instance.manifest.id.clone());
            let dir = instance.write(&instances_dir).map_err(|e| e.to_string())?;
            let v = validate_instance(&dir, &allow);
            if !v.ok() {
                let _ = std::fs::remove_dir_all(&dir);
                reject(&mut d, Stage::Package, "invalid-instance", Some(v.problems.join("; ")));
                return Ok((d, hit));
            }
            if stop < Stage::DryRun || !config.stages.dry_run {
                if config.stages.dry_run {
                    d.outcome = "pending".into();
                } else {
                    d.outcome = "accepted".into();
                }
                return Ok((d, hit));
            }
            d.stage = Stage::DryRun;
            let fingerprint = Cache::key(&[
                b"dry-run",
                instance.manifest_json().as_bytes(),
                instance.instruction.as_bytes(),
                instance.ground_truth.as_bytes(),
                crate::synth::cases_json(&instance.cases).as_bytes(),
                serde_json::to_string(&instance.runners).expect("serializes").as_bytes(),
            ]);
            let report = match cache.get::<crate::package::DryRunReport>("dry-run", &fingerprint) {
                Some(r) => r,
                None => {
                    let mut bridge = ExecBridge::spawn(bridge_config.clone()).map_err(|e| e.to_string())?;
                    let r = dry_run(&dir, &mut bridge);
                    let _ = bridge.shutdown();
                    match r {
                        Ok(r) => {
                            // Failures are not cached so that a fixed environment is retried.
                            if r.passed {
                                let _ = cache.put("dry-run", &fingerprint, &r);
                            }
                            r
                        }
                        Err(e) => {
                            let _ = std::fs::remove_dir_all(&dir);
                            reject(&mut d, Stage::DryRun, "dry-run-error", Some(e.to_string()));
                            return Ok((d, hit));
                        }
                    }
                }
            };
            if report.passed {
                d.outcome = "accepted".into();
            } else {
                let _ = std::fs::remove_dir_all(&dir);
                let detail = report
                    .runners
                    .iter()
                    .map(|r| format!("{}: {}/{} {:?}", r.target.dir_name(), r.passed, r.total, r.error))
                    .chain(std::iter::once(format!("harness: {}", report.harness.class.as_str())))
                    .collect::<Vec<_>>()
                    .join("; ");
                reject(&mut d, Stage::DryRun, "dry-run-failed", Some(detail));
            }
            Ok((d, hit))
        });
        for ((c, ..), r) in built.iter().zip(results) {
            let (d, hit) = r.map_err(|detail| OrchestratorError::Infrastructure {
                function: c.disposition.function.clone(),
                detail,
            })?;
            if hit {
                stats.hits += 1;
            } else {
                stats.misses += 1;
            }
            if d.accepted() {
                accepted_ids.push(d.instance_id.clone().expect("accepted instances have ids"));
            }
            dispositions.push(d);
        }
        counts.dry_run_accepted = accepted_ids.len();
        remove_stale_instances(&instances_dir, &dispositions)?;
    } else {
        dispositions.extend(built.into_iter().map(|(c, ..)| c.disposition));
    }

    dispositions.sort_by(|a, b| a.function.cmp(&b.function));
    accepted_ids.sort();
    file_skips.sort_by(|a, b| (&a.path, &a.reason).cmp(&(&b.path, &b.reason)));
    let manifest = RunManifest {
        config: config.clone(),
        snapshot_id: snapshot.snapshot_id.clone(),
        judge_provider: judge_name,
        completed_through: stop,
        counts,
        accepted: accepted_ids,
        file_skips,
        dispositions,
    };
    let path = config.output.join(RUN_MANIFEST);
    std::fs::write(&path, manifest.to_json()).map_err(io_err(&path))?;
    info!("{} instances accepted; manifest at {}", manifest.accepted.len(), path.display());
    Ok(PipelineRun { manifest, cache: stats })
}

/// Drops instance directories that no current record points at, so the
/// output root reflects exactly this run.
fn remove_stale_instances(dir: &Path, dispositions: &[Disposition]) -> Result<(), OrchestratorError> {
    let live: BTreeSet<&str> = dispositions
        .iter()
        .filter(|d| d.accepted() || d.outcome == "pending")
        .filter_map(|d| d.instance_id.as_deref())
        .collect();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))?.filter_map(Result::ok) {
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_dir() && !live.contains(name.as_str()) {
            std::fs::remove_dir_all(entry.path()).map_err(io_err(&entry.path()))?;
        }
    }
    Ok(())
}

pub fn load_manifest(output: &Path) -> Result<RunManifest, OrchestratorError> {
    let path = output.join(RUN_MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))
}
