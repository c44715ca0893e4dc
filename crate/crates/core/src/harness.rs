//! Differential evaluation of candidate implementations against packaged
//! instances, outcome classification, and report aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bridge::{BridgeConfig, BridgeError, ExecBridge, Status};
use crate::package::{BenchmarkInstance, InstanceManifest, PackageError};
use crate::par::{self, Exec};
use crate::scopes::Classification;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Pass-ratio threshold for the high-pass-rate statistic (inclusive).
pub const HIGH_PASS_RATIO: f64 = 0.98;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("execution bridge failure: {0}")]
    BridgeFailure(#[from] BridgeError),
    #[error("outcome references unknown instance {0}")]
    UnknownInstanceId(String),
    #[error("ground truth of {instance} faulted on stored case {case}: {detail}")]
    GroundTruthFault { instance: String, case: usize, detail: String },
    #[error(transparent)]
    Package(#[from] PackageError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Numbers within `tolerance`; sequences and maps recursively; everything
/// else by strict equality. Booleans are not numbers.
pub fn deep_compare(a: &Value, b: &Value, tolerance: f64) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            if let (Some(i), Some(j)) = (x.as_i64(), y.as_i64()) {
                return ((i as i128) - (j as i128)).unsigned_abs() as f64 <= tolerance;
            }
            match (x.as_f64(), y.as_f64()) {
                (Some(p), Some(q)) => (p - q).abs() <= tolerance,
                _ => x == y,
            }
        }
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| deep_compare(p, q, tolerance)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, p)| y.get(k).is_some_and(|q| deep_compare(p, q, tolerance)))
        }
        _ => a == b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeClass {
    Success,
    ExecutionError,
    TestFailure,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 3] = [OutcomeClass::Success, OutcomeClass::ExecutionError, OutcomeClass::TestFailure];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::Success => "Success",
            OutcomeClass::ExecutionError => "ExecutionError",
            OutcomeClass::TestFailure => "TestFailure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateProgram {
    pub instance_id: String,
    pub source: String,
    /// Model name, `ground-truth` or `mutant:<name>`.
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureDetail {
    pub case: usize,
    pub inputs: Map<String, Value>,
    pub expected: Option<Value>,
    pub actual: Option<Value>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub instance_id: String,
    pub origin: String,
    pub class: OutcomeClass,
    pub cases_total: usize,
    pub cases_run: usize,
    pub cases_passed: usize,
    pub pass_ratio: f64,
    pub first_failure: Option<FailureDetail>,
    /// Why the candidate is an execution error, if it is one.
    pub fault: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalLimits {
    /// Wall-clock cap for one candidate over all its cases.
    pub per_candidate: Duration,
    /// After this many per-case timeouts the remaining cases are not run.
    pub max_timeouts: usize,
}

impl Default for EvalLimits {
    fn default() -> Self {
        EvalLimits {
            per_candidate: Duration::from_secs(600),
            max_timeouts: 3,
        }
    }
}

fn module_for(prefix: &str, source: &str) -> String {
    format!("{prefix}_{}", hex::encode(&Sha256::digest(source.as_bytes())[..6]))
}

/// Runs every stored case against the candidate. The bridge should be
/// fresh for each candidate.
pub fn evaluate_candidate(
    instance: &BenchmarkInstance,
    candidate: &CandidateProgram,
    bridge: &mut ExecBridge,
) -> Result<Outcome, HarnessError> {
    evaluate_candidate_with(instance, candidate, bridge, EvalLimits::default())
}

pub fn evaluate_candidate_with(
    instance: &BenchmarkInstance,
    candidate: &CandidateProgram,
    bridge: &mut ExecBridge,
    limits: EvalLimits,
) -> Result<Outcome, HarnessError> {
    let m = &instance.manifest;
    let function = m.function.as_str();
    let total = instance.cases.len();
    let mut outcome = Outcome {
        instance_id: m.id.clone(),
        origin: candidate.origin.clone(),
        class: OutcomeClass::ExecutionError,
        cases_total: total,
        cases_run: 0,
        cases_passed: 0,
        pass_ratio: 0.0,
        first_failure: None,
        fault: None,
    };

    // Expected values for library-aware instances come from the ground truth.
    let expected: Vec<Value> = if m.classification == Classification::SelfContained {
        instance.cases.iter().map(|c| c.expected.clone().unwrap_or(Value::Null)).collect()
    } else {
        let gt = module_for("gt", &instance.ground_truth);
        let r = bridge.load(&gt, &instance.ground_truth, None)?;
        if !r.is_ok() {
            return Err(HarnessError::GroundTruthFault {
                instance: m.id.clone(),
                case: 0,
                detail: r.describe(),
            });
        }
        let mut out = Vec::with_capacity(total);
        for (i, c) in instance.cases.iter().enumerate() {
            let r = bridge.call(&gt, function, &c.inputs)?;
            if !r.is_ok() {
                return Err(HarnessError::GroundTruthFault {
                    instance: m.id.clone(),
                    case: i,
                    detail: r.describe(),
                });
            }
            out.push(r.value.unwrap_or(Value::Null));
        }
        out
    };

    let module = module_for("cand", &candidate.source);
    let loaded = bridge.load(&module, &candidate.source, None)?;
    if !loaded.is_ok() {
        outcome.fault = Some(format!("load: {}", loaded.describe()));
        return Ok(outcome);
    }
    let started = Instant::now();
    let mut timeouts = 0;
    for (i, case) in instance.cases.iter().enumerate() {
        if started.elapsed() > limits.per_candidate || timeouts >= limits.max_timeouts {
            outcome.fault.get_or_insert_with(|| "candidate time budget exhausted".into());
            break;
        }
        let r = bridge.call(&module, function, &case.inputs)?;
        outcome.cases_run += 1;
        let detail = |actual: Option<Value>, error: Option<String>| FailureDetail {
            case: i,
            inputs: case.inputs.clone(),
            expected: Some(expected[i].clone()),
            actual,
            error,
        };
        match r.status {
            Status::Ok => {
                let actual = r.value.unwrap_or(Value::Null);
                if deep_compare(&actual, &expected[i], m.tolerance) {
                    outcome.cases_passed += 1;
                } else if outcome.first_failure.is_none() {
                    outcome.first_failure = Some(detail(Some(actual), None));
                }
            }
            // A result that cannot be represented is a wrong answer, not a
            // failure to run.
            Status::Exception if r.error_type.as_deref() == Some("unserializable-result") => {
                if outcome.first_failure.is_none() {
                    outcome.first_failure = Some(detail(None, Some(r.describe())));
                }
            }
            status => {
                if status == Status::Timeout {
                    timeouts += 1;
                }
                outcome.fault.get_or_insert_with(|| format!("case {i}: {}", r.describe()));
                if outcome.first_failure.is_none() {
                    outcome.first_failure = Some(detail(None, Some(r.describe())));
                }
            }
        }
    }
    outcome.pass_ratio = if total == 0 { 0.0 } else { outcome.cases_passed as f64 / total as f64 };
    outcome.class = if outcome.fault.is_some() {
        OutcomeClass::ExecutionError
    } else if outcome.cases_passed == total && total > 0 {
        OutcomeClass::Success
    } else {
        OutcomeClass::TestFailure
    };
    Ok(outcome)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SliceStats {
    pub instances: usize,
    pub successes: usize,
    pub pass_at_1: f64,
}

impl SliceStats {
    fn add(&mut self, success: bool) {
        self.instances += 1;
        self.successes += usize::from(success);
        self.pass_at_1 = self.successes as f64 / self.instances as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: usize,
    pub successes: usize,
    pub pass_at_1: f64,
    /// Instances whose pass ratio is at least 0.98.
    pub high_pass_count: usize,
    pub high_pass_fraction: f64,
    pub distribution: BTreeMap<OutcomeClass, usize>,
    pub by_classification: BTreeMap<String, SliceStats>,
    pub by_difficulty: BTreeMap<String, SliceStats>,
    pub by_target: BTreeMap<String, SliceStats>,
    pub by_origin: BTreeMap<String, SliceStats>,
    pub outcomes: Vec<Outcome>,
    /// Instances whose evaluation hit an infrastructure failure; their
    /// outcomes are withheld.
    pub infrastructure_failures: Vec<String>,
}

/// Subject-language target name used in report slices.
pub const SUBJECT_TARGET: &str = "python";

pub fn aggregate(outcomes: Vec<Outcome>, manifests: &BTreeMap<String, InstanceManifest>) -> Result<EvalReport, HarnessError> {
    let mut r = EvalReport {
        instances: 0,
        successes: 0,
        pass_at_1: 0.0,
        high_pass_count: 0,
        high_pass_fraction: 0.0,
        distribution: OutcomeClass::ALL.iter().map(|c| (*c, 0)).collect(),
        by_classification: BTreeMap::new(),
        by_difficulty: BTreeMap::new(),
        by_target: BTreeMap::new(),
        by_origin: BTreeMap::new(),
        outcomes: Vec::new(),
        infrastructure_failures: Vec::new(),
    };
    for o in &outcomes {
        let m = manifests
            .get(&o.instance_id)
            .ok_or_else(|| HarnessError::UnknownInstanceId(o.instance_id.clone()))?;
        let ok = o.class == OutcomeClass::Success;
        r.instances += 1;
        r.successes += usize::from(ok);
        if o.pass_ratio >= HIGH_PASS_RATIO {
            r.high_pass_count += 1;
        }
        *r.distribution.entry(o.class).or_default() += 1;
        r.by_classification.entry(m.classification.label().to_string()).or_default().add(ok);
        r.by_difficulty.entry(m.difficulty.as_str().to_string()).or_default().add(ok);
        r.by_target.entry(SUBJECT_TARGET.to_string()).or_default().add(ok);
        r.by_origin.entry(o.origin.clone()).or_default().add(ok);
    }
    if r.instances > 0 {
        r.pass_at_1 = r.successes as f64 / r.instances as f64;
        r.high_pass_fraction = r.high_pass_count as f64 / r.instances as f64;
    }
    r.outcomes = outcomes;
    Ok(r)
}

fn pct(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Evaluation report\n");
        let _ = writeln!(s, "| Instances | Successes | Pass@1 | Pass ratio >= 98% |");
        let _ = writeln!(s, "|---|---|---|---|");
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} ({}) |\n",
            self.instances,
            self.successes,
            pct(self.pass_at_1),
            self.high_pass_count,
            pct(self.high_pass_fraction)
        );
        let _ = writeln!(s, "## Outcome distribution\n");
        let _ = writeln!(s, "| Outcome | Count | Share |");
        let _ = writeln!(s, "|---|---|---|");
        for (c, n) in &self.distribution {
            let share = if self.instances == 0 { 0.0 } else { *n as f64 / self.instances as f64 };
            let _ = writeln!(s, "| {} | {} | {} |", c.as_str(), n, pct(share));
        }
        for (title, slice) in [
            ("Classification", &self.by_classification),
            ("Difficulty", &self.by_difficulty),
            ("Target", &self.by_target),
            ("Candidate origin", &self.by_origin),
        ] {
            let _ = writeln!(s, "\n## Pass@1 by {}\n", title.to_lowercase());
            let _ = writeln!(s, "| {title} | Instances | Successes | Pass@1 |");
            let _ = writeln!(s, "|---|---|---|---|");
            for (k, v) in slice {
                let _ = writeln!(s, "| {k} | {} | {} | {} |", v.instances, v.successes, pct(v.pass_at_1));
            }
        }
        let failing: Vec<&Outcome> = self.outcomes.iter().filter(|o| o.class != OutcomeClass::Success).collect();
        if !failing.is_empty() {
            let _ = writeln!(s, "\n## Non-passing instances\n");
            let _ = writeln!(s, "| Instance | Origin | Outcome | Passed | Detail |");
            let _ = writeln!(s, "|---|---|---|---|---|");
            for o in failing {
                let detail = o
                    .fault
                    .clone()
                    .or_else(|| o.first_failure.as_ref().map(|f| format!("first failing case {}", f.case)))
                    .unwrap_or_default()
                    .replace('|', "\\|")
                    .replace('\n', " ");
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {}/{} | {} |",
                    o.instance_id,
                    o.origin,
                    o.class.as_str(),
                    o.cases_passed,
                    o.cases_total,
                    detail
                );
            }
        }
        if !self.infrastructure_failures.is_empty() {
            let _ = writeln!(s, "\n## Infrastructure failures\n");
            for f in &self.infrastructure_failures {
                let _ = writeln!(s, "- {f}");
            }
        }
        s
    }

    /// Writes `report.json` and `report.md` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        let io = |path: PathBuf| move |source| HarnessError::Io { path, source };
        std::fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        let j = dir.join("report.json");
        std::fs::write(&j, self.to_json()).map_err(io(j.clone()))?;
        let md = dir.join("report.md");
        std::fs::write(&md, self.to_markdown()).map_err(io(md.clone()))?;
        Ok(())
    }
}

/// Instance directories under `root`, sorted by id.
pub fn instance_dirs(root: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let rd = std::fs::read_dir(root).map_err(|source| HarnessError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = rd
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Evaluates `<candidates>/<id>.py` against every instance under
/// `instances`. A missing candidate file counts as an execution error.
pub fn evaluate_dir(
    instances: &Path,
    candidates: &Path,
    origin: &str,
    config: &BridgeConfig,
    exec: Exec,
) -> Result<EvalReport, HarnessError> {
    let dirs = instance_dirs(instances)?;
    let loaded: Vec<BenchmarkInstance> = dirs.iter().map(|d| BenchmarkInstance::load(d)).collect::<Result<_, _>>()?;
    let results = par::map(exec, &loaded, |inst| -> Result<Outcome, String> {
        let path = candidates.join(format!("{}.py", inst.manifest.id));
        let Ok(source) = std::fs::read_to_string(&path) else {
            return Ok(Outcome {
                instance_id: inst.manifest.id.clone(),
                origin: origin.to_string(),
                class: OutcomeClass::ExecutionError,
                cases_total: inst.cases.len(),
                cases_run: 0,
                cases_passed: 0,
                pass_ratio: 0.0,
                first_failure: None,
                fault: Some("no candidate file".into()),
            });
        };
        let cand = CandidateProgram {
            instance_id: inst.manifest.id.clone(),
            source,
            origin: origin.to_string(),
        };
        let mut bridge = ExecBridge::spawn(config.clone()).map_err(|e| format!("{}: {e}", inst.manifest.id))?;
        let out = evaluate_candidate(inst, &cand, &mut bridge).map_err(|e| format!("{}: {e}", inst.manifest.id));
        let _ = bridge.shutdown();
        out
    });
    let manifests: BTreeMap<String, InstanceManifest> = loaded.iter().map(|i| (i.manifest.id.clone(), i.manifest.clone())).collect();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push(e),
        }
    }
    let mut report = aggregate(outcomes, &manifests)?;
    report.infrastructure_failures = failures;
    Ok(report)
}
