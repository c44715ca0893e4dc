//! Instance assembly: instruction text, emitted runners, on-disk layout,
//! layout validation and the construction-time dry run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bridge::ExecBridge;
use crate::flow::normalized_hash;
use crate::harness::{evaluate_candidate, CandidateProgram, HarnessError, Outcome, OutcomeClass, DEFAULT_TOLERANCE};
use crate::judge::{normalize_docstring, Difficulty, DifficultyLabel, JudgeClient};
use crate::scopes::{AllowList, Classification};
use crate::synth::{cases_json, ground_truth_source, CoverageReport, TestCase, TestSuite};
use crate::syntax::{FunctionRecord, ParamKind, Provenance};

pub const TODO_MARKER: &str = "# TODO: Implement this function";
pub const FLAG_UNREFINED: &str = "unrefined";
pub const FLAG_NO_DOCSTRING: &str = "no-original-docstring";
pub const FLAG_RAISES_MISMATCH: &str = "docstring-raises-without-raise";

#[derive(Debug, Error)]
pub enum PackageError {
    #[error("no runner template for {0}")]
    TemplateUnavailable(String),
    #[error("instance layout problem in {dir}: {problems:?}")]
    InvalidLayout { dir: PathBuf, problems: Vec<String> },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("runner {target} could not be executed: {reason}")]
    RunnerFailed { target: String, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PackageError + '_ {
    move |source| PackageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---- instructions ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub directive: String,
    /// Imports (library-aware only), signature, docstring and placeholder body.
    pub signature_block: String,
    pub docstring: String,
    pub classification: Classification,
    pub libraries: Vec<String>,
    pub refined: bool,
    pub flags: Vec<String>,
    pub transcript: Option<String>,
}

impl Instruction {
    /// Contents of `instruction.md`.
    pub fn render(&self) -> String {
        format!("{}\n\n```python\n{}```\n", self.directive, self.signature_block)
    }
}

fn directive(cls: Classification, libraries: &[String]) -> String {
    match cls {
        Classification::SelfContained => "Implement the Python function below. Use only built-in language features and \
             do not import any modules. Keep the name and parameters unchanged and replace the placeholder body."
            .to_string(),
        _ => format!(
            "Implement the Python function below. Besides built-in language features you may use only these \
             libraries: {}. Keep the name and parameters unchanged and replace the placeholder body.",
            libraries.join(", ")
        ),
    }
}

/// Rewrites `typing` generics to builtin spellings for portable instructions.
fn conceptual_types(signature: &str) -> String {
    let mut s = signature.replace("typing.", "");
    for (from, to) in [("List[", "list["), ("Dict[", "dict["), ("Tuple[", "tuple["), ("Set[", "set[")] {
        s = s.replace(from, to);
    }
    s
}

/// Section header line index of `Examples` in a normalized docstring.
fn examples_section(doc: &str) -> Option<(usize, usize)> {
    let lines: Vec<&str> = doc.lines().collect();
    let start = lines.iter().position(|l| {
        let t = l.trim().trim_start_matches('#').trim();
        t.eq_ignore_ascii_case("examples:") || t.eq_ignore_ascii_case("examples") || t.eq_ignore_ascii_case("example:")
    })?;
    let indent = lines[start].len() - lines[start].trim_start().len();
    let mut end = start + 1;
    while end < lines.len() {
        let l = lines[end];
        let ind = l.len() - l.trim_start().len();
        if !l.trim().is_empty() && ind <= indent && l.trim_end().ends_with(':') {
            break;
        }
        end += 1;
    }
    Some((start, end))
}

/// Keeps an original Examples section verbatim and removes invented ones.
pub fn reconcile_examples(original: Option<&str>, refined: &str) -> String {
    let refined_lines: Vec<&str> = refined.lines().collect();
    let orig_section = original.and_then(|o| examples_section(o).map(|(s, e)| (o, s, e)));
    let stripped: Vec<&str> = match examples_section(refined) {
        Some((s, e)) => refined_lines[..s].iter().chain(&refined_lines[e..]).copied().collect(),
        None => refined_lines.clone(),
    };
    let mut out: Vec<String> = stripped.iter().map(|l| l.to_string()).collect();
    while out.last().is_some_and(|l| l.trim().is_empty()) {
        out.pop();
    }
    if let Some((o, s, e)) = orig_section {
        let section: Vec<&str> = o.lines().collect::<Vec<_>>()[s..e].to_vec();
        let mut section: Vec<String> = section.iter().map(|l| l.to_string()).collect();
        while section.last().is_some_and(|l| l.trim().is_empty()) {
            section.pop();
        }
        if !out.is_empty() {
            out.push(String::new());
        }
        out.extend(section);
    }
    out.join("\n")
}

fn documents_raises(doc: &str) -> bool {
    doc.lines().any(|l| {
        let t = l.trim();
        t.eq_ignore_ascii_case("raises:") || t.eq_ignore_ascii_case("raises")
    })
}

fn body_raises(function: &FunctionRecord) -> bool {
    let tree = &function.syntax;
    function
        .body_node()
        .is_some_and(|b| tree.descendants(b).into_iter().any(|n| tree.kind(n) == "raise_statement"))
}

fn contract_from_signature(function: &FunctionRecord) -> String {
    let params: Vec<String> = function
        .params
        .iter()
        .filter(|p| !matches!(p.kind, ParamKind::VarPositional | ParamKind::VarKeyword))
        .map(|p| match &p.hint {
            Some(h) => format!("    {} ({h}): input value.", p.name),
            None => format!("    {}: input value.", p.name),
        })
        .collect();
    let mut s = format!("Compute the result of `{}` from its arguments.", function.name);
    if !params.is_empty() {
        s.push_str("\n\nArgs:\n");
        s.push_str(&params.join("\n"));
    }
    if let Some(r) = &function.return_hint {
        s.push_str(&format!("\n\nReturns:\n    {r}"));
    }
    s
}

fn indent_docstring(doc: &str) -> String {
    let mut s = String::from("    \"\"\"\n");
    for line in doc.replace("\"\"\"", "\\\"\\\"\\\"").lines() {
        if line.trim().is_empty() {
            s.push('\n');
        } else {
            s.push_str("    ");
            s.push_str(line);
            s.push('\n');
        }
    }
    s.push_str("    \"\"\"\n");
    s
}

/// Import lines the ground truth needs, in source order.
fn used_imports(function: &FunctionRecord) -> Vec<String> {
    ground_truth_source(function)
        .lines()
        .take_while(|l| l.starts_with("import ") || l.starts_with("from "))
        .map(str::to_string)
        .collect()
}

fn imported_roots(lines: &[String]) -> BTreeSet<String> {
    lines
        .iter()
        .filter_map(|l| {
            let rest = l.strip_prefix("from ").or_else(|| l.strip_prefix("import "))?;
            let module = rest.split([' ', ',']).next()?;
            module.split('.').next().map(str::to_string)
        })
        .collect()
}

/// Builds the instruction, refining the docstring through the judge.
pub fn generate_instruction(function: &FunctionRecord, cls: Classification, client: Option<&JudgeClient>) -> Instruction {
    let mut flags = Vec::new();
    let original = function.docstring.as_deref().map(normalize_docstring).filter(|d| !d.is_empty());
    let refined = client.map(|c| c.refine_docstring(function, cls));
    let (docstring, refined_ok, transcript) = match (refined, &original) {
        (Some(Ok(r)), _) if !r.text.trim().is_empty() => {
            (reconcile_examples(original.as_deref(), &normalize_docstring(&r.text)), true, Some(r.transcript))
        }
        (r, Some(o)) => {
            flags.push(FLAG_UNREFINED.to_string());
            (o.clone(), false, r.and_then(Result::ok).map(|r| r.transcript))
        }
        (r, None) => {
            flags.push(FLAG_UNREFINED.to_string());
            (contract_from_signature(function), false, r.and_then(Result::ok).map(|r| r.transcript))
        }
    };
    if original.is_none() {
        flags.push(FLAG_NO_DOCSTRING.to_string());
    }
    if original.as_deref().is_some_and(documents_raises) && !body_raises(function) {
        flags.push(FLAG_RAISES_MISMATCH.to_string());
    }
    let imports = if cls == Classification::SelfContained { Vec::new() } else { used_imports(function) };
    let libraries: Vec<String> = imported_roots(&imports).into_iter().collect();
    let signature = match cls {
        Classification::SelfContained => conceptual_types(&function.signature()),
        _ => function.signature(),
    };
    let mut block = String::new();
    for i in &imports {
        block.push_str(i);
        block.push('\n');
    }
    if !imports.is_empty() {
        block.push('\n');
    }
    block.push_str(&signature);
    block.push('\n');
    block.push_str(&indent_docstring(&docstring));
    block.push_str("    ");
    block.push_str(TODO_MARKER);
    block.push_str("\n    pass\n");
    Instruction {
        directive: directive(cls, &libraries),
        signature_block: block,
        docstring,
        classification: cls,
        libraries,
        refined: refined_ok,
        flags,
        transcript,
    }
}

/// Portable instructions import nothing; library-aware ones import only
/// allow-listed libraries. Returns the problems found.
pub fn instruction_hygiene(text: &str, cls: Classification, allow: &AllowList) -> Vec<String> {
    let code: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| l.starts_with("import ") || l.starts_with("from "))
        .map(str::to_string)
        .collect();
    let roots = imported_roots(&code);
    let mut problems = Vec::new();
    match cls {
        Classification::SelfContained => {
            for r in roots {
                problems.push(format!("portable instruction imports `{r}`"));
            }
            if let Some(sig) = text.lines().find(|l| l.trim_start().starts_with("def ")) {
                for lib in allow.libraries() {
                    if sig.contains(&format!("{lib}.")) {
                        problems.push(format!("portable signature names library `{lib}`"));
                    }
                }
            }
        }
        _ => {
            for r in roots {
                if !allow.contains(&r) {
                    problems.push(format!("instruction imports `{r}`, which is not allow-listed"));
                }
            }
        }
    }
    problems
}

// ---- runners ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunnerTarget {
    Python,
    JavaScript,
    TypeScript,
}

impl RunnerTarget {
    pub fn dir_name(self) -> &'static str {
        match self {
            RunnerTarget::Python => "python",
            RunnerTarget::JavaScript => "javascript",
            RunnerTarget::TypeScript => "typescript",
        }
    }

    pub fn entry_file(self) -> &'static str {
        match self {
            RunnerTarget::Python => "run_tests.py",
            RunnerTarget::JavaScript => "run_tests.js",
            RunnerTarget::TypeScript => "run_tests.ts",
        }
    }

    pub fn from_dir_name(s: &str) -> Option<Self> {
        [RunnerTarget::Python, RunnerTarget::JavaScript, RunnerTarget::TypeScript]
            .into_iter()
            .find(|t| t.dir_name() == s)
    }

    /// Targets emitted for a classification; portable script targets are
    /// only meaningful for self-contained functions.
    pub fn for_classification(cls: Classification) -> Vec<RunnerTarget> {
        match cls {
            Classification::SelfContained => vec![RunnerTarget::Python, RunnerTarget::JavaScript, RunnerTarget::TypeScript],
            _ => vec![RunnerTarget::Python],
        }
    }

    pub fn is_subject_language(self) -> bool {
        self == RunnerTarget::Python
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerArtifact {
    pub target: RunnerTarget,
    /// (file name, contents) inside `runners/<target>/`.
    pub files: Vec<(String, String)>,
    pub tolerance: f64,
}

const PY_RUNNER: &str = include_str!("../templates/runners/python/run_tests.py");
const PY_HELPER: &str = include_str!("../templates/runners/python/helper.py");
const JS_RUNNER: &str = include_str!("../templates/runners/javascript/run_tests.js");
const TS_RUNNER: &str = include_str!("../templates/runners/typescript/run_tests.ts");

pub struct RunnerInputs<'a> {
    pub function: &'a str,
    pub params: Vec<String>,
    pub classification: Classification,
    pub ground_truth: &'a str,
    pub tolerance: f64,
}

pub fn emit_runner(parts: &RunnerInputs<'_>, target: RunnerTarget) -> Result<RunnerArtifact, PackageError> {
    let tol = format!("{:?}", parts.tolerance);
    let params_json = serde_json::to_string(&parts.params).expect("names serialize");
    let sc = parts.classification == Classification::SelfContained;
    let fill = |t: &str| {
        t.replace("{{function}}", parts.function)
            .replace("{{classification}}", parts.classification.label())
            .replace("{{tolerance}}", &tol)
            .replace("{{params_json}}", &params_json)
    };
    let files = match target {
        RunnerTarget::Python => {
            let (block, expected) = if sc {
                (String::new(), "case[\"Expected\"]")
            } else {
                (
                    format!(
                        "\n# Ground truth, used to compute expected outputs at run time.\n{}\nground_truth = {}\n",
                        parts.ground_truth.trim_end(),
                        parts.function
                    ),
                    "to_plain(ground_truth(**copy.deepcopy(inputs)))",
                )
            };
            let runner = fill(PY_RUNNER)
                .replace("{{expected_expr}}", expected)
                .replace("{{ground_truth_block}}", &block);
            vec![("run_tests.py".to_string(), runner), ("helper.py".to_string(), PY_HELPER.to_string())]
        }
        RunnerTarget::JavaScript | RunnerTarget::TypeScript if !sc => {
            return Err(PackageError::TemplateUnavailable(format!(
                "{} runner for library-aware instances",
                target.dir_name()
            )))
        }
        RunnerTarget::JavaScript => vec![("run_tests.js".to_string(), fill(JS_RUNNER))],
        RunnerTarget::TypeScript => vec![("run_tests.ts".to_string(), fill(TS_RUNNER))],
    };
    Ok(RunnerArtifact {
        target,
        files,
        tolerance: parts.tolerance,
    })
}

// ---- instances ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub cases: usize,
    pub budget_used: usize,
    pub duplicates: usize,
    pub invalid_inputs: usize,
    pub unportable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub id: String,
    pub function: String,
    pub qualified_name: String,
    pub classification: Classification,
    pub difficulty: Difficulty,
    pub difficulty_defaulted: bool,
    pub provenance: Provenance,
    pub libraries: Vec<String>,
    pub parameters: Vec<String>,
    pub coverage: CoverageReport,
    pub counts: CaseCounts,
    pub seed: u64,
    pub shortfall: Option<String>,
    pub tolerance: f64,
    pub runners: Vec<RunnerTarget>,
    pub instruction_refined: bool,
    pub flags: Vec<String>,
    pub transcripts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub manifest: InstanceManifest,
    pub instruction: String,
    pub ground_truth: String,
    pub cases: Vec<TestCase>,
    pub runners: Vec<RunnerArtifact>,
}

/// Short content hash of the qualified name and the normalized ground truth.
pub fn instance_id(function: &FunctionRecord) -> String {
    let mut h = Sha256::new();
    h.update(function.qualified_name.as_bytes());
    h.update([0]);
    h.update(normalized_hash(function).as_bytes());
    hex::encode(&h.finalize()[..6])
}

pub struct InstanceParts<'a> {
    pub function: &'a FunctionRecord,
    pub classification: Classification,
    pub difficulty: &'a DifficultyLabel,
    pub instruction: &'a Instruction,
    pub suite: &'a TestSuite,
    pub coverage: &'a CoverageReport,
    pub transcripts: Vec<String>,
    pub tolerance: f64,
}

pub fn assemble(parts: &InstanceParts<'_>) -> Result<BenchmarkInstance, PackageError> {
    let f = parts.function;
    let ground_truth = ground_truth_source(f);
    let params: Vec<String> = f
        .params
        .iter()
        .filter(|p| !matches!(p.kind, ParamKind::VarPositional | ParamKind::VarKeyword))
        .map(|p| p.name.clone())
        .collect();
    let inputs = RunnerInputs {
        function: &f.name,
        params: params.clone(),
        classification: parts.classification,
        ground_truth: &ground_truth,
        tolerance: parts.tolerance,
    };
    let runners = RunnerTarget::for_classification(parts.classification)
        .into_iter()
        .map(|t| emit_runner(&inputs, t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut flags = parts.instruction.flags.clone();
    if parts.difficulty.defaulted {
        flags.push("difficulty-defaulted".into());
    }
    let manifest = InstanceManifest {
        id: instance_id(f),
        function: f.name.clone(),
        qualified_name: f.qualified_name.clone(),
        classification: parts.classification,
        difficulty: parts.difficulty.level,
        difficulty_defaulted: parts.difficulty.defaulted,
        provenance: f.provenance.clone(),
        libraries: parts.instruction.libraries.clone(),
        parameters: params,
        coverage: parts.coverage.clone(),
        counts: CaseCounts {
            cases: parts.suite.cases.len(),
            budget_used: parts.suite.budget_used,
            duplicates: parts.suite.discards.duplicates,
            invalid_inputs: parts.suite.discards.error_total(),
            unportable: parts.suite.discards.unportable,
        },
        seed: parts.suite.seed,
        shortfall: parts.suite.shortfall.clone(),
        tolerance: parts.tolerance,
        runners: runners.iter().map(|r| r.target).collect(),
        instruction_refined: parts.instruction.refined,
        flags,
        transcripts: parts.transcripts.clone(),
    };
    Ok(BenchmarkInstance {
        manifest,
        instruction: parts.instruction.render(),
        ground_truth,
        cases: parts.suite.cases.clone(),
        runners,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), PackageError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

impl BenchmarkInstance {
    pub fn manifest_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Writes `<root>/<id>/…`, replacing any previous copy, and returns the
    /// instance directory.
    pub fn write(&self, root: &Path) -> Result<PathBuf, PackageError> {
        let dir = root.join(&self.manifest.id);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        write_file(&dir.join("instruction.md"), &self.instruction)?;
        write_file(&dir.join("ground_truth.py"), &self.ground_truth)?;
        write_file(&dir.join("test_cases").join("test_cases.json"), &cases_json(&self.cases))?;
        for r in &self.runners {
            for (name, body) in &r.files {
                write_file(&dir.join("runners").join(r.target.dir_name()).join(name), body)?;
            }
        }
        write_file(&dir.join("manifest.json"), &self.manifest_json())?;
        Ok(dir)
    }

    pub fn load(dir: &Path) -> Result<Self, PackageError> {
        let read = |rel: &str| {
            let p = dir.join(rel);
            std::fs::read_to_string(&p).map_err(io_err(&p))
        };
        let malformed = |rel: &str, e: serde_json::Error| PackageError::Malformed {
            path: dir.join(rel),
            reason: e.to_string(),
        };
        let manifest: InstanceManifest = serde_json::from_str(&read("manifest.json")?).map_err(|e| malformed("manifest.json", e))?;
        let cases: Vec<TestCase> =
            serde_json::from_str(&read("test_cases/test_cases.json")?).map_err(|e| malformed("test_cases/test_cases.json", e))?;
        let mut runners = Vec::new();
        for t in &manifest.runners {
            let rdir = dir.join("runners").join(t.dir_name());
            let mut files = Vec::new();
            let mut entries: Vec<PathBuf> = std::fs::read_dir(&rdir)
                .map_err(io_err(&rdir))?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            for p in entries {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
                files.push((name, std::fs::read_to_string(&p).map_err(io_err(&p))?));
            }
            runners.push(RunnerArtifact {
                target: *t,
                files,
                tolerance: manifest.tolerance,
            });
        }
        Ok(BenchmarkInstance {
            instruction: read("instruction.md")?,
            ground_truth: read("ground_truth.py")?,
            manifest,
            cases,
            runners,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dir: PathBuf,
    pub id: Option<String>,
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Re-checks an instance directory from disk, independently of how it was
/// written.
pub fn validate_instance(dir: &Path, allow: &AllowList) -> ValidationReport {
    let mut problems = Vec::new();
    for rel in ["instruction.md", "ground_truth.py", "test_cases/test_cases.json", "manifest.json"] {
        if !dir.join(rel).is_file() {
            problems.push(format!("missing {rel}"));
        }
    }
    let mut report = ValidationReport {
        dir: dir.to_path_buf(),
        id: None,
        problems: Vec::new(),
    };
    let manifest: Option<InstanceManifest> = std::fs::read_to_string(dir.join("manifest.json"))
        .ok()
        .and_then(|s| match serde_json::from_str(&s) {
            Ok(m) => Some(m),
            Err(e) => {
                problems.push(format!("manifest.json does not parse: {e}"));
                None
            }
        });
    if let Some(m) = &manifest {
        report.id = Some(m.id.clone());
        if dir.file_name().and_then(|n| n.to_str()) != Some(m.id.as_str()) {
            problems.push(format!("directory name differs from id {}", m.id));
        }
        if m.runners.is_empty() {
            problems.push("no runners listed".into());
        }
        for t in &m.runners {
            let entry = dir.join("runners").join(t.dir_name()).join(t.entry_file());
            if !entry.is_file() {
                problems.push(format!("missing runner {}", entry.strip_prefix(dir).unwrap_or(&entry).display()));
            }
        }
        if !m.runners.iter().any(|t| t.is_subject_language()) {
            problems.push("no subject-language runner".into());
        }
        if m.coverage.covered.iter().any(|c| !m.coverage.total.contains(c)) {
            problems.push("coverage lists ids outside the total".into());
        }
        match std::fs::read_to_string(dir.join("test_cases/test_cases.json"))
            .ok()
            .map(|s| serde_json::from_str::<Vec<TestCase>>(&s))
        {
            Some(Ok(cases)) => {
                if cases.is_empty() {
                    problems.push("suite is empty".into());
                }
                if cases.len() != m.counts.cases {
                    problems.push(format!("suite holds {} cases, manifest says {}", cases.len(), m.counts.cases));
                }
                let sc = m.classification == Classification::SelfContained;
                if sc && cases.iter().any(|c| c.expected.is_none()) {
                    problems.push("portable case without Expected".into());
                }
                if !sc && cases.iter().any(|c| c.expected.is_some()) {
                    problems.push("library-aware case stores Expected".into());
                }
            }
            Some(Err(e)) => problems.push(format!("test_cases.json does not parse: {e}")),
            None => {}
        }
        if let Ok(text) = std::fs::read_to_string(dir.join("instruction.md")) {
            if !text.contains(TODO_MARKER) {
                problems.push("instruction lacks the placeholder marker".into());
            }
            if !text.contains(&format!("def {}(", m.function)) {
                problems.push("instruction lacks the function signature".into());
            }
            problems.extend(instruction_hygiene(&text, m.classification, allow));
        }
    }
    report.problems = problems;
    report
}

// ---- dry run ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerSummary {
    pub target: RunnerTarget,
    pub exit_code: Option<i32>,
    pub total: usize,
    pub passed: usize,
    pub error: Option<String>,
}

impl RunnerSummary {
    pub fn all_passed(&self) -> bool {
        self.exit_code == Some(0) && self.error.is_none() && self.total > 0 && self.passed == self.total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DryRunReport {
    pub instance_id: String,
    pub runners: Vec<RunnerSummary>,
    pub harness: Outcome,
    pub passed: bool,
}

/// Runs the subject-language runner of the instance in `dir` on
/// `candidate_path` as a subprocess.
pub fn run_python_runner(dir: &Path, candidate_path: &Path, python: &str, timeout: Duration) -> Result<RunnerSummary, PackageError> {
    let dir = &std::path::absolute(dir).map_err(io_err(dir))?;
    let candidate_path = &std::path::absolute(candidate_path).map_err(io_err(candidate_path))?;
    let runner = dir.join("runners").join("python").join("run_tests.py");
    let out = tempfile::NamedTempFile::new().map_err(io_err(dir))?;
    let stdout = out.reopen().map_err(io_err(out.path()))?;
    let failed = |reason: String| PackageError::RunnerFailed {
        target: "python".into(),
        reason,
    };
    let mut child = Command::new(python)
        .arg(&runner)
        .arg(candidate_path)
        .current_dir(dir)
        .env("PYTHONHASHSEED", "0")
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| failed(e.to_string()))?;
    let started = Instant::now();
    let status = loop {
        if let Some(s) = child.try_wait().map_err(|e| failed(e.to_string()))? {
            break Some(s);
        }
        if started.elapsed() > timeout {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    let text = std::fs::read_to_string(out.path()).map_err(io_err(out.path()))?;
    let Some(status) = status else {
        return Ok(RunnerSummary {
            target: RunnerTarget::Python,
            exit_code: None,
            total: 0,
            passed: 0,
            error: Some("runner timed out".into()),
        });
    };
    let last = text.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
    let summary: Value = serde_json::from_str(last).unwrap_or(Value::Null);
    let num = |k: &str| summary.get(k).and_then(Value::as_u64).unwrap_or(0) as usize;
    let error = match summary.get("error") {
        Some(Value::String(e)) => Some(e.clone()),
        Some(Value::Null) => None,
        _ => Some(format!("runner printed no summary (exit {:?})", status.code())),
    };
    Ok(RunnerSummary {
        target: RunnerTarget::Python,
        exit_code: status.code(),
        total: num("total"),
        passed: num("passed"),
        error,
    })
}

/// Installs `candidate` (the ground truth when `None`) and runs it through
/// the subject-language runner and the harness.
pub fn dry_run_with(dir: &Path, candidate: Option<&str>, bridge: &mut ExecBridge) -> Result<DryRunReport, PackageError> {
    let instance = BenchmarkInstance::load(dir)?;
    let source = candidate.unwrap_or(&instance.ground_truth).to_string();
    let tmp = tempfile::tempdir().map_err(io_err(dir))?;
    let cand_path = tmp.path().join("candidate.py");
    std::fs::write(&cand_path, &source).map_err(io_err(&cand_path))?;
    let python = bridge.config().python.clone();
    let budget = bridge.config().call_timeout * 4 + Duration::from_secs(60 + instance.cases.len() as u64 / 10);
    let mut runners = Vec::new();
    if instance.runners.iter().any(|r| r.target.is_subject_language()) {
        runners.push(run_python_runner(dir, &cand_path, &python, budget)?);
    }
    let cand = CandidateProgram {
        instance_id: instance.manifest.id.clone(),
        source,
        origin: if candidate.is_some() { "candidate".into() } else { "ground-truth".into() },
    };
    let harness = evaluate_candidate(&instance, &cand, bridge).map_err(|e| match e {
        HarnessError::Package(p) => p,
        other => PackageError::RunnerFailed {
            target: "harness".into(),
            reason: other.to_string(),
        },
    })?;
    let passed = !runners.is_empty() && runners.iter().all(RunnerSummary::all_passed) && harness.class == OutcomeClass::Success;
    Ok(DryRunReport {
        instance_id: instance.manifest.id.clone(),
        runners,
        harness,
        passed,
    })
}

pub fn dry_run(dir: &Path, bridge: &mut ExecBridge) -> Result<DryRunReport, PackageError> {
    dry_run_with(dir, None, bridge)
}

pub fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceFile;
    use crate::syntax::{extract_functions, parse_source};

    fn record(src: &str) -> FunctionRecord {
        let f = SourceFile::new("m.py", src.as_bytes().to_vec(), None, None);
        extract_functions(&parse_source(&f).unwrap(), &f).records.remove(0)
    }

    #[test]
    fn examples_are_kept_verbatim_and_never_invented() {
        let orig = "Merge.\n\nExamples:\n    Input: a = 1\n    Output: 1";
        let refined = "Merge two values.\n\nExamples:\n    Input: a = 2\n    Output: 2";
        let r = reconcile_examples(Some(orig), refined);
        assert!(r.contains("Input: a = 1") && !r.contains("a = 2"), "{r}");
        assert!(r.starts_with("Merge two values."));
        let r = reconcile_examples(Some("Plain."), refined);
        assert!(!r.contains("Examples"), "{r}");
    }

    #[test]
    fn instruction_without_docstring_is_flagged() {
        let f = record("def add(a: int, b: int) -> int:\n    return a + b if a > 0 else b\n");
        let ins = generate_instruction(&f, Classification::SelfContained, None);
        assert!(ins.flags.contains(&FLAG_UNREFINED.to_string()));
        assert!(ins.flags.contains(&FLAG_NO_DOCSTRING.to_string()));
        assert!(ins.render().contains(TODO_MARKER));
        assert!(ins.docstring.contains("Args:"));
    }

    #[test]
    fn wsc_instruction_imports_allowed_library() {
        let f = record("from collections import Counter\nimport os\n\ndef calc(text: str, n: int) -> float:\n    \"\"\"Ratio.\n\n    Raises:\n        ValueError: If n <= 0\n    \"\"\"\n    c = Counter(text.split())\n    return len(c) / n if n else 0\n");
        let ins = generate_instruction(&f, Classification::WeaklySelfContained, Some(&JudgeClient::stub()));
        let text = ins.render();
        assert!(text.contains("from collections import Counter"), "{text}");
        assert!(!text.contains("import os"));
        assert_eq!(ins.libraries, vec!["collections".to_string()]);
        assert!(ins.flags.contains(&FLAG_RAISES_MISMATCH.to_string()));
        let allow = AllowList::default_list();
        assert!(instruction_hygiene(&text, Classification::WeaklySelfContained, &allow).is_empty());
        assert!(!instruction_hygiene(&text, Classification::SelfContained, &allow).is_empty());
    }

    #[test]
    fn runner_templates_fill_every_placeholder() {
        let gt = "def f(a):\n    return a\n";
        for cls in [Classification::SelfContained, Classification::WeaklySelfContained] {
            let inputs = RunnerInputs {
                function: "f",
                params: vec!["a".into()],
                classification: cls,
                ground_truth: gt,
                tolerance: 1e-6,
            };
            for t in RunnerTarget::for_classification(cls) {
                let r = emit_runner(&inputs, t).unwrap();
                for (_, body) in &r.files {
                    assert!(!body.contains("{{"), "{t:?}: {body}");
                }
            }
        }
        let inputs = RunnerInputs {
            function: "f",
            params: vec![],
            classification: Classification::WeaklySelfContained,
            ground_truth: gt,
            tolerance: 1e-6,
        };
        assert!(matches!(emit_runner(&inputs, RunnerTarget::JavaScript), Err(PackageError::TemplateUnavailable(_))));
    }

    #[test]
    fn conceptual_type_rewrite() {
        assert_eq!(conceptual_types("def f(x: List[int]) -> typing.Dict[str, int]:"), "def f(x: list[int]) -> dict[str, int]:");
    }
}
