//! LLM-as-judge client: suitability, difficulty and docstring refinement.
//!
//! Answers must be a single JSON object (a surrounding code fence is
//! tolerated). A malformed answer gets one repair round-trip; if that also
//! fails the caller receives the documented fallback. Every exchange is kept
//! as a transcript and, when a directory is configured, written to disk under
//! a content-derived name.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::flow::{build_cfg_for, cyclomatic};
use crate::scopes::Classification;
use crate::syntax::{FunctionRecord, SyntaxTree};

pub const PROTOCOL_FAILURE: &str = "judge-protocol-failure";

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("judge provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("no prompt template for {0}")]
    TemplateMissing(String),
    #[error("cannot persist transcript: {0}")]
    Transcript(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeTask {
    Suitability,
    Difficulty,
    Instruction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.into(),
            content: content.into(),
        }
    }
}

/// What a provider sees. `subject` is the function source; remote providers
/// only read `messages`.
#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub task: JudgeTask,
    pub classification: Classification,
    pub subject: &'a str,
    pub docstring: Option<&'a str>,
    pub messages: &'a [ChatMessage],
}

pub trait ChatProvider: Send + Sync {
    fn name(&self) -> String;
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, JudgeError>;
}

/// Offline rule-based judge.
///
/// Suitability: unsuitable when CC < 2, the name starts with `get_`/`set_`,
/// or there are no parameters. Difficulty: CC <= 3 Easy, 4..=7 Medium, else
/// Hard. Instruction: echoes the original docstring, dedented.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubProvider;

struct SubjectFacts {
    name: String,
    params: usize,
    cc: Option<u32>,
}

fn subject_facts(source: &str) -> Option<SubjectFacts> {
    let tree = SyntaxTree::parse(source).ok()?;
    let def = tree
        .descendants(tree.root())
        .into_iter()
        .find(|&n| tree.kind(n) == "function_definition")?;
    let name = tree.text(tree.child_by_field(def, "name")?).to_string();
    let params = tree
        .child_by_field(def, "parameters")
        .map(|p| {
            tree.named_children(p)
                .filter(|&c| !matches!(tree.kind(c), "keyword_separator" | "positional_separator"))
                .count()
        })
        .unwrap_or(0);
    let cc = build_cfg_for(&tree, def).ok().and_then(|g| cyclomatic(&g).ok());
    Some(SubjectFacts { name, params, cc })
}

impl ChatProvider for StubProvider {
    fn name(&self) -> String {
        "stub".into()
    }

    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, JudgeError> {
        let facts = subject_facts(request.subject);
        let answer = match request.task {
            JudgeTask::Suitability => match facts {
                None => json!({"Suitable": false, "Reason": "stub: source does not contain a function"}),
                Some(f) => {
                    let reason = if f.name.starts_with("get_") || f.name.starts_with("set_") {
                        Some("accessor-style name".to_string())
                    } else if f.params == 0 {
                        Some("no parameters to generate inputs for".to_string())
                    } else {
                        match f.cc {
                            Some(cc) if cc < 2 => Some(format!("cyclomatic complexity {cc} is below 2")),
                            None => Some("control flow could not be analysed".to_string()),
                            _ => None,
                        }
                    };
                    match reason {
                        Some(r) => json!({"Suitable": false, "Reason": format!("stub: {r}")}),
                        None => json!({"Suitable": true, "Reason": format!("stub: CC={}", f.cc.unwrap_or(0))}),
                    }
                }
            },
            JudgeTask::Difficulty => {
                let cc = facts.and_then(|f| f.cc).unwrap_or(1);
                json!({"Difficulty": stub_difficulty(cc).as_str()})
            }
            JudgeTask::Instruction => {
                json!({"Docstring": request.docstring.map(normalize_docstring).unwrap_or_default()})
            }
        };
        Ok(answer.to_string())
    }
}

pub fn stub_difficulty(cc: u32) -> Difficulty {
    match cc {
        0..=3 => Difficulty::Easy,
        4..=7 => Difficulty::Medium,
        _ => Difficulty::Hard,
    }
}

/// Strips the common indentation and surrounding blank lines.
pub fn normalize_docstring(doc: &str) -> String {
    let lines: Vec<&str> = doc.lines().collect();
    let indent = lines
        .iter()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out: Vec<String> = lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                l.trim().to_string()
            } else if l.len() >= indent {
                l[indent..].trim_end().to_string()
            } else {
                l.trim().to_string()
            }
        })
        .collect();
    while out.first().is_some_and(|l| l.is_empty()) {
        out.remove(0);
    }
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    out.join("\n")
}

/// Replays fixed answers in order; for protocol tests.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    answers: Mutex<std::collections::VecDeque<Result<String, String>>>,
}

impl ScriptedProvider {
    pub fn new<I: IntoIterator<Item = Result<String, String>>>(answers: I) -> Self {
        ScriptedProvider {
            answers: Mutex::new(answers.into_iter().collect()),
        }
    }
}

impl ChatProvider for ScriptedProvider {
    fn name(&self) -> String {
        "scripted".into()
    }
    fn complete(&self, _request: &ChatRequest<'_>) -> Result<String, JudgeError> {
        match self.answers.lock().expect("lock").pop_front() {
            Some(Ok(s)) => Ok(s),
            Some(Err(e)) => Err(JudgeError::ProviderUnavailable(e)),
            None => Err(JudgeError::ProviderUnavailable("script exhausted".into())),
        }
    }
}

/// OpenAI-compatible chat-completion endpoint.
///
/// Environment: `BENCHFORGE_JUDGE_URL` (base URL ending before
/// `/chat/completions`), `BENCHFORGE_JUDGE_MODEL`, `BENCHFORGE_JUDGE_API_KEY`.
pub struct HttpProvider {
    base_url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpProvider {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key,
            agent,
        }
    }

    pub fn from_env(timeout: Duration) -> Result<Self, JudgeError> {
        let url = std::env::var("BENCHFORGE_JUDGE_URL")
            .map_err(|_| JudgeError::ProviderUnavailable("BENCHFORGE_JUDGE_URL is not set".into()))?;
        let model = std::env::var("BENCHFORGE_JUDGE_MODEL")
            .map_err(|_| JudgeError::ProviderUnavailable("BENCHFORGE_JUDGE_MODEL is not set".into()))?;
        Ok(Self::new(url, model, std::env::var("BENCHFORGE_JUDGE_API_KEY").ok(), timeout))
    }
}

impl ChatProvider for HttpProvider {
    fn name(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, JudgeError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": request.messages,
        });
        let mut req = self.agent.post(format!("{}/chat/completions", self.base_url));
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| JudgeError::ProviderUnavailable(e.to_string()))?;
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| JudgeError::ProviderUnavailable(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| JudgeError::ProviderUnavailable(format!("response without message content: {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Templates {
    suitability_sc: String,
    suitability_wsc: String,
    difficulty_sc: String,
    difficulty_wsc: String,
    instruction_sc: String,
    instruction_wsc: String,
    repair: String,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            suitability_sc: include_str!("../templates/judge/suitability_sc.md").into(),
            suitability_wsc: include_str!("../templates/judge/suitability_wsc.md").into(),
            difficulty_sc: include_str!("../templates/judge/difficulty_sc.md").into(),
            difficulty_wsc: include_str!("../templates/judge/difficulty_wsc.md").into(),
            instruction_sc: include_str!("../templates/judge/instruction_sc.md").into(),
            instruction_wsc: include_str!("../templates/judge/instruction_wsc.md").into(),
            repair: include_str!("../templates/judge/repair.md").into(),
        }
    }
}

impl Templates {
    /// Loads templates from `dir`, keeping the bundled text for missing files.
    pub fn from_dir(dir: &Path) -> Result<Self, JudgeError> {
        let mut t = Templates::default();
        let slots: [(&str, &mut String); 7] = [
            ("suitability_sc.md", &mut t.suitability_sc),
            ("suitability_wsc.md", &mut t.suitability_wsc),
            ("difficulty_sc.md", &mut t.difficulty_sc),
            ("difficulty_wsc.md", &mut t.difficulty_wsc),
            ("instruction_sc.md", &mut t.instruction_sc),
            ("instruction_wsc.md", &mut t.instruction_wsc),
            ("repair.md", &mut t.repair),
        ];
        for (file, slot) in slots {
            let p = dir.join(file);
            if p.is_file() {
                *slot = std::fs::read_to_string(&p)?;
            }
        }
        Ok(t)
    }

    fn system(&self, task: JudgeTask, cls: Classification) -> Result<&str, JudgeError> {
        use Classification::*;
        Ok(match (task, cls) {
            (JudgeTask::Suitability, SelfContained) => &self.suitability_sc,
            (JudgeTask::Suitability, WeaklySelfContained) => &self.suitability_wsc,
            (JudgeTask::Difficulty, SelfContained) => &self.difficulty_sc,
            (JudgeTask::Difficulty, WeaklySelfContained) => &self.difficulty_wsc,
            (JudgeTask::Instruction, SelfContained) => &self.instruction_sc,
            (JudgeTask::Instruction, WeaklySelfContained) => &self.instruction_wsc,
            (task, Discard) => return Err(JudgeError::TemplateMissing(format!("{task:?} for discarded functions"))),
        })
    }

    fn repair(&self, last: &str, error: &str, function: &str) -> String {
        self.repair
            .replace("{last_result}", last)
            .replace("{error}", error)
            .replace("{function}", function)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub task: JudgeTask,
    pub function_id: String,
    pub provider: String,
    pub messages: Vec<ChatMessage>,
    pub outcome: String,
}

impl Transcript {
    pub fn id(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("transcript serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub suitable: bool,
    pub reason: String,
    pub transcript: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyLabel {
    pub level: Difficulty,
    /// Set when the judge never produced a usable answer.
    pub defaulted: bool,
    pub transcript: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedDocstring {
    /// Empty when the judge produced nothing usable.
    pub text: String,
    pub transcript: String,
}

/// Bounds the number of provider calls in flight.
struct Gate {
    in_flight: Mutex<usize>,
    cv: Condvar,
    limit: usize,
}

impl Gate {
    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        let mut n = self.in_flight.lock().expect("gate lock");
        while *n >= self.limit {
            n = self.cv.wait(n).expect("gate wait");
        }
        *n += 1;
        drop(n);
        let out = f();
        *self.in_flight.lock().expect("gate lock") -= 1;
        self.cv.notify_one();
        out
    }
}

pub struct JudgeClient {
    provider: Arc<dyn ChatProvider>,
    templates: Templates,
    retry: RetryPolicy,
    transcript_dir: Option<PathBuf>,
    transcripts: Mutex<Vec<Transcript>>,
    gate: Gate,
}

impl JudgeClient {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        JudgeClient {
            provider,
            templates: Templates::default(),
            retry: RetryPolicy::default(),
            transcript_dir: None,
            transcripts: Mutex::new(Vec::new()),
            gate: Gate {
                in_flight: Mutex::new(0),
                cv: Condvar::new(),
                limit: 4,
            },
        }
    }

    pub fn stub() -> Self {
        Self::new(Arc::new(StubProvider))
    }

    pub fn with_templates(mut self, t: Templates) -> Self {
        self.templates = t;
        self
    }
    pub fn with_retry(mut self, r: RetryPolicy) -> Self {
        self.retry = r;
        self
    }
    pub fn with_transcript_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.transcript_dir = Some(dir.into());
        self
    }
    pub fn with_concurrency(mut self, limit: usize) -> Self {
        self.gate.limit = limit.max(1);
        self
    }

    pub fn provider_name(&self) -> String {
        self.provider.name()
    }

    pub fn transcripts(&self) -> Vec<Transcript> {
        self.transcripts.lock().expect("lock").clone()
    }

    fn send(&self, req: &ChatRequest<'_>) -> Result<String, JudgeError> {
        let mut delay = self.retry.backoff;
        let mut last = None;
        for attempt in 0..self.retry.max_attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.gate.run(|| self.provider.complete(req)) {
                Ok(s) => return Ok(s),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| JudgeError::ProviderUnavailable("no attempts made".into())))
    }

    /// Runs one exchange with a single repair round. Returns the parsed
    /// value (or `None` after a protocol failure) and the transcript id.
    fn converse<T>(
        &self,
        task: JudgeTask,
        function: &FunctionRecord,
        cls: Classification,
        parse: impl Fn(&Value) -> Result<T, String>,
    ) -> Result<(Option<T>, String), JudgeError> {
        let system = self.templates.system(task, cls)?;
        let subject = function_message(function);
        let mut messages = vec![ChatMessage::new("system", system), ChatMessage::new("user", subject.clone())];
        let mut parsed = None;
        let mut outcome = String::new();
        for round in 0..2 {
            let req = ChatRequest {
                task,
                classification: cls,
                subject: &function.source_text,
                docstring: function.docstring.as_deref(),
                messages: &messages,
            };
            let answer = self.send(&req)?;
            messages.push(ChatMessage::new("assistant", answer.clone()));
            match extract_json(&answer).and_then(|v| parse(&v)) {
                Ok(v) => {
                    parsed = Some(v);
                    outcome = "ok".into();
                    break;
                }
                Err(e) => {
                    outcome = format!("{PROTOCOL_FAILURE}: {e}");
                    if round == 0 {
                        messages.push(ChatMessage::new("user", self.templates.repair(&answer, &e, &subject)));
                    }
                }
            }
        }
        let t = Transcript {
            task,
            function_id: function.id(),
            provider: self.provider.name(),
            messages,
            outcome,
        };
        let id = t.id();
        if let Some(dir) = &self.transcript_dir {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{id}.json")), serde_json::to_vec_pretty(&t).expect("serializes"))?;
        }
        self.transcripts.lock().expect("lock").push(t);
        Ok((parsed, id))
    }

    pub fn assess_suitability(&self, function: &FunctionRecord, cls: Classification) -> Result<JudgeVerdict, JudgeError> {
        let (v, transcript) = self.converse(JudgeTask::Suitability, function, cls, |v| {
            let obj = v.as_object().ok_or("answer is not a JSON object")?;
            let suitable = obj.get("Suitable").and_then(Value::as_bool).ok_or("missing boolean \"Suitable\"")?;
            let reason = obj.get("Reason").and_then(Value::as_str).ok_or("missing string \"Reason\"")?;
            Ok((suitable, reason.to_string()))
        })?;
        let (suitable, reason) = v.unwrap_or((false, PROTOCOL_FAILURE.to_string()));
        Ok(JudgeVerdict {
            suitable,
            reason,
            transcript,
        })
    }

    pub fn assess_difficulty(&self, function: &FunctionRecord, cls: Classification) -> Result<DifficultyLabel, JudgeError> {
        let (v, transcript) = self.converse(JudgeTask::Difficulty, function, cls, |v| {
            match v.get("Difficulty").and_then(Value::as_str) {
                Some("Easy") => Ok(Difficulty::Easy),
                Some("Medium") => Ok(Difficulty::Medium),
                Some("Hard") => Ok(Difficulty::Hard),
                Some(other) => Err(format!("unknown difficulty {other:?}")),
                None => Err("missing string \"Difficulty\"".into()),
            }
        })?;
        Ok(DifficultyLabel {
            level: v.unwrap_or(Difficulty::Medium),
            defaulted: v.is_none(),
            transcript,
        })
    }

    pub fn refine_docstring(&self, function: &FunctionRecord, cls: Classification) -> Result<RefinedDocstring, JudgeError> {
        let (v, transcript) = self.converse(JudgeTask::Instruction, function, cls, |v| {
            v.get("Docstring")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| "missing string \"Docstring\"".to_string())
        })?;
        Ok(RefinedDocstring {
            text: v.unwrap_or_default(),
            transcript,
        })
    }
}

/// Function source as sent to the judge, preceded by the imports it uses.
pub fn function_message(function: &FunctionRecord) -> String {
    let tree = &function.syntax;
    let idents: std::collections::BTreeSet<&str> = tree
        .descendants(function.def_node)
        .into_iter()
        .filter(|&n| tree.kind(n) == "identifier")
        .map(|n| tree.text(n))
        .collect();
    let imports = function.import_statements_for(idents);
    let mut s = String::from("```python\n");
    for i in &imports {
        s.push_str(i);
        s.push('\n');
    }
    if !imports.is_empty() {
        s.push('\n');
    }
    s.push_str(&function.source_text);
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s.push_str("```\n");
    s
}

/// Parses an answer that must be exactly one JSON object, optionally inside
/// a single code fence.
pub fn extract_json(answer: &str) -> Result<Value, String> {
    let t = answer.trim();
    let body = if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.strip_prefix("json").unwrap_or(rest);
        rest.strip_suffix("```").ok_or("unterminated code fence")?.trim()
    } else {
        t
    };
    let v: Value = serde_json::from_str(body).map_err(|e| format!("not valid JSON: {e}"))?;
    if v.is_object() {
        Ok(v)
    } else {
        Err("answer is not a JSON object".into())
    }
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

    const MERGE: &str = "def merge_json_recursive(base, update):\n    if not isinstance(base, dict) or not isinstance(update, dict):\n        if isinstance(base, list) and isinstance(update, list):\n            return base + update\n        return update\n    merged = base.copy()\n    for key, value in update.items():\n        if key in merged:\n            merged[key] = merge_json_recursive(merged[key], value)\n        else:\n            merged[key] = value\n    return merged\n";

    #[test]
    fn stub_rejects_getter_and_accepts_merge() {
        let j = JudgeClient::stub();
        let getter = record("class P:\n    def get_x(self):\n        return self._x\n");
        assert!(!j.assess_suitability(&getter, Classification::SelfContained).unwrap().suitable);
        let merge = record(MERGE);
        assert!(j.assess_suitability(&merge, Classification::SelfContained).unwrap().suitable);
    }

    #[test]
    fn stub_difficulty_bands() {
        assert_eq!(stub_difficulty(1), Difficulty::Easy);
        assert_eq!(stub_difficulty(3), Difficulty::Easy);
        assert_eq!(stub_difficulty(5), Difficulty::Medium);
        assert_eq!(stub_difficulty(8), Difficulty::Hard);
        let j = JudgeClient::stub();
        let words = record("from collections import Counter\n\ndef count_word_frequencies(text: str) -> dict[str, int]:\n    words = text.lower().split()\n    return dict(Counter(words))\n");
        let d = j.assess_difficulty(&words, Classification::WeaklySelfContained).unwrap();
        assert_eq!((d.level, d.defaulted), (Difficulty::Easy, false));
    }

    #[test]
    fn two_bad_answers_give_protocol_failure() {
        let p = ScriptedProvider::new([Ok("I think yes".to_string()), Ok("still prose".to_string())]);
        let j = JudgeClient::new(Arc::new(p));
        let v = j.assess_suitability(&record(MERGE), Classification::SelfContained).unwrap();
        assert!(!v.suitable);
        assert_eq!(v.reason, PROTOCOL_FAILURE);
        let t = &j.transcripts()[0];
        // system, user, bad answer, repair request, bad answer
        assert_eq!(t.messages.len(), 5);
        assert!(t.messages[3].content.contains("I think yes"));
    }

    #[test]
    fn repair_round_can_succeed() {
        let p = ScriptedProvider::new([Ok("nope".to_string()), Ok("```json\n{\"Difficulty\": \"Hard\"}\n```".to_string())]);
        let j = JudgeClient::new(Arc::new(p));
        let d = j.assess_difficulty(&record(MERGE), Classification::SelfContained).unwrap();
        assert_eq!((d.level, d.defaulted), (Difficulty::Hard, false));
    }

    #[test]
    fn difficulty_protocol_failure_defaults_to_medium() {
        let p = ScriptedProvider::new([Ok("[]".to_string()), Ok("{}".to_string())]);
        let j = JudgeClient::new(Arc::new(p));
        let d = j.assess_difficulty(&record(MERGE), Classification::SelfContained).unwrap();
        assert_eq!((d.level, d.defaulted), (Difficulty::Medium, true));
    }

    #[test]
    fn provider_failure_propagates_after_retries() {
        let p = ScriptedProvider::new([Err("down".to_string()), Err("down".to_string())]);
        let j = JudgeClient::new(Arc::new(p)).with_retry(RetryPolicy {
            max_attempts: 2,
            backoff: Duration::from_millis(1),
        });
        assert!(matches!(
            j.assess_suitability(&record(MERGE), Classification::SelfContained),
            Err(JudgeError::ProviderUnavailable(_))
        ));
    }

    #[test]
    fn json_extraction_is_strict() {
        assert!(extract_json("{\"a\": 1}").is_ok());
        assert!(extract_json("```json\n{\"a\": 1}\n```").is_ok());
        assert!(extract_json("Sure! {\"a\": 1}").is_err());
        assert!(extract_json("[1]").is_err());
    }

    #[test]
    fn transcripts_persist_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let run = || {
            let j = JudgeClient::stub().with_transcript_dir(dir.path());
            j.assess_suitability(&record(MERGE), Classification::SelfContained).unwrap().transcript
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(dir.path().join(format!("{a}.json")).is_file());
    }

    #[test]
    fn docstring_normalization() {
        assert_eq!(normalize_docstring("Sum.\n\n    Args:\n        a: x\n    "), "Sum.\n\nArgs:\n    a: x");
    }
}
