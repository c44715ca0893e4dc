//! Test-suite synthesis: strategy inference, seeded input generation,
//! validation against the ground truth, and the branch-coverage gate.

mod gen;
pub mod pylit;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use gen::{GenSpec, KEY_ALPHABET, LOWER, PRINTABLE};

use crate::bridge::{BridgeError, ExecBridge, Status};
use crate::harness::deep_compare;
use crate::scopes::Classification;
use crate::syntax::{FunctionRecord, ParamKind};

pub const DEFAULT_TARGET: usize = 500;
pub const DEFAULT_BUDGET: usize = 10_000;
pub const DEFAULT_INT_RANGE: (i64, i64) = (-1000, 1000);
/// Generation stops early after this many ground-truth timeouts.
pub const MAX_TIMEOUTS: usize = 3;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unsupported shape for parameter `{param}`: {reason}")]
    UnsupportedParameterShape { param: String, reason: String },
    #[error("function cannot be invoked in isolation: {0}")]
    NotInvocable(String),
    #[error("ground truth failed to load: {0}")]
    GroundTruthLoad(String),
    #[error("ground truth raised on all {draws} drawn inputs (last: {last})")]
    GroundTruthAlwaysThrows { draws: usize, last: String },
    #[error("coverage gate needs a non-empty suite")]
    EmptySuite,
    #[error("execution bridge failure: {0}")]
    BridgeFailure(#[from] BridgeError),
}

impl SynthError {
    /// Short disposition label used in run manifests.
    pub fn reason(&self) -> &'static str {
        match self {
            SynthError::UnsupportedParameterShape { .. } => "unsupported-parameter-shape",
            SynthError::NotInvocable(_) => "not-invocable",
            SynthError::GroundTruthLoad(_) => "ground-truth-load-error",
            SynthError::GroundTruthAlwaysThrows { .. } => "ground-truth-always-throws",
            SynthError::EmptySuite => "empty-suite",
            SynthError::BridgeFailure(_) => "bridge-failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    /// Portable across target languages: JSON values, 32-bit integers.
    #[serde(rename = "SC")]
    Portable,
    #[serde(rename = "WSC")]
    LibraryAware,
}

impl Profile {
    pub fn for_classification(cls: Classification) -> Self {
        match cls {
            Classification::SelfContained => Profile::Portable,
            _ => Profile::LibraryAware,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub spec: GenSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPlan {
    pub function: String,
    pub profile: Profile,
    pub params: Vec<ParamSpec>,
    /// Tried before any random draw: docstring examples, then boundary values.
    pub seeds: Vec<Map<String, Value>>,
}

impl StrategyPlan {
    pub fn spec(&self, name: &str) -> Option<&GenSpec> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.spec)
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Map<String, Value> {
        self.params.iter().map(|p| (p.name.clone(), p.spec.sample(rng))).collect()
    }

    /// True when every integer bound fits in a signed 32-bit integer.
    pub fn is_portable(&self) -> bool {
        self.params.iter().all(|p| {
            p.spec
                .int_bounds()
                .is_none_or(|(lo, hi)| lo >= i32::MIN as i64 && hi <= i32::MAX as i64)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    #[serde(rename = "Inputs")]
    pub inputs: Map<String, Value>,
    /// Absent for WSC suites; a present `null` is `Some(Value::Null)`.
    #[serde(rename = "Expected", default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    pub expected: Option<Value>,
}

fn present<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardCounts {
    pub duplicates: usize,
    /// Keyed by exception type, `timeout` or `crash`.
    pub errors: BTreeMap<String, usize>,
    /// Ground-truth outputs outside the portable value profile.
    pub unportable: usize,
}

impl DiscardCounts {
    pub fn error_total(&self) -> usize {
        self.errors.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub total: BTreeSet<String>,
    pub covered: BTreeSet<String>,
    pub ratio: f64,
}

impl CoverageReport {
    pub fn new(total: BTreeSet<String>, covered: BTreeSet<String>) -> Self {
        let covered: BTreeSet<String> = covered.intersection(&total).cloned().collect();
        let ratio = if total.is_empty() {
            1.0
        } else {
            covered.len() as f64 / total.len() as f64
        };
        CoverageReport { total, covered, ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub cases: Vec<TestCase>,
    pub seed: u64,
    pub budget_used: usize,
    pub discards: DiscardCounts,
    /// Why fewer than the target number of cases were stored, if so.
    pub shortfall: Option<String>,
    pub coverage: Option<CoverageReport>,
}

impl TestSuite {
    /// The bytes of `test_cases/test_cases.json`.
    pub fn cases_json(&self) -> String {
        cases_json(&self.cases)
    }
}

pub fn cases_json(cases: &[TestCase]) -> String {
    let mut s = serde_json::to_string_pretty(cases).expect("cases serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteParams {
    pub target: usize,
    pub budget: usize,
    pub seed: u64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            target: DEFAULT_TARGET,
            budget: DEFAULT_BUDGET,
            seed: 0,
        }
    }
}

/// Standalone module text for a ground truth: the imports it uses, then the
/// function itself.
pub fn ground_truth_source(function: &FunctionRecord) -> String {
    let tree = &function.syntax;
    let idents: BTreeSet<&str> = tree
        .descendants(function.def_node)
        .into_iter()
        .filter(|&n| tree.kind(n) == "identifier")
        .map(|n| tree.text(n))
        .collect();
    let imports = function.import_statements_for(idents);
    let mut s = String::new();
    for i in &imports {
        s.push_str(i);
        s.push('\n');
    }
    if !imports.is_empty() {
        s.push_str("\n\n");
    }
    s.push_str(&function.source_text);
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn module_name(prefix: &str, source: &str) -> String {
    format!("{prefix}_{}", hex::encode(&Sha256::digest(source.as_bytes())[..6]))
}

/// JSON with map keys sorted at every level.
pub fn canonical_json(v: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut keys: Vec<&String> = m.keys().collect();
                keys.sort();
                Value::Object(keys.into_iter().map(|k| (k.clone(), sorted(&m[k]))).collect())
            }
            Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    sorted(v).to_string()
}

/// Portable value profile: 32-bit integers, finite floats, printable ASCII
/// text (plus tab and newline).
pub fn is_portable_value(v: &Value) -> bool {
    match v {
        Value::Number(n) => match n.as_i64() {
            Some(i) => i32::try_from(i).is_ok(),
            None => n.is_f64() && n.as_f64().is_some_and(f64::is_finite),
        },
        Value::String(s) => s.chars().all(|c| (' '..='~').contains(&c) || c == '\n' || c == '\t'),
        Value::Array(a) => a.iter().all(is_portable_value),
        Value::Object(m) => m.iter().all(|(k, x)| is_portable_value(&Value::String(k.clone())) && is_portable_value(x)),
        Value::Null | Value::Bool(_) => true,
    }
}

// ---- strategy inference ----

#[derive(Debug, Clone, PartialEq)]
struct TypeExpr {
    name: String,
    args: Vec<TypeExpr>,
}

fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(s[start..i].trim());
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

fn parse_type(s: &str) -> Option<TypeExpr> {
    let s = s.trim().trim_matches(|c| c == '"' || c == '\'').trim();
    if s.is_empty() {
        return None;
    }
    let alts = split_top(s, '|');
    if alts.len() > 1 {
        return Some(TypeExpr {
            name: "Union".into(),
            args: alts.into_iter().map(parse_type).collect::<Option<_>>()?,
        });
    }
    let (head, args) = match s.find('[') {
        Some(i) if s.ends_with(']') => {
            let inner = &s[i + 1..s.len() - 1];
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                split_top(inner, ',').into_iter().map(parse_type).collect::<Option<_>>()?
            };
            (&s[..i], args)
        }
        Some(_) => return None,
        None => (s, Vec::new()),
    };
    let name = head.trim().rsplit('.').next().unwrap_or(head).to_string();
    Some(TypeExpr { name, args })
}

const SIZE_NAMES: &[&str] = &["n", "k", "m", "size", "count", "length", "width", "window", "depth", "num", "limit", "times", "steps", "order"];

fn is_size_like(name: &str) -> bool {
    SIZE_NAMES.contains(&name)
        || name.starts_with("num_")
        || name.starts_with("n_")
        || ["_size", "_count", "_len", "_length", "_width", "_depth"].iter().any(|s| name.ends_with(s))
}

fn is_long_text(name: &str) -> bool {
    ["text", "sentence", "content", "document", "paragraph", "message", "body"].iter().any(|k| name.contains(k))
}

fn int_spec(name: &str) -> GenSpec {
    if is_size_like(name) {
        GenSpec::int(1, 5)
    } else {
        GenSpec::int(DEFAULT_INT_RANGE.0, DEFAULT_INT_RANGE.1)
    }
}

fn text_spec(name: &str) -> GenSpec {
    GenSpec::text(PRINTABLE, if is_long_text(name) { 100 } else { 20 })
}

fn element_int() -> GenSpec {
    GenSpec::int(-100, 100)
}

/// `Ok(None)` means the hint is too loose (e.g. `Any`) and usage decides.
fn spec_from_type(t: &TypeExpr, param: &str, top: bool) -> Result<Option<GenSpec>, String> {
    let elem = |t: &TypeExpr, i: usize| -> Result<GenSpec, String> {
        match t.args.get(i) {
            None => Ok(element_int()),
            Some(a) => Ok(spec_from_type(a, param, false)?.unwrap_or_else(|| GenSpec::json_like((-100, 100)))),
        }
    };
    let name = t.name.as_str();
    Ok(Some(match name {
        "int" => {
            if top {
                int_spec(param)
            } else {
                element_int()
            }
        }
        "float" => GenSpec::Float { bound: 1000.0 },
        "str" => {
            if top {
                text_spec(param)
            } else {
                GenSpec::text(LOWER, 8)
            }
        }
        "bool" => GenSpec::Boolean,
        "None" | "NoneType" => return Err("parameter typed as None".into()),
        "list" | "List" | "Sequence" | "MutableSequence" | "Iterable" | "Collection" => {
            GenSpec::list(elem(t, 0)?, 10)
        }
        "tuple" | "Tuple" => {
            let variadic = t.args.len() == 2 && t.args[1].name == "...";
            if !variadic && !t.args.is_empty() {
                return Err("fixed-arity tuple".into());
            }
            GenSpec::list(elem(t, 0)?, 10)
        }
        "dict" | "Dict" | "Mapping" | "MutableMapping" => {
            if let Some(k) = t.args.first() {
                if k.name != "str" {
                    return Err("map keys must be text".into());
                }
            }
            GenSpec::map(elem(t, 1)?, 5)
        }
        "Optional" => {
            let inner = t.args.first().ok_or("bare Optional")?;
            GenSpec::nullable(spec_from_type(inner, param, top)?.unwrap_or_else(|| GenSpec::json_like((-100, 100))))
        }
        "Union" => {
            let (none, rest): (Vec<&TypeExpr>, Vec<&TypeExpr>) =
                t.args.iter().partition(|a| a.name == "None" || a.name == "NoneType");
            let inner = match rest.as_slice() {
                [one] => spec_from_type(one, param, top)?.unwrap_or_else(|| GenSpec::json_like((-100, 100))),
                many if many.iter().all(|a| a.name == "int" || a.name == "float") => GenSpec::Float { bound: 1000.0 },
                _ => return Err("union of unrelated types".into()),
            };
            if none.is_empty() {
                inner
            } else {
                GenSpec::nullable(inner)
            }
        }
        "Any" | "object" => return Ok(None),
        "Callable" | "callable" | "Type" | "type" | "Iterator" | "Generator" | "Awaitable" | "Coroutine" => {
            return Err(format!("{name} values cannot be generated"))
        }
        "set" | "Set" | "frozenset" | "FrozenSet" => return Err("sets have no JSON form".into()),
        "bytes" | "bytearray" => return Err("binary values have no JSON form".into()),
        other => return Err(format!("no generator for type `{other}`")),
    }))
}

const TEXT_METHODS: &[&str] = &[
    "split", "rsplit", "splitlines", "lower", "upper", "strip", "lstrip", "rstrip", "startswith", "endswith", "replace",
    "join", "find", "rfind", "isdigit", "isalpha", "isalnum", "isspace", "isupper", "islower", "title", "capitalize",
    "casefold", "encode", "format", "zfill", "center", "ljust", "rjust", "partition", "rpartition", "swapcase",
];
const MAP_METHODS: &[&str] = &["items", "keys", "values", "get", "setdefault", "update"];
const SEQ_METHODS: &[&str] = &["append", "extend", "insert", "sort", "reverse", "remove"];
const SEQ_FUNCS: &[&str] = &["len", "sum", "sorted", "max", "min", "enumerate", "zip", "reversed", "set", "list", "tuple", "any", "all"];

#[derive(Default)]
struct Evidence {
    json: bool,
    text: bool,
    seq: bool,
    float: bool,
    num: bool,
    range_arg: bool,
}

fn usage_evidence(function: &FunctionRecord, param: &str) -> Evidence {
    let tree = &function.syntax;
    let mut ev = Evidence::default();
    let Some(body) = function.body_node() else {
        return ev;
    };
    for n in tree.descendants(body) {
        if tree.kind(n) != "identifier" || tree.text(n) != param {
            continue;
        }
        let Some(p) = tree.parent(n) else { continue };
        match tree.kind(p) {
            "attribute" if tree.child_by_field(p, "object") == Some(n) => {
                let attr = tree.child_by_field(p, "attribute").map(|a| tree.text(a)).unwrap_or("");
                if MAP_METHODS.contains(&attr) {
                    ev.json = true;
                } else if TEXT_METHODS.contains(&attr) {
                    ev.text = true;
                } else if SEQ_METHODS.contains(&attr) {
                    ev.seq = true;
                }
            }
            "subscript" if tree.child_by_field(p, "value") == Some(n) => {
                let keyed = tree
                    .children_by_field(p, "subscript")
                    .any(|s| tree.kind(s) == "string");
                if keyed {
                    ev.json = true;
                } else {
                    ev.seq = true;
                }
            }
            "binary_operator" | "comparison_operator" | "augmented_assignment" => {
                let others: Vec<_> = tree.named_children(p).filter(|&c| c != n).collect();
                let op_text = tree.text(p);
                for o in others {
                    match tree.kind(o) {
                        "float" => ev.float = true,
                        "integer" => ev.num = true,
                        "string" if !op_text.contains(" in ") => ev.text = true,
                        _ => {}
                    }
                }
                if tree.kind(p) == "binary_operator" {
                    let op = tree.child_by_field(p, "operator").map(|o| tree.text(o)).unwrap_or("");
                    if matches!(op, "-" | "/" | "//" | "**") {
                        ev.num = true;
                    }
                }
            }
            "unary_operator" => ev.num = true,
            "argument_list" => {
                let Some(call) = tree.parent(p) else { continue };
                let fname = tree.child_by_field(call, "function").map(|f| tree.text(f)).unwrap_or("");
                let args: Vec<_> = tree.named_children(p).collect();
                match fname {
                    "isinstance" if args.first() == Some(&n) => {
                        let t = args.get(1).map(|a| tree.text(*a)).unwrap_or("");
                        if t.contains("dict") || t.contains("list") {
                            ev.json = true;
                        } else if t.contains("str") {
                            ev.text = true;
                        } else if t.contains("float") {
                            ev.float = true;
                        } else if t.contains("int") {
                            ev.num = true;
                        }
                    }
                    "range" => ev.range_arg = true,
                    "abs" | "round" | "divmod" | "pow" => ev.num = true,
                    "float" | "math.sqrt" | "math.floor" | "math.ceil" | "math.log" => ev.float = true,
                    f if SEQ_FUNCS.contains(&f) => ev.seq = true,
                    _ => {}
                }
            }
            "for_statement" | "for_in_clause" if tree.child_by_field(p, "right") == Some(n) => ev.seq = true,
            _ => {}
        }
    }
    ev
}

fn spec_from_default(default: &str, param: &str) -> Option<GenSpec> {
    match pylit::parse_literal(default)? {
        Value::Bool(_) => Some(GenSpec::Boolean),
        Value::Number(n) if n.is_i64() => Some(int_spec(param)),
        Value::Number(_) => Some(GenSpec::Float { bound: 1000.0 }),
        Value::String(_) => Some(text_spec(param)),
        Value::Array(_) => Some(GenSpec::list(element_int(), 10)),
        Value::Object(_) => Some(GenSpec::map(element_int(), 5)),
        Value::Null => None,
    }
}

fn spec_from_usage(function: &FunctionRecord, param: &str) -> Option<GenSpec> {
    let ev = usage_evidence(function, param);
    Some(if ev.json {
        GenSpec::json_like((-100, 100))
    } else if ev.text {
        text_spec(param)
    } else if ev.seq {
        GenSpec::list(element_int(), 10)
    } else if ev.float {
        GenSpec::Float { bound: 1000.0 }
    } else if ev.range_arg {
        GenSpec::int(0, 10)
    } else if ev.num {
        int_spec(param)
    } else {
        return None;
    })
}

/// Derives one generator per parameter from hints, then body usage, then
/// default values.
pub fn infer_strategies(function: &FunctionRecord, cls: Classification) -> Result<StrategyPlan, SynthError> {
    if function.is_method {
        return Err(SynthError::NotInvocable("method needs a receiver".into()));
    }
    if function.is_async {
        return Err(SynthError::NotInvocable("coroutine function".into()));
    }
    let mut params = Vec::new();
    for p in &function.params {
        if matches!(p.kind, ParamKind::VarPositional | ParamKind::VarKeyword) {
            continue;
        }
        let unsupported = |reason: String| SynthError::UnsupportedParameterShape {
            param: p.name.clone(),
            reason,
        };
        let hinted = match &p.hint {
            Some(h) => {
                let t = parse_type(h).ok_or_else(|| unsupported(format!("unparseable hint `{h}`")))?;
                spec_from_type(&t, &p.name, true).map_err(unsupported)?
            }
            None => None,
        };
        let spec = hinted
            .or_else(|| spec_from_usage(function, &p.name))
            .or_else(|| p.default.as_deref().and_then(|d| spec_from_default(d, &p.name)))
            .ok_or_else(|| unsupported("no hint and no usable evidence in the body".into()))?;
        params.push(ParamSpec {
            name: p.name.clone(),
            spec,
        });
    }
    let mut plan = StrategyPlan {
        function: function.name.clone(),
        profile: Profile::for_classification(cls),
        params,
        seeds: Vec::new(),
    };
    plan.seeds = docstring_seeds(function, &plan);
    plan.seeds.extend(edge_seeds(&plan));
    Ok(plan)
}

/// Inputs written in the docstring as `Input: a = 1, b = 2` lines or
/// doctest calls.
pub fn docstring_seeds(function: &FunctionRecord, plan: &StrategyPlan) -> Vec<Map<String, Value>> {
    let Some(doc) = &function.docstring else {
        return Vec::new();
    };
    let names: Vec<String> = plan.params.iter().map(|p| p.name.clone()).collect();
    let required: Vec<&str> = function
        .params
        .iter()
        .filter(|p| p.default.is_none() && !matches!(p.kind, ParamKind::VarPositional | ParamKind::VarKeyword))
        .map(|p| p.name.as_str())
        .collect();
    let mut out = Vec::new();
    for line in doc.lines() {
        let t = line.trim();
        let parsed = if let Some(rest) = t.strip_prefix("Input:").or_else(|| t.strip_prefix("Inputs:")) {
            pylit::parse_assignments(rest)
        } else if let Some(rest) = t.strip_prefix(">>>") {
            pylit::parse_call(rest.trim(), &function.name, &names)
        } else {
            None
        };
        let Some(m) = parsed else { continue };
        let known = m.keys().all(|k| names.contains(k));
        let complete = required.iter().all(|r| m.contains_key(*r));
        if known && complete && !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

fn edge_seeds(plan: &StrategyPlan) -> Vec<Map<String, Value>> {
    let edges: Vec<Vec<Value>> = plan.params.iter().map(|p| p.spec.edges()).collect();
    let rounds = edges.iter().map(Vec::len).max().unwrap_or(0);
    (0..rounds)
        .map(|i| {
            plan.params
                .iter()
                .zip(&edges)
                .filter(|(_, e)| !e.is_empty())
                .map(|(p, e)| (p.name.clone(), e[i % e.len()].clone()))
                .collect()
        })
        .collect()
}

// ---- suite generation ----

fn error_key(status: Status, error_type: Option<&str>) -> String {
    match status {
        Status::Timeout => "timeout".into(),
        Status::Crash => "crash".into(),
        _ => error_type.unwrap_or("exception").to_string(),
    }
}

/// Draws inputs (seeds first), keeps those the ground truth accepts, and
/// records expected outputs for the portable profile.
pub fn generate_suite(
    function: &FunctionRecord,
    plan: &StrategyPlan,
    params: SuiteParams,
    bridge: &mut ExecBridge,
) -> Result<TestSuite, SynthError> {
    let source = ground_truth_source(function);
    let module = module_name("gt", &source);
    let loaded = bridge.load(&module, &source, None)?;
    if !loaded.is_ok() {
        return Err(SynthError::GroundTruthLoad(loaded.describe()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut seen: HashSet<String> = HashSet::new();
    let mut cases = Vec::new();
    let mut discards = DiscardCounts::default();
    let mut draws = 0usize;
    let mut last_error = String::new();
    let mut seeds = plan.seeds.iter();
    let mut timed_out = false;
    while cases.len() < params.target && draws < params.budget {
        let inputs = match seeds.next() {
            Some(s) => s.clone(),
            None => plan.draw(&mut rng),
        };
        draws += 1;
        if !seen.insert(canonical_json(&Value::Object(inputs.clone()))) {
            discards.duplicates += 1;
            continue;
        }
        let resp = bridge.call(&module, &function.name, &inputs)?;
        if resp.status != Status::Ok {
            let key = error_key(resp.status, resp.error_type.as_deref());
            *discards.errors.entry(key).or_default() += 1;
            last_error = resp.describe();
            if resp.status == Status::Timeout && discards.errors["timeout"] >= MAX_TIMEOUTS {
                timed_out = true;
                break;
            }
            continue;
        }
        let value = resp.value.unwrap_or(Value::Null);
        let expected = match plan.profile {
            Profile::Portable => {
                if !is_portable_value(&value) || !is_portable_value(&Value::Object(inputs.clone())) {
                    discards.unportable += 1;
                    continue;
                }
                Some(value)
            }
            Profile::LibraryAware => None,
        };
        cases.push(TestCase { inputs, expected });
    }
    if cases.is_empty() {
        return Err(SynthError::GroundTruthAlwaysThrows { draws, last: last_error });
    }
    let shortfall = (cases.len() < params.target).then(|| {
        if timed_out {
            "ground-truth-timeouts".to_string()
        } else {
            let errs = discards.error_total();
            let dominant = [
                (discards.duplicates, "duplicate-inputs"),
                (errs, "invalid-inputs"),
                (discards.unportable, "unportable-outputs"),
            ]
            .into_iter()
            .max_by_key(|(n, _)| *n)
            .filter(|(n, _)| *n > 0)
            .map(|(_, s)| s);
            match dominant {
                Some(d) => format!("budget-exhausted:{d}"),
                None => "budget-exhausted".to_string(),
            }
        }
    });
    Ok(TestSuite {
        cases,
        seed: params.seed,
        budget_used: draws,
        discards,
        shortfall,
        coverage: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub accepted: bool,
    pub report: CoverageReport,
    /// Cases whose replay failed or disagreed with the stored expectation.
    pub replay_failures: usize,
}

/// Replays the suite against the instrumented ground truth; accepts iff the
/// branch ratio reaches `threshold` and every case replays cleanly.
pub fn coverage_gate(
    suite: &TestSuite,
    function: &FunctionRecord,
    threshold: f64,
    bridge: &mut ExecBridge,
) -> Result<GateDecision, SynthError> {
    if suite.cases.is_empty() {
        return Err(SynthError::EmptySuite);
    }
    let source = ground_truth_source(function);
    let module = module_name("cov", &source);
    let loaded = bridge.load(&module, &source, Some(&function.name))?;
    if !loaded.is_ok() {
        return Err(SynthError::GroundTruthLoad(loaded.describe()));
    }
    let mut total = BTreeSet::new();
    let mut covered = BTreeSet::new();
    let mut replay_failures = 0;
    for case in &suite.cases {
        let resp = bridge.trace(&module, &function.name, &case.inputs)?;
        if let Some(t) = &resp.total {
            total.extend(t.iter().cloned());
        }
        if let Some(c) = &resp.covered {
            covered.extend(c.iter().cloned());
        }
        let agrees = resp.status == Status::Ok
            && case
                .expected
                .as_ref()
                .is_none_or(|e| resp.value.as_ref().is_some_and(|v| deep_compare(v, e, 0.0)));
        if !agrees {
            replay_failures += 1;
        }
    }
    let report = CoverageReport::new(total, covered);
    Ok(GateDecision {
        accepted: replay_failures == 0 && report.ratio >= threshold,
        report,
        replay_failures,
    })
}
