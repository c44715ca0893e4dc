//! Shared fixtures and criterion checks for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use benchforge::bridge::{BridgeConfig, ExecBridge};
use benchforge::corpus::SourceFile;
use benchforge::flow::{build_cfg, cyclomatic, testability, ControlFlowGraph, RejectReason, Verdict};
use benchforge::harness::{
    aggregate, deep_compare, evaluate_candidate, evaluate_dir, CandidateProgram, Outcome, OutcomeClass, HIGH_PASS_RATIO,
};
use benchforge::orchestrator::{run_pipeline, PipelineConfig, RunManifest};
use benchforge::package::BenchmarkInstance;
use benchforge::par::Exec;
use benchforge::scopes::{analyze_function, classify, AllowList, Classification};
use benchforge::synth::{cases_json, coverage_gate, generate_suite, infer_strategies, SuiteParams, DEFAULT_TARGET};
use benchforge::syntax::{extract_functions, parse_source, FunctionRecord};
use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use serde_json::{json, Value};

pub const FIXTURE_SEED: u64 = 20240601;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn records_of(path: &Path, rel: &str) -> Vec<FunctionRecord> {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let f = SourceFile::new(rel, bytes, None, None);
    let tree = parse_source(&f).expect("fixture parses");
    extract_functions(&tree, &f).records
}

pub fn corpus_record(name: &str) -> FunctionRecord {
    let dir = fixtures().join("corpus");
    for file in ["textutil.py", "mathutil.py", "structures.py"] {
        if let Some(r) = records_of(&dir.join(file), file).into_iter().find(|r| r.name == name) {
            return r;
        }
    }
    panic!("no fixture function {name}")
}

pub fn bridge() -> ExecBridge {
    ExecBridge::spawn(BridgeConfig::default()).expect("python bridge starts")
}

pub fn fixture_config(out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::for_corpus(fixtures().join("corpus").to_string_lossy(), out);
    c.seed = Some(FIXTURE_SEED);
    c
}

/// A scratch directory under the cargo target dir, emptied first.
pub fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).expect("scratch dir removable");
    }
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

pub struct FixtureRun {
    pub out: PathBuf,
    pub manifest: RunManifest,
}

/// The default-configuration run over the fixture corpus, once per binary.
pub fn fixture_run() -> &'static FixtureRun {
    static RUN: OnceLock<FixtureRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let bin = std::env::current_exe()
            .ok()
            .and_then(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "tests".into());
        let out = scratch(&format!("fixture-run-{bin}"));
        let run = run_pipeline(&fixture_config(&out)).expect("fixture pipeline runs");
        FixtureRun { out, manifest: run.manifest }
    })
}

pub fn instances() -> Vec<BenchmarkInstance> {
    let run = fixture_run();
    run.manifest
        .accepted
        .iter()
        .map(|id| BenchmarkInstance::load(&run.out.join("instances").join(id)).expect("instance loads"))
        .collect()
}

pub fn instance_named(function: &str) -> BenchmarkInstance {
    instances()
        .into_iter()
        .find(|i| i.manifest.function == function)
        .unwrap_or_else(|| panic!("no accepted instance for {function}"))
}

pub fn candidate(instance: &BenchmarkInstance, source: impl Into<String>, origin: &str) -> CandidateProgram {
    CandidateProgram {
        instance_id: instance.manifest.id.clone(),
        source: source.into(),
        origin: origin.into(),
    }
}

pub fn evaluate(instance: &BenchmarkInstance, source: &str, origin: &str) -> Outcome {
    let mut b = bridge();
    let o = evaluate_candidate(instance, &candidate(instance, source, origin), &mut b).expect("evaluation runs");
    let _ = b.shutdown();
    o
}

// ---- scope oracle ----

#[derive(Debug)]
pub struct ScopeExpectation {
    pub function: String,
    pub unresolved: BTreeSet<String>,
    pub label: String,
}

pub fn scope_expectations(text: &str) -> Vec<ScopeExpectation> {
    let mut out = Vec::new();
    let mut pending: Option<(BTreeSet<String>, String)> = None;
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("# expect:") {
            let rest = rest.trim();
            let open = rest.find('{').expect("U={...}");
            let close = rest.find('}').expect("U={...}");
            let names = rest[open + 1..close]
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            let label = rest[close + 1..].trim().strip_prefix("label=").expect("label=").trim().to_string();
            pending = Some((names, label));
        } else if let Some(rest) = t.strip_prefix("def ") {
            if let Some((u, label)) = pending.take() {
                let name = rest.split('(').next().unwrap().trim().to_string();
                out.push(ScopeExpectation {
                    function: name,
                    unresolved: u,
                    label,
                });
            }
        }
    }
    out
}

pub fn check_scope_oracle() -> Result<String, String> {
    let path = fixtures().join("scopes").join("annotated.py");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let expectations = scope_expectations(&text);
    let started = Instant::now();
    let records = records_of(&path, "annotated.py");
    let allow = AllowList::default_list();
    let mut mismatches = Vec::new();
    for e in &expectations {
        let Some(r) = records.iter().find(|r| r.name == e.function) else {
            mismatches.push(format!("{}: not extracted", e.function));
            continue;
        };
        let report = analyze_function(r);
        if report.u_f != e.unresolved {
            mismatches.push(format!("{}: U_F {:?}, annotated {:?}", e.function, report.u_f, e.unresolved));
        }
        let label = classify(&report, &allow).label();
        if label != e.label {
            mismatches.push(format!("{}: label {label}, annotated {}", e.function, e.label));
        }
    }
    let elapsed = started.elapsed();
    if expectations.len() < 50 {
        return Err(format!("only {} annotated functions", expectations.len()));
    }
    if !mismatches.is_empty() {
        return Err(mismatches.join("; "));
    }
    if elapsed.as_secs_f64() >= 5.0 {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{} functions, 0 mismatches, {:.0} ms", expectations.len(), elapsed.as_secs_f64() * 1000.0))
}

// ---- cyclomatic cross-check ----

/// Rank of the cycle space spanned by every simple directed cycle of the CFG
/// closed with a virtual exit-to-entry edge. Each entry-to-exit path and
/// each loop contributes a cycle, so this is the size of a path basis.
pub fn path_basis_size(cfg: &ControlFlowGraph) -> usize {
    let mut edges = cfg.edges.clone();
    edges.push((cfg.exit, cfg.entry));
    let n = cfg.node_count();
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &(a, _)) in edges.iter().enumerate() {
        out_edges[a].push(i);
    }
    let mut cycles: Vec<Vec<f64>> = Vec::new();
    for start in 0..n {
        // Simple cycles whose smallest node is `start`.
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        let mut path_edges: Vec<usize> = Vec::new();
        let mut on_path = vec![false; n];
        on_path[start] = true;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next >= out_edges[node].len() {
                stack.pop();
                on_path[node] = false;
                path_edges.pop();
                continue;
            }
            let e = out_edges[node][*next];
            *next += 1;
            let to = edges[e].1;
            if to == start {
                let mut v = vec![0.0; edges.len()];
                for &pe in path_edges.iter().chain(std::iter::once(&e)) {
                    v[pe] += 1.0;
                }
                cycles.push(v);
            } else if to > start && !on_path[to] {
                on_path[to] = true;
                path_edges.push(e);
                stack.push((to, 0));
            }
        }
        on_path[start] = false;
    }
    rank(cycles)
}

fn rank(mut rows: Vec<Vec<f64>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][c].abs() > 1e-9) else { continue };
        rows.swap(r, p);
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row[c].abs() > 1e-9 {
                let f = row[c] / pivot[c];
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x -= f * y;
                }
            }
        }
        r += 1;
    }
    r
}

pub fn cfg_annotations(text: &str) -> Vec<(String, u32)> {
    let mut out = Vec::new();
    let mut pending = None;
    for line in text.lines() {
        let t = line.trim();
        if let Some(n) = t.strip_prefix("# cc:") {
            pending = Some(n.trim().parse::<u32>().expect("cc annotation"));
        } else if let Some(rest) = t.strip_prefix("def ") {
            if let Some(cc) = pending.take() {
                out.push((rest.split('(').next().unwrap().to_string(), cc));
            }
        }
    }
    out
}

pub fn check_cyclomatic() -> Result<String, String> {
    let path = fixtures().join("cfg").join("cases.py");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let annotated = cfg_annotations(&text);
    let records = records_of(&path, "cases.py");
    let mut problems = Vec::new();
    for (name, want) in &annotated {
        let r = records.iter().find(|r| &r.name == name).ok_or(format!("{name} not extracted"))?;
        let cfg = build_cfg(r).map_err(|e| format!("{name}: {e}"))?;
        let graph = cfg.edge_count() as i64 - cfg.node_count() as i64 + 2;
        let decisions = 1 + cfg.decision_points as i64;
        let basis = path_basis_size(&cfg) as i64;
        let cc = cyclomatic(&cfg).map(i64::from).unwrap_or(-1);
        if !(graph == decisions && decisions == basis && basis == cc && cc == *want as i64) {
            problems.push(format!("{name}: E-N+2={graph} 1+d={decisions} basis={basis} cc={cc} annotated={want}"));
        }
    }
    let has = |n: &str, cc: u32| annotated.iter().any(|(a, c)| a == n && *c == cc);
    if !(has("linear", 1) && has("if_else", 2)) {
        problems.push("linear and if/else anchors missing".into());
    }
    if annotated.len() < 20 {
        problems.push(format!("only {} CFG fixtures", annotated.len()));
    }
    if problems.is_empty() {
        Ok(format!("{} CFGs agree on all three counts", annotated.len()))
    } else {
        Err(problems.join("; "))
    }
}

// ---- testability ----

pub fn check_testability() -> Result<String, String> {
    let cases = [
        ("log_message", Verdict::Reject(RejectReason::NoReturnPath)),
        ("default_timeout", Verdict::Reject(RejectReason::ConstantOnly)),
        ("clamp", Verdict::Pass),
        ("truncate_words", Verdict::Pass),
    ];
    let mut problems = Vec::new();
    for (name, want) in cases {
        let cfg = build_cfg(&corpus_record(name)).map_err(|e| e.to_string())?;
        let got = testability(&cfg).verdict;
        if got != want {
            problems.push(format!("{name}: {got:?}, wanted {want:?}"));
        }
    }
    if problems.is_empty() {
        Ok("no-return-path and constant-only rejected, parameter-dependent returns pass".into())
    } else {
        Err(problems.join("; "))
    }
}

// ---- suites ----

pub fn merge_suite(params: SuiteParams) -> benchforge::synth::TestSuite {
    let f = corpus_record("merge_json_recursive");
    let plan = infer_strategies(&f, Classification::SelfContained).expect("plan");
    let mut b = bridge();
    let s = generate_suite(&f, &plan, params, &mut b).expect("suite");
    let _ = b.shutdown();
    s
}

pub fn check_suite_determinism() -> Result<String, String> {
    let params = SuiteParams {
        seed: 99,
        ..SuiteParams::default()
    };
    let a = merge_suite(params).cases_json();
    let b = merge_suite(params).cases_json();
    let n: Vec<Value> = serde_json::from_str(&a).map_err(|e| e.to_string())?;
    if a != b {
        return Err("two runs differ".into());
    }
    if params.target != DEFAULT_TARGET || n.len() != 500 {
        return Err(format!("{} cases, target {}", n.len(), params.target));
    }
    Ok(format!("{} bytes identical across runs, {} cases", a.len(), n.len()))
}

pub fn check_coverage_gate() -> Result<String, String> {
    let inst = instances();
    if inst.is_empty() {
        return Err("no accepted instances".into());
    }
    let below: Vec<String> = inst
        .iter()
        .filter(|i| i.manifest.coverage.ratio != 1.0)
        .map(|i| format!("{}={}", i.manifest.function, i.manifest.coverage.ratio))
        .collect();
    if !below.is_empty() {
        return Err(format!("accepted below 1.0: {}", below.join(", ")));
    }
    let f = corpus_record("merge_json_recursive");
    let mut plan = infer_strategies(&f, Classification::SelfContained).map_err(|e| e.to_string())?;
    plan.seeds.clear();
    let mut b = bridge();
    let suite = generate_suite(
        &f,
        &plan,
        SuiteParams {
            target: 500,
            budget: 1,
            seed: 5,
        },
        &mut b,
    )
    .map_err(|e| e.to_string())?;
    let gate = coverage_gate(&suite, &f, 1.0, &mut b).map_err(|e| e.to_string())?;
    let _ = b.shutdown();
    if gate.accepted || gate.report.ratio >= 1.0 {
        return Err(format!("starved suite accepted with ratio {}", gate.report.ratio));
    }
    Ok(format!(
        "{} accepted instances at 1.0; starved budget rejected at {:.3} ({:?})",
        inst.len(),
        gate.report.ratio,
        suite.shortfall
    ))
}

pub fn check_merge_examples() -> Result<String, String> {
    let mut inst = instance_named("merge_json_recursive");
    let examples = [
        (json!({"base": {"a": 1}, "update": {"a": 2}}), json!({"a": 2})),
        (json!({"base": [1, 2], "update": [3, 4]}), json!([1, 2, 3, 4])),
        (json!({"base": {"a": {"b": 1}}, "update": {"a": {"c": 2}}}), json!({"a": {"b": 1, "c": 2}})),
    ];
    for (inputs, expected) in &examples {
        let case = inst
            .cases
            .iter()
            .find(|c| &Value::Object(c.inputs.clone()) == inputs)
            .ok_or(format!("no stored case for {inputs}"))?;
        let stored = case.expected.as_ref().ok_or("case lacks Expected")?;
        if !deep_compare(stored, expected, 1e-6) {
            return Err(format!("{inputs}: stored {stored}, documented {expected}"));
        }
    }
    inst.cases.retain(|c| examples.iter().any(|(i, _)| &Value::Object(c.inputs.clone()) == i));
    let gt = inst.ground_truth.clone();
    let o = evaluate(&inst, &gt, "ground-truth");
    if o.class != OutcomeClass::Success || o.cases_passed != 3 {
        return Err(format!("ground truth on the examples: {:?} {}/{}", o.class, o.cases_passed, o.cases_total));
    }
    Ok(format!("3/3 documented examples stored and passing at tolerance {}", inst.manifest.tolerance))
}

/// Writes each instance's ground truth as its candidate and evaluates all.
pub fn check_self_evaluation() -> Result<String, String> {
    let run = fixture_run();
    let cands = scratch("self-eval-candidates");
    for i in instances() {
        std::fs::write(cands.join(format!("{}.py", i.manifest.id)), &i.ground_truth).map_err(|e| e.to_string())?;
    }
    let report = evaluate_dir(&run.out.join("instances"), &cands, "ground-truth", &BridgeConfig::default(), Exec::Parallel)
        .map_err(|e| e.to_string())?;
    let dist = |c: OutcomeClass| report.distribution.get(&c).copied().unwrap_or(0);
    let n = report.instances;
    if n == 0 || report.pass_at_1 != 1.0 || dist(OutcomeClass::Success) != n || !report.infrastructure_failures.is_empty() {
        return Err(format!(
            "pass@1 {} over {n}; distribution {:?}; failures {:?}",
            report.pass_at_1, report.distribution, report.infrastructure_failures
        ));
    }
    Ok(format!(
        "{n} instances, Pass@1 100%, distribution {}/{}/{}",
        100 * dist(OutcomeClass::Success) / n,
        100 * dist(OutcomeClass::ExecutionError) / n,
        100 * dist(OutcomeClass::TestFailure) / n
    ))
}

// ---- mutants ----

#[derive(Debug, serde::Deserialize)]
pub struct Mutant {
    pub function: String,
    pub find: String,
    pub replace: String,
}

#[derive(Debug, serde::Deserialize)]
struct MutantFile {
    mutant: Vec<Mutant>,
}

pub fn mutants() -> Vec<Mutant> {
    let text = std::fs::read_to_string(fixtures().join("mutants.toml")).expect("mutants.toml");
    toml::from_str::<MutantFile>(&text).expect("mutants parse").mutant
}

pub fn check_mutation_rigor() -> Result<String, String> {
    let all = instances();
    let list = mutants();
    let mut outcomes = Vec::new();
    let mut problems = Vec::new();
    for m in &list {
        let inst = all.iter().find(|i| i.manifest.function == m.function).ok_or(format!("no instance {}", m.function))?;
        if inst.ground_truth.matches(&m.find).count() != 1 {
            return Err(format!("{}: `{}` does not occur exactly once", m.function, m.find));
        }
        let src = inst.ground_truth.replace(&m.find, &m.replace);
        let o = evaluate(inst, &src, "mutant");
        if o.class == OutcomeClass::Success {
            problems.push(format!("{}: `{}` survived", m.function, m.replace));
        }
        outcomes.push(o);
    }
    if list.len() < 10 {
        problems.push(format!("only {} mutants", list.len()));
    }
    // Hand arithmetic on the raw counts.
    let high = outcomes
        .iter()
        .filter(|o| o.cases_total > 0 && o.cases_passed as f64 >= HIGH_PASS_RATIO * o.cases_total as f64)
        .count();
    let manifests: BTreeMap<_, _> = all.iter().map(|i| (i.manifest.id.clone(), i.manifest.clone())).collect();
    let report = aggregate(outcomes, &manifests).map_err(|e| e.to_string())?;
    let hand = high as f64 / list.len() as f64;
    if report.high_pass_count != high || (report.high_pass_fraction - hand).abs() > 1e-12 {
        problems.push(format!(
            "report says {} ({}), hand count {high} ({hand})",
            report.high_pass_count, report.high_pass_fraction
        ));
    }
    if problems.is_empty() {
        Ok(format!(
            "{} mutants, 0 false Success; {high}/{} at >=98% pass ratio in both report and hand count",
            list.len(),
            list.len()
        ))
    } else {
        Err(problems.join("; "))
    }
}

// ---- outcome taxonomy ----

fn params_of(i: &BenchmarkInstance) -> String {
    i.manifest.parameters.join(", ")
}

pub fn check_taxonomy() -> Result<String, String> {
    let mut problems = Vec::new();
    let all = instances();
    for i in &all {
        let name = &i.manifest.function;
        let broken = format!("def {name}({}:\n    return (\n", params_of(i));
        let wrong = format!("def {name}({}):\n    return ['__wrong__']\n", params_of(i));
        for (src, want, label) in [
            (broken.as_str(), OutcomeClass::ExecutionError, "syntax error"),
            (wrong.as_str(), OutcomeClass::TestFailure, "wrong logic"),
            (i.ground_truth.as_str(), OutcomeClass::Success, "ground truth"),
        ] {
            let o = evaluate(i, src, label);
            if o.class != want {
                problems.push(format!("{name} {label}: {:?}", o.class));
            }
        }
    }
    if problems.is_empty() {
        Ok(format!("{} instances x 3 candidates classified as expected", all.len()))
    } else {
        Err(problems.join("; "))
    }
}

// ---- deep_compare properties ----

pub fn json_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        (-50i64..50).prop_map(|i| json!(i)),
        (-50.0f64..50.0).prop_map(|f| json!(f)),
        "[a-c]{0,3}".prop_map(Value::String),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-c]{1,2}", inner, 0..4).prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

/// Perturbs numbers in `v` by small random amounts so pairs are near-equal.
pub fn perturbed(v: Value) -> BoxedStrategy<Value> {
    match v {
        Value::Number(n) => {
            let f = n.as_f64().unwrap_or(0.0);
            prop_oneof![Just(Value::Number(n)), (-1e-3f64..1e-3).prop_map(move |d| json!(f + d))].boxed()
        }
        Value::Array(xs) => xs.into_iter().map(perturbed).collect::<Vec<_>>().prop_map(Value::Array).boxed(),
        Value::Object(m) => {
            let keys: Vec<String> = m.keys().cloned().collect();
            let vals: Vec<BoxedStrategy<Value>> = m.into_iter().map(|(_, x)| perturbed(x)).collect();
            vals.prop_map(move |vs| Value::Object(keys.iter().cloned().zip(vs).collect())).boxed()
        }
        other => Just(other).boxed(),
    }
}

pub fn value_pair() -> impl Strategy<Value = (Value, Value)> {
    prop_oneof![
        (json_value(), json_value()),
        json_value().prop_flat_map(|a| (Just(a.clone()), perturbed(a))),
    ]
}

/// Straightforward reference: normalise both sides into a sorted tree
/// and walk them together.
pub fn naive_compare(a: &Value, b: &Value, tol: f64) -> bool {
    #[derive(Debug)]
    enum N {
        Null,
        Bool(bool),
        Int(i128),
        Float(f64),
        Str(String),
        List(Vec<N>),
        Map(BTreeMap<String, N>),
    }
    fn norm(v: &Value) -> N {
        match v {
            Value::Null => N::Null,
            Value::Bool(b) => N::Bool(*b),
            Value::Number(n) => match (n.as_i64(), n.as_u64()) {
                (Some(i), _) => N::Int(i as i128),
                (None, Some(u)) => N::Int(u as i128),
                _ => N::Float(n.as_f64().unwrap()),
            },
            Value::String(s) => N::Str(s.clone()),
            Value::Array(xs) => N::List(xs.iter().map(norm).collect()),
            Value::Object(m) => N::Map(m.iter().map(|(k, v)| (k.clone(), norm(v))).collect()),
        }
    }
    fn eq(a: &N, b: &N, tol: f64) -> bool {
        match (a, b) {
            (N::Null, N::Null) => true,
            (N::Bool(x), N::Bool(y)) => x == y,
            (N::Int(x), N::Int(y)) => ((x - y).abs() as f64) <= tol,
            (N::Int(x), N::Float(y)) => (*x as f64 - y).abs() <= tol,
            (N::Float(x), N::Int(y)) => (x - *y as f64).abs() <= tol,
            (N::Float(x), N::Float(y)) => (x - y).abs() <= tol,
            (N::Str(x), N::Str(y)) => x == y,
            (N::List(x), N::List(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| eq(p, q, tol)),
            (N::Map(x), N::Map(y)) => {
                x.len() == y.len() && x.iter().zip(y).all(|((k1, v1), (k2, v2))| k1 == k2 && eq(v1, v2, tol))
            }
            _ => false,
        }
    }
    eq(&norm(a), &norm(b), tol)
}

pub fn check_deep_compare_properties(cases: u32) -> Result<String, String> {
    let mut runner = TestRunner::new(PtConfig {
        cases,
        failure_persistence: None,
        ..PtConfig::default()
    });
    let tols = prop::sample::select(vec![0.0, 1e-9, 1e-6, 1e-4, 1e-3, 1e-2, 1.0]);
    runner
        .run(&(value_pair(), tols.clone(), tols), |((a, b), t1, t2)| {
            prop_assert_eq!(deep_compare(&a, &b, 0.0), deep_compare(&b, &a, 0.0), "symmetry at 0");
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            if deep_compare(&a, &b, lo) {
                prop_assert!(deep_compare(&a, &b, hi), "monotonicity {} -> {}", lo, hi);
            }
            prop_assert_eq!(deep_compare(&a, &b, t1), naive_compare(&a, &b, t1), "reference at {}", t1);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{cases} random pairs: symmetric, monotone, agree with the reference"))
}

pub fn suite_bytes(params: SuiteParams) -> String {
    cases_json(&merge_suite(params).cases)
}
