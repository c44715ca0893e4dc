mod common;

use std::collections::HashSet;

use benchforge::corpus::SourceFile;
use benchforge::flow::{build_cfg, cyclomatic, dedup_indices, normalized_hash, CcRange};
use benchforge::orchestrator::{function_seed, Cache};
use benchforge::synth::{GenSpec, LOWER, PRINTABLE};
use benchforge::synth::{canonical_json, pylit::parse_literal};
use benchforge::syntax::SyntaxTree;
use benchforge::syntax::{extract_functions, parse_source, FunctionRecord};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

fn record(src: &str) -> FunctionRecord {
    let f = SourceFile::new("gen.py", src.as_bytes().to_vec(), None, None);
    let tree = parse_source(&f).expect("generated source parses");
    extract_functions(&tree, &f).records.into_iter().next().expect("one function")
}

fn reorder_keys(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut out = Map::new();
            for (k, x) in m.iter().rev() {
                out.insert(k.clone(), reorder_keys(x));
            }
            out.into()
        }
        Value::Array(a) => a.iter().map(reorder_keys).collect(),
        other => other.clone(),
    }
}

fn py_literal(v: &Value) -> String {
    match v {
        Value::Null => "None".into(),
        Value::Bool(true) => "True".into(),
        Value::Bool(false) => "False".into(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => format!("'{s}'"),
        Value::Array(a) => format!("[{}]", a.iter().map(py_literal).collect::<Vec<_>>().join(", ")),
        Value::Object(m) => format!(
            "{{{}}}",
            m.iter().map(|(k, x)| format!("'{k}': {}", py_literal(x))).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn simple_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i32>().prop_map(|n| Value::from(n as i64)),
        "[a-z0-9 ]{0,6}".prop_map(Value::String),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-z]{1,3}", inner, 0..4).prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn gen_spec() -> impl Strategy<Value = GenSpec> {
    let leaf = prop_oneof![
        (-50i64..50, 0i64..100).prop_map(|(lo, w)| GenSpec::int(lo, lo + w)),
        (0.5f64..1e6).prop_map(|bound| GenSpec::Float { bound }),
        (0usize..12).prop_map(|n| GenSpec::text(LOWER, n)),
        (0usize..12).prop_map(|n| GenSpec::text(PRINTABLE, n)),
        Just(GenSpec::Boolean),
        Just(GenSpec::json_like((-100, 100))),
    ];
    leaf.prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), 0usize..6).prop_map(|(s, n)| GenSpec::list(s, n)),
            (inner.clone(), 0usize..4).prop_map(|(s, n)| GenSpec::map(s, n)),
            inner.prop_map(GenSpec::nullable),
        ]
    })
}

#[test]
fn deep_compare_is_reflexive_symmetric_and_matches_reference() {
    check_deep_compare_properties(512).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_json_ignores_key_order(v in json_value()) {
        prop_assert_eq!(canonical_json(&v), canonical_json(&reorder_keys(&v)));
        let back: Value = serde_json::from_str(&canonical_json(&v)).unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn samples_are_admitted_and_seeded(spec in gen_spec(), seed in any::<u64>()) {
        let mut a = ChaCha8Rng::seed_from_u64(seed);
        let mut b = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let v = spec.sample(&mut a);
            prop_assert!(spec.admits(&v), "{:?} does not admit {}", spec, v);
            prop_assert_eq!(v, spec.sample(&mut b));
        }
        for e in spec.edges() {
            prop_assert!(spec.admits(&e), "edge {} not admitted by {:?}", e, spec);
        }
    }

    #[test]
    fn dedup_keeps_first_occurrence_of_each_key(keys in prop::collection::vec(0u8..6, 0..40)) {
        let kept = dedup_indices(&keys);
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        let distinct: HashSet<u8> = keys.iter().copied().collect();
        prop_assert_eq!(kept.len(), distinct.len());
        for &i in &kept {
            prop_assert!(!keys[..i].contains(&keys[i]));
        }
    }

    #[test]
    fn cache_key_respects_part_boundaries(a in "[a-c]{0,4}", b in "[a-c]{0,4}") {
        let joined = format!("{a}{b}");
        prop_assert_eq!(Cache::key(&[a.as_bytes(), b.as_bytes()]), Cache::key(&[a.as_bytes(), b.as_bytes()]));
        if !b.is_empty() {
            prop_assert_ne!(Cache::key(&[a.as_bytes(), b.as_bytes()]), Cache::key(&[joined.as_bytes(), b"".as_slice()]));
        }
    }

    #[test]
    fn function_seed_is_a_pure_function(seed in any::<u64>(), id in "[0-9a-f]{12}") {
        prop_assert_eq!(function_seed(seed, &id), function_seed(seed, &id));
    }

    #[test]
    fn python_literals_round_trip(v in simple_value()) {
        prop_assert_eq!(parse_literal(&py_literal(&v)), Some(v));
    }

    #[test]
    fn cc_range_membership(lo in 0u32..20, w in 0u32..20, cc in 0u32..60) {
        let r = CcRange { min: lo, max: lo + w };
        prop_assert_eq!(r.contains(cc), cc >= lo && cc <= lo + w);
    }

    #[test]
    fn parser_never_panics_and_spans_nest(src in "[a-z():=+\\n 0-9\\[\\]'\"#]{0,80}") {
        if let Ok(tree) = SyntaxTree::parse(&src) {
            for id in tree.descendants(tree.root()) {
                if let Some(p) = tree.parent(id) {
                    let (s, ps) = (tree.span(id), tree.span(p));
                    prop_assert!(ps.start <= s.start && s.end <= ps.end);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Sequential decisions each add one to the complexity; loops too.
    #[test]
    fn cyclomatic_counts_sequential_decisions(ifs in 0usize..6, loops in 0usize..4, elifs in 0usize..3) {
        let mut src = String::from("def f(x, items):\n    total = 0\n");
        for i in 0..ifs {
            src.push_str(&format!("    if x > {i}:\n        total += {i}\n"));
        }
        if elifs > 0 {
            src.push_str("    if x == -1:\n        total -= 1\n");
            for j in 0..elifs {
                src.push_str(&format!("    elif x == -{}:\n        total -= {}\n", j + 2, j + 2));
            }
            src.push_str("    else:\n        total += 100\n");
        }
        for _ in 0..loops {
            src.push_str("    for item in items:\n        total += item\n");
        }
        src.push_str("    return total\n");
        let cfg = build_cfg(&record(&src)).unwrap();
        let extra = if elifs > 0 { elifs + 1 } else { 0 };
        prop_assert_eq!(cyclomatic(&cfg).unwrap() as usize, 1 + ifs + loops + extra);
        prop_assert_eq!(path_basis_size(&cfg), 1 + ifs + loops + extra);
    }

    /// Renaming locals and reformatting does not change the normalized hash.
    #[test]
    fn normalized_hash_ignores_formatting(name in "[a-z]{1,6}", blank in 0usize..3) {
        let a = record("def f(x):\n    y = x + 1\n    return y\n");
        let padding = "\n".repeat(blank);
        let b = record(&format!("def f(x):\n{padding}    y = x + 1  # {name}\n\n    return y\n"));
        prop_assert_eq!(normalized_hash(&a), normalized_hash(&b));
    }
}
