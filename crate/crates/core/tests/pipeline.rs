mod common;

use std::collections::BTreeMap;
use std::path::Path;

use benchforge::orchestrator::{run_pipeline, JudgeProvider, Stage, RUN_MANIFEST};
use benchforge::package::validate_instance;
use benchforge::scopes::AllowList;
use common::*;

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().map(Result::unwrap) {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn fixture_run_is_byte_identical_across_roots() {
    let first = fixture_run();
    assert!(!first.manifest.accepted.is_empty());
    let other = scratch("pipeline-second-root");
    run_pipeline(&fixture_config(&other)).unwrap();
    assert_eq!(
        std::fs::read(first.out.join(RUN_MANIFEST)).unwrap(),
        std::fs::read(other.join(RUN_MANIFEST)).unwrap()
    );
    let a = tree_bytes(&first.out.join("instances"));
    let b = tree_bytes(&other.join("instances"));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{k} differs");
    }
}

#[test]
fn interrupted_run_resumes_to_the_same_manifest() {
    let out = scratch("pipeline-resume");
    let mut partial = fixture_config(&out);
    partial.stages.stop_after = Stage::Synthesize;
    let p = run_pipeline(&partial).unwrap();
    assert!(p.manifest.accepted.is_empty());
    assert!(p.manifest.dispositions.iter().any(|d| d.outcome == "pending"));
    assert!(p.manifest.consistency_problems().is_empty(), "{:?}", p.manifest.consistency_problems());

    std::fs::create_dir_all(out.join("instances").join("stale000000")).unwrap();
    let resumed = run_pipeline(&fixture_config(&out)).unwrap();
    assert!(resumed.cache.hits > 0, "{:?}", resumed.cache);
    assert!(!out.join("instances").join("stale000000").exists());
    assert_eq!(
        std::fs::read(out.join(RUN_MANIFEST)).unwrap(),
        std::fs::read(fixture_run().out.join(RUN_MANIFEST)).unwrap()
    );
    let again = run_pipeline(&fixture_config(&out)).unwrap();
    assert_eq!(again.cache.misses, 0, "{:?}", again.cache);
    assert_eq!(again.manifest, resumed.manifest);
}

#[test]
fn cc_range_50_to_60_accepts_nothing() {
    let out = scratch("pipeline-cc-range");
    let mut c = fixture_config(&out);
    c.filter.cc_min = 50;
    c.filter.cc_max = 60;
    let m = run_pipeline(&c).unwrap().manifest;
    assert_eq!(m.counts.dry_run_accepted, 0);
    assert_eq!(m.counts.cc_passed, 0);
    assert!(m.counts.testable > 0);
    let rejected = m.dispositions.iter().filter(|d| d.outcome == "cc-out-of-range").count();
    assert_eq!(rejected, m.counts.testable);
    assert!(m.consistency_problems().is_empty(), "{:?}", m.consistency_problems());
    assert!(m.funnel_markdown().contains("| complexity | cc-out-of-range |"));
}

#[test]
fn funnel_is_conserved_and_instances_validate() {
    let run = fixture_run();
    let m = &run.manifest;
    assert!(m.consistency_problems().is_empty(), "{:?}", m.consistency_problems());
    assert_eq!(m.counts.recalled, 30);
    assert_eq!(m.dispositions.len(), 30);
    assert_eq!(m.counts.self_contained + m.counts.weakly_self_contained + m.counts.discarded, m.counts.parsed);
    let outcomes: Vec<&str> = m.dispositions.iter().map(|d| d.outcome.as_str()).collect();
    for expected in ["no-return-path", "constant-only", "cc-out-of-range", "duplicate", "unsuitable", "discarded-dependencies", "method"] {
        assert!(outcomes.contains(&expected), "{expected} missing from {outcomes:?}");
    }
    let allow = AllowList::default_list();
    for id in &m.accepted {
        let v = validate_instance(&run.out.join("instances").join(id), &allow);
        assert!(v.ok(), "{id}: {:?}", v.problems);
    }
    let on_disk = std::fs::read_dir(run.out.join("instances")).unwrap().count();
    assert_eq!(on_disk, m.accepted.len());
}

#[test]
fn unavailable_judge_skips_instead_of_accepting() {
    let out = scratch("pipeline-no-judge");
    let mut c = fixture_config(&out);
    c.judge.provider = JudgeProvider::Http;
    c.stages.stop_after = Stage::Judge;
    std::env::remove_var("BENCHFORGE_JUDGE_URL");
    let m = run_pipeline(&c).unwrap().manifest;
    assert_eq!(m.counts.judged, 0);
    assert!(m.judge_provider.starts_with("unavailable"));
    let skipped = m.dispositions.iter().filter(|d| d.outcome == "judge-unavailable").count();
    assert_eq!(skipped, m.counts.deduped);
    assert!(m.consistency_problems().is_empty(), "{:?}", m.consistency_problems());
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let out = scratch("pipeline-sequential");
    let mut c = fixture_config(&out);
    c.stages.parallel = false;
    let mut seq = run_pipeline(&c).unwrap().manifest;
    assert!(!seq.config.stages.parallel);
    seq.config.stages.parallel = true;
    assert_eq!(seq.to_json(), fixture_run().manifest.to_json());
    assert_eq!(
        tree_bytes(&out.join("instances")),
        tree_bytes(&fixture_run().out.join("instances"))
    );
}
