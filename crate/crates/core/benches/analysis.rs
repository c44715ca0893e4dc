//! Sequential versus parallel static analysis over a replicated fixture corpus.

use std::path::Path;

use benchforge::corpus::SourceFile;
use benchforge::flow::{build_cfg, cyclomatic, normalized_hash};
use benchforge::par::{self, Exec};
use benchforge::scopes::{analyze_function, classify, AllowList};
use benchforge::syntax::{extract_functions, parse_source};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const COPIES: usize = 8;

fn corpus() -> Vec<SourceFile> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus");
    let mut files = Vec::new();
    for name in ["textutil.py", "mathutil.py", "structures.py"] {
        let bytes = std::fs::read(dir.join(name)).expect("fixture exists");
        for i in 0..COPIES {
            files.push(SourceFile::new(format!("copy{i}/{name}"), bytes.clone(), None, None));
        }
    }
    files
}

/// Parse, extract, classify and measure every function in one file.
fn analyze(file: &SourceFile, allow: &AllowList) -> usize {
    let Ok(tree) = parse_source(file) else { return 0 };
    let mut score = 0;
    for r in extract_functions(&tree, file).records {
        let cls = classify(&analyze_function(&r), allow);
        let cc = build_cfg(&r).ok().and_then(|g| cyclomatic(&g).ok()).unwrap_or(0);
        score += cc as usize + cls as usize + normalized_hash(&r).len();
    }
    score
}

fn bench(c: &mut Criterion) {
    let files = corpus();
    let allow = AllowList::default_list();
    let mut group = c.benchmark_group("analysis");
    group.sample_size(20);
    for (label, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        group.bench_with_input(BenchmarkId::new(label, files.len()), &files, |b, files| {
            b.iter(|| par::map(exec, files, |f| analyze(f, &allow)).into_iter().sum::<usize>())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
