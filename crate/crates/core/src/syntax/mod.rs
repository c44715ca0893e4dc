//! Parsing and function extraction.

mod tree;

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SourceFile;

pub use tree::{NodeId, SyntaxNode, SyntaxTree, TRIVIA};

#[derive(Debug, Error)]
pub enum SyntaxError {
    #[error("subject-language grammar unavailable: {0}")]
    GrammarUnavailable(String),
    #[error("{0} is not valid UTF-8 text")]
    NotText(String),
}

/// Parses one source file into a lossless tree.
pub fn parse_source(file: &SourceFile) -> Result<SyntaxTree, SyntaxError> {
    let text = file
        .text()
        .ok_or_else(|| SyntaxError::NotText(file.path.clone()))?;
    SyntaxTree::parse(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Positional,
    KeywordOnly,
    VarPositional,
    VarKeyword,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub hint: Option<String>,
    pub default: Option<String>,
    pub kind: ParamKind,
}

/// One name bound by an import statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImportBinding {
    /// Name the import introduces into scope (`np` for `import numpy as np`).
    pub local_name: String,
    /// Dotted module path as written; relative imports keep their leading dots.
    pub module: String,
    /// Imported member for `from m import name`; `None` for module imports.
    pub imported: Option<String>,
    /// `from m import *`
    pub star: bool,
    /// Full text of the import statement.
    pub statement: String,
}

impl ImportBinding {
    /// Top-level package (`numpy` for `numpy.linalg`). Relative imports have no
    /// library and return `None`.
    pub fn library(&self) -> Option<&str> {
        if self.module.starts_with('.') {
            None
        } else {
            self.module.split('.').next()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: String,
    pub commit: Option<String>,
    pub span: Range<usize>,
}

/// A function definition pulled out of a source file.
#[derive(Debug, Clone)]
pub struct FunctionRecord {
    pub name: String,
    pub qualified_name: String,
    pub params: Vec<Parameter>,
    pub return_hint: Option<String>,
    /// Definition text, dedented to column zero.
    pub source_text: String,
    pub docstring: Option<String>,
    pub imports_in_scope: Vec<ImportBinding>,
    pub provenance: Provenance,
    pub is_method: bool,
    pub decorated: bool,
    pub is_async: bool,
    /// Tree of `source_text` on its own.
    pub syntax: Arc<SyntaxTree>,
    /// The `function_definition` node inside `syntax`.
    pub def_node: NodeId,
}

impl FunctionRecord {
    /// Stable identifier for reports: `path::qualified_name@start`.
    pub fn id(&self) -> String {
        format!(
            "{}::{}@{}",
            self.provenance.path, self.qualified_name, self.provenance.span.start
        )
    }

    pub fn body_node(&self) -> Option<NodeId> {
        self.syntax.child_by_field(self.def_node, "body")
    }

    /// The `def` line(s) up to and including the colon.
    pub fn signature(&self) -> String {
        let tree = &self.syntax;
        let start = tree.span(self.def_node).start;
        let end = self
            .body_node()
            .map(|b| tree.span(b).start)
            .unwrap_or_else(|| tree.span(self.def_node).end);
        let head = &tree.source()[start..end];
        head.trim_end().to_string()
    }

    /// Import statements referenced by name from `names`, deduplicated, in source order.
    pub fn import_statements_for<'a>(&'a self, names: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let wanted: std::collections::BTreeSet<&str> = names.into_iter().collect();
        let mut out: Vec<String> = Vec::new();
        for b in &self.imports_in_scope {
            if wanted.contains(b.local_name.as_str()) {
                let stmt = render_import(b);
                if !out.contains(&stmt) {
                    out.push(stmt);
                }
            }
        }
        out
    }
}

fn render_import(b: &ImportBinding) -> String {
    match &b.imported {
        Some(member) if member == &b.local_name => format!("from {} import {}", b.module, member),
        Some(member) => format!("from {} import {} as {}", b.module, member, b.local_name),
        None => {
            if b.module == b.local_name || b.module.split('.').next() == Some(b.local_name.as_str()) {
                format!("import {}", b.module)
            } else {
                format!("import {} as {}", b.module, b.local_name)
            }
        }
    }
}

/// A definition that was found but produced no record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDefinition {
    pub name: String,
    pub path: String,
    pub span: Range<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub records: Vec<FunctionRecord>,
    pub skipped: Vec<SkippedDefinition>,
}

/// Extracts every module-level function and class method. Nested functions
/// stay part of their parent's body.
pub fn extract_functions(tree: &SyntaxTree, file: &SourceFile) -> Extraction {
    let module = module_path(&file.path);
    let mut cx = ExtractCx {
        tree,
        file,
        out: Extraction::default(),
    };
    let module_imports = collect_imports(tree, tree.root());
    cx.walk_block(tree.root(), &module, &module_imports, false);
    cx.out
}

struct ExtractCx<'a> {
    tree: &'a SyntaxTree,
    file: &'a SourceFile,
    out: Extraction,
}

impl ExtractCx<'_> {
    fn walk_block(&mut self, block: NodeId, prefix: &str, imports: &[ImportBinding], in_class: bool) {
        let tree = self.tree;
        for stmt in tree.named_children(block).collect::<Vec<_>>() {
            match tree.kind(stmt) {
                "function_definition" => self.function(stmt, prefix, imports, in_class, false),
                "decorated_definition" => {
                    if let Some(def) = tree.child_by_field(stmt, "definition") {
                        match tree.kind(def) {
                            "function_definition" => self.function(def, prefix, imports, in_class, true),
                            "class_definition" => self.class(def, prefix, imports),
                            _ => {}
                        }
                    }
                }
                "class_definition" => self.class(stmt, prefix, imports),
                // Module-level compound statements may hold definitions.
                "if_statement" | "try_statement" | "with_statement" | "elif_clause" | "else_clause"
                | "except_clause" | "finally_clause" | "block" => {
                    for child in tree.named_children(stmt).collect::<Vec<_>>() {
                        if matches!(
                            tree.kind(child),
                            "block" | "elif_clause" | "else_clause" | "except_clause" | "finally_clause"
                        ) {
                            self.walk_block(child, prefix, imports, in_class);
                        }
                    }
                }
                "ERROR" => {
                    // Definitions inside an error region are not extractable.
                    for d in tree.descendants(stmt) {
                        if tree.kind(d) == "function_definition" {
                            let name = tree
                                .child_by_field(d, "name")
                                .map(|n| tree.text(n).to_string())
                                .unwrap_or_default();
                            self.skip(name, tree.span(d), "under-error-node");
                        }
                    }
                }
                _ => {}
            }
        }
    }

    fn class(&mut self, class: NodeId, prefix: &str, imports: &[ImportBinding]) {
        let tree = self.tree;
        let name = tree
            .child_by_field(class, "name")
            .map(|n| tree.text(n).to_string())
            .unwrap_or_default();
        let Some(body) = tree.child_by_field(class, "body") else {
            return;
        };
        let mut scoped = imports.to_vec();
        scoped.extend(collect_imports(tree, body));
        self.walk_block(body, &join(prefix, &name), &scoped, true);
    }

    fn skip(&mut self, name: String, span: Range<usize>, reason: &str) {
        self.out.skipped.push(SkippedDefinition {
            name,
            path: self.file.path.clone(),
            span,
            reason: reason.to_string(),
        });
    }

    fn function(&mut self, def: NodeId, prefix: &str, imports: &[ImportBinding], in_class: bool, decorated: bool) {
        let tree = self.tree;
        let name = tree
            .child_by_field(def, "name")
            .map(|n| tree.text(n).to_string())
            .unwrap_or_default();
        if tree.has_error(def) || tree.under_error(def) {
            self.skip(name, tree.span(def), "contains-syntax-error");
            return;
        }
        let source_text = dedent_definition(tree, def);
        let syntax = match SyntaxTree::parse(&source_text) {
            Ok(t) => Arc::new(t),
            Err(e) => {
                self.skip(name, tree.span(def), &format!("reparse-failed: {e}"));
                return;
            }
        };
        let Some(local_def) = syntax
            .named_children(syntax.root())
            .find(|&c| syntax.kind(c) == "function_definition")
        else {
            self.skip(name, tree.span(def), "reparse-lost-definition");
            return;
        };
        let params = match parameters(&syntax, local_def) {
            Ok(p) => p,
            Err(reason) => {
                self.skip(name, tree.span(def), &reason);
                return;
            }
        };
        let return_hint = syntax
            .child_by_field(local_def, "return_type")
            .map(|n| syntax.text(n).to_string());
        let docstring = docstring(&syntax, local_def);
        let is_async = syntax.has_token(local_def, "async");
        self.out.records.push(FunctionRecord {
            qualified_name: join(prefix, &name),
            name,
            params,
            return_hint,
            source_text,
            docstring,
            imports_in_scope: imports.to_vec(),
            provenance: Provenance {
                path: self.file.path.clone(),
                commit: self.file.commit.clone(),
                span: tree.span(def),
            },
            is_method: in_class,
            decorated,
            is_async,
            syntax,
            def_node: local_def,
        });
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// `pkg/sub/mod.py` → `pkg.sub.mod`; `pkg/__init__.py` → `pkg`.
pub fn module_path(path: &str) -> String {
    let trimmed = path.strip_suffix(".py").unwrap_or(path);
    let mut parts: Vec<&str> = trimmed.split(['/', '\\']).filter(|p| !p.is_empty()).collect();
    if parts.last() == Some(&"__init__") {
        parts.pop();
    }
    parts.join(".")
}

fn dedent_definition(tree: &SyntaxTree, def: NodeId) -> String {
    let span = tree.span(def);
    let src = tree.source();
    let line_start = src[..span.start].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let indent = &src[line_start..span.start];
    let text = &src[span.clone()];
    if indent.is_empty() || !indent.chars().all(|c| c == ' ' || c == '\t') {
        let mut s = text.to_string();
        s.push('\n');
        return s;
    }
    let mut out = String::with_capacity(text.len() + 1);
    for (i, line) in text.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
            out.push_str(line.strip_prefix(indent).unwrap_or(line.trim_start_matches([' ', '\t'])));
        } else {
            out.push_str(line);
        }
    }
    out.push('\n');
    out
}

fn parameters(tree: &SyntaxTree, def: NodeId) -> Result<Vec<Parameter>, String> {
    let Some(params) = tree.child_by_field(def, "parameters") else {
        return Ok(Vec::new());
    };
    let mut out: Vec<Parameter> = Vec::new();
    let mut keyword_only = false;
    for p in tree.named_children(params).collect::<Vec<_>>() {
        let plain = if keyword_only { ParamKind::KeywordOnly } else { ParamKind::Positional };
        let (name, hint, default, kind) = match tree.kind(p) {
            "identifier" => (tree.text(p).to_string(), None, None, plain),
            "typed_parameter" => {
                let hint = tree.child_by_field(p, "type").map(|t| tree.text(t).to_string());
                let inner = tree
                    .named_children(p)
                    .find(|&c| tree.node(c).field != Some("type"))
                    .ok_or("malformed typed parameter")?;
                match tree.kind(inner) {
                    "identifier" => (tree.text(inner).to_string(), hint, None, plain),
                    "list_splat_pattern" => {
                        keyword_only = true;
                        (splat_name(tree, inner)?, hint, None, ParamKind::VarPositional)
                    }
                    "dictionary_splat_pattern" => (splat_name(tree, inner)?, hint, None, ParamKind::VarKeyword),
                    other => return Err(format!("unsupported parameter form {other}")),
                }
            }
            "default_parameter" | "typed_default_parameter" => {
                let name = tree.child_by_field(p, "name").ok_or("parameter without name")?;
                if tree.kind(name) != "identifier" {
                    return Err("unsupported parameter form".into());
                }
                (
                    tree.text(name).to_string(),
                    tree.child_by_field(p, "type").map(|t| tree.text(t).to_string()),
                    tree.child_by_field(p, "value").map(|v| tree.text(v).to_string()),
                    plain,
                )
            }
            "list_splat_pattern" => {
                keyword_only = true;
                (splat_name(tree, p)?, None, None, ParamKind::VarPositional)
            }
            "dictionary_splat_pattern" => (splat_name(tree, p)?, None, None, ParamKind::VarKeyword),
            "keyword_separator" => {
                keyword_only = true;
                continue;
            }
            "positional_separator" => continue,
            other => return Err(format!("unsupported parameter form {other}")),
        };
        if out.iter().any(|q| q.name == name) {
            return Err(format!("duplicate parameter {name}"));
        }
        out.push(Parameter { name, hint, default, kind });
    }
    Ok(out)
}

fn splat_name(tree: &SyntaxTree, node: NodeId) -> Result<String, String> {
    tree.named_children(node)
        .find(|&c| tree.kind(c) == "identifier")
        .map(|c| tree.text(c).to_string())
        .ok_or_else(|| "splat parameter without name".to_string())
}

/// Body node's leading string literal, if any, without its quotes.
pub fn docstring_node(tree: &SyntaxTree, def: NodeId) -> Option<NodeId> {
    let body = tree.child_by_field(def, "body")?;
    let first = tree.named_children(body).next()?;
    if tree.kind(first) != "expression_statement" {
        return None;
    }
    let mut kids = tree.named_children(first);
    let s = kids.next()?;
    if kids.next().is_some() || tree.kind(s) != "string" {
        return None;
    }
    Some(first)
}

fn docstring(tree: &SyntaxTree, def: NodeId) -> Option<String> {
    let stmt = docstring_node(tree, def)?;
    let s = tree.named_children(stmt).next()?;
    let start = tree.children(s).iter().find(|&&c| tree.kind(c) == "string_start")?;
    let end = tree.children(s).iter().find(|&&c| tree.kind(c) == "string_end")?;
    let inner = tree.span(*start).end..tree.span(*end).start;
    Some(tree.source()[inner].to_string())
}

/// Import bindings introduced directly in `block` (and in module-level
/// compound statements when `block` is the module).
pub fn collect_imports(tree: &SyntaxTree, block: NodeId) -> Vec<ImportBinding> {
    let mut out = Vec::new();
    let mut stack: Vec<NodeId> = tree.named_children(block).collect();
    stack.reverse();
    while let Some(stmt) = stack.pop() {
        match tree.kind(stmt) {
            "import_statement" | "import_from_statement" | "future_import_statement" => {
                out.extend(import_bindings(tree, stmt));
            }
            "if_statement" | "try_statement" | "with_statement" | "elif_clause" | "else_clause"
            | "except_clause" | "finally_clause" | "block" => {
                let mut kids: Vec<NodeId> = tree.named_children(stmt).collect();
                kids.reverse();
                stack.extend(kids);
            }
            _ => {}
        }
    }
    out
}

/// Bindings introduced by a single import statement.
pub fn import_bindings(tree: &SyntaxTree, stmt: NodeId) -> Vec<ImportBinding> {
    let statement = tree.text(stmt).to_string();
    let mut out = Vec::new();
    match tree.kind(stmt) {
        "import_statement" => {
            for name in tree.children_by_field(stmt, "name").collect::<Vec<_>>() {
                match tree.kind(name) {
                    "dotted_name" => {
                        let module = tree.text(name).to_string();
                        let local = module.split('.').next().unwrap_or_default().to_string();
                        out.push(ImportBinding { local_name: local, module, imported: None, star: false, statement: statement.clone() });
                    }
                    "aliased_import" => {
                        let module = tree.child_by_field(name, "name").map(|n| tree.text(n).to_string()).unwrap_or_default();
                        let alias = tree.child_by_field(name, "alias").map(|n| tree.text(n).to_string()).unwrap_or_default();
                        out.push(ImportBinding { local_name: alias, module, imported: None, star: false, statement: statement.clone() });
                    }
                    _ => {}
                }
            }
        }
        "import_from_statement" | "future_import_statement" => {
            let module = if tree.kind(stmt) == "future_import_statement" {
                "__future__".to_string()
            } else {
                tree.child_by_field(stmt, "module_name").map(|n| tree.text(n).to_string()).unwrap_or_default()
            };
            if tree.named_children(stmt).any(|c| tree.kind(c) == "wildcard_import") {
                out.push(ImportBinding { local_name: "*".into(), module: module.clone(), imported: None, star: true, statement: statement.clone() });
            }
            for name in tree.children_by_field(stmt, "name").collect::<Vec<_>>() {
                match tree.kind(name) {
                    "dotted_name" => {
                        let member = tree.text(name).to_string();
                        out.push(ImportBinding { local_name: member.clone(), module: module.clone(), imported: Some(member), star: false, statement: statement.clone() });
                    }
                    "aliased_import" => {
                        let member = tree.child_by_field(name, "name").map(|n| tree.text(n).to_string()).unwrap_or_default();
                        let alias = tree.child_by_field(name, "alias").map(|n| tree.text(n).to_string()).unwrap_or_default();
                        out.push(ImportBinding { local_name: alias, module: module.clone(), imported: Some(member), star: false, statement: statement.clone() });
                    }
                    _ => {}
                }
            }
        }
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(path: &str, src: &str) -> SourceFile {
        SourceFile::new(path, src.as_bytes().to_vec(), None, None)
    }

    fn extract(src: &str) -> Extraction {
        let f = file("pkg/mod.py", src);
        let tree = parse_source(&f).unwrap();
        extract_functions(&tree, &f)
    }

    #[test]
    fn single_function_definition() {
        let src = "def f(x):\n    return x\n";
        let tree = SyntaxTree::parse(src).unwrap();
        let defs = tree
            .descendants(tree.root())
            .into_iter()
            .filter(|&n| tree.kind(n) == "function_definition")
            .count();
        assert_eq!(defs, 1);
    }

    #[test]
    fn two_functions_and_a_method() {
        let src = "def a():\n    return 1\n\ndef b(x):\n    return x\n\nclass K:\n    def m(self, y):\n        return y\n";
        let ex = extract(src);
        assert_eq!(ex.records.len(), 3);
        let m = &ex.records[2];
        assert_eq!(m.qualified_name, "pkg.mod.K.m");
        assert!(m.is_method);
        assert_eq!(m.source_text, "def m(self, y):\n    return y\n");
    }

    #[test]
    fn hints_defaults_and_return() {
        let ex = extract("def g(a: int, b: str = 'x') -> bool:\n    return a > len(b)\n");
        let r = &ex.records[0];
        assert_eq!(r.params.len(), 2);
        assert_eq!(r.params[0].hint.as_deref(), Some("int"));
        assert_eq!(r.params[1].default.as_deref(), Some("'x'"));
        assert_eq!(r.params.iter().filter(|p| p.default.is_some()).count(), 1);
        assert_eq!(r.return_hint.as_deref(), Some("bool"));
    }

    #[test]
    fn variadic_and_keyword_only() {
        let ex = extract("def h(a, *rest, key=None, **kw):\n    return a\n");
        let kinds: Vec<ParamKind> = ex.records[0].params.iter().map(|p| p.kind).collect();
        assert_eq!(
            kinds,
            vec![ParamKind::Positional, ParamKind::VarPositional, ParamKind::KeywordOnly, ParamKind::VarKeyword]
        );
    }

    #[test]
    fn docstring_is_verbatim() {
        let ex = extract("def f(x):\n    \"\"\"Doc line.\n\n    More.\n    \"\"\"\n    return x\n");
        assert_eq!(ex.records[0].docstring.as_deref(), Some("Doc line.\n\n    More.\n    "));
    }

    #[test]
    fn imports_in_scope_cover_module_and_class() {
        let src = "import numpy as np\nfrom collections import Counter\n\nclass K:\n    import re\n    def m(self):\n        return 1\n\ndef f(x):\n    return x\n";
        let ex = extract(src);
        let f = ex.records.iter().find(|r| r.name == "f").unwrap();
        let m = ex.records.iter().find(|r| r.name == "m").unwrap();
        assert_eq!(f.imports_in_scope.len(), 2);
        assert_eq!(m.imports_in_scope.len(), 3);
        assert_eq!(f.imports_in_scope[0].library(), Some("numpy"));
        assert_eq!(f.imports_in_scope[1].imported.as_deref(), Some("Counter"));
    }

    #[test]
    fn nested_functions_are_not_records() {
        let ex = extract("def outer(x):\n    def inner(y):\n        return y\n    return inner(x)\n");
        assert_eq!(ex.records.len(), 1);
        assert_eq!(ex.records[0].name, "outer");
    }

    #[test]
    fn decorated_functions_are_flagged() {
        let ex = extract("@cache\ndef f(x):\n    return x\n");
        assert!(ex.records[0].decorated);
    }

    #[test]
    fn functions_before_a_syntax_error_survive() {
        let src = "def ok(x):\n    return x + 1\n\ndef broken(:\n    pass\n";
        let ex = extract(src);
        assert!(ex.records.iter().any(|r| r.name == "ok"));
        assert!(!ex.records.iter().any(|r| r.name == "broken"));
        assert_eq!(ex.skipped.len(), 1);
    }

    #[test]
    fn merge_json_recursive_signature() {
        let src = "def merge_json_recursive(base, update):\n    if not isinstance(base, dict) or not isinstance(update, dict):\n        if isinstance(base, list) and isinstance(update, list):\n            return base + update\n        return update\n    merged = base.copy()\n    for key, value in update.items():\n        if key in merged:\n            merged[key] = merge_json_recursive(merged[key], value)\n        else:\n            merged[key] = value\n    return merged\n";
        let ex = extract(src);
        let r = &ex.records[0];
        assert_eq!(r.name, "merge_json_recursive");
        assert_eq!(r.params.len(), 2);
        assert!(r.params.iter().all(|p| p.hint.is_none()));
        assert_eq!(r.signature(), "def merge_json_recursive(base, update):");
    }

    #[test]
    fn module_paths() {
        assert_eq!(module_path("pkg/sub/mod.py"), "pkg.sub.mod");
        assert_eq!(module_path("pkg/__init__.py"), "pkg");
        assert_eq!(module_path("top.py"), "top");
    }

    #[test]
    fn import_rendering_round_trips() {
        let ex = extract("import numpy as np\nimport os.path\nfrom collections import Counter as C\n\ndef f(x):\n    return x\n");
        let r = &ex.records[0];
        let stmts = r.import_statements_for(["np", "os", "C"]);
        assert_eq!(stmts, vec!["import numpy as np", "import os.path", "from collections import Counter as C"]);
    }
}
