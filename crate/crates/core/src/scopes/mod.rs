//! Scope graphs, reference resolution and SC / WSC / Discard classification.
//!
//! Scopes follow Python's lexical rules: class bodies are invisible to nested
//! scopes, comprehensions get their own scope (their first iterable is
//! evaluated outside it), `global`/`nonlocal` redirect bindings, and names are
//! bound flow-insensitively.
//!
//! For a function F, a reference counts as resolved only when it binds to a
//! builtin, to a definition inside F's own scope subtree, or to F itself.
//! Bindings produced by import statements never resolve; they only decide
//! which library an unresolved name is attributed to.

mod allow;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{import_bindings, FunctionRecord, ImportBinding, NodeId, SyntaxTree};

pub use allow::{AllowList, AllowListError};

const BUILTINS: &str = include_str!("../../data/python_builtins.txt");
const DYNAMIC: &str = include_str!("../../data/python_dynamic.txt");

/// Attribution for names that no import accounts for.
pub const UNKNOWN: &str = "unknown";
/// Attribution for reflective or code-evaluating builtins.
pub const DYNAMIC_ATTRIBUTION: &str = "dynamic";

fn word_list(text: &'static str) -> BTreeSet<&'static str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

pub fn builtin_names() -> &'static BTreeSet<&'static str> {
    static SET: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| word_list(BUILTINS))
}

pub fn dynamic_names() -> &'static BTreeSet<&'static str> {
    static SET: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| word_list(DYNAMIC))
}

#[derive(Debug, Error)]
pub enum ScopeError {
    #[error("function {0} has no scope in this graph")]
    FunctionNotInGraph(String),
}

pub type ScopeId = usize;
pub type DefId = usize;
pub type RefId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeKind {
    Builtins,
    Module,
    Class,
    Function,
    Lambda,
    Comprehension,
}

#[derive(Debug, Clone)]
pub struct Scope {
    pub kind: ScopeKind,
    pub parent: Option<ScopeId>,
    /// Syntax node that opens the scope; `None` for the builtins root.
    pub node: Option<NodeId>,
    globals: BTreeSet<String>,
    nonlocals: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DefKind {
    Builtin,
    Import(ImportBinding),
    Parameter,
    Variable,
    Function,
    Class,
}

#[derive(Debug, Clone)]
pub struct Definition {
    pub name: String,
    pub scope: ScopeId,
    pub kind: DefKind,
    pub node: Option<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Reference {
    pub name: String,
    pub scope: ScopeId,
    pub node: NodeId,
    pub span: Range<usize>,
    /// Occurs only inside a type annotation.
    pub annotation: bool,
    /// Dotted attribute chain rooted at this name (`np.linalg.norm`).
    pub chain: String,
}

/// Scope tree plus definition, reference and binding tables for one tree.
#[derive(Debug, Clone)]
pub struct ScopeGraph {
    tree: Arc<SyntaxTree>,
    scopes: Vec<Scope>,
    defs: Vec<Definition>,
    refs: Vec<Reference>,
    bindings: Vec<Option<DefId>>,
    module: ScopeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub scope: usize,
    pub def: usize,
    pub reference: usize,
    pub bind: usize,
}

impl ScopeGraph {
    pub fn tree(&self) -> &Arc<SyntaxTree> {
        &self.tree
    }
    pub fn module_scope(&self) -> ScopeId {
        self.module
    }
    pub fn scopes(&self) -> &[Scope] {
        &self.scopes
    }
    pub fn definitions(&self) -> &[Definition] {
        &self.defs
    }
    pub fn references(&self) -> &[Reference] {
        &self.refs
    }
    /// Definition the reference binds to, if any.
    pub fn binding(&self, r: RefId) -> Option<DefId> {
        self.bindings[r]
    }

    pub fn edge_counts(&self) -> EdgeCounts {
        EdgeCounts {
            scope: self.scopes.iter().filter(|s| s.parent.is_some()).count(),
            def: self.defs.len(),
            reference: self.refs.len(),
            bind: self.bindings.iter().filter(|b| b.is_some()).count(),
        }
    }

    /// True when `scope` is `ancestor` or nested inside it.
    pub fn is_within(&self, mut scope: ScopeId, ancestor: ScopeId) -> bool {
        loop {
            if scope == ancestor {
                return true;
            }
            match self.scopes[scope].parent {
                Some(p) => scope = p,
                None => return false,
            }
        }
    }

    /// Scope opened by `node`, if any.
    pub fn scope_of_node(&self, node: NodeId) -> Option<ScopeId> {
        self.scopes.iter().position(|s| s.node == Some(node))
    }

    /// Names defined directly in `scope`.
    pub fn names_in(&self, scope: ScopeId) -> BTreeSet<&str> {
        self.defs
            .iter()
            .filter(|d| d.scope == scope)
            .map(|d| d.name.as_str())
            .collect()
    }

    fn lookup(&self, index: &HashMap<(ScopeId, String), DefId>, name: &str, start: ScopeId) -> Option<DefId> {
        let first = &self.scopes[start];
        let mut cur = if first.globals.contains(name) {
            Some(self.module)
        } else if first.nonlocals.contains(name) {
            first.parent
        } else {
            Some(start)
        };
        let mut at_start = cur == Some(start);
        while let Some(s) = cur {
            let scope = &self.scopes[s];
            if at_start || scope.kind != ScopeKind::Class {
                if let Some(&d) = index.get(&(s, name.to_string())) {
                    return Some(d);
                }
            }
            at_start = false;
            cur = scope.parent;
        }
        None
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Load,
    Annotation,
}

struct Builder<'t> {
    tree: &'t SyntaxTree,
    scopes: Vec<Scope>,
    defs: Vec<Definition>,
    refs: Vec<Reference>,
}

const COMPREHENSIONS: [&str; 4] = [
    "list_comprehension",
    "set_comprehension",
    "dictionary_comprehension",
    "generator_expression",
];

/// Builds the scope graph of a whole tree. Subtrees under error nodes are
/// skipped.
pub fn build_scope_graph(tree: &Arc<SyntaxTree>) -> ScopeGraph {
    let mut b = Builder {
        tree,
        scopes: Vec::new(),
        defs: Vec::new(),
        refs: Vec::new(),
    };
    let builtins = b.push_scope(ScopeKind::Builtins, None, None);
    for name in builtin_names() {
        b.defs.push(Definition {
            name: name.to_string(),
            scope: builtins,
            kind: DefKind::Builtin,
            node: None,
        });
    }
    let root = tree.root();
    let module = b.push_scope(ScopeKind::Module, Some(builtins), Some(root));
    b.visit_children(root, module, Ctx::Load);

    let mut graph = ScopeGraph {
        tree: tree.clone(),
        scopes: b.scopes,
        defs: b.defs,
        refs: b.refs,
        bindings: Vec::new(),
        module,
    };
    let mut index = HashMap::new();
    for (i, d) in graph.defs.iter().enumerate() {
        index.entry((d.scope, d.name.clone())).or_insert(i);
    }
    graph.bindings = graph
        .refs
        .iter()
        .map(|r| graph.lookup(&index, &r.name, r.scope))
        .collect();
    graph
}

impl Builder<'_> {
    fn push_scope(&mut self, kind: ScopeKind, parent: Option<ScopeId>, node: Option<NodeId>) -> ScopeId {
        self.scopes.push(Scope {
            kind,
            parent,
            node,
            globals: BTreeSet::new(),
            nonlocals: BTreeSet::new(),
        });
        self.scopes.len() - 1
    }

    fn module_scope(&self) -> ScopeId {
        1
    }

    fn define(&mut self, name: &str, scope: ScopeId, kind: DefKind, node: Option<NodeId>) {
        let s = &self.scopes[scope];
        let target = if s.globals.contains(name) {
            self.module_scope()
        } else if s.nonlocals.contains(name) {
            // Rebinding of an enclosing name; the enclosing definition stands.
            return;
        } else {
            scope
        };
        self.defs.push(Definition {
            name: name.to_string(),
            scope: target,
            kind,
            node,
        });
    }

    fn reference(&mut self, node: NodeId, scope: ScopeId, ctx: Ctx) {
        let tree = self.tree;
        let mut top = node;
        while let Some(p) = tree.parent(top) {
            if tree.kind(p) == "attribute" && tree.child_by_field(p, "object") == Some(top) {
                top = p;
            } else {
                break;
            }
        }
        let chain: String = tree.text(top).chars().filter(|c| !c.is_whitespace()).collect();
        self.refs.push(Reference {
            name: tree.text(node).to_string(),
            scope,
            node,
            span: tree.span(node),
            annotation: ctx == Ctx::Annotation,
            chain,
        });
    }

    fn visit_children(&mut self, node: NodeId, scope: ScopeId, ctx: Ctx) {
        for c in self.tree.named_children(node).collect::<Vec<_>>() {
            let f = self.tree.node(c).field;
            let cctx = if matches!(f, Some("type") | Some("return_type")) { Ctx::Annotation } else { ctx };
            self.visit(c, scope, cctx);
        }
    }

    fn visit(&mut self, node: NodeId, scope: ScopeId, ctx: Ctx) {
        let tree = self.tree;
        if tree.node(node).error {
            return;
        }
        match tree.kind(node) {
            "identifier" => self.reference(node, scope, ctx),
            "attribute" => {
                if let Some(o) = tree.child_by_field(node, "object") {
                    self.visit(o, scope, ctx);
                }
            }
            "keyword_argument" => {
                if let Some(v) = tree.child_by_field(node, "value") {
                    self.visit(v, scope, ctx);
                }
            }
            "dotted_name" => {
                if let Some(first) = tree.named_children(node).next() {
                    self.visit(first, scope, ctx);
                }
            }
            "decorated_definition" => {
                for c in tree.named_children(node).collect::<Vec<_>>() {
                    if tree.kind(c) == "decorator" {
                        self.visit_children(c, scope, ctx);
                    } else {
                        self.visit(c, scope, ctx);
                    }
                }
            }
            "function_definition" => self.function(node, scope),
            "class_definition" => self.class(node, scope),
            "lambda" => self.lambda(node, scope),
            k if COMPREHENSIONS.contains(&k) => self.comprehension(node, scope),
            "assignment" => {
                if let Some(t) = tree.child_by_field(node, "type") {
                    self.visit(t, scope, Ctx::Annotation);
                }
                if let Some(r) = tree.child_by_field(node, "right") {
                    self.visit(r, scope, ctx);
                }
                if let Some(l) = tree.child_by_field(node, "left") {
                    self.target(l, scope);
                }
            }
            "augmented_assignment" => {
                if let Some(l) = tree.child_by_field(node, "left") {
                    if tree.kind(l) == "identifier" {
                        self.reference(l, scope, ctx);
                    }
                    self.target(l, scope);
                }
                if let Some(r) = tree.child_by_field(node, "right") {
                    self.visit(r, scope, ctx);
                }
            }
            "for_statement" => {
                for c in tree.named_children(node).collect::<Vec<_>>() {
                    if tree.node(c).field == Some("left") {
                        self.target(c, scope);
                    } else {
                        self.visit(c, scope, ctx);
                    }
                }
            }
            "as_pattern" => {
                for c in tree.named_children(node).collect::<Vec<_>>() {
                    if tree.kind(c) == "as_pattern_target" || tree.node(c).field == Some("alias") {
                        self.target(c, scope);
                    } else {
                        self.visit(c, scope, ctx);
                    }
                }
            }
            "named_expression" => {
                if let Some(v) = tree.child_by_field(node, "value") {
                    self.visit(v, scope, ctx);
                }
                if let Some(n) = tree.child_by_field(node, "name") {
                    let mut s = scope;
                    while self.scopes[s].kind == ScopeKind::Comprehension {
                        s = self.scopes[s].parent.unwrap_or(s);
                    }
                    self.define(tree.text(n), s, DefKind::Variable, Some(n));
                }
            }
            "import_statement" | "import_from_statement" | "future_import_statement" => {
                for b in import_bindings(tree, node) {
                    if !b.star {
                        let name = b.local_name.clone();
                        self.define(&name, scope, DefKind::Import(b), Some(node));
                    }
                }
            }
            "global_statement" | "nonlocal_statement" => {}
            "delete_statement" => {
                for c in tree.named_children(node).collect::<Vec<_>>() {
                    self.visit(c, scope, ctx);
                }
            }
            _ => self.visit_children(node, scope, ctx),
        }
    }

    /// Assignment target: names are definitions, everything else is read.
    fn target(&mut self, node: NodeId, scope: ScopeId) {
        let tree = self.tree;
        match tree.kind(node) {
            "identifier" => self.define(tree.text(node), scope, DefKind::Variable, Some(node)),
            "pattern_list" | "tuple_pattern" | "list_pattern" | "tuple" | "list" | "expression_list"
            | "parenthesized_expression" | "list_splat_pattern" | "list_splat" | "as_pattern_target" => {
                for c in tree.named_children(node).collect::<Vec<_>>() {
                    self.target(c, scope);
                }
            }
            _ => self.visit(node, scope, Ctx::Load),
        }
    }

    fn declarations(&mut self, body: NodeId, scope: ScopeId) {
        let tree = self.tree;
        let mut stack = vec![body];
        while let Some(n) = stack.pop() {
            match tree.kind(n) {
                "function_definition" | "class_definition" | "lambda" => continue,
                "global_statement" | "nonlocal_statement" => {
                    let global = tree.kind(n) == "global_statement";
                    for id in tree.named_children(n).filter(|&c| tree.kind(c) == "identifier").collect::<Vec<_>>() {
                        let name = tree.text(id).to_string();
                        if global {
                            self.scopes[scope].globals.insert(name);
                        } else {
                            self.scopes[scope].nonlocals.insert(name);
                        }
                    }
                }
                _ => stack.extend(tree.named_children(n)),
            }
        }
    }

    /// Visits defaults and annotations of a parameter list in `outer` and
    /// defines the parameter names in `inner`.
    fn parameters(&mut self, params: NodeId, outer: ScopeId, inner: ScopeId) {
        let tree = self.tree;
        for p in tree.named_children(params).collect::<Vec<_>>() {
            if let Some(t) = tree.child_by_field(p, "type") {
                self.visit(t, outer, Ctx::Annotation);
            }
            if let Some(v) = tree.child_by_field(p, "value") {
                self.visit(v, outer, Ctx::Load);
            }
            let name = match tree.kind(p) {
                "identifier" => Some(p),
                "default_parameter" | "typed_default_parameter" => tree.child_by_field(p, "name"),
                "typed_parameter" => tree
                    .named_children(p)
                    .find(|&c| tree.node(c).field != Some("type"))
                    .and_then(|c| if tree.kind(c) == "identifier" { Some(c) } else { splat_ident(tree, c) }),
                "list_splat_pattern" | "dictionary_splat_pattern" => splat_ident(tree, p),
                _ => None,
            };
            if let Some(n) = name {
                self.define(tree.text(n), inner, DefKind::Parameter, Some(n));
            }
        }
    }

    fn function(&mut self, def: NodeId, scope: ScopeId) {
        let tree = self.tree;
        if let Some(n) = tree.child_by_field(def, "name") {
            self.define(tree.text(n), scope, DefKind::Function, Some(def));
        }
        if let Some(r) = tree.child_by_field(def, "return_type") {
            self.visit(r, scope, Ctx::Annotation);
        }
        let inner = self.push_scope(ScopeKind::Function, Some(scope), Some(def));
        let body = tree.child_by_field(def, "body");
        if let Some(b) = body {
            self.declarations(b, inner);
        }
        if let Some(p) = tree.child_by_field(def, "parameters") {
            self.parameters(p, scope, inner);
        }
        if let Some(b) = body {
            self.visit_children(b, inner, Ctx::Load);
        }
    }

    fn lambda(&mut self, node: NodeId, scope: ScopeId) {
        let tree = self.tree;
        let inner = self.push_scope(ScopeKind::Lambda, Some(scope), Some(node));
        if let Some(p) = tree.child_by_field(node, "parameters") {
            self.parameters(p, scope, inner);
        }
        if let Some(b) = tree.child_by_field(node, "body") {
            self.visit(b, inner, Ctx::Load);
        }
    }

    fn class(&mut self, node: NodeId, scope: ScopeId) {
        let tree = self.tree;
        if let Some(n) = tree.child_by_field(node, "name") {
            self.define(tree.text(n), scope, DefKind::Class, Some(node));
        }
        if let Some(s) = tree.child_by_field(node, "superclasses") {
            self.visit(s, scope, Ctx::Load);
        }
        let inner = self.push_scope(ScopeKind::Class, Some(scope), Some(node));
        if let Some(b) = tree.child_by_field(node, "body") {
            self.declarations(b, inner);
            self.visit_children(b, inner, Ctx::Load);
        }
    }

    fn comprehension(&mut self, node: NodeId, scope: ScopeId) {
        let tree = self.tree;
        let inner = self.push_scope(ScopeKind::Comprehension, Some(scope), Some(node));
        let mut first = true;
        for c in tree.named_children(node).collect::<Vec<_>>() {
            match tree.kind(c) {
                "for_in_clause" => {
                    let at = if first { scope } else { inner };
                    for r in tree.children_by_field(c, "right").collect::<Vec<_>>() {
                        self.visit(r, at, Ctx::Load);
                    }
                    if let Some(l) = tree.child_by_field(c, "left") {
                        self.target(l, inner);
                    }
                    first = false;
                }
                _ => self.visit(c, inner, Ctx::Load),
            }
        }
    }
}

fn splat_ident(tree: &SyntaxTree, node: NodeId) -> Option<NodeId> {
    tree.named_children(node).find(|&c| tree.kind(c) == "identifier")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "SC")]
    SelfContained,
    #[serde(rename = "WSC")]
    WeaklySelfContained,
    Discard,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::SelfContained => "SC",
            Classification::WeaklySelfContained => "WSC",
            Classification::Discard => "Discard",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSite {
    pub name: String,
    pub chain: String,
    pub span: Range<usize>,
    pub resolved: bool,
}

/// Dependency surface of one function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyReport {
    pub function_id: String,
    /// References inside the function, annotations excluded.
    pub r_f: Vec<ReferenceSite>,
    /// Unresolved names.
    pub u_f: BTreeSet<String>,
    /// Library (or `unknown` / `dynamic`) for every name in `u_f`.
    pub attribution: BTreeMap<String, String>,
    /// Libraries imported with `*` that are visible to the function.
    pub star_imports: Vec<String>,
}

impl DependencyReport {
    /// Subset of `u_f` accounted for by allow-listed libraries.
    pub fn allowed(&self, allow: &AllowList) -> BTreeSet<String> {
        self.u_f
            .iter()
            .filter(|name| match self.attribution.get(*name).map(String::as_str) {
                Some(UNKNOWN) | None => self.star_imports.iter().any(|l| allow.contains(l) && allow.exports(l, name)),
                Some(DYNAMIC_ATTRIBUTION) => false,
                Some(lib) => allow.contains(lib),
            })
            .cloned()
            .collect()
    }

    /// Libraries the function depends on, for instruction and import emission.
    pub fn libraries(&self) -> BTreeSet<&str> {
        self.attribution
            .values()
            .map(String::as_str)
            .filter(|l| *l != UNKNOWN && *l != DYNAMIC_ATTRIBUTION)
            .collect()
    }
}

/// Resolves the references of `function` inside `graph`. The graph may be
/// built from the function's own tree or from its enclosing file.
pub fn resolve_function(graph: &ScopeGraph, function: &FunctionRecord) -> Result<DependencyReport, ScopeError> {
    let tree = graph.tree();
    let def = if Arc::ptr_eq(tree, &function.syntax) {
        Some(function.def_node)
    } else {
        tree.find_by_span("function_definition", &function.provenance.span)
    }
    .ok_or_else(|| ScopeError::FunctionNotInGraph(function.id()))?;
    let fscope = graph
        .scope_of_node(def)
        .ok_or_else(|| ScopeError::FunctionNotInGraph(function.id()))?;
    let span = tree.span(def);

    let mut r_f = Vec::new();
    let mut u_f = BTreeSet::new();
    let mut attribution = BTreeMap::new();
    for (i, r) in graph.references().iter().enumerate() {
        if r.annotation || r.span.start < span.start || r.span.end > span.end {
            continue;
        }
        let bound = graph.binding(i).map(|d| &graph.definitions()[d]);
        let resolved = match bound {
            Some(d) => match d.kind {
                DefKind::Builtin => true,
                DefKind::Import(_) => false,
                _ => graph.is_within(d.scope, fscope) || d.node == Some(def),
            },
            None => false,
        };
        r_f.push(ReferenceSite {
            name: r.name.clone(),
            chain: r.chain.clone(),
            span: r.span.clone(),
            resolved,
        });
        if resolved {
            continue;
        }
        u_f.insert(r.name.clone());
        let lib = match bound.map(|d| &d.kind) {
            Some(DefKind::Import(b)) => b.library().unwrap_or(UNKNOWN).to_string(),
            Some(_) => UNKNOWN.to_string(),
            None if dynamic_names().contains(r.name.as_str()) => DYNAMIC_ATTRIBUTION.to_string(),
            None => function
                .imports_in_scope
                .iter()
                .rev()
                .find(|b| !b.star && b.local_name == r.name)
                .and_then(|b| b.library())
                .unwrap_or(UNKNOWN)
                .to_string(),
        };
        attribution.entry(r.name.clone()).or_insert(lib);
    }
    let star_imports = function
        .imports_in_scope
        .iter()
        .filter(|b| b.star)
        .filter_map(|b| b.library().map(str::to_string))
        .collect();
    Ok(DependencyReport {
        function_id: function.id(),
        r_f,
        u_f,
        attribution,
        star_imports,
    })
}

/// Builds the graph of the function's own tree and resolves it.
pub fn analyze_function(function: &FunctionRecord) -> DependencyReport {
    let graph = build_scope_graph(&function.syntax);
    resolve_function(&graph, function).expect("a record's own tree contains its definition")
}

pub fn classify(report: &DependencyReport, allow: &AllowList) -> Classification {
    if report.u_f.is_empty() {
        Classification::SelfContained
    } else if report.allowed(allow).len() == report.u_f.len() {
        Classification::WeaklySelfContained
    } else {
        Classification::Discard
    }
}
