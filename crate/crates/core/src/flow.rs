//! Control-flow graphs, testability, cyclomatic complexity and dedup.
//!
//! Every decision construct becomes a block with two successors (an exception
//! handler adds one successor to the block that enters the `try`), every
//! other block has exactly one, and only the exit has none. Unreachable
//! statements never get blocks. CC is therefore `E - N + 2`, and an
//! independent walk over the syntax tree that counts reachable decisions must
//! reach `CC - 1`.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::syntax::{docstring_node, FunctionRecord, NodeId, SyntaxTree, TRIVIA};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlowError {
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    #[error("inconsistent CFG: E - N + 2 = {graph} but 1 + decisions = {counted}")]
    InconsistentCfg { graph: i64, counted: i64 },
}

pub type BlockId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnSite {
    pub block: BlockId,
    pub span: Range<usize>,
    /// `None` for a bare `return`.
    pub value: Option<String>,
    pub constant: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicBlock {
    /// Spans of the statements (or expression parts) evaluated in this block.
    pub spans: Vec<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlFlowGraph {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<(BlockId, BlockId)>,
    pub entry: BlockId,
    pub exit: BlockId,
    pub returns: Vec<ReturnSite>,
    /// Control can fall off the end of the body.
    pub implicit_return: bool,
    /// Reachable decision points counted on the syntax tree.
    pub decision_points: usize,
}

impl ControlFlowGraph {
    pub fn node_count(&self) -> usize {
        self.blocks.len()
    }
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
    /// Connected components; a single function always has one.
    pub fn components(&self) -> usize {
        1
    }
    pub fn successors(&self, b: BlockId) -> impl Iterator<Item = BlockId> + '_ {
        self.edges.iter().filter(move |e| e.0 == b).map(|e| e.1)
    }
    pub fn reachable(&self) -> HashSet<BlockId> {
        let mut seen = HashSet::from([self.entry]);
        let mut stack = vec![self.entry];
        while let Some(b) = stack.pop() {
            for s in self.successors(b) {
                if seen.insert(s) {
                    stack.push(s);
                }
            }
        }
        seen
    }
}

struct LoopCx {
    head: BlockId,
    breaks: Vec<BlockId>,
}

struct Builder<'a> {
    tree: &'a SyntaxTree,
    blocks: Vec<BasicBlock>,
    edges: Vec<(BlockId, BlockId)>,
    cur: Option<BlockId>,
    loops: Vec<LoopCx>,
    returns: Vec<ReturnSite>,
    exit: BlockId,
}

const NESTED_SCOPES: [&str; 4] = ["function_definition", "class_definition", "decorated_definition", "lambda"];

/// Builds the CFG of a function body.
pub fn build_cfg(function: &FunctionRecord) -> Result<ControlFlowGraph, FlowError> {
    if function.is_async {
        return Err(FlowError::UnsupportedConstruct("async def".into()));
    }
    build_cfg_for(&function.syntax, function.def_node)
}

/// Builds the CFG of the `function_definition` node `def` in `tree`.
pub fn build_cfg_for(tree: &SyntaxTree, def: NodeId) -> Result<ControlFlowGraph, FlowError> {
    let body = tree
        .child_by_field(def, "body")
        .ok_or_else(|| FlowError::UnsupportedConstruct("definition without body".into()))?;
    check_supported(tree, def, body)?;

    let mut b = Builder {
        tree,
        blocks: vec![BasicBlock::default(), BasicBlock::default()],
        edges: Vec::new(),
        cur: Some(0),
        loops: Vec::new(),
        returns: Vec::new(),
        exit: 1,
    };
    b.stmts(body)?;
    let implicit_return = b.cur.is_some();
    if let Some(c) = b.cur {
        b.edge(c, b.exit);
    }
    let decision_points = count_decisions(tree, body);
    Ok(ControlFlowGraph {
        blocks: b.blocks,
        edges: b.edges,
        entry: 0,
        exit: 1,
        returns: b.returns,
        implicit_return,
        decision_points,
    })
}

fn check_supported(tree: &SyntaxTree, def: NodeId, body: NodeId) -> Result<(), FlowError> {
    if tree.has_token(def, "async") {
        return Err(FlowError::UnsupportedConstruct("async def".into()));
    }
    let mut stack = vec![body];
    while let Some(n) = stack.pop() {
        let node = tree.node(n);
        if node.error {
            return Err(FlowError::UnsupportedConstruct("syntax error".into()));
        }
        match node.kind {
            "yield" => return Err(FlowError::UnsupportedConstruct("generator (yield)".into())),
            "await" => return Err(FlowError::UnsupportedConstruct("await".into())),
            "match_statement" => return Err(FlowError::UnsupportedConstruct("match statement".into())),
            k if NESTED_SCOPES.contains(&k) => continue,
            _ => {}
        }
        if tree.has_token(n, "async") {
            return Err(FlowError::UnsupportedConstruct("async construct".into()));
        }
        stack.extend(node.children.iter().copied());
    }
    Ok(())
}

impl Builder<'_> {
    fn new_block(&mut self) -> BlockId {
        self.blocks.push(BasicBlock::default());
        self.blocks.len() - 1
    }

    fn edge(&mut self, a: BlockId, b: BlockId) {
        self.edges.push((a, b));
    }

    fn current(&self) -> BlockId {
        self.cur.expect("expression evaluated in reachable code")
    }

    fn note(&mut self, node: NodeId) {
        if let Some(c) = self.cur {
            let span = self.tree.span(node);
            self.blocks[c].spans.push(span);
        }
    }

    fn enter(&mut self, from: BlockId) -> BlockId {
        let b = self.new_block();
        self.edge(from, b);
        self.cur = Some(b);
        b
    }

    /// Joins the given fall-through ends; unreachable when there are none.
    fn join(&mut self, ends: Vec<BlockId>) {
        if ends.is_empty() {
            self.cur = None;
            return;
        }
        let j = self.new_block();
        for e in ends {
            self.edge(e, j);
        }
        self.cur = Some(j);
    }

    fn stmts(&mut self, block: NodeId) -> Result<(), FlowError> {
        for s in self.tree.named_children(block).collect::<Vec<_>>() {
            if self.cur.is_none() {
                break;
            }
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: NodeId) -> Result<(), FlowError> {
        let tree = self.tree;
        match tree.kind(s) {
            "if_statement" => self.if_stmt(s),
            "while_statement" => {
                let pre = self.current();
                let head = self.enter(pre);
                if let Some(c) = tree.child_by_field(s, "condition") {
                    self.expr(c)?;
                }
                let hc = self.current();
                self.looped(s, head, hc)
            }
            "for_statement" => {
                if let Some(r) = tree.child_by_field(s, "right") {
                    self.expr(r)?;
                }
                let pre = self.current();
                let head = self.enter(pre);
                if let Some(l) = tree.child_by_field(s, "left") {
                    self.expr(l)?;
                }
                let hc = self.current();
                self.looped(s, head, hc)
            }
            "try_statement" => self.try_stmt(s),
            "with_statement" => {
                for c in tree.named_children(s).collect::<Vec<_>>() {
                    if tree.kind(c) == "block" {
                        self.stmts(c)?;
                    } else {
                        self.expr(c)?;
                    }
                }
                Ok(())
            }
            "return_statement" => {
                self.note(s);
                let value = tree.named_children(s).next();
                if let Some(v) = value {
                    self.expr(v)?;
                }
                let c = self.current();
                self.returns.push(ReturnSite {
                    block: c,
                    span: tree.span(s),
                    value: value.map(|v| tree.text(v).to_string()),
                    constant: value.is_none_or(|v| is_constant(tree, v)),
                });
                self.edge(c, self.exit);
                self.cur = None;
                Ok(())
            }
            "raise_statement" => {
                self.note(s);
                self.expr(s)?;
                let c = self.current();
                self.edge(c, self.exit);
                self.cur = None;
                Ok(())
            }
            "break_statement" => {
                let c = self.current();
                let lp = self
                    .loops
                    .last_mut()
                    .ok_or_else(|| FlowError::UnsupportedConstruct("break outside loop".into()))?;
                lp.breaks.push(c);
                self.cur = None;
                Ok(())
            }
            "continue_statement" => {
                let c = self.current();
                let head = self
                    .loops
                    .last()
                    .ok_or_else(|| FlowError::UnsupportedConstruct("continue outside loop".into()))?
                    .head;
                self.edge(c, head);
                self.cur = None;
                Ok(())
            }
            k if NESTED_SCOPES.contains(&k) => {
                self.note(s);
                Ok(())
            }
            "match_statement" => Err(FlowError::UnsupportedConstruct("match statement".into())),
            _ => {
                self.note(s);
                self.expr(s)
            }
        }
    }

    fn if_stmt(&mut self, s: NodeId) -> Result<(), FlowError> {
        let tree = self.tree;
        let mut ends = Vec::new();
        if let Some(c) = tree.child_by_field(s, "condition") {
            self.expr(c)?;
        }
        let mut pending = Some(self.current());
        if let Some(body) = tree.child_by_field(s, "consequence") {
            self.enter(pending.unwrap());
            self.stmts(body)?;
            ends.extend(self.cur);
        }
        for alt in tree.children_by_field(s, "alternative").collect::<Vec<_>>() {
            let Some(p) = pending else { break };
            self.enter(p);
            match tree.kind(alt) {
                "elif_clause" => {
                    if let Some(c) = tree.child_by_field(alt, "condition") {
                        self.expr(c)?;
                    }
                    let cc = self.current();
                    self.enter(cc);
                    if let Some(body) = tree.child_by_field(alt, "consequence") {
                        self.stmts(body)?;
                    }
                    ends.extend(self.cur);
                    pending = Some(cc);
                }
                _ => {
                    if let Some(body) = tree.child_by_field(alt, "body") {
                        self.stmts(body)?;
                    }
                    ends.extend(self.cur);
                    pending = None;
                }
            }
        }
        ends.extend(pending);
        self.join(ends);
        Ok(())
    }

    /// Shared loop shape: `hc` decides between body and exhaustion.
    fn looped(&mut self, s: NodeId, head: BlockId, hc: BlockId) -> Result<(), FlowError> {
        let tree = self.tree;
        self.loops.push(LoopCx {
            head,
            breaks: Vec::new(),
        });
        self.enter(hc);
        if let Some(body) = tree.child_by_field(s, "body") {
            self.stmts(body)?;
        }
        if let Some(e) = self.cur {
            self.edge(e, head);
        }
        let lp = self.loops.pop().expect("loop context");
        let mut ends = lp.breaks;
        match tree.child_by_field(s, "alternative") {
            Some(alt) => {
                self.enter(hc);
                if let Some(body) = tree.child_by_field(alt, "body") {
                    self.stmts(body)?;
                }
                ends.extend(self.cur);
            }
            None => ends.push(hc),
        }
        self.join(ends);
        Ok(())
    }

    fn try_stmt(&mut self, s: NodeId) -> Result<(), FlowError> {
        let tree = self.tree;
        let pre = self.current();
        let mut ends = Vec::new();
        if let Some(body) = tree.child_by_field(s, "body") {
            self.enter(pre);
            self.stmts(body)?;
        }
        let clauses: Vec<NodeId> = tree.named_children(s).collect();
        if let Some(else_clause) = clauses.iter().find(|&&c| tree.kind(c) == "else_clause") {
            if self.cur.is_some() {
                if let Some(body) = tree.child_by_field(*else_clause, "body") {
                    self.stmts(body)?;
                }
            }
        }
        ends.extend(self.cur);
        for &h in clauses.iter().filter(|&&c| matches!(tree.kind(c), "except_clause" | "except_group_clause")) {
            self.enter(pre);
            for c in tree.named_children(h).collect::<Vec<_>>() {
                if tree.kind(c) == "block" {
                    self.stmts(c)?;
                } else {
                    self.expr(c)?;
                }
            }
            ends.extend(self.cur);
        }
        self.join(ends);
        if let Some(fin) = clauses.iter().find(|&&c| tree.kind(c) == "finally_clause") {
            if self.cur.is_some() {
                if let Some(body) = tree.named_children(*fin).find(|&c| tree.kind(c) == "block") {
                    self.stmts(body)?;
                }
            }
        }
        Ok(())
    }

    /// Walks an expression in evaluation order, opening inline diamonds for
    /// short-circuit operators, conditional expressions and comprehension
    /// filters.
    fn expr(&mut self, e: NodeId) -> Result<(), FlowError> {
        let tree = self.tree;
        match tree.kind(e) {
            k if NESTED_SCOPES.contains(&k) => Ok(()),
            "boolean_operator" => {
                if let Some(l) = tree.child_by_field(e, "left") {
                    self.expr(l)?;
                }
                let c = self.current();
                self.enter(c);
                if let Some(r) = tree.child_by_field(e, "right") {
                    self.expr(r)?;
                }
                let re = self.current();
                self.join(vec![c, re]);
                Ok(())
            }
            "conditional_expression" => {
                let parts: Vec<NodeId> = tree.named_children(e).collect();
                let [body, cond, orelse] = parts[..] else {
                    return Err(FlowError::UnsupportedConstruct("malformed conditional expression".into()));
                };
                self.expr(cond)?;
                let c = self.current();
                self.enter(c);
                self.expr(body)?;
                let te = self.current();
                self.enter(c);
                self.expr(orelse)?;
                let fe = self.current();
                self.join(vec![te, fe]);
                Ok(())
            }
            "if_clause" => {
                for c in tree.named_children(e).collect::<Vec<_>>() {
                    self.expr(c)?;
                }
                let c = self.current();
                let t = self.enter(c);
                self.join(vec![c, t]);
                Ok(())
            }
            _ => {
                for c in tree.named_children(e).collect::<Vec<_>>() {
                    self.expr(c)?;
                }
                Ok(())
            }
        }
    }
}

/// Reachable decision points of a statement block, counted on the tree alone.
pub fn count_decisions(tree: &SyntaxTree, body: NodeId) -> usize {
    let mut c = DecisionCounter { tree, decisions: 0 };
    c.stmts(body);
    c.decisions
}

#[derive(Clone, Copy, Default)]
struct Completion {
    normal: bool,
    breaks: bool,
}

struct DecisionCounter<'a> {
    tree: &'a SyntaxTree,
    decisions: usize,
}

impl DecisionCounter<'_> {
    fn stmts(&mut self, block: NodeId) -> Completion {
        let mut out = Completion {
            normal: true,
            breaks: false,
        };
        for s in self.tree.named_children(block).collect::<Vec<_>>() {
            if !out.normal {
                break;
            }
            let c = self.stmt(s);
            out.normal = c.normal;
            out.breaks |= c.breaks;
        }
        out
    }

    fn field_expr(&mut self, node: NodeId, field: &str) {
        if let Some(n) = self.tree.child_by_field(node, field) {
            self.expr(n);
        }
    }

    fn field_block(&mut self, node: NodeId, field: &str) -> Completion {
        match self.tree.child_by_field(node, field) {
            Some(b) => self.stmts(b),
            None => Completion {
                normal: true,
                breaks: false,
            },
        }
    }

    fn stmt(&mut self, s: NodeId) -> Completion {
        let tree = self.tree;
        let fallthrough = Completion {
            normal: true,
            breaks: false,
        };
        match tree.kind(s) {
            "if_statement" => {
                self.decisions += 1;
                self.field_expr(s, "condition");
                let then = self.field_block(s, "consequence");
                let mut normal = then.normal;
                let mut breaks = then.breaks;
                let mut has_else = false;
                for alt in tree.children_by_field(s, "alternative").collect::<Vec<_>>() {
                    let arm = if tree.kind(alt) == "elif_clause" {
                        self.decisions += 1;
                        self.field_expr(alt, "condition");
                        self.field_block(alt, "consequence")
                    } else {
                        has_else = true;
                        self.field_block(alt, "body")
                    };
                    normal |= arm.normal;
                    breaks |= arm.breaks;
                }
                Completion {
                    normal: normal || !has_else,
                    breaks,
                }
            }
            "while_statement" | "for_statement" => {
                self.decisions += 1;
                self.field_expr(s, "condition");
                self.field_expr(s, "right");
                self.field_expr(s, "left");
                let body = self.field_block(s, "body");
                let tail = match tree.child_by_field(s, "alternative") {
                    Some(alt) => self.field_block(alt, "body"),
                    None => fallthrough,
                };
                Completion {
                    normal: tail.normal || body.breaks,
                    breaks: tail.breaks,
                }
            }
            "try_statement" => {
                let kids: Vec<NodeId> = tree.named_children(s).collect();
                let mut body = self.field_block(s, "body");
                if body.normal {
                    if let Some(&e) = kids.iter().find(|&&c| tree.kind(c) == "else_clause") {
                        let tail = self.field_block(e, "body");
                        body = Completion {
                            normal: tail.normal,
                            breaks: body.breaks || tail.breaks,
                        };
                    }
                }
                let mut normal = body.normal;
                let mut breaks = body.breaks;
                for &h in kids.iter().filter(|&&c| matches!(tree.kind(c), "except_clause" | "except_group_clause")) {
                    self.decisions += 1;
                    let mut arm = fallthrough;
                    for c in tree.named_children(h).collect::<Vec<_>>() {
                        if tree.kind(c) == "block" {
                            arm = self.stmts(c);
                        } else {
                            self.expr(c);
                        }
                    }
                    normal |= arm.normal;
                    breaks |= arm.breaks;
                }
                if normal {
                    if let Some(&f) = kids.iter().find(|&&c| tree.kind(c) == "finally_clause") {
                        if let Some(b) = tree.named_children(f).find(|&c| tree.kind(c) == "block") {
                            let fin = self.stmts(b);
                            normal = fin.normal;
                            breaks |= fin.breaks;
                        }
                    }
                }
                Completion { normal, breaks }
            }
            "with_statement" => {
                let mut out = fallthrough;
                for c in tree.named_children(s).collect::<Vec<_>>() {
                    if tree.kind(c) == "block" {
                        out = self.stmts(c);
                    } else {
                        self.expr(c);
                    }
                }
                out
            }
            "return_statement" | "raise_statement" => {
                self.expr(s);
                Completion {
                    normal: false,
                    breaks: false,
                }
            }
            "break_statement" => Completion {
                normal: false,
                breaks: true,
            },
            "continue_statement" => Completion {
                normal: false,
                breaks: false,
            },
            k if NESTED_SCOPES.contains(&k) => fallthrough,
            _ => {
                self.expr(s);
                fallthrough
            }
        }
    }

    fn expr(&mut self, e: NodeId) {
        let kind = self.tree.kind(e);
        if NESTED_SCOPES.contains(&kind) {
            return;
        }
        if matches!(kind, "boolean_operator" | "conditional_expression" | "if_clause") {
            self.decisions += 1;
        }
        for c in self.tree.named_children(e).collect::<Vec<_>>() {
            self.expr(c);
        }
    }
}

/// Conservative constant folding: literals and operators over literals.
pub fn is_constant(tree: &SyntaxTree, e: NodeId) -> bool {
    match tree.kind(e) {
        "integer" | "float" | "true" | "false" | "none" | "ellipsis" => true,
        "string" => tree.named_children(e).all(|c| tree.kind(c) != "interpolation"),
        "concatenated_string" | "parenthesized_expression" | "tuple" | "list" | "set" | "dictionary" | "pair"
        | "expression_list" | "unary_operator" | "not_operator" | "binary_operator" | "boolean_operator"
        | "comparison_operator" => tree.named_children(e).all(|c| is_constant(tree, c)),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    NoReturnPath,
    ConstantOnly,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NoReturnPath => "no-return-path",
            RejectReason::ConstantOnly => "constant-only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Reject(RejectReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestabilityVerdict {
    pub has_return_path: bool,
    pub constant_only_returns: bool,
    pub verdict: Verdict,
}

pub fn testability(cfg: &ControlFlowGraph) -> TestabilityVerdict {
    let reachable = cfg.reachable();
    let live: Vec<&ReturnSite> = cfg.returns.iter().filter(|r| reachable.contains(&r.block)).collect();
    let has_return_path = !live.is_empty();
    let constant_only_returns = has_return_path && live.iter().all(|r| r.constant);
    let verdict = if !has_return_path {
        Verdict::Reject(RejectReason::NoReturnPath)
    } else if constant_only_returns {
        Verdict::Reject(RejectReason::ConstantOnly)
    } else {
        Verdict::Pass
    };
    TestabilityVerdict {
        has_return_path,
        constant_only_returns,
        verdict,
    }
}

/// `E - N + 2`, cross-checked against `1 + decision points`.
pub fn cyclomatic(cfg: &ControlFlowGraph) -> Result<u32, FlowError> {
    let graph = cfg.edge_count() as i64 - cfg.node_count() as i64 + 2 * cfg.components() as i64;
    let counted = 1 + cfg.decision_points as i64;
    let unreachable = cfg.node_count() != cfg.reachable().len();
    if graph != counted || unreachable || graph < 1 {
        return Err(FlowError::InconsistentCfg { graph, counted });
    }
    Ok(graph as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcRange {
    pub min: u32,
    pub max: u32,
}

impl Default for CcRange {
    fn default() -> Self {
        CcRange { min: 2, max: 10 }
    }
}

impl CcRange {
    pub fn contains(&self, cc: u32) -> bool {
        self.min <= cc && cc <= self.max
    }
}

/// Hash of the function's token stream without docstring, comments or
/// whitespace. Literals are kept verbatim.
pub fn normalized_hash(function: &FunctionRecord) -> String {
    let tree = &function.syntax;
    let doc = docstring_node(tree, function.def_node).map(|d| tree.span(d));
    let mut h = Sha256::new();
    for id in tree.descendants(function.def_node) {
        let node = tree.node(id);
        if !node.is_leaf() || node.kind == TRIVIA || node.kind == "comment" || node.span.is_empty() {
            continue;
        }
        if let Some(d) = &doc {
            if node.span.start >= d.start && node.span.end <= d.end {
                continue;
            }
        }
        h.update(tree.text(id).as_bytes());
        h.update([0x1f]);
    }
    hex::encode(h.finalize())
}

/// Indices of the first occurrence of each key, in input order.
pub fn dedup_indices<K: Eq + std::hash::Hash + Clone>(keys: &[K]) -> Vec<usize> {
    let mut seen = HashSet::new();
    keys.iter()
        .enumerate()
        .filter(|(_, k)| seen.insert((*k).clone()))
        .map(|(i, _)| i)
        .collect()
}

/// Keeps the first record for each `(name, hash)` pair.
pub fn dedup(records: Vec<(FunctionRecord, String)>) -> Vec<FunctionRecord> {
    let keys: Vec<(String, String)> = records.iter().map(|(r, h)| (r.name.clone(), h.clone())).collect();
    let keep: HashSet<usize> = dedup_indices(&keys).into_iter().collect();
    records
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, (r, _))| r)
        .collect()
}
