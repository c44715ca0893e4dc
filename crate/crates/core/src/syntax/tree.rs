//! Owned, lossless syntax trees.
//!
//! The parser produces a concrete tree whose leaves do not cover inter-token
//! whitespace. [`SyntaxTree`] copies it into an arena and fills every gap with
//! a `trivia` leaf, so the leaf spans of a tree always concatenate back to the
//! exact source bytes.

use std::ops::Range;
use std::sync::Arc;

use crate::syntax::SyntaxError;

pub type NodeId = usize;

/// Kind given to gap-filling leaves (whitespace, line continuations).
pub const TRIVIA: &str = "trivia";

#[derive(Debug, Clone)]
pub struct SyntaxNode {
    pub kind: &'static str,
    /// Field name under which this node hangs off its parent, if any.
    pub field: Option<&'static str>,
    pub span: Range<usize>,
    pub named: bool,
    /// `ERROR` node or a zero-width token inserted by error recovery.
    pub error: bool,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl SyntaxNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SyntaxTree {
    source: Arc<str>,
    nodes: Vec<SyntaxNode>,
    root: NodeId,
}

impl SyntaxTree {
    /// Parses Python source. Syntax errors become error nodes in the tree.
    pub fn parse(source: &str) -> Result<Self, SyntaxError> {
        let mut parser = tree_sitter::Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .map_err(|e| SyntaxError::GrammarUnavailable(e.to_string()))?;
        let ts = parser
            .parse(source, None)
            .ok_or_else(|| SyntaxError::GrammarUnavailable("parser returned no tree".into()))?;

        let mut tree = SyntaxTree {
            source: Arc::from(source),
            nodes: Vec::new(),
            root: 0,
        };
        let root = tree.copy_node(ts.root_node(), None, None);
        // The parser's module node may not start at byte 0 or end at EOF.
        tree.nodes[root].span = 0..source.len();
        tree.fill_trivia(root);
        tree.root = root;
        Ok(tree)
    }

    fn copy_node(
        &mut self,
        node: tree_sitter::Node<'_>,
        parent: Option<NodeId>,
        field: Option<&'static str>,
    ) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(SyntaxNode {
            kind: node.kind(),
            field,
            span: node.start_byte()..node.end_byte(),
            named: node.is_named(),
            error: node.is_error() || node.is_missing(),
            parent,
            children: Vec::new(),
        });
        let mut cursor = node.walk();
        let mut children = Vec::with_capacity(node.child_count());
        for (i, child) in node.children(&mut cursor).enumerate() {
            let f = node.field_name_for_child(i as u32);
            children.push(self.copy_node(child, Some(id), f));
        }
        self.nodes[id].children = children;
        id
    }

    fn fill_trivia(&mut self, id: NodeId) {
        let children = self.nodes[id].children.clone();
        if children.is_empty() {
            return;
        }
        let span = self.nodes[id].span.clone();
        let mut filled = Vec::with_capacity(children.len() * 2 + 1);
        let mut cursor = span.start;
        for child in children {
            let cspan = self.nodes[child].span.clone();
            if cspan.start > cursor {
                filled.push(self.push_trivia(id, cursor..cspan.start));
            }
            self.fill_trivia(child);
            filled.push(child);
            cursor = cursor.max(cspan.end);
        }
        if span.end > cursor {
            filled.push(self.push_trivia(id, cursor..span.end));
        }
        self.nodes[id].children = filled;
    }

    fn push_trivia(&mut self, parent: NodeId, span: Range<usize>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(SyntaxNode {
            kind: TRIVIA,
            field: None,
            span,
            named: false,
            error: false,
            parent: Some(parent),
            children: Vec::new(),
        });
        id
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn node(&self, id: NodeId) -> &SyntaxNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn kind(&self, id: NodeId) -> &'static str {
        self.nodes[id].kind
    }

    pub fn text(&self, id: NodeId) -> &str {
        &self.source[self.nodes[id].span.clone()]
    }

    pub fn span(&self, id: NodeId) -> Range<usize> {
        self.nodes[id].span.clone()
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    /// Named, non-trivia children; comments are excluded as well.
    pub fn named_children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes[id]
            .children
            .iter()
            .copied()
            .filter(move |&c| self.nodes[c].named && self.nodes[c].kind != "comment")
    }

    pub fn child_by_field(&self, id: NodeId, field: &str) -> Option<NodeId> {
        self.nodes[id]
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c].field == Some(field))
    }

    pub fn children_by_field<'a>(
        &'a self,
        id: NodeId,
        field: &'a str,
    ) -> impl Iterator<Item = NodeId> + 'a {
        self.nodes[id]
            .children
            .iter()
            .copied()
            .filter(move |&c| self.nodes[c].field == Some(field))
    }

    /// True when an anonymous token child with this text exists (e.g. `async`).
    pub fn has_token(&self, id: NodeId, token: &str) -> bool {
        self.nodes[id]
            .children
            .iter()
            .any(|&c| !self.nodes[c].named && self.nodes[c].kind == token)
    }

    pub fn has_error(&self, id: NodeId) -> bool {
        self.nodes[id].error || self.nodes[id].children.iter().any(|&c| self.has_error(c))
    }

    pub fn under_error(&self, id: NodeId) -> bool {
        let mut cur = self.nodes[id].parent;
        while let Some(p) = cur {
            if self.nodes[p].error {
                return true;
            }
            cur = self.nodes[p].parent;
        }
        false
    }

    /// Leaves in source order.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if n.children.is_empty() {
                out.push(id);
            } else {
                stack.extend(n.children.iter().rev());
            }
        }
        out
    }

    /// Pre-order traversal of the subtree rooted at `id`.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// Deepest node of `kind` whose span equals `span`.
    pub fn find_by_span(&self, kind: &str, span: &Range<usize>) -> Option<NodeId> {
        self.descendants(self.root)
            .into_iter()
            .rev()
            .find(|&n| self.nodes[n].kind == kind && self.nodes[n].span == *span)
    }
}
