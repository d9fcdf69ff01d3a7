//! Penn-Treebank style bracketed constituency trees.

use std::fmt;

use super::TreebankError;

/// Index of a node inside a [`ConstituencyTree`] arena.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// A word leaf.
    Terminal,
    /// A POS tag dominating exactly one terminal.
    Preterminal,
    Phrase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub label: String,
    pub kind: NodeKind,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    /// Half-open token span `[start, end)`.
    pub start: usize,
    pub end: usize,
    pub height: usize,
    /// Distance from the root (root = 0).
    pub depth: usize,
}

impl Node {
    pub fn is_terminal(&self) -> bool {
        self.kind == NodeKind::Terminal
    }

    pub fn span(&self) -> (usize, usize) {
        (self.start, self.end)
    }
}

/// A constituency tree stored as an arena. Node 0 is not necessarily the root;
/// use [`ConstituencyTree::root`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstituencyTree {
    nodes: Vec<Node>,
    root: NodeId,
    leaves: Vec<NodeId>,
}

/// Strip functional annotations (`NP-SBJ-1` -> `NP`, `NP=2` -> `NP`).
/// Labels that start with `-` (such as `-LRB-` or `-NONE-`) are kept verbatim.
pub fn base_label(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label.find(['-', '=']) {
        Some(i) if i > 0 => &label[..i],
        _ => label,
    }
}

#[derive(Debug)]
enum Sexp {
    Atom { text: String, offset: usize },
    List { label: Option<String>, children: Vec<Sexp>, offset: usize },
}

struct Reader<'a> {
    bytes: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> (String, usize) {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'(' || b == b')' || b.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        (self.text[start..self.pos].to_string(), start)
    }

    fn list(&mut self) -> Result<Sexp, TreebankError> {
        let open = self.pos;
        self.pos += 1;
        self.skip_ws();
        let label = match self.bytes.get(self.pos) {
            None => return Err(TreebankError::UnbalancedParens { offset: self.pos }),
            Some(b'(') | Some(b')') => None,
            Some(_) => Some(self.atom().0),
        };
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.bytes.get(self.pos) {
                None => return Err(TreebankError::UnbalancedParens { offset: self.pos }),
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                Some(b'(') => children.push(self.list()?),
                Some(_) => {
                    let (text, offset) = self.atom();
                    children.push(Sexp::Atom { text, offset });
                }
            }
        }
        if children.is_empty() {
            return Err(TreebankError::EmptyNode { offset: open });
        }
        Ok(Sexp::List { label, children, offset: open })
    }
}

struct Builder {
    nodes: Vec<Node>,
    leaves: Vec<NodeId>,
}

impl Builder {
    fn push(&mut self, label: String, kind: NodeKind, parent: Option<NodeId>, depth: usize) -> NodeId {
        self.nodes.push(Node {
            label,
            kind,
            children: Vec::new(),
            parent,
            start: 0,
            end: 0,
            height: 0,
            depth,
        });
        self.nodes.len() - 1
    }

    fn build(&mut self, sexp: &Sexp, parent: Option<NodeId>, depth: usize) -> Result<NodeId, TreebankError> {
        let Sexp::List { label, children, offset } = sexp else {
            let Sexp::Atom { offset, .. } = sexp else { unreachable!() };
            return Err(TreebankError::UnexpectedAtom { offset: *offset });
        };
        let label = match label {
            Some(l) => base_label(l).to_string(),
            None => return Err(TreebankError::EmptyNode { offset: *offset }),
        };
        if let [Sexp::Atom { text, .. }] = children.as_slice() {
            let id = self.push(label, NodeKind::Preterminal, parent, depth);
            let leaf = self.push(text.clone(), NodeKind::Terminal, Some(id), depth + 1);
            let index = self.leaves.len();
            self.leaves.push(leaf);
            self.nodes[leaf].start = index;
            self.nodes[leaf].end = index + 1;
            self.nodes[id].children.push(leaf);
            self.nodes[id].start = index;
            self.nodes[id].end = index + 1;
            self.nodes[id].height = 1;
            return Ok(id);
        }
        let id = self.push(label, NodeKind::Phrase, parent, depth);
        let mut kids = Vec::with_capacity(children.len());
        for child in children {
            kids.push(self.build(child, Some(id), depth + 1)?);
        }
        let start = self.nodes[kids[0]].start;
        let end = self.nodes[*kids.last().unwrap()].end;
        let height = 1 + kids.iter().map(|&k| self.nodes[k].height).max().unwrap_or(0);
        let node = &mut self.nodes[id];
        node.children = kids;
        node.start = start;
        node.end = end;
        node.height = height;
        Ok(id)
    }
}

impl ConstituencyTree {
    /// Parse one bracketed tree, e.g. `(S (NP (PRP I)) (VP (VBD began)))`.
    ///
    /// An unlabeled outer wrapper with a single child, as in `( (S ...) )`, is
    /// removed. Functional annotations on labels are stripped.
    pub fn parse_bracketed(text: &str) -> Result<Self, TreebankError> {
        let mut reader = Reader { bytes: text.as_bytes(), text, pos: 0 };
        reader.skip_ws();
        match reader.bytes.get(reader.pos) {
            Some(b'(') => {}
            Some(_) => return Err(TreebankError::UnexpectedAtom { offset: reader.pos }),
            None => return Err(TreebankError::NoTokens { offset: reader.pos }),
        }
        let mut sexp = reader.list()?;
        reader.skip_ws();
        if reader.pos < reader.bytes.len() {
            let offset = reader.pos;
            return Err(if reader.bytes[offset] == b')' {
                TreebankError::UnbalancedParens { offset }
            } else {
                TreebankError::TrailingInput { offset }
            });
        }
        // unwrap `( (S ...) )`
        loop {
            match sexp {
                Sexp::List { label: None, mut children, offset } => {
                    if children.len() == 1 && matches!(children[0], Sexp::List { .. }) {
                        sexp = children.pop().unwrap();
                    } else {
                        return Err(TreebankError::EmptyNode { offset });
                    }
                }
                _ => break,
            }
        }
        let mut builder = Builder { nodes: Vec::new(), leaves: Vec::new() };
        let root = builder.build(&sexp, None, 0)?;
        if builder.leaves.is_empty() {
            return Err(TreebankError::NoTokens { offset: 0 });
        }
        Ok(Self { nodes: builder.nodes, root, leaves: builder.leaves })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Ids of every node (terminals included) in arena order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        0..self.nodes.len()
    }

    /// Ids of the non-terminal nodes (phrases and preterminals).
    pub fn internal_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|&i| !self.nodes[i].is_terminal())
    }

    /// Terminal node ids, left to right.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn n_tokens(&self) -> usize {
        self.leaves.len()
    }

    pub fn words(&self) -> Vec<&str> {
        self.leaves.iter().map(|&l| self.nodes[l].label.as_str()).collect()
    }

    /// Preterminal labels, left to right.
    pub fn pos_tags(&self) -> Vec<&str> {
        self.leaves
            .iter()
            .map(|&l| self.nodes[self.nodes[l].parent.unwrap()].label.as_str())
            .collect()
    }

    /// Height of a node: 0 for terminals, 1 + max child height otherwise.
    pub fn height(&self, id: NodeId) -> usize {
        self.nodes[id].height
    }

    /// The production rooted at an internal node, `None` for terminals.
    pub fn production(&self, id: NodeId) -> Option<Production> {
        let node = &self.nodes[id];
        if node.is_terminal() {
            return None;
        }
        Some(Production {
            lhs: node.label.clone(),
            rhs: node.children.iter().map(|&c| self.nodes[c].label.clone()).collect(),
        })
    }

    /// All productions of the subtree rooted at `id`, in pre-order.
    pub fn subtree_productions(&self, id: NodeId) -> Vec<Production> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            if let Some(p) = self.production(n) {
                out.push(p);
            }
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// Serialize back to a single-line bracketed string.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.write_node(self.root, &mut out);
        out
    }

    fn write_node(&self, id: NodeId, out: &mut String) {
        let node = &self.nodes[id];
        if node.is_terminal() {
            out.push_str(&node.label);
            return;
        }
        out.push('(');
        out.push_str(&node.label);
        for &c in &node.children {
            out.push(' ');
            self.write_node(c, out);
        }
        out.push(')');
    }
}

impl fmt::Display for ConstituencyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

/// A context-free production `lhs -> rhs...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Production {
    pub lhs: String,
    pub rhs: Vec<String>,
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.lhs, self.rhs.join(" "))
    }
}

/// Parse a file with one bracketed tree per non-empty line.
pub fn parse_bracketed_file(text: &str) -> Result<Vec<ConstituencyTree>, TreebankError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            ConstituencyTree::parse_bracketed(l).map_err(|e| TreebankError::AtLine {
                line: i + 1,
                source: Box::new(e),
            })
        })
        .collect()
}
