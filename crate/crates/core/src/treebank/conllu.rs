//! CoNLL-U dependency parses.
//!
//! Only the ID, FORM, UPOS, XPOS, HEAD and DEPREL columns are read. Multiword
//! token ranges (`1-2`) and empty nodes (`1.1`) are skipped.

use super::TreebankError;

#[derive(Debug, Clone, PartialEq)]
pub struct DepToken {
    /// 0-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub upos: String,
    pub xpos: String,
}

/// A labeled edge; `head == None` is the synthetic ROOT.
#[derive(Debug, Clone, PartialEq)]
pub struct DepEdge {
    pub head: Option<usize>,
    pub dependent: usize,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyGraph {
    tokens: Vec<DepToken>,
    /// `edges[i]` is the incoming edge of token `i`.
    edges: Vec<DepEdge>,
    root: usize,
}

impl DependencyGraph {
    /// Build a graph from per-token heads (`None` = ROOT) and relations,
    /// validating the single-root tree invariants.
    pub fn new(
        tokens: Vec<DepToken>,
        heads: Vec<Option<usize>>,
        relations: Vec<String>,
    ) -> Result<Self, TreebankError> {
        let n = tokens.len();
        assert_eq!(heads.len(), n);
        assert_eq!(relations.len(), n);
        for (i, h) in heads.iter().enumerate() {
            if let Some(h) = *h {
                if h >= n {
                    return Err(TreebankError::DanglingHead { token: i + 1, head: h + 1 });
                }
                if h == i {
                    return Err(TreebankError::CycleDetected { token: i + 1 });
                }
            }
        }
        let roots: Vec<usize> = (0..n).filter(|&i| heads[i].is_none()).collect();
        if roots.len() > 1 {
            return Err(TreebankError::MultipleRoots { count: roots.len() });
        }
        // Walk up from each token; a walk longer than n revisits a node.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(h) = heads[cur] {
                cur = h;
                steps += 1;
                if steps > n {
                    return Err(TreebankError::CycleDetected { token: start + 1 });
                }
            }
        }
        let root = *roots.first().ok_or(TreebankError::CycleDetected { token: 1 })?;
        let edges = heads
            .into_iter()
            .zip(relations)
            .enumerate()
            .map(|(dependent, (head, relation))| DepEdge { head, dependent, relation })
            .collect();
        Ok(Self { tokens, edges, root })
    }

    pub fn tokens(&self) -> &[DepToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// All edges including the ROOT edge; one per token.
    pub fn edges(&self) -> &[DepEdge] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn head_of(&self, token: usize) -> Option<usize> {
        self.edges[token].head
    }

    pub fn relation_of(&self, token: usize) -> &str {
        &self.edges[token].relation
    }

    pub fn children_of(&self, token: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.head == Some(token))
            .map(|e| e.dependent)
    }

    /// Same graph with tokens relabeled: old token `i` becomes `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let n = self.len();
        let mut tokens = vec![None; n];
        let mut heads = vec![None; n];
        let mut rels = vec![String::new(); n];
        for (old, tok) in self.tokens.iter().enumerate() {
            let new = perm[old];
            tokens[new] = Some(DepToken { index: new, ..tok.clone() });
            heads[new] = self.edges[old].head.map(|h| perm[h]);
            rels[new] = self.edges[old].relation.clone();
        }
        Self::new(tokens.into_iter().map(Option::unwrap).collect(), heads, rels)
            .expect("relabeling preserves tree structure")
    }
}

fn parse_block(lines: &[(usize, &str)]) -> Result<DependencyGraph, TreebankError> {
    let mut tokens = Vec::new();
    let mut heads = Vec::new();
    let mut rels = Vec::new();
    let mut raw_heads = Vec::new();
    for &(line_no, line) in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 8 {
            return Err(TreebankError::Malformed {
                line: line_no,
                reason: format!("expected at least 8 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id.parse().map_err(|_| TreebankError::Malformed {
            line: line_no,
            reason: format!("bad token id {id:?}"),
        })?;
        if id != tokens.len() + 1 {
            return Err(TreebankError::Malformed {
                line: line_no,
                reason: format!("token id {id} out of sequence"),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| TreebankError::Malformed {
            line: line_no,
            reason: format!("bad head {:?}", cols[6]),
        })?;
        tokens.push(DepToken {
            index: id - 1,
            form: cols[1].to_string(),
            upos: cols[3].to_string(),
            xpos: cols[4].to_string(),
        });
        raw_heads.push(head);
        rels.push(cols[7].to_string());
    }
    let n = tokens.len();
    for (i, &h) in raw_heads.iter().enumerate() {
        if h > n {
            return Err(TreebankError::DanglingHead { token: i + 1, head: h });
        }
        heads.push(if h == 0 { None } else { Some(h - 1) });
    }
    DependencyGraph::new(tokens, heads, rels)
}

/// Parse a CoNLL-U document into one graph per sentence block.
pub fn parse_conllu(text: &str) -> Result<Vec<DependencyGraph>, TreebankError> {
    let mut graphs = Vec::new();
    let mut block: Vec<(usize, &str)> = Vec::new();
    let flush = |block: &mut Vec<(usize, &str)>, graphs: &mut Vec<DependencyGraph>| {
        if block.is_empty() {
            return Ok(());
        }
        let first = block[0].0;
        let g = parse_block(block).map_err(|e| TreebankError::AtLine { line: first, source: Box::new(e) })?;
        block.clear();
        if !g.is_empty() {
            graphs.push(g);
        }
        Ok::<_, TreebankError>(())
    };
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            flush(&mut block, &mut graphs)?;
        } else if !trimmed.starts_with('#') {
            block.push((i + 1, trimmed));
        }
    }
    flush(&mut block, &mut graphs)?;
    Ok(graphs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inner(e: TreebankError) -> TreebankError {
        match e {
            TreebankError::AtLine { source, .. } => *source,
            other => other,
        }
    }

    #[test]
    fn two_token_block() {
        let text = "# text = I began\n1\tI\tI\tPRON\tPRP\t_\t2\tnsubj\t_\t_\n2\tbegan\tbegin\tVERB\tVBD\t_\t0\troot\t_\t_\n";
        let gs = parse_conllu(text).unwrap();
        assert_eq!(gs.len(), 1);
        let g = &gs[0];
        assert_eq!(g.root(), 1);
        assert_eq!(g.tokens()[g.root()].form, "began");
        assert_eq!(g.head_of(0), Some(1));
        assert_eq!(g.relation_of(0), "nsubj");
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.children_of(1).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn dangling_head() {
        let text = "1\tI\t_\tPRON\tPRP\t_\t5\tnsubj\t_\t_\n2\tbegan\t_\tVERB\tVBD\t_\t0\troot\t_\t_\n";
        let err = inner(parse_conllu(text).unwrap_err());
        assert_eq!(err, TreebankError::DanglingHead { token: 1, head: 5 });
    }

    #[test]
    fn cycle() {
        let text = "1\ta\t_\tX\tX\t_\t2\tdep\t_\t_\n2\tb\t_\tX\tX\t_\t1\tdep\t_\t_\n";
        assert!(matches!(inner(parse_conllu(text).unwrap_err()), TreebankError::CycleDetected { .. }));
    }

    #[test]
    fn multiple_roots() {
        let text = "1\ta\t_\tX\tX\t_\t0\troot\t_\t_\n2\tb\t_\tX\tX\t_\t0\troot\t_\t_\n";
        assert_eq!(inner(parse_conllu(text).unwrap_err()), TreebankError::MultipleRoots { count: 2 });
    }

    #[test]
    fn skips_ranges_and_comments_and_splits_blocks() {
        let text = "# sent_id = 1\n1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n1\tdo\t_\tAUX\tVBP\t_\t0\troot\t_\t_\n2\tn't\t_\tPART\tRB\t_\t1\tadvmod\t_\t_\n\n1\tyes\t_\tINTJ\tUH\t_\t0\troot\t_\t_\n";
        let gs = parse_conllu(text).unwrap();
        assert_eq!(gs.len(), 2);
        assert_eq!(gs[0].len(), 2);
        assert_eq!(gs[1].len(), 1);
    }

    #[test]
    fn relabel_permutes_edges() {
        let text = "1\ta\t_\tX\tX\t_\t2\tdep\t_\t_\n2\tb\t_\tX\tX\t_\t0\troot\t_\t_\n3\tc\t_\tX\tX\t_\t2\tobj\t_\t_\n";
        let g = &parse_conllu(text).unwrap()[0];
        let r = g.relabeled(&[2, 0, 1]);
        assert_eq!(r.root(), 0);
        assert_eq!(r.tokens()[2].form, "a");
        assert_eq!(r.head_of(2), Some(0));
        assert_eq!(r.relation_of(1), "obj");
    }
}
