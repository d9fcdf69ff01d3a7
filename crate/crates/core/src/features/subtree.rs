//! Complete (CC) and incomplete (CI) subtree selection and their vector
//! encodings.
//!
//! A subtree is encoded as a bag of productions. Fully expanded nodes contribute
//! `LHS->RHS...`; open nonterminals (right siblings not yet reached by the
//! prefix) contribute `LABEL->?`.

use std::hash::Hasher;

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{stack_rows, FeatureError, FeatureMatrix, FeatureSpace};
use crate::treebank::{ConstituencyTree, NodeId, Production, StimulusCorpus};

/// Marker used in place of the right-hand side of an unexpanded node.
pub const OPEN_MARKER: &str = "?";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingMode {
    /// Each item increments bucket `fnv1a64(item) mod dim`.
    HashedProductionCounts,
    /// Each item adds a seeded Gaussian vector scaled by `1/sqrt(dim)`.
    SeededRandomProjection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtreeEncodingConfig {
    pub dim: usize,
    pub mode: EncodingMode,
    pub seed: u64,
    /// Only nodes within this many levels of the subtree root are encoded.
    pub max_depth: Option<usize>,
}

impl Default for SubtreeEncodingConfig {
    fn default() -> Self {
        Self { dim: 250, mode: EncodingMode::HashedProductionCounts, seed: 0, max_depth: None }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// A (possibly partial) subtree reduced to its expanded productions and the
/// labels of its open nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubtreeView {
    pub productions: Vec<Production>,
    pub open: Vec<String>,
}

impl SubtreeView {
    /// Every production under `node`, optionally depth-limited.
    pub fn complete(tree: &ConstituencyTree, node: NodeId, max_depth: Option<usize>) -> Self {
        let base = tree.node(node).depth;
        let productions = tree
            .subtree_productions(node)
            .into_iter()
            .zip(preorder_internal(tree, node))
            .filter(|(_, id)| max_depth.is_none_or(|d| tree.node(*id).depth - base < d))
            .map(|(p, _)| p)
            .collect();
        Self { productions, open: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.productions.is_empty() && self.open.is_empty()
    }

    /// Item strings fed to the encoder.
    pub fn items(&self) -> impl Iterator<Item = String> + '_ {
        self.productions
            .iter()
            .map(|p| p.to_string())
            .chain(self.open.iter().map(|l| format!("{l}->{OPEN_MARKER}")))
    }
}

fn preorder_internal(tree: &ConstituencyTree, node: NodeId) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        if !tree.node(n).is_terminal() {
            out.push(n);
        }
        stack.extend(tree.node(n).children.iter().rev());
    }
    out
}

/// The largest subtree completed by token `k`: the maximal-height node whose
/// span ends at `k + 1` (so `k` is one of its leaves and every leaf has been
/// seen). Ties go to the node closest to the root.
pub fn complete_subtree(tree: &ConstituencyTree, k: usize) -> NodeId {
    assert!(k < tree.n_tokens(), "token index {k} out of range");
    let mut best: Option<NodeId> = None;
    // Candidates form a chain of ancestors of leaf k whose span ends at k + 1.
    let mut cur = tree.node(tree.leaves()[k]).parent;
    while let Some(id) = cur {
        let node = tree.node(id);
        if node.end != k + 1 {
            break;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let bn = tree.node(b);
                node.height > bn.height || (node.height == bn.height && node.depth < bn.depth)
            }
        };
        if better {
            best = Some(id);
        }
        cur = node.parent;
    }
    best.expect("a preterminal always qualifies")
}

/// The prefix tree after token `k`: every node covering a leaf `<= k` is
/// expanded; children that start after `k` stay open.
pub fn incomplete_subtree(tree: &ConstituencyTree, k: usize, max_depth: Option<usize>) -> SubtreeView {
    assert!(k < tree.n_tokens(), "token index {k} out of range");
    let mut view = SubtreeView::default();
    let mut stack = vec![tree.root()];
    while let Some(id) = stack.pop() {
        let node = tree.node(id);
        if node.is_terminal() {
            continue;
        }
        if max_depth.is_some_and(|d| node.depth >= d) {
            continue;
        }
        view.productions.push(tree.production(id).unwrap());
        for &c in node.children.iter().rev() {
            let child = tree.node(c);
            if child.start <= k {
                stack.push(c);
            } else if max_depth.is_none_or(|d| child.depth < d) {
                view.open.push(child.label.clone());
            }
        }
    }
    view
}

/// Number of internal nodes completed by token `k` (whose rightmost leaf is `k`).
pub fn node_count(tree: &ConstituencyTree, k: usize) -> usize {
    tree.internal_ids().filter(|&i| tree.node(i).end == k + 1).count()
}

/// Encode arbitrary item strings (productions or symbols) into a vector.
pub fn encode_items<I: IntoIterator<Item = String>>(items: I, cfg: &SubtreeEncodingConfig) -> Vec<f64> {
    assert!(cfg.dim >= 1, "encoding dim must be >= 1");
    let mut v = vec![0.0; cfg.dim];
    accumulate_items(&mut v, items, cfg, 1.0);
    v
}

pub(crate) fn accumulate_items<I: IntoIterator<Item = String>>(
    out: &mut [f64],
    items: I,
    cfg: &SubtreeEncodingConfig,
    weight: f64,
) {
    let dim = out.len();
    for item in items {
        let h = fnv1a64(item.as_bytes());
        match cfg.mode {
            EncodingMode::HashedProductionCounts => out[(h % dim as u64) as usize] += weight,
            EncodingMode::SeededRandomProjection => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ h);
                let scale = weight / (dim as f64).sqrt();
                for o in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *o += scale * z;
                }
            }
        }
    }
}

pub fn encode_subtree(sub: &SubtreeView, cfg: &SubtreeEncodingConfig) -> Vec<f64> {
    encode_items(sub.items(), cfg)
}

fn per_sentence<F>(corpus: &StimulusCorpus, cfg: &SubtreeEncodingConfig, f: F) -> Vec<Vec<f64>>
where
    F: Fn(&ConstituencyTree, usize) -> SubtreeView + Sync,
{
    corpus
        .trees()
        .par_iter()
        .map(|t| (0..t.n_tokens()).map(|k| encode_subtree(&f(t, k), cfg)).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// CC feature space: one encoded complete subtree per token.
pub fn complete_subtree_features(
    corpus: &StimulusCorpus,
    cfg: &SubtreeEncodingConfig,
) -> Result<FeatureMatrix, FeatureError> {
    let rows = per_sentence(corpus, cfg, |t, k| SubtreeView::complete(t, complete_subtree(t, k), cfg.max_depth));
    Ok(FeatureMatrix::new(FeatureSpace::CC, stack_rows(&rows, cfg.dim))?
        .with_meta("encoding", encoding_meta(cfg)))
}

/// CI feature space: one encoded prefix tree per token.
pub fn incomplete_subtree_features(
    corpus: &StimulusCorpus,
    cfg: &SubtreeEncodingConfig,
) -> Result<FeatureMatrix, FeatureError> {
    let rows = per_sentence(corpus, cfg, |t, k| incomplete_subtree(t, k, cfg.max_depth));
    Ok(FeatureMatrix::new(FeatureSpace::CI, stack_rows(&rows, cfg.dim))?
        .with_meta("encoding", encoding_meta(cfg)))
}

pub(crate) fn encoding_meta(cfg: &SubtreeEncodingConfig) -> serde_json::Value {
    serde_json::json!({
        "dim": cfg.dim,
        "mode": match cfg.mode {
            EncodingMode::HashedProductionCounts => "hashed_production_counts",
            EncodingMode::SeededRandomProjection => "seeded_random_projection",
        },
        "seed": cfg.seed,
        "max_depth": cfg.max_depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "(S (NP (PRP I)) (VP (VBD began)))";

    fn tree(s: &str) -> ConstituencyTree {
        ConstituencyTree::parse_bracketed(s).unwrap()
    }

    fn strings(v: &SubtreeView) -> Vec<String> {
        let mut s: Vec<String> = v.items().collect();
        s.sort();
        s
    }

    #[test]
    fn complete_subtree_examples() {
        let t = tree(TOY);
        let np = complete_subtree(&t, 0);
        assert_eq!(t.node(np).label, "NP");
        assert_eq!(t.node(np).span(), (0, 1));
        assert_eq!(t.height(np), 2);
        assert_eq!(t.node(complete_subtree(&t, 1)).label, "S");
        let single = tree("(X (A a))");
        assert_eq!(complete_subtree(&single, 0), single.root());
    }

    #[test]
    fn incomplete_subtree_examples() {
        let t = tree(TOY);
        let v = incomplete_subtree(&t, 0, None);
        assert_eq!(strings(&v), vec!["NP->PRP", "PRP->I", "S->NP VP", "VP->?"]);
        let full = incomplete_subtree(&t, 1, None);
        assert!(full.open.is_empty());
        let mut all: Vec<String> = t.subtree_productions(t.root()).iter().map(|p| p.to_string()).collect();
        all.sort();
        assert_eq!(strings(&full), all);
    }

    #[test]
    fn spine_with_open_right_siblings() {
        let t = tree("(A (B (C (D w) (X x)) (Y y)) (Z z))");
        let v = incomplete_subtree(&t, 0, None);
        assert_eq!(v.productions.len(), 4);
        let lhs: Vec<&str> = v.productions.iter().map(|p| p.lhs.as_str()).collect();
        assert_eq!(lhs, vec!["A", "B", "C", "D"]);
        let mut open = v.open.clone();
        open.sort();
        assert_eq!(open, vec!["X", "Y", "Z"]);
    }

    #[test]
    fn node_counts() {
        let t = tree(TOY);
        assert_eq!(node_count(&t, 0), 2);
        assert_eq!(node_count(&t, 1), 3);
    }

    #[test]
    fn encoding_basics() {
        let cfg = SubtreeEncodingConfig { dim: 8, seed: 7, ..Default::default() };
        assert!(encode_subtree(&SubtreeView::default(), &cfg).iter().all(|&x| x == 0.0));
        let t = tree("(NP (DT the) (NN dog))");
        let v = SubtreeView::complete(&t, t.root(), None);
        assert_eq!(v.productions.len(), 3);
        let e = encode_subtree(&v, &cfg);
        assert_eq!(e.iter().sum::<f64>(), 3.0);
        assert_eq!(e, encode_subtree(&v.clone(), &cfg));
    }

    #[test]
    fn random_projection_is_deterministic_and_nonzero() {
        let cfg = SubtreeEncodingConfig { dim: 16, mode: EncodingMode::SeededRandomProjection, seed: 3, max_depth: None };
        let t = tree(TOY);
        let v = SubtreeView::complete(&t, t.root(), None);
        let a = encode_subtree(&v, &cfg);
        assert_eq!(a, encode_subtree(&v, &cfg));
        assert!(a.iter().map(|x| x * x).sum::<f64>() > 0.0);
        let other = SubtreeEncodingConfig { seed: 4, ..cfg };
        assert_ne!(a, encode_subtree(&v, &other));
    }

    #[test]
    fn depth_cap() {
        let t = tree(TOY);
        let v = SubtreeView::complete(&t, t.root(), Some(1));
        assert_eq!(strings(&v), vec!["S->NP VP"]);
        let ci = incomplete_subtree(&t, 0, Some(2));
        assert_eq!(strings(&ci), vec!["NP->PRP", "S->NP VP", "VP->?"]);
    }
}
