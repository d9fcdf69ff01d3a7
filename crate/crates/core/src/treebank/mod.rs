//! Stimulus corpus ingestion: constituency trees, dependency graphs, tokens and
//! word timing.

mod conllu;
mod timing;
mod tree;

pub use conllu::{parse_conllu, DepEdge, DepToken, DependencyGraph};
pub use timing::{load_timing, parse_timing_tsv, TimingRow, TIMING_TOLERANCE_SEC};
pub use tree::{base_label, parse_bracketed_file, ConstituencyTree, Node, NodeId, NodeKind, Production};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TreebankError {
    #[error("unbalanced parentheses at byte {offset}")]
    UnbalancedParens { offset: usize },
    #[error("empty or unlabeled node at byte {offset}")]
    EmptyNode { offset: usize },
    #[error("tree has no tokens (byte {offset})")]
    NoTokens { offset: usize },
    #[error("bare word outside a preterminal at byte {offset}")]
    UnexpectedAtom { offset: usize },
    #[error("trailing input after tree at byte {offset}")]
    TrailingInput { offset: usize },
    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<TreebankError> },
    #[error("malformed line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("sentence has {count} root tokens")]
    MultipleRoots { count: usize },
    #[error("token {token} has head {head} outside the sentence")]
    DanglingHead { token: usize, head: usize },
    #[error("dependency cycle through token {token}")]
    CycleDetected { token: usize },
    #[error("sentence {sentence}: tree has {tree} tokens but dependency graph has {graph}")]
    TokenCountMismatch { sentence: usize, tree: usize, graph: usize },
    #[error("{trees} trees but {graphs} dependency graphs")]
    SentenceCountMismatch { trees: usize, graphs: usize },
    #[error("timing file has {rows} rows but corpus has {tokens} tokens")]
    CountMismatch { rows: usize, tokens: usize },
    #[error("timing row {row}: sentence/token id ({sentence}, {token}) does not match corpus position ({expected_sentence}, {expected_token})")]
    IdMismatch { row: usize, sentence: usize, token: usize, expected_sentence: usize, expected_token: usize },
    #[error("timing row {row}: {reason}")]
    NonMonotonicTiming { row: usize, reason: String },
    #[error("timing row {row}: word {timing:?} does not match tree leaf {tree:?}")]
    SurfaceMismatch { row: usize, timing: String, tree: String },
    #[error("timing row {row}: offset {offset} s exceeds run duration {duration} s")]
    BeyondRun { row: usize, offset: f64, duration: f64 },
}

/// A word of the stimulus with its timing.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    /// 0-based position in the sentence.
    pub index: usize,
    pub surface: String,
    pub pos: String,
    pub is_punct: bool,
    /// Surface consists only of punctuation characters.
    pub punct_surface: bool,
    /// POS tag is a punctuation tag.
    pub punct_tag: bool,
    pub onset_sec: f64,
    pub offset_sec: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub id: usize,
    pub tokens: Vec<Token>,
}

const PUNCT_TAGS: &[&str] = &[
    ".", ",", ":", "``", "''", "-LRB-", "-RRB-", "-LCB-", "-RCB-", "-LSB-", "-RSB-", "#", "$", "HYPH", "NFP",
    "PUNCT", "PUNC",
];

pub fn is_punct_tag(tag: &str) -> bool {
    PUNCT_TAGS.contains(&tag)
}

/// True when every char is Unicode punctuation (general category P*), or one of
/// the PTB bracket escapes.
pub fn is_punct_surface(surface: &str) -> bool {
    if matches!(surface, "-LRB-" | "-RRB-" | "-LCB-" | "-RCB-" | "-LSB-" | "-RSB-" | "``" | "''") {
        return true;
    }
    !surface.is_empty() && surface.chars().all(is_unicode_punct)
}

fn is_unicode_punct(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_punctuation() && !matches!(c, '$' | '+' | '<' | '=' | '>' | '^' | '`' | '|' | '~');
    }
    matches!(c,
        '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}' | '\u{00B7}' | '\u{00BB}' | '\u{00BF}'
        | '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{3001}'..='\u{3003}'
        | '\u{3008}'..='\u{3011}' | '\u{FF01}'..='\u{FF0F}')
}

/// Sentences, their trees and (optionally) dependency graphs.
///
/// Immutable once built; timing is attached by [`load_timing`].
#[derive(Debug, Clone)]
pub struct StimulusCorpus {
    sentences: Vec<Sentence>,
    trees: Vec<ConstituencyTree>,
    graphs: Option<Vec<DependencyGraph>>,
    run_duration_sec: f64,
    timed: bool,
}

impl StimulusCorpus {
    pub fn from_trees(trees: Vec<ConstituencyTree>) -> Self {
        let sentences = trees
            .iter()
            .enumerate()
            .map(|(id, t)| Sentence {
                id,
                tokens: t
                    .words()
                    .into_iter()
                    .zip(t.pos_tags())
                    .enumerate()
                    .map(|(index, (w, p))| {
                        let punct_surface = is_punct_surface(w);
                        let punct_tag = is_punct_tag(p);
                        Token {
                            index,
                            surface: w.to_string(),
                            pos: p.to_string(),
                            is_punct: punct_surface || punct_tag,
                            punct_surface,
                            punct_tag,
                            onset_sec: 0.0,
                            offset_sec: 0.0,
                        }
                    })
                    .collect(),
            })
            .collect();
        Self { sentences, trees, graphs: None, run_duration_sec: 0.0, timed: false }
    }

    /// Attach dependency graphs; token counts must agree sentence by sentence.
    pub fn with_graphs(mut self, graphs: Vec<DependencyGraph>) -> Result<Self, TreebankError> {
        if graphs.len() != self.trees.len() {
            return Err(TreebankError::SentenceCountMismatch { trees: self.trees.len(), graphs: graphs.len() });
        }
        for (i, (t, g)) in self.trees.iter().zip(&graphs).enumerate() {
            if t.n_tokens() != g.len() {
                return Err(TreebankError::TokenCountMismatch { sentence: i, tree: t.n_tokens(), graph: g.len() });
            }
        }
        self.graphs = Some(graphs);
        Ok(self)
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn trees(&self) -> &[ConstituencyTree] {
        &self.trees
    }

    pub fn graphs(&self) -> Option<&[DependencyGraph]> {
        self.graphs.as_deref()
    }

    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    /// All tokens in corpus order.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn is_timed(&self) -> bool {
        self.timed
    }

    pub fn run_duration_sec(&self) -> f64 {
        self.run_duration_sec
    }

    /// Word onsets in corpus order.
    pub fn onsets(&self) -> Vec<f64> {
        self.tokens().map(|t| t.onset_sec).collect()
    }

    pub(crate) fn set_timing(&mut self, rows: &[(f64, f64)], run_duration_sec: f64) {
        for (tok, &(on, off)) in self.sentences.iter_mut().flat_map(|s| s.tokens.iter_mut()).zip(rows) {
            tok.onset_sec = on;
            tok.offset_sec = off;
        }
        self.run_duration_sec = run_duration_sec;
        self.timed = true;
    }
}
