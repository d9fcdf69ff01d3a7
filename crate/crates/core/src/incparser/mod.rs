//! Incremental top-down PCFG parsing with beam search and the INC feature space.
//!
//! A [`Derivation`] is a leftmost top-down partial derivation: the rules applied
//! so far, the pending symbols still to be expanded, and its log-probability.
//! [`Beam::advance`] extends every derivation until the next word is scanned.

mod pcfg;

pub use pcfg::{induce_pcfg, InduceConfig, Pcfg, Rule, RuleId, Symbol, SymbolId, START_SYMBOL, UNK};

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::features::{
    accumulate_items, encoding_meta, stack_rows, FeatureError, FeatureMatrix, FeatureSpace, SubtreeEncodingConfig,
    OPEN_MARKER,
};
use crate::treebank::StimulusCorpus;

#[derive(Debug, Error, PartialEq)]
pub enum ParserError {
    #[error("cannot induce a grammar from an empty treebank")]
    EmptyTreebank,
    #[error("no derivation in the beam can scan {word:?}")]
    BeamExhausted { word: String },
    #[error("rule for {lhs} has probability {prob} outside (0, 1]")]
    BadProbability { lhs: String, prob: f64 },
    #[error("rule for {lhs} has an empty right-hand side")]
    EmptyRule { lhs: String },
    #[error("nonterminal {symbol} has no rules")]
    NoRules { symbol: String },
    #[error("rules for {lhs} sum to {total}")]
    Unnormalized { lhs: String, total: f64 },
    #[error("grammar line {line} is malformed")]
    Malformed { line: usize },
}

/// Width used for an unbounded (exhaustive) beam.
pub const UNBOUNDED: usize = usize::MAX;
/// Default cap on consecutive expansions without a scan.
pub const DEFAULT_EXPANSION_CAP: usize = 25;

#[derive(Debug)]
struct Applied {
    rule: RuleId,
    prev: Option<Arc<Applied>>,
}

/// A partial leftmost derivation.
#[derive(Debug, Clone)]
pub struct Derivation {
    /// Pending symbols with the leftmost one last.
    stack: Vec<Symbol>,
    applied: Option<Arc<Applied>>,
    n_applied: usize,
    logp: f64,
}

impl Derivation {
    fn start(g: &Pcfg) -> Self {
        Self { stack: vec![Symbol::Nonterminal(g.start())], applied: None, n_applied: 0, logp: 0.0 }
    }

    pub fn logp(&self) -> f64 {
        self.logp
    }

    /// Pending symbols, leftmost first.
    pub fn pending(&self) -> Vec<Symbol> {
        self.stack.iter().rev().copied().collect()
    }

    /// Applied rules in application order.
    pub fn applied(&self) -> Vec<RuleId> {
        let mut out = Vec::with_capacity(self.n_applied);
        let mut cur = self.applied.as_deref();
        while let Some(a) = cur {
            out.push(a.rule);
            cur = a.prev.as_deref();
        }
        out.reverse();
        out
    }

    fn expand(&self, id: RuleId, rule: &Rule) -> Self {
        let mut stack = self.stack.clone();
        stack.pop();
        stack.extend(rule.rhs.iter().rev());
        Self {
            stack,
            applied: Some(Arc::new(Applied { rule: id, prev: self.applied.clone() })),
            n_applied: self.n_applied + 1,
            logp: self.logp + rule.logp,
        }
    }

    /// Items for the INC encoding: applied rules and `X->?` per pending symbol.
    pub fn items<'a>(&self, g: &'a Pcfg) -> impl Iterator<Item = String> + 'a {
        let applied = self.applied().into_iter().map(|r| g.rule_string(r));
        let pending: Vec<String> =
            self.pending().into_iter().map(|s| format!("{}->{}", g.symbol_name(s), OPEN_MARKER)).collect();
        applied.chain(pending)
    }
}

struct Frontier {
    d: Derivation,
    expansions: usize,
    seq: u64,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d.logp.total_cmp(&other.d.logp).then(other.seq.cmp(&self.seq))
    }
}

/// Parser limits.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    /// Maximum number of derivations kept after each word; [`UNBOUNDED`] keeps all.
    pub width: usize,
    /// Derivations needing more than this many expansions before a scan are dropped.
    pub expansion_cap: usize,
    /// Hard bound on expansions per word; the search stops early when reached.
    pub max_work: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { width: 10, expansion_cap: DEFAULT_EXPANSION_CAP, max_work: 2_000_000 }
    }
}

/// Derivations sorted by descending log-probability.
#[derive(Debug, Clone)]
pub struct Beam {
    derivations: Vec<Derivation>,
    cfg: BeamConfig,
}

impl Beam {
    /// A beam holding the single empty derivation `[start]`.
    pub fn new(g: &Pcfg, cfg: BeamConfig) -> Self {
        assert!(cfg.width >= 1, "beam width must be >= 1");
        Self { derivations: vec![Derivation::start(g)], cfg }
    }

    pub fn derivations(&self) -> &[Derivation] {
        &self.derivations
    }

    pub fn len(&self) -> usize {
        self.derivations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.derivations.is_empty()
    }

    pub fn config(&self) -> &BeamConfig {
        &self.cfg
    }

    /// Consume one word. Best-first search over expansions of every derivation
    /// until `width` derivations have scanned the word.
    pub fn advance(&self, word: &str, g: &Pcfg) -> Result<Beam, ParserError> {
        let exhausted = || ParserError::BeamExhausted { word: word.to_string() };
        let w = g.lookup_word(word).ok_or_else(exhausted)?;
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        for d in &self.derivations {
            heap.push(Frontier { d: d.clone(), expansions: 0, seq });
            seq += 1;
        }
        let mut out = Vec::new();
        let mut work = 0usize;
        while let Some(Frontier { mut d, expansions, .. }) = heap.pop() {
            match d.stack.last().copied() {
                None => {}
                Some(Symbol::Terminal(t)) => {
                    if t == w {
                        d.stack.pop();
                        out.push(d);
                        if out.len() >= self.cfg.width {
                            break;
                        }
                    }
                }
                Some(Symbol::Nonterminal(nt)) => {
                    if expansions >= self.cfg.expansion_cap || !g.can_start_with(nt, w) {
                        continue;
                    }
                    for &id in g.rules_for(nt) {
                        heap.push(Frontier { d: d.expand(id, g.rule(id)), expansions: expansions + 1, seq });
                        seq += 1;
                    }
                    work += 1;
                    if work >= self.cfg.max_work {
                        log::warn!("beam search for {word:?} stopped after {work} expansions");
                        break;
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(exhausted());
        }
        out.sort_by(|a, b| b.logp.total_cmp(&a.logp));
        Ok(Beam { derivations: out, cfg: self.cfg.clone() })
    }
}

/// Functional form of [`Beam::advance`].
pub fn beam_advance(beam: &Beam, word: &str, g: &Pcfg) -> Result<Beam, ParserError> {
    beam.advance(word, g)
}

/// Log of the summed probability of every derivation in the beam.
pub fn prefix_logprob(beam: &Beam) -> f64 {
    log_sum_exp(beam.derivations.iter().map(|d| d.logp))
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Softmax-weighted sum of each derivation's hashed item counts.
pub fn inc_features(beam: &Beam, g: &Pcfg, cfg: &SubtreeEncodingConfig) -> Vec<f64> {
    let mut out = vec![0.0; cfg.dim];
    let z = prefix_logprob(beam);
    for d in &beam.derivations {
        accumulate_items(&mut out, d.items(g), cfg, (d.logp - z).exp());
    }
    out
}

/// Log-probability of a complete sentence, summed over every derivation the
/// beam finds that ends with an empty stack.
pub fn sentence_logprob(words: &[&str], g: &Pcfg, cfg: BeamConfig) -> Result<f64, ParserError> {
    let mut beam = Beam::new(g, cfg);
    for w in words {
        beam = beam.advance(w, g)?;
    }
    Ok(log_sum_exp(beam.derivations.iter().filter(|d| d.stack.is_empty()).map(|d| d.logp)))
}

/// Per-word beam states for one sentence. When the beam is exhausted the
/// word gets `None` and parsing restarts from the start symbol.
pub fn parse_incrementally(words: &[&str], g: &Pcfg, cfg: &BeamConfig) -> Vec<Option<Beam>> {
    let mut beam = Beam::new(g, cfg.clone());
    words
        .iter()
        .map(|w| match beam.advance(w, g) {
            Ok(next) => {
                beam = next.clone();
                Some(next)
            }
            Err(e) => {
                log::warn!("{e}; restarting the beam");
                beam = Beam::new(g, cfg.clone());
                None
            }
        })
        .collect()
}

/// INC feature space: one row per token, zero rows where the beam was exhausted.
pub fn inc_feature_matrix(
    corpus: &StimulusCorpus,
    g: &Pcfg,
    beam_cfg: &BeamConfig,
    enc: &SubtreeEncodingConfig,
) -> Result<FeatureMatrix, FeatureError> {
    let per_sentence: Vec<(Vec<Vec<f64>>, usize)> = corpus
        .trees()
        .par_iter()
        .map(|t| {
            let words = t.words();
            let beams = parse_incrementally(&words, g, beam_cfg);
            let misses = beams.iter().filter(|b| b.is_none()).count();
            let rows = beams
                .iter()
                .map(|b| b.as_ref().map_or_else(|| vec![0.0; enc.dim], |b| inc_features(b, g, enc)))
                .collect();
            (rows, misses)
        })
        .collect();
    let exhausted: usize = per_sentence.iter().map(|p| p.1).sum();
    let rows: Vec<Vec<f64>> = per_sentence.into_iter().flat_map(|p| p.0).collect();
    let width = if beam_cfg.width == UNBOUNDED { serde_json::Value::Null } else { beam_cfg.width.into() };
    let m = FeatureMatrix::new(FeatureSpace::INC, stack_rows(&rows, enc.dim))?
        .with_meta("encoding", encoding_meta(enc))
        .with_meta("beam_width", width)
        .with_meta("exhausted_words", exhausted);
    Ok(m)
}
