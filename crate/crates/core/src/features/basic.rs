//! Basic syntactic features: punctuation (PU), complexity metrics (CM) and
//! POS + dependency-relation one-hots (PD).

use std::collections::{BTreeSet, HashMap};

use log::warn;
use nalgebra::DMatrix;

use super::{node_count, FeatureError, FeatureMatrix, FeatureSpace};
use crate::treebank::StimulusCorpus;

/// Punctuation classes in column order. Anything unrecognised is `other`.
pub const PUNCT_ALPHABET: [&str; 12] = [".", ",", ";", ":", "!", "?", "\"", "'", "\u{2014}", "(", ")", "other"];

/// Column of a punctuation surface in [`PUNCT_ALPHABET`].
pub fn punctuation_class(surface: &str) -> usize {
    match surface {
        "," | "\u{FF0C}" => 1,
        ";" => 2,
        ":" => 3,
        "!" => 4,
        "?" => 5,
        "\"" | "``" | "''" | "\u{201C}" | "\u{201D}" | "\u{201E}" => 6,
        "'" | "`" | "\u{2018}" | "\u{2019}" => 7,
        "\u{2014}" | "\u{2013}" | "--" | "-" | "---" => 8,
        "(" | "[" | "{" | "-LRB-" | "-LSB-" | "-LCB-" => 9,
        ")" | "]" | "}" | "-RRB-" | "-RSB-" | "-RCB-" => 10,
        s if !s.is_empty() && s.chars().all(|c| c == '.') => 0,
        "\u{2026}" => 0,
        _ => 11,
    }
}

/// Which token carries a punctuation one-hot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PuMark {
    /// A word is marked with the punctuation that immediately follows it;
    /// punctuation tokens are marked with their own class.
    #[default]
    Preceding,
    /// Only punctuation tokens are marked.
    SelfOnly,
}

/// PU feature space: 12 columns, at most one 1 per row.
pub fn punctuation_features(corpus: &StimulusCorpus, mark: PuMark) -> Result<FeatureMatrix, FeatureError> {
    let n = corpus.n_tokens();
    let mut m = DMatrix::zeros(n, PUNCT_ALPHABET.len());
    let mut row = 0;
    for s in corpus.sentences() {
        for (i, tok) in s.tokens.iter().enumerate() {
            if tok.is_punct {
                m[(row, punctuation_class(&tok.surface))] = 1.0;
            } else if mark == PuMark::Preceding {
                if let Some(next) = s.tokens.get(i + 1).filter(|t| t.is_punct) {
                    m[(row, punctuation_class(&next.surface))] = 1.0;
                }
            }
            row += 1;
        }
    }
    Ok(FeatureMatrix::new(FeatureSpace::PU, m)?
        .with_meta("alphabet", PUNCT_ALPHABET.to_vec())
        .with_meta("mark", if mark == PuMark::Preceding { "preceding" } else { "self" }))
}

/// Word frequencies in occurrences per billion, keyed by lowercased word.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrequencyTable {
    per_billion: HashMap<String, f64>,
}

impl FrequencyTable {
    /// Occurrences per billion assumed for words missing from the table.
    pub const FALLBACK_PER_BILLION: f64 = 1.0;

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut per_billion = HashMap::new();
        for (i, (w, v)) in pairs.into_iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FeatureError::BadFrequency { line: i + 1, reason: format!("non-positive value {v}") });
            }
            per_billion.insert(w.as_ref().to_lowercase(), v);
        }
        Ok(Self { per_billion })
    }

    /// Parse `word<TAB>per_billion` lines.
    pub fn parse_tsv(text: &str) -> Result<Self, FeatureError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let word = cols.next().unwrap_or("").trim();
            let value = cols.next().unwrap_or("").trim();
            match value.parse::<f64>() {
                Ok(v) => {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(FeatureError::BadFrequency {
                            line: i + 1,
                            reason: format!("non-positive value {v}"),
                        });
                    }
                    pairs.push((word.to_string(), v));
                }
                Err(_) if pairs.is_empty() => continue, // header
                Err(_) => {
                    return Err(FeatureError::BadFrequency { line: i + 1, reason: format!("bad number {value:?}") })
                }
            }
        }
        Self::from_pairs(pairs)
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.per_billion.get(&word.to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.per_billion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_billion.is_empty()
    }
}

/// CM feature space: node count, word length, log10 word frequency.
pub fn complexity_metrics(corpus: &StimulusCorpus, freq: &FrequencyTable) -> Result<FeatureMatrix, FeatureError> {
    let n = corpus.n_tokens();
    let mut m = DMatrix::zeros(n, 3);
    let mut row = 0;
    let mut missing = BTreeSet::new();
    for (s, tree) in corpus.sentences().iter().zip(corpus.trees()) {
        for (k, tok) in s.tokens.iter().enumerate() {
            m[(row, 0)] = node_count(tree, k) as f64;
            m[(row, 1)] = tok.surface.chars().count() as f64;
            let per_billion = freq.get(&tok.surface).unwrap_or_else(|| {
                missing.insert(tok.surface.to_lowercase());
                FrequencyTable::FALLBACK_PER_BILLION
            });
            m[(row, 2)] = per_billion.log10();
            row += 1;
        }
    }
    if !missing.is_empty() {
        warn!(
            "{} word types missing from the frequency table, using {} per billion: {:?}",
            missing.len(),
            FrequencyTable::FALLBACK_PER_BILLION,
            missing.iter().take(10).collect::<Vec<_>>()
        );
    }
    Ok(FeatureMatrix::new(FeatureSpace::CM, m)?
        .with_meta("columns", vec!["node_count", "word_length", "log10_freq_per_billion"])
        .with_meta("missing_frequency", missing.len()))
}

/// PD feature space: one-hot POS tag followed by one-hot incoming relation.
/// Both alphabets are collected from the corpus and sorted.
pub fn pos_dep_features(corpus: &StimulusCorpus) -> Result<FeatureMatrix, FeatureError> {
    let graphs = corpus.graphs().ok_or(FeatureError::MissingGraphs(FeatureSpace::PD))?;
    let pos: BTreeSet<&str> = corpus.tokens().map(|t| t.pos.as_str()).collect();
    let rels: BTreeSet<&str> =
        graphs.iter().flat_map(|g| g.edges().iter().map(|e| e.relation.as_str())).collect();
    let pos: Vec<&str> = pos.into_iter().collect();
    let rels: Vec<&str> = rels.into_iter().collect();
    let n = corpus.n_tokens();
    let mut m = DMatrix::zeros(n, pos.len() + rels.len());
    let mut row = 0;
    for (s, g) in corpus.sentences().iter().zip(graphs) {
        for (k, tok) in s.tokens.iter().enumerate() {
            let p = pos.binary_search(&tok.pos.as_str()).unwrap();
            let r = rels.binary_search(&g.relation_of(k)).unwrap();
            m[(row, p)] = 1.0;
            m[(row, pos.len() + r)] = 1.0;
            row += 1;
        }
    }
    Ok(FeatureMatrix::new(FeatureSpace::PD, m)?
        .with_meta("pos_alphabet", pos)
        .with_meta("relation_alphabet", rels))
}
