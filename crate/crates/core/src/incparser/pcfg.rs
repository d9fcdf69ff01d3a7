//! Probabilistic context-free grammars induced from a treebank.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use super::ParserError;
use crate::treebank::ConstituencyTree;

/// Synthetic start symbol placed above each tree's root label.
pub const START_SYMBOL: &str = "TOP";
/// Terminal that unseen words are mapped to.
pub const UNK: &str = "<UNK>";

pub type SymbolId = usize;
pub type RuleId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Nonterminal(SymbolId),
    Terminal(SymbolId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub lhs: SymbolId,
    pub rhs: Vec<Symbol>,
    pub prob: f64,
    pub logp: f64,
}

/// A PCFG with interned nonterminal and terminal names.
///
/// Terminals and nonterminals live in separate namespaces, so a word may share
/// its spelling with a category label.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcfg {
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    nt_index: HashMap<String, SymbolId>,
    t_index: HashMap<String, SymbolId>,
    rules: Vec<Rule>,
    by_lhs: Vec<Vec<RuleId>>,
    start: SymbolId,
    /// `first[nt]` holds the terminals that can start a string derived from `nt`.
    first: Vec<BTreeSet<SymbolId>>,
}

/// Options for [`induce_pcfg`].
#[derive(Debug, Clone, PartialEq)]
pub struct InduceConfig {
    /// Add-k smoothing constant over the observed alternatives of each LHS.
    pub add_k: f64,
    /// Add `P -> <UNK>` rules estimated from hapax words.
    pub unk: bool,
}

impl Default for InduceConfig {
    fn default() -> Self {
        Self { add_k: 0.0, unk: true }
    }
}

impl Pcfg {
    /// Build a grammar from explicit rules. A right-hand-side symbol is a
    /// nonterminal iff it appears as some rule's left-hand side.
    pub fn from_rules(start: &str, rules: &[(&str, &[&str], f64)]) -> Result<Self, ParserError> {
        let owned: Vec<(String, Vec<String>, f64)> = rules
            .iter()
            .map(|(l, r, p)| (l.to_string(), r.iter().map(|s| s.to_string()).collect(), *p))
            .collect();
        let lhs_set: BTreeSet<String> = owned.iter().map(|r| r.0.clone()).collect();
        let typed = owned
            .into_iter()
            .map(|(l, r, p)| {
                let rhs = r.into_iter().map(|s| (lhs_set.contains(&s), s)).collect();
                (l, rhs, p)
            })
            .collect();
        Self::build(start, typed)
    }

    /// `rules`: (lhs, [(is_nonterminal, name)], prob).
    fn build(start: &str, rules: Vec<(String, Vec<(bool, String)>, f64)>) -> Result<Self, ParserError> {
        let mut g = Pcfg {
            nonterminals: Vec::new(),
            terminals: Vec::new(),
            nt_index: HashMap::new(),
            t_index: HashMap::new(),
            rules: Vec::new(),
            by_lhs: Vec::new(),
            start: 0,
            first: Vec::new(),
        };
        g.start = g.intern_nt(start);
        for (lhs, rhs, prob) in rules {
            if !(prob > 0.0 && prob <= 1.0 + 1e-12) {
                return Err(ParserError::BadProbability { lhs, prob });
            }
            if rhs.is_empty() {
                return Err(ParserError::EmptyRule { lhs });
            }
            let lhs_id = g.intern_nt(&lhs);
            let rhs = rhs
                .into_iter()
                .map(|(is_nt, s)| if is_nt { Symbol::Nonterminal(g.intern_nt(&s)) } else { Symbol::Terminal(g.intern_t(&s)) })
                .collect();
            g.rules.push(Rule { lhs: lhs_id, rhs, prob: prob.min(1.0), logp: prob.min(1.0).ln() });
        }
        g.by_lhs = vec![Vec::new(); g.nonterminals.len()];
        for (i, r) in g.rules.iter().enumerate() {
            g.by_lhs[r.lhs].push(i);
        }
        for (nt, ids) in g.by_lhs.iter().enumerate() {
            if ids.is_empty() {
                return Err(ParserError::NoRules { symbol: g.nonterminals[nt].clone() });
            }
            let total: f64 = ids.iter().map(|&i| g.rules[i].prob).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(ParserError::Unnormalized { lhs: g.nonterminals[nt].clone(), total });
            }
        }
        g.first = g.compute_first();
        Ok(g)
    }

    fn intern_nt(&mut self, s: &str) -> SymbolId {
        if let Some(&i) = self.nt_index.get(s) {
            return i;
        }
        self.nonterminals.push(s.to_string());
        self.nt_index.insert(s.to_string(), self.nonterminals.len() - 1);
        self.nonterminals.len() - 1
    }

    fn intern_t(&mut self, s: &str) -> SymbolId {
        if let Some(&i) = self.t_index.get(s) {
            return i;
        }
        self.terminals.push(s.to_string());
        self.t_index.insert(s.to_string(), self.terminals.len() - 1);
        self.terminals.len() - 1
    }

    fn compute_first(&self) -> Vec<BTreeSet<SymbolId>> {
        let mut first = vec![BTreeSet::new(); self.nonterminals.len()];
        loop {
            let mut changed = false;
            for r in &self.rules {
                let add: Vec<SymbolId> = match r.rhs[0] {
                    Symbol::Terminal(t) => vec![t],
                    Symbol::Nonterminal(n) => first[n].iter().copied().collect(),
                };
                for t in add {
                    changed |= first[r.lhs].insert(t);
                }
            }
            if !changed {
                return first;
            }
        }
    }

    pub fn start(&self) -> SymbolId {
        self.start
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rules_for(&self, nt: SymbolId) -> &[RuleId] {
        &self.by_lhs[nt]
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id]
    }

    pub fn nonterminal_name(&self, id: SymbolId) -> &str {
        &self.nonterminals[id]
    }

    pub fn terminal_name(&self, id: SymbolId) -> &str {
        &self.terminals[id]
    }

    pub fn symbol_name(&self, s: Symbol) -> &str {
        match s {
            Symbol::Nonterminal(i) => self.nonterminal_name(i),
            Symbol::Terminal(i) => self.terminal_name(i),
        }
    }

    pub fn nonterminal(&self, name: &str) -> Option<SymbolId> {
        self.nt_index.get(name).copied()
    }

    pub fn terminal(&self, word: &str) -> Option<SymbolId> {
        self.t_index.get(word).copied()
    }

    /// Terminal for a word, falling back to `<UNK>` when the grammar has one.
    pub fn lookup_word(&self, word: &str) -> Option<SymbolId> {
        self.terminal(word).or_else(|| self.terminal(UNK))
    }

    /// Whether a string derived from `nt` can start with terminal `t`.
    pub fn can_start_with(&self, nt: SymbolId, t: SymbolId) -> bool {
        self.first[nt].contains(&t)
    }

    pub fn n_nonterminals(&self) -> usize {
        self.nonterminals.len()
    }

    /// Render a rule as `LHS->RHS...`.
    pub fn rule_string(&self, id: RuleId) -> String {
        let r = &self.rules[id];
        let rhs: Vec<&str> = r.rhs.iter().map(|&s| self.symbol_name(s)).collect();
        format!("{}->{}", self.nonterminals[r.lhs], rhs.join(" "))
    }

    /// Text serialization: a `#start` header, then `LHS<TAB>RHS...<TAB>prob`
    /// with space-separated right-hand sides. Rules are sorted for stable output.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<(String, String, f64)> = self
            .rules
            .iter()
            .map(|r| {
                let rhs: Vec<&str> = r.rhs.iter().map(|&s| self.symbol_name(s)).collect();
                (self.nonterminals[r.lhs].clone(), rhs.join(" "), r.prob)
            })
            .collect();
        lines.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out = format!("#start\t{}\n", self.nonterminals[self.start]);
        for (l, r, p) in lines {
            let _ = writeln!(out, "{l}\t{r}\t{p:?}");
        }
        out
    }

    /// Inverse of [`Pcfg::to_text`].
    pub fn from_text(text: &str) -> Result<Self, ParserError> {
        let mut start = None;
        let mut rows: Vec<(String, Vec<String>, f64)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#start\t") {
                start = Some(rest.trim().to_string());
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(ParserError::Malformed { line: i + 1 });
            }
            let prob: f64 = cols[2].trim().parse().map_err(|_| ParserError::Malformed { line: i + 1 })?;
            rows.push((cols[0].to_string(), cols[1].split(' ').map(str::to_string).collect(), prob));
        }
        let start = start.or_else(|| rows.first().map(|r| r.0.clone())).ok_or(ParserError::EmptyTreebank)?;
        let rhs: Vec<Vec<&str>> = rows.iter().map(|r| r.1.iter().map(String::as_str).collect()).collect();
        let specs: Vec<(&str, &[&str], f64)> =
            rows.iter().zip(&rhs).map(|(r, rhs)| (r.0.as_str(), rhs.as_slice(), r.2)).collect();
        Self::from_rules(&start, &specs)
    }
}

/// Induce a PCFG from a treebank with add-k smoothing:
/// `p(A -> β) = (count + k) / (count(A) + k * |alternatives of A|)`.
///
/// Each tree root `X` contributes `TOP -> X` unless the root is already
/// labeled `TOP`. With `cfg.unk`, every preterminal that emitted a hapax word
/// gets a `P -> <UNK>` alternative whose count is its number of hapax words
/// (every word type is used when the treebank has no hapaxes).
pub fn induce_pcfg(trees: &[ConstituencyTree], cfg: &InduceConfig) -> Result<Pcfg, ParserError> {
    if trees.is_empty() {
        return Err(ParserError::EmptyTreebank);
    }
    // (lhs, rhs with nonterminal flags) -> count
    let mut counts: BTreeMap<(String, Vec<(bool, String)>), f64> = BTreeMap::new();
    let mut word_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut emitted: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for t in trees {
        let root = t.node(t.root());
        if root.label != START_SYMBOL {
            *counts.entry((START_SYMBOL.to_string(), vec![(true, root.label.clone())])).or_default() += 1.0;
        }
        for id in t.internal_ids() {
            let node = t.node(id);
            let rhs = node
                .children
                .iter()
                .map(|&c| {
                    let child = t.node(c);
                    (!child.is_terminal(), child.label.clone())
                })
                .collect();
            *counts.entry((node.label.clone(), rhs)).or_default() += 1.0;
            if let [c] = node.children.as_slice() {
                let leaf = t.node(*c);
                if leaf.is_terminal() {
                    *word_counts.entry(leaf.label.clone()).or_default() += 1;
                    emitted.entry(leaf.label.clone()).or_default().insert(node.label.clone());
                }
            }
        }
    }
    if cfg.unk {
        let hapax: Vec<&String> = word_counts.iter().filter(|(_, &c)| c == 1).map(|(w, _)| w).collect();
        let pool: Vec<&String> = if hapax.is_empty() { word_counts.keys().collect() } else { hapax };
        let mut unk: BTreeMap<String, f64> = BTreeMap::new();
        for w in pool {
            for p in &emitted[w] {
                *unk.entry(p.clone()).or_default() += 1.0;
            }
        }
        for (p, c) in unk {
            *counts.entry((p, vec![(false, UNK.to_string())])).or_default() += c;
        }
    }
    let mut lhs_total: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for ((lhs, _), c) in &counts {
        let e = lhs_total.entry(lhs.as_str()).or_default();
        e.0 += c;
        e.1 += 1;
    }
    let k = cfg.add_k;
    let rules = counts
        .iter()
        .map(|((lhs, rhs), c)| {
            let (total, alts) = lhs_total[lhs.as_str()];
            (lhs.clone(), rhs.clone(), (c + k) / (total + k * alts as f64))
        })
        .collect();
    Pcfg::build(START_SYMBOL, rules)
}
