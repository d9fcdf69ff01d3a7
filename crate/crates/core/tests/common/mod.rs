#![allow(dead_code)]

use parsebrain::incparser::{Pcfg, RuleId, Symbol};
use parsebrain::treebank::{parse_conllu, ConstituencyTree, DependencyGraph, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PHRASES: [&str; 6] = ["S", "NP", "VP", "PP", "ADJP", "SBAR"];
const TAGS: [&str; 6] = ["DT", "NN", "VB", "IN", "JJ", "PRP"];

fn gen_node(rng: &mut ChaCha8Rng, depth: usize, max_depth: usize, remaining: &mut usize, out: &mut String) {
    let leafy = depth + 2 >= max_depth || *remaining <= 1 || (depth > 0 && rng.random_bool(0.35));
    if leafy {
        *remaining -= 1;
        let tag = TAGS[rng.random_range(0..TAGS.len())];
        out.push_str(&format!("({tag} w{})", rng.random_range(0..20)));
        return;
    }
    out.push('(');
    out.push_str(PHRASES[rng.random_range(0..PHRASES.len())]);
    let n = rng.random_range(1..=3usize);
    for _ in 0..n {
        if *remaining == 0 {
            break;
        }
        out.push(' ');
        gen_node(rng, depth + 1, max_depth, remaining, out);
    }
    out.push(')');
}

/// A random bracketed tree with at most `max_tokens` words and at most
/// `max_depth` levels from root to word.
pub fn random_tree(seed: u64, max_tokens: usize, max_depth: usize) -> ConstituencyTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = rng.random_range(1..=max_tokens);
    let mut s = String::new();
    gen_node(&mut rng, 0, max_depth, &mut remaining, &mut s);
    ConstituencyTree::parse_bracketed(&s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

/// Height of the tree in levels, counting the word level.
pub fn levels(t: &ConstituencyTree) -> usize {
    t.nodes().iter().map(|n| n.depth).max().unwrap_or(0) + 1
}

/// Exhaustive complete-subtree choice: every node whose span ends at `k + 1`,
/// maximal height, then minimal depth.
pub fn oracle_complete(t: &ConstituencyTree, k: usize) -> NodeId {
    t.internal_ids()
        .filter(|&i| t.node(i).start <= k && t.node(i).end == k + 1)
        .min_by_key(|&i| (std::cmp::Reverse(t.node(i).height), t.node(i).depth))
        .expect("the preterminal of k qualifies")
}

/// Exhaustive prefix closure: sorted item strings of the incomplete subtree.
pub fn oracle_incomplete(t: &ConstituencyTree, k: usize) -> Vec<String> {
    let mut items = Vec::new();
    for i in t.internal_ids() {
        let n = t.node(i);
        if n.start <= k {
            items.push(t.production(i).unwrap().to_string());
        } else if n.parent.is_some_and(|p| t.node(p).start <= k) {
            items.push(format!("{}->?", n.label));
        }
    }
    items.sort();
    items
}

type RuleSpec = (&'static str, &'static [&'static str], f64);

/// Ten hand-built grammars without left recursion, each with at most 20 rules.
pub fn grammar_zoo() -> Vec<(&'static str, Pcfg)> {
    let specs: Vec<(&str, Vec<RuleSpec>)> = vec![
        ("tiny", vec![("S", &["A", "B"], 1.0), ("A", &["a"], 1.0), ("B", &["b"], 1.0)]),
        (
            "attachment",
            vec![
                ("S", &["NP", "VP"], 1.0),
                ("NP", &["n"], 0.6),
                ("NP", &["d", "n"], 0.3),
                ("NP", &["d", "n", "PP"], 0.1),
                ("VP", &["v", "NP"], 0.5),
                ("VP", &["v", "NP", "PP"], 0.3),
                ("VP", &["v"], 0.2),
                ("PP", &["p", "NP"], 1.0),
            ],
        ),
        (
            "unary",
            vec![
                ("S", &["X"], 0.5),
                ("S", &["Y"], 0.5),
                ("X", &["Z"], 1.0),
                ("Z", &["a"], 0.5),
                ("Z", &["a", "S"], 0.5),
                ("Y", &["a", "b"], 0.7),
                ("Y", &["a"], 0.3),
            ],
        ),
        ("right", vec![("S", &["a", "S"], 0.4), ("S", &["a"], 0.3), ("S", &["b", "S"], 0.2), ("S", &["b"], 0.1)]),
        (
            "homograph",
            vec![
                ("S", &["N", "V"], 0.5),
                ("S", &["V", "N"], 0.3),
                ("S", &["N", "N", "V"], 0.2),
                ("N", &["fish"], 0.6),
                ("N", &["dogs"], 0.4),
                ("V", &["fish"], 0.3),
                ("V", &["eat"], 0.7),
            ],
        ),
        (
            "coordination",
            vec![
                ("S", &["C"], 0.7),
                ("S", &["C", "and", "S"], 0.3),
                ("C", &["x", "y"], 0.5),
                ("C", &["x"], 0.3),
                ("C", &["y"], 0.2),
            ],
        ),
        (
            "chains",
            vec![
                ("S", &["A"], 1.0),
                ("A", &["B"], 0.5),
                ("A", &["B", "C"], 0.5),
                ("B", &["D"], 1.0),
                ("D", &["u"], 0.5),
                ("D", &["u", "D"], 0.5),
                ("C", &["w"], 1.0),
            ],
        ),
        ("brackets", vec![("S", &["l", "S", "r", "S"], 0.3), ("S", &["l", "r"], 0.4), ("S", &["l", "r", "S"], 0.3)]),
        (
            "shared",
            vec![
                ("S", &["P", "Q"], 0.5),
                ("S", &["Q", "P"], 0.5),
                ("P", &["a"], 0.5),
                ("P", &["a", "Q"], 0.5),
                ("Q", &["a"], 0.4),
                ("Q", &["b"], 0.6),
            ],
        ),
        (
            "english",
            vec![
                ("S", &["NP", "VP"], 0.9),
                ("S", &["VP"], 0.1),
                ("NP", &["DT", "NN"], 0.5),
                ("NP", &["NN"], 0.2),
                ("NP", &["DT", "JJ", "NN"], 0.2),
                ("NP", &["NN2"], 0.1),
                ("NN2", &["NN", "NN"], 1.0),
                ("VP", &["VB", "NP"], 0.6),
                ("VP", &["VB"], 0.4),
                ("DT", &["the"], 0.7),
                ("DT", &["a"], 0.3),
                ("NN", &["dog"], 0.5),
                ("NN", &["cat"], 0.4),
                ("NN", &["run"], 0.1),
                ("JJ", &["big"], 1.0),
                ("VB", &["saw"], 0.6),
                ("VB", &["run"], 0.4),
            ],
        ),
    ];
    specs
        .into_iter()
        .map(|(name, rules)| {
            assert!(rules.len() <= 20);
            (name, Pcfg::from_rules("S", &rules).unwrap())
        })
        .collect()
}

/// A leftmost derivation found by exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDerivation {
    pub applied: Vec<RuleId>,
    /// Pending symbols, leftmost first.
    pub pending: Vec<Symbol>,
    pub logp: f64,
}

/// Every leftmost derivation from the start symbol that has scanned exactly
/// `words` and stopped right after the last scan. No pruning beyond the
/// non-left-recursive grammar guaranteeing termination.
pub fn oracle_prefix(g: &Pcfg, words: &[&str]) -> Vec<OracleDerivation> {
    fn go(g: &Pcfg, words: &[usize], pos: usize, stack: &mut Vec<Symbol>, applied: &mut Vec<RuleId>, logp: f64, out: &mut Vec<OracleDerivation>) {
        let Some(&top) = stack.last() else { return };
        match top {
            Symbol::Terminal(t) => {
                if t != words[pos] {
                    return;
                }
                stack.pop();
                if pos + 1 == words.len() {
                    out.push(OracleDerivation { applied: applied.clone(), pending: stack.iter().rev().copied().collect(), logp });
                } else {
                    go(g, words, pos + 1, stack, applied, logp, out);
                }
                stack.push(top);
            }
            Symbol::Nonterminal(nt) => {
                stack.pop();
                for &id in g.rules_for(nt) {
                    let rule = g.rule(id);
                    let base = stack.len();
                    stack.extend(rule.rhs.iter().rev());
                    applied.push(id);
                    go(g, words, pos, stack, applied, logp + rule.logp, out);
                    applied.pop();
                    stack.truncate(base);
                }
                stack.push(top);
            }
        }
    }
    let Some(ids) = words.iter().map(|w| g.terminal(w)).collect::<Option<Vec<_>>>() else { return Vec::new() };
    let mut out = Vec::new();
    if ids.is_empty() {
        return out;
    }
    go(g, &ids, 0, &mut vec![Symbol::Nonterminal(g.start())], &mut Vec::new(), 0.0, &mut out);
    out
}

/// Every complete sentence of at most `max_len` words with the summed
/// probability of its derivations, in lexicographic order.
pub fn oracle_sentences(g: &Pcfg, max_len: usize) -> Vec<(Vec<String>, f64)> {
    fn go(g: &Pcfg, max_len: usize, stack: &mut Vec<Symbol>, words: &mut Vec<String>, logp: f64, out: &mut std::collections::BTreeMap<Vec<String>, f64>) {
        // every pending symbol yields at least one word
        if stack.len() + words.len() > max_len {
            return;
        }
        let Some(top) = stack.pop() else {
            *out.entry(words.clone()).or_insert(0.0) += logp.exp();
            return;
        };
        match top {
            Symbol::Terminal(t) => {
                words.push(g.terminal_name(t).to_string());
                go(g, max_len, stack, words, logp, out);
                words.pop();
            }
            Symbol::Nonterminal(nt) => {
                for &id in g.rules_for(nt) {
                    let rule = g.rule(id);
                    let base = stack.len();
                    stack.extend(rule.rhs.iter().rev());
                    go(g, max_len, stack, words, logp + rule.logp, out);
                    stack.truncate(base);
                }
            }
        }
        stack.push(top);
    }
    let mut out = std::collections::BTreeMap::new();
    go(g, max_len, &mut vec![Symbol::Nonterminal(g.start())], &mut Vec::new(), 0.0, &mut out);
    out.into_iter().collect()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// A random dependency tree over `n` tokens as a single CoNLL-U sentence.
pub fn random_graph(seed: u64, n: usize) -> DependencyGraph {
    const WORDS: [&str; 8] = ["the", "dog", "saw", "a", "cat", "ran", "home", "quickly"];
    const RELS: [&str; 5] = ["nsubj", "obj", "det", "advmod", "obl"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = rng.random_range(0..n);
    let mut attached = vec![root];
    let mut heads = vec![None; n];
    let mut order: Vec<usize> = (0..n).filter(|&i| i != root).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for t in order {
        heads[t] = Some(attached[rng.random_range(0..attached.len())]);
        attached.push(t);
    }
    let mut text = String::new();
    for (i, h) in heads.iter().enumerate() {
        let w = WORDS[rng.random_range(0..WORDS.len())];
        let (head, rel) = match h {
            None => (0, "root"),
            Some(h) => (h + 1, RELS[rng.random_range(0..RELS.len())]),
        };
        text.push_str(&format!("{}\t{w}\t{w}\tX\tX\t_\t{head}\t{rel}\t_\t_\n", i + 1));
    }
    text.push('\n');
    parse_conllu(&text).unwrap().remove(0)
}
