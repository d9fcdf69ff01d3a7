//! Parse bracketed trees and CoNLL-U, attach word timings.

use parsebrain::synth::toy_corpus;
use parsebrain::treebank::{load_timing, parse_bracketed_file, parse_conllu, ConstituencyTree, StimulusCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = ConstituencyTree::parse_bracketed("(TOP (S (NP-SBJ (PRP I)) (VP (VBD began) (NP (DT a) (NN story))) (. .)))")?;
    println!("{}", t.to_bracketed());
    println!("tokens {:?}", t.words());
    for id in t.internal_ids() {
        let n = t.node(id);
        println!("  {:<4} span {:?} height {} depth {}", n.label, n.span(), n.height, n.depth);
    }

    let toy = toy_corpus(60.0, 1);
    let trees = parse_bracketed_file(&toy.trees)?;
    let graphs = parse_conllu(&toy.conllu)?;
    let corpus = StimulusCorpus::from_trees(trees).with_graphs(graphs)?;
    let corpus = load_timing(&corpus, &toy.timing, Some(60.0))?;
    println!("{} sentences, {} tokens, last onset {:.2}s", corpus.sentences().len(), corpus.n_tokens(), corpus.onsets().last().unwrap());
    let g = &corpus.graphs().unwrap()[0];
    for (i, tok) in g.tokens().iter().enumerate() {
        let head = g.head_of(i).map_or("ROOT".to_string(), |h| g.tokens()[h].form.clone());
        println!("  {i} {:<8} {:<4} <-{:<6} {head}", tok.form, tok.upos, g.relation_of(i));
    }
    Ok(())
}
