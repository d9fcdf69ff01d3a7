//! Word-level probe: how much of a semantic space each feature space predicts.

use nalgebra::DMatrix;
use parsebrain::encoder::{semantic_probe, ProbeConfig};
use parsebrain::features::{complete_subtree_features, incomplete_subtree_features, punctuation_features, PuMark, SubtreeEncodingConfig};
use parsebrain::synth::toy_corpus;
use parsebrain::treebank::{parse_bracketed_file, StimulusCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = StimulusCorpus::from_trees(parse_bracketed_file(&toy_corpus(300.0, 5).trees)?);
    let enc = SubtreeEncodingConfig { dim: 32, ..SubtreeEncodingConfig::default() };
    let cc = complete_subtree_features(&corpus, &enc)?;
    let ci = incomplete_subtree_features(&corpus, &enc)?;
    let pu = punctuation_features(&corpus, PuMark::Preceding)?;

    // a stand-in "semantic" target: a fixed mixing of CI plus a word-identity hash
    let words: Vec<f64> = corpus.tokens().map(|t| (t.surface.len() % 7) as f64).collect();
    let mix = DMatrix::from_fn(ci.dim(), 3, |i, j| ((i * 3 + j) % 5) as f64 - 2.0);
    let mut targets = ci.values() * mix;
    for (i, w) in words.iter().enumerate() {
        targets[(i, 0)] += w;
    }

    let cfg = ProbeConfig::default();
    for f in [&pu, &cc, &ci] {
        println!("{:<3} R2 {:.3}", f.space(), semantic_probe(f.values(), &targets, &cfg)?);
    }
    Ok(())
}
