//! Induce a PCFG from trees and parse a sentence word by word.

use parsebrain::features::SubtreeEncodingConfig;
use parsebrain::incparser::{induce_pcfg, inc_features, parse_incrementally, prefix_logprob, BeamConfig, InduceConfig};
use parsebrain::synth::toy_corpus;
use parsebrain::treebank::parse_bracketed_file;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trees = parse_bracketed_file(&toy_corpus(300.0, 2).trees)?;
    let g = induce_pcfg(&trees, &InduceConfig::default())?;
    println!("{} rules", g.rules().len());

    let sentence = &trees[0];
    let words = sentence.words();
    let cfg = BeamConfig::default();
    let enc = SubtreeEncodingConfig { dim: 8, ..SubtreeEncodingConfig::default() };
    for (w, beam) in words.iter().zip(parse_incrementally(&words, &g, &cfg)) {
        match beam {
            Some(b) => {
                let best = &b.derivations()[0];
                println!("{w:<10} logp {:>8.3}  beam {}  best pending {}", prefix_logprob(&b), b.len(), best.pending().len());
                println!("           INC {:?}", inc_features(&b, &g, &enc));
            }
            None => println!("{w:<10} beam exhausted, restarting"),
        }
    }
    Ok(())
}
