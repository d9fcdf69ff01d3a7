//! Train the dependency GCN on a toy corpus and extract token vectors.

use parsebrain::gcn::{extract_dep_features, gcn_train, GcnConfig, TrainConfig};
use parsebrain::synth::toy_corpus;
use parsebrain::treebank::{parse_bracketed_file, parse_conllu, StimulusCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = toy_corpus(120.0, 3);
    let corpus = StimulusCorpus::from_trees(parse_bracketed_file(&toy.trees)?).with_graphs(parse_conllu(&toy.conllu)?)?;
    let cfg = GcnConfig::from_graphs(corpus.graphs().unwrap(), 2, 32, 16);
    let tc = TrainConfig { epochs: 20, ..TrainConfig::default() };
    let (model, report) = gcn_train(&corpus, cfg, &tc)?;
    println!("loss {:.4} -> {:.4}", report.initial_loss, report.final_loss());
    for (e, l) in report.epoch_losses.iter().enumerate().step_by(5) {
        println!("  epoch {e:>2}: {l:.4}");
    }
    let f = extract_dep_features(&corpus, &model)?;
    println!("DEP features {}x{}", f.rows(), f.dim());
    Ok(())
}
