use log::info;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{load_corpus, read_matrix, read_text, require, PipelineError, Run, RunConfig};
use crate::features::{
    complete_subtree_features, complexity_metrics, incomplete_subtree_features, pca_reduce, pos_dep_features,
    punctuation_features, FeatureMatrix, FeatureSpace, FrequencyTable,
};
use crate::gcn::{extract_dep_features, gcn_train, load_checkpoint, write_checkpoint, GcnConfig};
use crate::incparser::{induce_pcfg, inc_feature_matrix, Pcfg};
use crate::treebank::StimulusCorpus;

/// A built space plus side artifacts (relative path, bytes).
type Built = (FeatureMatrix, Vec<(String, Vec<u8>)>);

/// Fail before any work when a requested space lacks its input.
fn check_inputs(cfg: &RunConfig) -> Result<(), PipelineError> {
    require(&cfg.trees, "trees")?;
    for s in &cfg.spaces {
        let need = match s {
            FeatureSpace::CM => Some((&cfg.frequency, "frequency")),
            FeatureSpace::PD => Some((&cfg.conllu, "conllu")),
            FeatureSpace::DEP => Some((&cfg.conllu, "conllu")),
            FeatureSpace::SEM => Some((&cfg.embeddings, "embeddings")),
            _ => None,
        };
        if let Some((p, key)) = need {
            if p.is_none() {
                return Err(PipelineError::config(format!("space {s} needs `{key}`")));
            }
        }
    }
    Ok(())
}

fn build_space(space: &FeatureSpace, corpus: &StimulusCorpus, cfg: &RunConfig) -> Result<Built, PipelineError> {
    let n = corpus.n_tokens();
    let built = match space {
        FeatureSpace::PU => (punctuation_features(corpus, cfg.pu_mark)?, vec![]),
        FeatureSpace::CM => {
            let p = require(&cfg.frequency, "frequency")?;
            let freq = FrequencyTable::parse_tsv(&read_text(p)?).map_err(|e| PipelineError::input(p, e))?;
            (complexity_metrics(corpus, &freq)?, vec![])
        }
        FeatureSpace::PD => (pos_dep_features(corpus)?, vec![]),
        FeatureSpace::CC => (complete_subtree_features(corpus, &cfg.subtree)?, vec![]),
        FeatureSpace::CI => (incomplete_subtree_features(corpus, &cfg.subtree)?, vec![]),
        FeatureSpace::INC => {
            let g = match &cfg.grammar {
                Some(p) => Pcfg::from_text(&read_text(p)?).map_err(|e| PipelineError::input(p, e))?,
                None => induce_pcfg(corpus.trees(), &cfg.induce)?,
            };
            let m = inc_feature_matrix(corpus, &g, &cfg.beam, &cfg.subtree)?;
            (m, vec![("features/INC.pcfg".to_string(), g.to_text().into_bytes())])
        }
        FeatureSpace::DEP => {
            let graphs = corpus.graphs().ok_or(crate::features::FeatureError::MissingGraphs(FeatureSpace::DEP))?;
            let (model, report) = match &cfg.gcn_checkpoint {
                Some(p) => (load_checkpoint(p).map_err(|e| PipelineError::input(p, e))?, None),
                None => {
                    let gc = GcnConfig::from_graphs(graphs, cfg.gcn_layers, cfg.gcn_hidden, cfg.gcn_input_dim);
                    let (m, r) = gcn_train(corpus, gc, &cfg.gcn_train)?;
                    (m, Some(r))
                }
            };
            let mut m = extract_dep_features(corpus, &model)?;
            if let Some(r) = report {
                m = m
                    .with_meta("initial_loss", super::rounded(r.initial_loss))
                    .with_meta("final_loss", super::rounded(r.final_loss()));
            }
            let mut ckpt = Vec::new();
            write_checkpoint(&model, &mut ckpt)?;
            (m, vec![("features/DEP.gcn".to_string(), ckpt)])
        }
        FeatureSpace::SEM => {
            let p = require(&cfg.embeddings, "embeddings")?;
            let raw = FeatureMatrix::new(FeatureSpace::SEM, read_matrix(p)?).map_err(|e| PipelineError::input(p, e))?;
            raw.check_rows(n).map_err(|e| PipelineError::input(p, e))?;
            let (m, model) = pca_reduce(&raw, cfg.pca_dim, FeatureSpace::SEM)?;
            let ev: Vec<f64> = model.explained_variance.iter().map(|&v| super::rounded(v)).collect();
            (m.with_meta("source_dim", raw.dim()).with_meta("explained_variance", ev), vec![])
        }
        FeatureSpace::Ext(name) => {
            let p = cfg.ext.get(name).ok_or_else(|| PipelineError::config(format!("no ext.{name} file")))?;
            let m = FeatureMatrix::new(space.clone(), read_matrix(p)?).map_err(|e| PipelineError::input(p, e))?;
            (m, vec![])
        }
    };
    built.0.check_rows(n)?;
    Ok(built)
}

/// Build every configured space in memory, in `cfg.spaces` order.
pub fn build_features(cfg: &RunConfig) -> Result<Vec<FeatureMatrix>, PipelineError> {
    check_inputs(cfg)?;
    let corpus = load_corpus(cfg)?;
    let built: Result<Vec<Built>, _> = cfg.spaces.par_iter().map(|s| build_space(s, &corpus, cfg)).collect();
    Ok(built?.into_iter().map(|b| b.0).collect())
}

/// Write one BMAT and one JSON record per configured space.
pub fn cmd_features(run: &Run) -> Result<Vec<(FeatureSpace, usize)>, PipelineError> {
    let cfg = &run.cfg;
    check_inputs(cfg)?;
    let corpus = load_corpus(cfg)?;
    let built: Vec<Built> =
        run.install(|| cfg.spaces.par_iter().map(|s| build_space(s, &corpus, cfg)).collect::<Result<_, _>>())?;
    run.write_run_record()?;
    let mut dims = Vec::new();
    for (m, extras) in built {
        let name = m.space().as_str().to_string();
        info!("{name}: {}×{}", m.rows(), m.dim());
        run.out.write_matrix(&format!("features/{name}.bmat"), m.values())?;
        for (rel, bytes) in &extras {
            run.out.write_bytes(rel, bytes)?;
        }
        let meta: serde_json::Map<String, Value> = m.meta.clone().into_iter().collect();
        run.out.write_json(
            &format!("features/{name}.json"),
            json!({"space": name, "rows": m.rows(), "dim": m.dim(), "meta": meta}),
        )?;
        dims.push((m.space().clone(), m.dim()));
    }
    Ok(dims)
}

/// Read a space written by [`cmd_features`] under the current config hash.
pub(crate) fn load_feature(run: &Run, space: &FeatureSpace) -> Result<FeatureMatrix, PipelineError> {
    let name = space.as_str();
    let rel = format!("features/{name}.json");
    if !run.out.exists(&rel) {
        return Err(PipelineError::MissingFeatures { space: name.to_string() });
    }
    run.out.read_json(&rel)?;
    let p = run.out.path(&format!("features/{name}.bmat"));
    Ok(FeatureMatrix::new(space.clone(), read_matrix(&p)?)?)
}
