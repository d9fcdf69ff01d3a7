use std::collections::BTreeMap;

use log::info;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::features::load_feature;
use super::{file_stem, load_fmri, load_timed_corpus, read_matrix, rounded, FeatureGroup, PipelineError, Run};
use crate::encoder::{cross_validate, FoldSpec, VoxelScores};
use crate::features::FeatureSpace;
use crate::signal::{align, AlignedDesign};

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeSummary {
    pub group: String,
    pub subject: String,
    pub design_dim: usize,
    pub mean_pooled_r2: f64,
}

pub(crate) fn encoding_rel(group: &str, subject: &str, what: &str) -> String {
    format!("encode/{}/{}.{what}", file_stem(group), file_stem(subject))
}

/// Fit cross-validated encoding models for `groups` (all configured groups
/// when empty) and every subject.
pub fn cmd_encode(run: &Run, groups: &[FeatureGroup]) -> Result<Vec<EncodeSummary>, PipelineError> {
    let cfg = &run.cfg;
    let groups: Vec<FeatureGroup> = if groups.is_empty() { cfg.all_groups() } else { groups.to_vec() };
    for g in &groups {
        if let Some(s) = g.0.iter().find(|s| !cfg.spaces.contains(s)) {
            return Err(PipelineError::config(format!("group {} uses space {s}, which is not built", g.name())));
        }
    }
    if cfg.subjects.is_empty() {
        return Err(PipelineError::config("no subjects configured"));
    }
    let corpus = load_timed_corpus(cfg)?;

    let fmri: Vec<DMatrix<f64>> = cfg.subjects.iter().map(|s| load_fmri(&s.fmri)).collect::<Result<_, _>>()?;
    let n_tr = cfg.n_tr.unwrap_or(fmri[0].nrows());
    for (s, y) in cfg.subjects.iter().zip(&fmri) {
        if y.nrows() != n_tr {
            return Err(PipelineError::TrMismatch { subject: s.id.clone(), expected: n_tr, found: y.nrows() });
        }
    }
    let folds = FoldSpec::contiguous(n_tr, cfg.folds, cfg.stats.block)?;

    let mut spaces: Vec<&FeatureSpace> = groups.iter().flat_map(|g| g.0.iter()).collect();
    spaces.sort();
    spaces.dedup();
    let mut designs: BTreeMap<FeatureSpace, AlignedDesign> = BTreeMap::new();
    for s in spaces {
        let f = load_feature(run, s)?;
        f.check_rows(corpus.n_tokens())?;
        designs.insert(s.clone(), align(&f, &corpus, &cfg.resample, &cfg.fir, n_tr)?);
    }

    run.write_run_record()?;
    let mut out = Vec::new();
    for g in &groups {
        let parts: Vec<AlignedDesign> = g.0.iter().map(|s| designs[s].clone()).collect();
        let x = AlignedDesign::concat(&parts)?.matrix;
        let name = g.name();
        let scores: Vec<VoxelScores> = run.install(|| {
            fmri.par_iter().map(|y| cross_validate(&x, y, &folds, &cfg.ridge)).collect::<Result<_, _>>()
        })?;
        for (sub, sc) in cfg.subjects.iter().zip(scores) {
            let mean = sc.pooled_r2.iter().sum::<f64>() / sc.n_voxels().max(1) as f64;
            info!("{name} / {}: mean pooled R² {mean:.4}", sub.id);
            write_scores(run, &name, &sub.id, &sc, x.ncols())?;
            out.push(EncodeSummary { group: name.clone(), subject: sub.id.clone(), design_dim: x.ncols(), mean_pooled_r2: mean });
        }
    }
    Ok(out)
}

fn write_scores(run: &Run, group: &str, subject: &str, sc: &VoxelScores, dim: usize) -> Result<(), PipelineError> {
    let k = sc.folds.k();
    let v = sc.n_voxels();
    let mut scores = DMatrix::zeros(k + 1, v);
    scores.rows_mut(0, k).copy_from(&sc.fold_r2);
    for (j, r) in sc.pooled_r2.iter().enumerate() {
        scores[(k, j)] = *r;
    }
    run.out.write_matrix(&encoding_rel(group, subject, "predictions.bmat"), &sc.predictions)?;
    run.out.write_matrix(&encoding_rel(group, subject, "scores.bmat"), &scores)?;
    run.out.write_matrix(&encoding_rel(group, subject, "lambdas.bmat"), &sc.lambdas)?;
    let folds: Vec<[usize; 2]> = sc.folds.folds().iter().map(|r| [r.start, r.end]).collect();
    let hist: Vec<Value> = sc.lambda_histogram().into_iter().map(|(l, c)| json!({"lambda": l, "count": c})).collect();
    let mean = sc.pooled_r2.iter().sum::<f64>() / v.max(1) as f64;
    run.out.write_json(
        &encoding_rel(group, subject, "json"),
        json!({
            "group": group,
            "subject": subject,
            "n_tr": sc.folds.n(),
            "n_voxels": v,
            "design_dim": dim,
            "folds": folds,
            "lambda_histogram": hist,
            "mean_pooled_r2": rounded(mean),
        }),
    )?;
    Ok(())
}

/// Held-out predictions, folds and design width of one stored encoding.
pub(crate) struct StoredEncoding {
    pub predictions: DMatrix<f64>,
    pub folds: FoldSpec,
    pub design_dim: usize,
}

pub(crate) fn load_encoding(run: &Run, group: &str, subject: &str) -> Result<StoredEncoding, PipelineError> {
    let rel = encoding_rel(group, subject, "json");
    if !run.out.exists(&rel) {
        return Err(PipelineError::MissingEncoding { group: group.to_string(), subject: subject.to_string() });
    }
    let meta = run.out.read_json(&rel)?;
    let bad = |msg: &str| PipelineError::input(&run.out.path(&rel), std::io::Error::other(msg.to_string()));
    let ranges = meta["folds"]
        .as_array()
        .ok_or_else(|| bad("missing folds"))?
        .iter()
        .map(|f| {
            let a = f[0].as_u64().ok_or_else(|| bad("bad fold"))? as usize;
            let b = f[1].as_u64().ok_or_else(|| bad("bad fold"))? as usize;
            Ok(a..b)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let folds = FoldSpec::from_ranges(ranges)?;
    let design_dim = meta["design_dim"].as_u64().ok_or_else(|| bad("missing design_dim"))? as usize;
    let predictions = read_matrix(&run.out.path(&encoding_rel(group, subject, "predictions.bmat")))?;
    Ok(StoredEncoding { predictions, folds, design_dim })
}
