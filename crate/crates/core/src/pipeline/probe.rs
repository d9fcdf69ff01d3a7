use serde_json::json;

use super::features::load_feature;
use super::{read_matrix, require, rounded, PipelineError, Run};
use crate::encoder::semantic_probe;
use crate::features::FeatureSpace;
use crate::stats::format_value;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub space: FeatureSpace,
    pub r2: f64,
}

/// Predict the word-level `probe_targets` from every built space with
/// cross-validated ridge and report the mean held-out R².
pub fn cmd_probe(run: &Run) -> Result<Vec<ProbeRow>, PipelineError> {
    let cfg = &run.cfg;
    let p = require(&cfg.probe_targets, "probe_targets")?;
    let targets = read_matrix(p)?;
    let mut rows = Vec::new();
    for space in &cfg.spaces {
        let f = load_feature(run, space)?;
        if f.rows() != targets.nrows() {
            return Err(PipelineError::input(
                p,
                std::io::Error::other(format!("{} target rows but {space} has {}", targets.nrows(), f.rows())),
            ));
        }
        let r2 = run.install(|| semantic_probe(f.values(), &targets, &cfg.probe))?;
        log::info!("probe {space}: R² {r2:.4}");
        rows.push(ProbeRow { space: space.clone(), r2 });
    }
    let mut csv = String::from("space,r2\n");
    for r in &rows {
        csv.push_str(&format!("{},{}\n", r.space, format_value(r.r2)));
    }
    run.out.write_bytes("probe/probe.csv", csv.as_bytes())?;
    let scores: Vec<serde_json::Value> =
        rows.iter().map(|r| json!({"space": r.space.as_str(), "r2": rounded(r.r2)})).collect();
    run.out.write_json(
        "probe/probe.json",
        json!({"folds": cfg.probe.folds, "lambdas": cfg.probe.ridge.lambdas, "target_dim": targets.ncols(), "scores": scores}),
    )?;
    Ok(rows)
}
