//! Command orchestration behind the `parsebrain` binary.
//!
//! Output tree under `--out`:
//!
//! ```text
//! run.cfg                                   effective configuration and its hash
//! features/<SPACE>.bmat, <SPACE>.json       words×D matrix and metadata
//! features/INC.pcfg, features/DEP.gcn       grammar and GCN checkpoint used
//! encode/<GROUP>/<SUBJECT>.predictions.bmat held-out predictions, TR×V
//! encode/<GROUP>/<SUBJECT>.scores.bmat      K fold R² rows, then pooled R²
//! encode/<GROUP>/<SUBJECT>.lambdas.bmat     chosen λ, K×V
//! encode/<GROUP>/<SUBJECT>.json             folds, λ histogram, summary
//! compare/<MODE>/<CMP>/<SUBJECT>.significance.bmat  p-values row, reject row
//! compare/<MODE>/<CMP>/<SUBJECT>.json       FDR threshold record
//! compare/<MODE>/<CMP>/roi.csv, roi.json    per-subject ROI rows
//! compare/<MODE>/study.json                 every comparison's ROI report
//! report/<MODE>.csv, .json, _L.svg, _R.svg  across-subject summaries
//! probe/probe.csv, probe.json               semantic probe scores
//! ```
//!
//! Every JSON file carries the run's `config_hash`; binary and CSV files are
//! covered by the JSON file next to them.

mod bmat;
mod compare;
mod config;
mod encode;
mod features;
mod probe;
mod report;
mod selftest;

pub use bmat::{decode_bmat, encode_bmat, parse_csv_matrix, read_matrix, write_matrix, BMAT_MAGIC, BMAT_VERSION};
pub use compare::{cmd_compare, Comparison, ComparisonKind, StudyMode, StudyOutcome};
pub use config::{FdrScope, FeatureGroup, RunConfig, SubjectInput};
pub use encode::{cmd_encode, EncodeSummary};
pub use features::{build_features, cmd_features};
pub use probe::{cmd_probe, ProbeRow};
pub use report::{cmd_report, render_svg, ReportRow, REPORT_CSV_HEADER};
pub use selftest::{max_other_pct, roi_pct, run_pairwise, selftest, tree_digest, SelftestCheck};

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde_json::{json, Value};
use thiserror::Error;

use crate::atlas::AtlasError;
use crate::encoder::EncoderError;
use crate::features::FeatureError;
use crate::gcn::GcnError;
use crate::incparser::ParserError;
use crate::signal::SignalError;
use crate::stats::StatsError;
use crate::treebank::{load_timing, parse_bracketed_file, parse_conllu, StimulusCorpus, TreebankError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config{}: {msg}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Bmat { path: PathBuf, msg: String },
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: Box<dyn std::error::Error + Send + Sync> },
    #[error("subject {subject}: fMRI has {found} TRs, expected {expected}")]
    TrMismatch { subject: String, expected: usize, found: usize },
    #[error("no feature matrix for {space}; run `features` first")]
    MissingFeatures { space: String },
    #[error("no encoding of {group} for subject {subject}; run `encode` first")]
    MissingEncoding { group: String, subject: String },
    #[error("{}: config hash {found} does not match {expected}", path.display())]
    HashMismatch { path: PathBuf, expected: String, found: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Parser(#[from] ParserError),
    #[error(transparent)]
    Gcn(#[from] GcnError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
}

impl PipelineError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        PipelineError::Config { line: None, msg: msg.into() }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn input(path: &Path, source: impl std::error::Error + Send + Sync + 'static) -> Self {
        PipelineError::Input { path: path.to_path_buf(), source: Box::new(source) }
    }
}

/// The single writer for a run's output directory.
#[derive(Debug, Clone)]
pub struct OutputTree {
    root: PathBuf,
    hash: String,
}

impl OutputTree {
    pub fn new(root: &Path, hash: &str) -> Self {
        Self { root: root.to_path_buf(), hash: hash.to_string() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        std::fs::write(&p, bytes).map_err(|e| PipelineError::io(&p, e))?;
        Ok(p)
    }

    pub fn write_matrix(&self, rel: &str, m: &DMatrix<f64>) -> Result<PathBuf, PipelineError> {
        self.write_bytes(rel, &encode_bmat(m))
    }

    /// Write a JSON object with `config_hash` inserted first.
    pub fn write_json(&self, rel: &str, body: Value) -> Result<PathBuf, PipelineError> {
        let mut obj = serde_json::Map::new();
        obj.insert("config_hash".into(), json!(self.hash));
        match body {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(obj)).expect("JSON values always serialize");
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    /// Read a JSON file written by this run's configuration.
    pub fn read_json(&self, rel: &str) -> Result<Value, PipelineError> {
        let p = self.path(rel);
        let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| PipelineError::input(&p, e))?;
        let found = v.get("config_hash").and_then(Value::as_str).unwrap_or("").to_string();
        if found != self.hash {
            return Err(PipelineError::HashMismatch { path: p, expected: self.hash.clone(), found });
        }
        Ok(v)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).exists()
    }
}

/// A loaded configuration bound to its output tree and worker pool.
pub struct Run {
    pub cfg: RunConfig,
    pub out: OutputTree,
    pool: rayon::ThreadPool,
}

impl Run {
    pub fn new(cfg: RunConfig) -> Result<Self, PipelineError> {
        let hash = cfg.hash()?;
        let out = OutputTree::new(&cfg.out, &hash);
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cfg.jobs {
            builder = builder.num_threads(j.max(1));
        }
        let pool = builder.build().map_err(|e| PipelineError::config(format!("worker pool: {e}")))?;
        Ok(Self { cfg, out, pool })
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// Record the effective configuration.
    pub fn write_run_record(&self) -> Result<(), PipelineError> {
        let text = format!("# config_hash = {}\n{}", self.out.hash(), self.cfg.to_text());
        self.out.write_bytes("run.cfg", text.as_bytes())?;
        Ok(())
    }
}

fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, PipelineError> {
    p.as_deref().ok_or_else(|| PipelineError::config(format!("`{key}` is required")))
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

/// Trees plus dependency graphs when `conllu` is configured.
pub fn load_corpus(cfg: &RunConfig) -> Result<StimulusCorpus, PipelineError> {
    let trees_path = require(&cfg.trees, "trees")?;
    let trees = parse_bracketed_file(&read_text(trees_path)?).map_err(|e| PipelineError::input(trees_path, e))?;
    let mut corpus = StimulusCorpus::from_trees(trees);
    if let Some(p) = &cfg.conllu {
        let graphs = parse_conllu(&read_text(p)?).map_err(|e| PipelineError::input(p, e))?;
        corpus = corpus.with_graphs(graphs).map_err(|e| PipelineError::input(p, e))?;
    }
    Ok(corpus)
}

/// [`load_corpus`] with word timing attached.
pub fn load_timed_corpus(cfg: &RunConfig) -> Result<StimulusCorpus, PipelineError> {
    let corpus = load_corpus(cfg)?;
    let p = require(&cfg.timing, "timing")?;
    load_timing(&corpus, &read_text(p)?, cfg.run_duration).map_err(|e: TreebankError| PipelineError::input(p, e))
}

/// Subject fMRI matrix, checked for finite values.
pub fn load_fmri(path: &Path) -> Result<DMatrix<f64>, PipelineError> {
    let y = read_matrix(path)?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        let (r, c) = (i % y.nrows(), i / y.nrows());
        return Err(PipelineError::Bmat { path: path.to_path_buf(), msg: format!("non-finite value at ({r}, {c})") });
    }
    Ok(y)
}

pub fn load_labels(path: &Path) -> Result<crate::atlas::ParcelLabels, PipelineError> {
    crate::atlas::load_parcel_labels(&read_text(path)?).map_err(|e| PipelineError::input(path, e))
}

/// `format_value` read back as a number, so JSON shows the CSV digits.
pub(crate) fn rounded(x: f64) -> f64 {
    crate::stats::format_value(x).parse().expect("formatted float parses")
}

/// File-name-safe form of a group or comparison name.
pub(crate) fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "+-_.".contains(c) { c } else { '_' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_carries_hash_and_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputTree::new(dir.path(), "abc");
        out.write_json("x/y.json", json!({"k": 1})).unwrap();
        let text = std::fs::read_to_string(dir.path().join("x/y.json")).unwrap();
        assert!(text.starts_with("{\n  \"config_hash\": \"abc\""));
        assert_eq!(out.read_json("x/y.json").unwrap()["k"], 1);
        let other = OutputTree::new(dir.path(), "def");
        assert!(matches!(other.read_json("x/y.json"), Err(PipelineError::HashMismatch { .. })));
    }

    #[test]
    fn rounding_matches_format() {
        assert_eq!(rounded(1.0 / 3.0), 0.333333);
        assert_eq!(rounded(2.5), 2.5);
        assert_eq!(file_stem("PU+CM-PU"), "PU+CM-PU");
        assert_eq!(file_stem("a b/c"), "a_b_c");
    }
}
