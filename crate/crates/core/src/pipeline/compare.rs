use std::fmt;
use std::str::FromStr;

use log::info;
use nalgebra::DMatrix;
use serde_json::json;

use super::encode::{load_encoding, StoredEncoding};
use super::{file_stem, load_fmri, load_labels, FdrScope, FeatureGroup, PipelineError, Run};
use crate::atlas::ParcelLabels;
use crate::encoder::r2_columns;
use crate::stats::{
    block_permutation_test, bootstrap_diff_test, pooled_fdr, roi_aggregate, RoiReport, SignificanceMap, SubjectResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyMode {
    /// Permutation test of each group's held-out R².
    Individual,
    /// Bootstrap test of each nested group over the previous one.
    Hierarchical,
    /// Bootstrap test of each configured pair.
    Pairwise,
    /// Word-level semantic probe; handled by [`super::cmd_probe`].
    SemanticProbe,
}

impl StudyMode {
    pub const ALL: [StudyMode; 4] =
        [StudyMode::Individual, StudyMode::Hierarchical, StudyMode::Pairwise, StudyMode::SemanticProbe];

    pub fn as_str(self) -> &'static str {
        match self {
            StudyMode::Individual => "individual",
            StudyMode::Hierarchical => "hierarchical",
            StudyMode::Pairwise => "pairwise",
            StudyMode::SemanticProbe => "semantic_probe",
        }
    }
}

impl fmt::Display for StudyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StudyMode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StudyMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| PipelineError::config(format!("unknown study mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComparisonKind {
    Single(FeatureGroup),
    /// R² of the first group above the second.
    Diff(FeatureGroup, FeatureGroup),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub name: String,
    pub kind: ComparisonKind,
}

impl Comparison {
    pub fn single(g: FeatureGroup) -> Self {
        Self { name: g.name(), kind: ComparisonKind::Single(g) }
    }

    pub fn diff(a: FeatureGroup, b: FeatureGroup) -> Self {
        Self { name: format!("{}-{}", a.name(), b.name()), kind: ComparisonKind::Diff(a, b) }
    }

    fn groups(&self) -> Vec<&FeatureGroup> {
        match &self.kind {
            ComparisonKind::Single(g) => vec![g],
            ComparisonKind::Diff(a, b) => vec![a, b],
        }
    }
}

/// ROI reports of every comparison in a study, in study order.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub mode: StudyMode,
    pub comparisons: Vec<Comparison>,
    pub reports: Vec<RoiReport>,
    /// `maps[c][s]`: comparison `c`, subject `s`.
    pub maps: Vec<Vec<SignificanceMap>>,
}

fn study_comparisons(run: &Run, mode: StudyMode) -> Vec<Comparison> {
    let cfg = &run.cfg;
    match mode {
        StudyMode::Individual => cfg.individual.iter().cloned().map(Comparison::single).collect(),
        StudyMode::Hierarchical => {
            cfg.hierarchy_groups().windows(2).map(|w| Comparison::diff(w[1].clone(), w[0].clone())).collect()
        }
        StudyMode::Pairwise => cfg.pairwise.iter().map(|(a, b)| Comparison::diff(a.clone(), b.clone())).collect(),
        StudyMode::SemanticProbe => Vec::new(),
    }
}

struct SubjectData {
    id: String,
    actual: DMatrix<f64>,
    labels: ParcelLabels,
}

/// Run a study over stored encodings, apply FDR and aggregate by ROI.
pub fn cmd_compare(run: &Run, mode: StudyMode) -> Result<StudyOutcome, PipelineError> {
    if mode == StudyMode::SemanticProbe {
        return Err(PipelineError::config("the semantic probe study runs through `probe`"));
    }
    let cfg = &run.cfg;
    let comparisons = study_comparisons(run, mode);
    if comparisons.is_empty() {
        return Err(PipelineError::config(format!("study {mode} has no comparisons configured")));
    }
    let subjects: Vec<SubjectData> = cfg
        .subjects
        .iter()
        .map(|s| Ok(SubjectData { id: s.id.clone(), actual: load_fmri(&s.fmri)?, labels: load_labels(&s.parcels)? }))
        .collect::<Result<_, PipelineError>>()?;

    // encodings exist for every group before any test runs
    let mut groups: Vec<&FeatureGroup> = comparisons.iter().flat_map(Comparison::groups).collect();
    groups.dedup();
    let mut stored: Vec<Vec<(String, StoredEncoding)>> = Vec::new();
    for s in &subjects {
        let mut per = Vec::new();
        for g in &groups {
            let name = g.name();
            if per.iter().any(|(n, _)| *n == name) {
                continue;
            }
            per.push((name.clone(), load_encoding(run, &name, &s.id)?));
        }
        stored.push(per);
    }
    let lookup = |si: usize, g: &FeatureGroup| -> &StoredEncoding {
        let name = g.name();
        &stored[si].iter().find(|(n, _)| *n == name).expect("loaded above").1
    };
    if mode == StudyMode::Hierarchical {
        let dims: Vec<usize> = cfg.hierarchy_groups().iter().map(|g| lookup(0, g).design_dim).collect();
        if dims.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PipelineError::config(format!("hierarchy design widths {dims:?} are not strictly increasing")));
        }
    }

    // (p-values, R² or ΔR²) per comparison and subject
    let mut results: Vec<Vec<(Vec<f64>, Vec<f64>)>> = Vec::new();
    for c in &comparisons {
        let mut per = Vec::new();
        for (si, s) in subjects.iter().enumerate() {
            let r = run.install(|| -> Result<_, PipelineError> {
                Ok(match &c.kind {
                    ComparisonKind::Single(g) => {
                        let e = lookup(si, g);
                        check_width(&e.predictions, &s.actual, &g.name(), &s.id)?;
                        let p = block_permutation_test(&e.predictions, &s.actual, &e.folds, &cfg.stats)?;
                        (p, r2_columns(&s.actual, &e.predictions))
                    }
                    ComparisonKind::Diff(a, b) => {
                        let (ea, eb) = (lookup(si, a), lookup(si, b));
                        check_width(&ea.predictions, &s.actual, &a.name(), &s.id)?;
                        check_width(&eb.predictions, &s.actual, &b.name(), &s.id)?;
                        let p = bootstrap_diff_test(&ea.predictions, &eb.predictions, &s.actual, &ea.folds, &cfg.stats)?;
                        let ra = r2_columns(&s.actual, &ea.predictions);
                        let rb = r2_columns(&s.actual, &eb.predictions);
                        (p, ra.iter().zip(&rb).map(|(x, y)| x - y).collect())
                    }
                })
            })?;
            per.push(r);
        }
        results.push(per);
    }

    let q = cfg.stats.fdr_q;
    let maps: Vec<Vec<SignificanceMap>> = match cfg.fdr_scope {
        FdrScope::Global => {
            let all: Vec<Vec<f64>> = results.iter().flatten().map(|(p, _)| p.clone()).collect();
            let mut flat = pooled_fdr(all, q)?.into_iter();
            results.iter().map(|per| per.iter().map(|_| flat.next().expect("one map per set")).collect()).collect()
        }
        FdrScope::Analysis => results
            .iter()
            .map(|per| pooled_fdr(per.iter().map(|(p, _)| p.clone()).collect(), q))
            .collect::<Result<_, _>>()?,
    };

    let scope = if cfg.fdr_scope == FdrScope::Global { "global" } else { "analysis" };
    let mode_dir = format!("compare/{mode}");
    let mut reports = Vec::new();
    for ((c, per), cmaps) in comparisons.iter().zip(&results).zip(&maps) {
        let subs: Vec<SubjectResult> = subjects
            .iter()
            .zip(per)
            .zip(cmaps)
            .map(|((s, (_, r2)), m)| SubjectResult { subject: &s.id, labels: &s.labels, reject: &m.reject, r2 })
            .collect();
        let report = roi_aggregate(&subs)?;
        let dir = format!("{mode_dir}/{}", file_stem(&c.name));
        for (s, m) in subjects.iter().zip(cmaps) {
            let v = m.pvalues.len();
            let sig = DMatrix::from_fn(2, v, |i, j| if i == 0 { m.pvalues[j] } else { f64::from(u8::from(m.reject[j])) });
            run.out.write_matrix(&format!("{dir}/{}.significance.bmat", file_stem(&s.id)), &sig)?;
            run.out.write_json(
                &format!("{dir}/{}.json", file_stem(&s.id)),
                json!({"comparison": c.name, "subject": s.id, "q": q, "fdr_scope": scope,
                       "threshold": m.threshold, "n_rejected": m.n_rejected(), "n_voxels": v}),
            )?;
        }
        run.out.write_bytes(&format!("{dir}/roi.csv"), report.to_csv().as_bytes())?;
        run.out.write_json(&format!("{dir}/roi.json"), json!({"comparison": c.name, "rows": report.rows}))?;
        info!("{mode} {}: {} voxel(s) significant", c.name, cmaps.iter().map(|m| m.n_rejected()).sum::<usize>());
        reports.push(report);
    }
    let entries: Vec<serde_json::Value> = comparisons
        .iter()
        .zip(&reports)
        .map(|(c, r)| {
            let (kind, groups) = match &c.kind {
                ComparisonKind::Single(g) => ("single", vec![g.name()]),
                ComparisonKind::Diff(a, b) => ("diff", vec![a.name(), b.name()]),
            };
            json!({"name": c.name, "kind": kind, "groups": groups, "report": r})
        })
        .collect();
    run.out.write_json(
        &format!("{mode_dir}/study.json"),
        json!({"mode": mode.as_str(), "fdr_scope": scope, "q": q,
               "subjects": subjects.iter().map(|s| s.id.clone()).collect::<Vec<_>>(), "comparisons": entries}),
    )?;
    Ok(StudyOutcome { mode, comparisons, reports, maps })
}

fn check_width(pred: &DMatrix<f64>, actual: &DMatrix<f64>, group: &str, subject: &str) -> Result<(), PipelineError> {
    if pred.shape() != actual.shape() {
        return Err(PipelineError::config(format!(
            "encoding of {group} for {subject} is {:?} but fMRI is {:?}; re-run `encode`",
            pred.shape(),
            actual.shape()
        )));
    }
    Ok(())
}
