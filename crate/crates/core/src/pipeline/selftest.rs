use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{cmd_compare, cmd_encode, cmd_features, cmd_report, PipelineError, Run, RunConfig, StudyMode, StudyOutcome};
use crate::atlas::Hemisphere;
use crate::synth::{write_dataset, Plant, SynthSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for SelftestCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

const PLANTED: (&str, Hemisphere) = ("AG", Hemisphere::Left);

/// Run features, encode, the pairwise study and report on `cfg`.
pub fn run_pairwise(cfg: RunConfig) -> Result<(Run, StudyOutcome), PipelineError> {
    let run = Run::new(cfg)?;
    cmd_features(&run)?;
    cmd_encode(&run, &[])?;
    let outcome = cmd_compare(&run, StudyMode::Pairwise)?;
    cmd_report(&run, &[StudyMode::Pairwise])?;
    Ok((run, outcome))
}

/// SHA-256 of every file under `root`, keyed by relative path.
pub fn tree_digest(root: &Path) -> Result<BTreeMap<String, String>, PipelineError> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<(), PipelineError> {
        let entries = std::fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
        for entry in entries {
            let p = entry.map_err(|e| PipelineError::io(dir, e))?.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                let bytes = std::fs::read(&p).map_err(|e| PipelineError::io(&p, e))?;
                let rel = p.strip_prefix(root).expect("under root").to_string_lossy().into_owned();
                out.insert(rel, hex::encode(Sha256::digest(&bytes)));
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

/// Summary mean % significant of `(roi, h)` in comparison `name`.
pub fn roi_pct(outcome: &StudyOutcome, name: &str, roi: &str, h: Hemisphere) -> Option<f64> {
    let i = outcome.comparisons.iter().position(|c| c.name == name)?;
    outcome.reports[i].summary_for(roi, h).map(|s| s.mean_pct)
}

/// Largest summary % significant outside `(roi, h)` in comparison `name`.
pub fn max_other_pct(outcome: &StudyOutcome, name: &str, roi: &str, h: Hemisphere) -> f64 {
    let Some(i) = outcome.comparisons.iter().position(|c| c.name == name) else { return f64::NAN };
    outcome.reports[i]
        .summary
        .iter()
        .filter(|s| !(s.roi == roi && s.hemisphere == h))
        .map(|s| s.mean_pct)
        .fold(0.0, f64::max)
}

/// Generate a planted dataset under `dir`, run the pairwise study twice
/// and check detection, specificity and byte-identical outputs.
pub fn selftest(dir: &Path, jobs: Option<usize>) -> Result<Vec<SelftestCheck>, PipelineError> {
    let spec = SynthSpec {
        plant: Plant::Roi(PLANTED.0, PLANTED.1),
        n_permutations: 1000,
        n_bootstrap: 5000,
        ..SynthSpec::default()
    };
    let data = write_dataset(&dir.join("data"), &spec)?;
    let mut outcomes = Vec::new();
    for pass in ["run1", "run2"] {
        let mut cfg = RunConfig::load(&data.config)?;
        cfg.out = dir.join(pass);
        cfg.jobs = jobs;
        outcomes.push(run_pairwise(cfg)?);
    }
    let (run, outcome) = &outcomes[0];
    let (roi, h) = PLANTED;
    let mut checks = Vec::new();

    let hit = roi_pct(outcome, "B-A", roi, h).unwrap_or(0.0);
    checks.push(SelftestCheck {
        name: "planted ROI detected",
        pass: hit > 50.0,
        detail: format!("{roi}-{h} B over A: {hit:.1}% significant (need > 50%)"),
    });
    let other = max_other_pct(outcome, "B-A", roi, h);
    checks.push(SelftestCheck {
        name: "other ROIs quiet",
        pass: other < 5.0,
        detail: format!("largest other ROI: {other:.1}% (need < 5%)"),
    });
    let reverse = roi_pct(outcome, "A-B", roi, h).unwrap_or(0.0);
    checks.push(SelftestCheck {
        name: "reverse comparison quiet",
        pass: reverse < 5.0,
        detail: format!("{roi}-{h} A over B: {reverse:.1}% (need < 5%)"),
    });

    let d1 = tree_digest(run.out.root())?;
    let d2 = tree_digest(outcomes[1].0.out.root())?;
    let differing: Vec<&String> = d1.keys().chain(d2.keys()).filter(|k| d1.get(*k) != d2.get(*k)).collect();
    checks.push(SelftestCheck {
        name: "deterministic rerun",
        pass: differing.is_empty() && !d1.is_empty(),
        detail: if differing.is_empty() {
            format!("{} files identical", d1.len())
        } else {
            format!("{} file(s) differ, first {}", differing.len(), differing[0])
        },
    });
    Ok(checks)
}
