//! Run configuration: a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory of the config file. Recognised keys:
//!
//! | key | value |
//! |-----|-------|
//! | `trees` | bracketed constituency trees, one per line |
//! | `conllu` | CoNLL-U dependency parses |
//! | `timing` | word timing TSV |
//! | `frequency` | `word<TAB>per_billion` TSV |
//! | `embeddings` | words×D BMAT reduced by PCA into SEM |
//! | `probe_targets` | words×D BMAT of semantic targets for `probe` |
//! | `grammar` | PCFG text; induced from `trees` when absent |
//! | `gcn_checkpoint` | trained GCN loaded instead of training |
//! | `ext.NAME` | extra words×D BMAT used as feature space NAME |
//! | `subjects` | comma list of subject ids |
//! | `fmri.ID`, `parcels.ID` | TR×V BMAT and parcel TSV per subject |
//! | `spaces` | comma list of spaces to build |
//! | `groups` | extra groups to encode, comma list of `A+B` sets |
//! | `individual` | groups tested one by one |
//! | `hierarchy` | comma list of levels; level k adds its spaces to level k−1 |
//! | `pairwise` | comma list of `A:B` pairs, testing A above B |
//! | `fdr_scope` | `global` or `analysis` |
//! | `seed`, `n_tr`, `run_duration` | |
//! | `tr`, `resample`, `lanczos_lobes`, `n_delays` | signal settings |
//! | `folds`, `lambdas`, `val_fraction` | encoder settings |
//! | `block`, `n_permutations`, `n_bootstrap`, `fdr_q` | stats settings |
//! | `subtree_dim`, `subtree_mode`, `subtree_max_depth`, `pu_mark` | feature settings |
//! | `beam_width`, `expansion_cap`, `max_work`, `pcfg_add_k`, `pcfg_unk` | parser settings |
//! | `gcn_layers`, `gcn_hidden`, `gcn_input_dim`, `gcn_epochs`, `gcn_lr`, `gcn_negatives` | GCN settings |
//! | `pca_dim`, `probe_folds`, `probe_lambdas` | SEM and probe settings |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::encoder::{ProbeConfig, RidgeConfig};
use crate::features::{EncodingMode, FeatureSpace, PuMark, SubtreeEncodingConfig};
use crate::gcn::TrainConfig;
use crate::incparser::{BeamConfig, InduceConfig, UNBOUNDED};
use crate::signal::{FirConfig, ResampleConfig, ResampleMode};
use crate::stats::StatsConfig;

/// An ordered set of feature spaces encoded together.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureGroup(pub Vec<FeatureSpace>);

impl FeatureGroup {
    pub fn single(space: FeatureSpace) -> Self {
        Self(vec![space])
    }

    pub fn name(&self) -> String {
        self.0.iter().map(FeatureSpace::as_str).collect::<Vec<_>>().join("+")
    }

    pub fn parse(s: &str) -> Result<Self, PipelineError> {
        let mut spaces = Vec::new();
        for part in s.split('+') {
            let sp: FeatureSpace = part.parse().map_err(|_| PipelineError::config(format!("bad space {part:?} in group {s:?}")))?;
            if spaces.contains(&sp) {
                return Err(PipelineError::config(format!("space {sp} repeated in group {s:?}")));
            }
            spaces.push(sp);
        }
        Ok(Self(spaces))
    }

    /// A group with `other`'s spaces appended (duplicates skipped).
    pub fn extend(&self, other: &FeatureGroup) -> Self {
        let mut v = self.0.clone();
        for s in &other.0 {
            if !v.contains(s) {
                v.push(s.clone());
            }
        }
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdrScope {
    /// One BH run across subjects and every comparison of the study.
    Global,
    /// One BH run per comparison, across subjects.
    Analysis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectInput {
    pub id: String,
    pub fmri: PathBuf,
    pub parcels: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub trees: Option<PathBuf>,
    pub conllu: Option<PathBuf>,
    pub timing: Option<PathBuf>,
    pub frequency: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub probe_targets: Option<PathBuf>,
    pub grammar: Option<PathBuf>,
    pub gcn_checkpoint: Option<PathBuf>,
    pub ext: BTreeMap<String, PathBuf>,
    pub subjects: Vec<SubjectInput>,
    pub spaces: Vec<FeatureSpace>,
    pub groups: Vec<FeatureGroup>,
    pub individual: Vec<FeatureGroup>,
    /// Levels, not cumulative groups; see [`RunConfig::hierarchy_groups`].
    pub hierarchy: Vec<FeatureGroup>,
    pub pairwise: Vec<(FeatureGroup, FeatureGroup)>,
    pub fdr_scope: FdrScope,
    pub seed: u64,
    pub n_tr: Option<usize>,
    pub run_duration: Option<f64>,
    pub resample: ResampleConfig,
    pub fir: FirConfig,
    pub folds: usize,
    pub ridge: RidgeConfig,
    pub stats: StatsConfig,
    pub subtree: SubtreeEncodingConfig,
    pub pu_mark: PuMark,
    pub beam: BeamConfig,
    pub induce: InduceConfig,
    pub gcn_layers: usize,
    pub gcn_hidden: usize,
    pub gcn_input_dim: usize,
    pub gcn_train: TrainConfig,
    pub pca_dim: usize,
    pub probe: ProbeConfig,
    pub out: PathBuf,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trees: None,
            conllu: None,
            timing: None,
            frequency: None,
            embeddings: None,
            probe_targets: None,
            grammar: None,
            gcn_checkpoint: None,
            ext: BTreeMap::new(),
            subjects: Vec::new(),
            spaces: Vec::new(),
            groups: Vec::new(),
            individual: Vec::new(),
            hierarchy: Vec::new(),
            pairwise: Vec::new(),
            fdr_scope: FdrScope::Global,
            seed: 0,
            n_tr: None,
            run_duration: None,
            resample: ResampleConfig::default(),
            fir: FirConfig::default(),
            folds: 4,
            ridge: RidgeConfig::default(),
            stats: StatsConfig::default(),
            subtree: SubtreeEncodingConfig::default(),
            pu_mark: PuMark::Preceding,
            beam: BeamConfig::default(),
            induce: InduceConfig::default(),
            gcn_layers: 2,
            gcn_hidden: 250,
            gcn_input_dim: 250,
            gcn_train: TrainConfig::default(),
            pca_dim: 250,
            probe: ProbeConfig::default(),
            out: PathBuf::from("out"),
            jobs: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, PipelineError> {
    v.parse().map_err(|_| PipelineError::config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T, F: Fn(&str) -> Result<T, PipelineError>>(v: &str, f: F) -> Result<Vec<T>, PipelineError> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool, PipelineError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(PipelineError::config(format!("{key}: expected true/false, got {v:?}"))),
    }
}

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parse config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut raw: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config { line: Some(i + 1), msg: "expected key = value".into() })?;
            let k = k.trim().to_string();
            if raw.insert(k.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(PipelineError::Config { line: Some(i + 1), msg: format!("duplicate key {k:?}") });
            }
        }
        let mut c = RunConfig::default();
        let path = |v: &str| base.join(v);
        let mut subject_ids: Option<Vec<String>> = None;
        let mut fmri = BTreeMap::new();
        let mut parcels = BTreeMap::new();
        let mut explicit_spaces = None;
        let mut hierarchy = None;
        let mut individual = None;
        let mut pairwise = None;
        for (k, (line, v)) in &raw {
            let v = v.as_str();
            let at = |e: PipelineError| match e {
                PipelineError::Config { msg, .. } => PipelineError::Config { line: Some(*line), msg },
                other => other,
            };
            let res: Result<(), PipelineError> = (|| {
                match k.as_str() {
                    "trees" => c.trees = Some(path(v)),
                    "conllu" => c.conllu = Some(path(v)),
                    "timing" => c.timing = Some(path(v)),
                    "frequency" => c.frequency = Some(path(v)),
                    "embeddings" => c.embeddings = Some(path(v)),
                    "probe_targets" => c.probe_targets = Some(path(v)),
                    "grammar" => c.grammar = Some(path(v)),
                    "gcn_checkpoint" => c.gcn_checkpoint = Some(path(v)),
                    "subjects" => subject_ids = Some(parse_list(v, |s| Ok(s.to_string()))?),
                    "spaces" => {
                        explicit_spaces = Some(parse_list(v, |s| {
                            s.parse::<FeatureSpace>().map_err(|_| PipelineError::config(format!("unknown space {s:?}")))
                        })?)
                    }
                    "groups" => c.groups = parse_list(v, FeatureGroup::parse)?,
                    "individual" => individual = Some(parse_list(v, FeatureGroup::parse)?),
                    "hierarchy" => hierarchy = Some(parse_list(v, FeatureGroup::parse)?),
                    "pairwise" => {
                        pairwise = Some(parse_list(v, |p| {
                            let (a, b) =
                                p.split_once(':').ok_or_else(|| PipelineError::config(format!("pair {p:?} needs A:B")))?;
                            Ok((FeatureGroup::parse(a.trim())?, FeatureGroup::parse(b.trim())?))
                        })?)
                    }
                    "fdr_scope" => {
                        c.fdr_scope = match v {
                            "global" => FdrScope::Global,
                            "analysis" => FdrScope::Analysis,
                            _ => return Err(PipelineError::config(format!("fdr_scope: expected global|analysis, got {v:?}"))),
                        }
                    }
                    "seed" => c.seed = parse_num(k, v)?,
                    "n_tr" => c.n_tr = Some(parse_num(k, v)?),
                    "run_duration" => c.run_duration = Some(parse_num(k, v)?),
                    "tr" => c.resample.tr = parse_num(k, v)?,
                    "resample" => {
                        c.resample.mode = match v {
                            "lanczos" => ResampleMode::Lanczos,
                            "chunk" => ResampleMode::ChunkAverage,
                            _ => return Err(PipelineError::config(format!("resample: expected lanczos|chunk, got {v:?}"))),
                        }
                    }
                    "lanczos_lobes" => c.resample.lobes = parse_num(k, v)?,
                    "n_delays" => c.fir.n_delays = parse_num(k, v)?,
                    "folds" => c.folds = parse_num(k, v)?,
                    "lambdas" => c.ridge.lambdas = parse_list(v, |s| parse_num(k, s))?,
                    "val_fraction" => c.ridge.val_fraction = parse_num(k, v)?,
                    "block" => c.stats.block = parse_num(k, v)?,
                    "n_permutations" => c.stats.n_permutations = parse_num(k, v)?,
                    "n_bootstrap" => c.stats.n_bootstrap = parse_num(k, v)?,
                    "fdr_q" => c.stats.fdr_q = parse_num(k, v)?,
                    "subtree_dim" => c.subtree.dim = parse_num(k, v)?,
                    "subtree_mode" => {
                        c.subtree.mode = match v {
                            "hashed" => EncodingMode::HashedProductionCounts,
                            "projection" => EncodingMode::SeededRandomProjection,
                            _ => return Err(PipelineError::config(format!("subtree_mode: expected hashed|projection, got {v:?}"))),
                        }
                    }
                    "subtree_max_depth" => c.subtree.max_depth = Some(parse_num(k, v)?),
                    "pu_mark" => {
                        c.pu_mark = match v {
                            "preceding" => PuMark::Preceding,
                            "self" => PuMark::SelfOnly,
                            _ => return Err(PipelineError::config(format!("pu_mark: expected preceding|self, got {v:?}"))),
                        }
                    }
                    "beam_width" => c.beam.width = if v == "inf" { UNBOUNDED } else { parse_num(k, v)? },
                    "expansion_cap" => c.beam.expansion_cap = parse_num(k, v)?,
                    "max_work" => c.beam.max_work = parse_num(k, v)?,
                    "pcfg_add_k" => c.induce.add_k = parse_num(k, v)?,
                    "pcfg_unk" => c.induce.unk = parse_bool(k, v)?,
                    "gcn_layers" => c.gcn_layers = parse_num(k, v)?,
                    "gcn_hidden" => c.gcn_hidden = parse_num(k, v)?,
                    "gcn_input_dim" => c.gcn_input_dim = parse_num(k, v)?,
                    "gcn_epochs" => c.gcn_train.epochs = parse_num(k, v)?,
                    "gcn_lr" => c.gcn_train.lr = parse_num(k, v)?,
                    "gcn_negatives" => c.gcn_train.negatives = parse_num(k, v)?,
                    "pca_dim" => c.pca_dim = parse_num(k, v)?,
                    "probe_folds" => c.probe.folds = parse_num(k, v)?,
                    "probe_lambdas" => c.probe.ridge.lambdas = parse_list(v, |s| parse_num(k, s))?,
                    "out" => c.out = path(v),
                    "jobs" => c.jobs = Some(parse_num(k, v)?),
                    _ => {
                        if let Some(name) = k.strip_prefix("ext.") {
                            let sp = FeatureSpace::Ext(name.to_string());
                            if FeatureSpace::BUILTIN.iter().any(|b| b.as_str().eq_ignore_ascii_case(name))
                                || name.parse::<FeatureSpace>().is_err()
                            {
                                return Err(PipelineError::config(format!("bad extra space name {name:?}")));
                            }
                            c.ext.insert(sp.as_str().to_string(), path(v));
                        } else if let Some(id) = k.strip_prefix("fmri.") {
                            fmri.insert(id.to_string(), path(v));
                        } else if let Some(id) = k.strip_prefix("parcels.") {
                            parcels.insert(id.to_string(), path(v));
                        } else {
                            return Err(PipelineError::config(format!("unknown key {k:?}")));
                        }
                    }
                }
                Ok(())
            })();
            res.map_err(at)?;
        }

        let ids = subject_ids.unwrap_or_else(|| fmri.keys().cloned().collect());
        for id in &ids {
            let f = fmri.remove(id).ok_or_else(|| PipelineError::config(format!("subject {id}: missing fmri.{id}")))?;
            let p = parcels.remove(id).ok_or_else(|| PipelineError::config(format!("subject {id}: missing parcels.{id}")))?;
            c.subjects.push(SubjectInput { id: id.clone(), fmri: f, parcels: p });
        }
        if let Some(id) = fmri.keys().chain(parcels.keys()).next() {
            return Err(PipelineError::config(format!("fmri/parcels given for unlisted subject {id:?}")));
        }

        c.spaces = match explicit_spaces {
            Some(s) => s,
            None => c.available_spaces(),
        };
        for s in &c.spaces {
            if let FeatureSpace::Ext(name) = s {
                if !c.ext.contains_key(name) {
                    return Err(PipelineError::config(format!("space {name} has no ext.{name} file")));
                }
            }
        }
        c.individual = individual.unwrap_or_else(|| c.spaces.iter().cloned().map(FeatureGroup::single).collect());
        c.hierarchy = hierarchy.unwrap_or_else(|| c.default_hierarchy());
        c.pairwise = pairwise.unwrap_or_else(|| c.default_pairwise());
        c.resolve_seed();
        c.validate()?;
        Ok(c)
    }

    /// Spaces whose inputs are configured.
    fn available_spaces(&self) -> Vec<FeatureSpace> {
        let mut v = vec![FeatureSpace::PU];
        if self.frequency.is_some() {
            v.push(FeatureSpace::CM);
        }
        if self.conllu.is_some() {
            v.push(FeatureSpace::PD);
        }
        v.extend([FeatureSpace::CC, FeatureSpace::CI, FeatureSpace::INC]);
        if self.conllu.is_some() {
            v.push(FeatureSpace::DEP);
        }
        if self.embeddings.is_some() {
            v.push(FeatureSpace::SEM);
        }
        v.extend(self.ext.keys().map(|k| FeatureSpace::Ext(k.clone())));
        v
    }

    /// PU, CM, PD, {CC, CI, INC, DEP}, SEM, restricted to built spaces.
    fn default_hierarchy(&self) -> Vec<FeatureGroup> {
        use FeatureSpace::*;
        [vec![PU], vec![CM], vec![PD], vec![CC, CI, INC, DEP], vec![SEM]]
            .into_iter()
            .map(|level| FeatureGroup(level.into_iter().filter(|s| self.spaces.contains(s)).collect()))
            .filter(|g| !g.0.is_empty())
            .collect()
    }

    /// For each ordered pair (A, B) of built spaces among CC, CI, DEP: A+B above B.
    fn default_pairwise(&self) -> Vec<(FeatureGroup, FeatureGroup)> {
        use FeatureSpace::*;
        let present: Vec<FeatureSpace> = [CC, CI, DEP].into_iter().filter(|s| self.spaces.contains(s)).collect();
        let mut out = Vec::new();
        for a in &present {
            for b in &present {
                if a != b {
                    out.push((FeatureGroup(vec![a.clone(), b.clone()]), FeatureGroup::single(b.clone())));
                }
            }
        }
        out
    }

    /// The master seed drives every seeded stage.
    pub fn resolve_seed(&mut self) {
        self.stats.seed = self.seed;
        self.gcn_train.seed = self.seed;
        self.subtree.seed = self.seed;
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.resolve_seed();
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.resample.validate().map_err(|e| PipelineError::config(e.to_string()))?;
        self.ridge.grid().map_err(|e| PipelineError::config(e.to_string()))?;
        if self.folds < 2 {
            return Err(PipelineError::config("folds must be >= 2"));
        }
        if self.fir.n_delays < 1 || self.subtree.dim < 1 || self.pca_dim < 1 || self.stats.block < 1 {
            return Err(PipelineError::config("n_delays, subtree_dim, pca_dim and block must be >= 1"));
        }
        if !(self.stats.fdr_q > 0.0 && self.stats.fdr_q < 1.0) {
            return Err(PipelineError::config(format!("fdr_q must lie in (0, 1), got {}", self.stats.fdr_q)));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.spaces {
            if !seen.insert(s) {
                return Err(PipelineError::config(format!("space {s} listed twice")));
            }
        }
        let groups = self
            .groups
            .iter()
            .chain(&self.individual)
            .chain(&self.hierarchy)
            .chain(self.pairwise.iter().flat_map(|(a, b)| [a, b]));
        for g in groups {
            if let Some(s) = g.0.iter().find(|s| !self.spaces.contains(s)) {
                return Err(PipelineError::config(format!("group {} uses space {s}, which is not built", g.name())));
            }
        }
        Ok(())
    }

    /// Cumulative hierarchy groups; each strictly contains the previous one.
    pub fn hierarchy_groups(&self) -> Vec<FeatureGroup> {
        let mut out: Vec<FeatureGroup> = Vec::new();
        for level in &self.hierarchy {
            let g = match out.last() {
                Some(prev) => prev.extend(level),
                None => level.clone(),
            };
            if out.last().is_some_and(|p| p.0.len() == g.0.len()) {
                continue;
            }
            out.push(g);
        }
        out
    }

    /// Every group any study or the `groups` key refers to, deduplicated in
    /// first-seen order.
    pub fn all_groups(&self) -> Vec<FeatureGroup> {
        let mut out: Vec<FeatureGroup> = Vec::new();
        let all = self
            .groups
            .iter()
            .cloned()
            .chain(self.individual.iter().cloned())
            .chain(self.hierarchy_groups())
            .chain(self.pairwise.iter().flat_map(|(a, b)| [a.clone(), b.clone()]));
        for g in all {
            if !out.contains(&g) {
                out.push(g);
            }
        }
        out
    }

    /// Effective configuration as config text (excluding `out` and `jobs`).
    /// Paths are written with `path_fmt`.
    fn render(&self, path_fmt: &dyn Fn(&Path) -> Result<String, PipelineError>) -> Result<String, PipelineError> {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        for (k, p) in [
            ("trees", &self.trees),
            ("conllu", &self.conllu),
            ("timing", &self.timing),
            ("frequency", &self.frequency),
            ("embeddings", &self.embeddings),
            ("probe_targets", &self.probe_targets),
            ("grammar", &self.grammar),
            ("gcn_checkpoint", &self.gcn_checkpoint),
        ] {
            if let Some(p) = p {
                put(k, path_fmt(p)?);
            }
        }
        for (name, p) in &self.ext {
            put(&format!("ext.{name}"), path_fmt(p)?);
        }
        put("subjects", fmt_list(&self.subjects.iter().map(|s| s.id.clone()).collect::<Vec<_>>()));
        for sub in &self.subjects {
            put(&format!("fmri.{}", sub.id), path_fmt(&sub.fmri)?);
            put(&format!("parcels.{}", sub.id), path_fmt(&sub.parcels)?);
        }
        put("spaces", fmt_list(&self.spaces));
        let names = |gs: &[FeatureGroup]| gs.iter().map(FeatureGroup::name).collect::<Vec<_>>().join(",");
        put("groups", names(&self.groups));
        put("individual", names(&self.individual));
        put("hierarchy", names(&self.hierarchy));
        put(
            "pairwise",
            self.pairwise.iter().map(|(a, b)| format!("{}:{}", a.name(), b.name())).collect::<Vec<_>>().join(","),
        );
        put("fdr_scope", if self.fdr_scope == FdrScope::Global { "global" } else { "analysis" }.into());
        put("seed", self.seed.to_string());
        if let Some(n) = self.n_tr {
            put("n_tr", n.to_string());
        }
        if let Some(d) = self.run_duration {
            put("run_duration", d.to_string());
        }
        put("tr", self.resample.tr.to_string());
        put("resample", if self.resample.mode == ResampleMode::Lanczos { "lanczos" } else { "chunk" }.into());
        put("lanczos_lobes", self.resample.lobes.to_string());
        put("n_delays", self.fir.n_delays.to_string());
        put("folds", self.folds.to_string());
        put("lambdas", fmt_list(&self.ridge.lambdas));
        put("val_fraction", self.ridge.val_fraction.to_string());
        put("block", self.stats.block.to_string());
        put("n_permutations", self.stats.n_permutations.to_string());
        put("n_bootstrap", self.stats.n_bootstrap.to_string());
        put("fdr_q", self.stats.fdr_q.to_string());
        put("subtree_dim", self.subtree.dim.to_string());
        put(
            "subtree_mode",
            if self.subtree.mode == EncodingMode::HashedProductionCounts { "hashed" } else { "projection" }.into(),
        );
        if let Some(d) = self.subtree.max_depth {
            put("subtree_max_depth", d.to_string());
        }
        put("pu_mark", if self.pu_mark == PuMark::Preceding { "preceding" } else { "self" }.into());
        put("beam_width", if self.beam.width == UNBOUNDED { "inf".into() } else { self.beam.width.to_string() });
        put("expansion_cap", self.beam.expansion_cap.to_string());
        put("max_work", self.beam.max_work.to_string());
        put("pcfg_add_k", self.induce.add_k.to_string());
        put("pcfg_unk", self.induce.unk.to_string());
        put("gcn_layers", self.gcn_layers.to_string());
        put("gcn_hidden", self.gcn_hidden.to_string());
        put("gcn_input_dim", self.gcn_input_dim.to_string());
        put("gcn_epochs", self.gcn_train.epochs.to_string());
        put("gcn_lr", self.gcn_train.lr.to_string());
        put("gcn_negatives", self.gcn_train.negatives.to_string());
        put("pca_dim", self.pca_dim.to_string());
        put("probe_folds", self.probe.folds.to_string());
        put("probe_lambdas", fmt_list(&self.probe.ridge.lambdas));
        Ok(s)
    }

    /// Effective configuration with paths as configured.
    pub fn to_text(&self) -> String {
        self.render(&|p| Ok(p.display().to_string())).expect("display never fails")
    }

    /// SHA-256 over the effective configuration, with every input path
    /// replaced by the SHA-256 of the file's contents. `out` and `jobs` do
    /// not contribute.
    pub fn hash(&self) -> Result<String, PipelineError> {
        let text = self.render(&|p| {
            let bytes = std::fs::read(p).map_err(|e| PipelineError::io(p, e))?;
            Ok(hex::encode(Sha256::digest(&bytes)))
        })?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectInput> {
        self.subjects.iter().find(|s| s.id == id)
    }
}
