//! Synthetic stimulus corpora and fMRI subjects with planted signal.
//!
//! [`write_dataset`] produces every input file the pipeline reads (trees,
//! CoNLL-U, timing, word frequencies, two extra word-level spaces `A` and `B`,
//! per-subject fMRI and parcel labels) plus a ready-to-run config. Voxels in
//! the planted ROI follow the aligned `B` design; all other voxels are noise.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::atlas::{Hemisphere, ROI_TABLE};
use crate::features::{FeatureMatrix, FeatureSpace};
use crate::pipeline::{encode_bmat, PipelineError};
use crate::signal::{align, FirConfig, ResampleConfig, ZScore};
use crate::treebank::{load_timing, parse_bracketed_file, StimulusCorpus};

const DT: [&str; 4] = ["the", "a", "this", "every"];
const JJ: [&str; 6] = ["old", "small", "quiet", "bright", "strange", "cold"];
const NN: [&str; 12] =
    ["man", "story", "house", "river", "dog", "letter", "teacher", "garden", "window", "song", "car", "door"];
const VBD: [&str; 8] = ["saw", "told", "found", "heard", "opened", "wrote", "followed", "remembered"];
const IN: [&str; 5] = ["near", "behind", "with", "under", "about"];
const PRP: [&str; 3] = ["he", "she", "they"];
const CC: [&str; 2] = ["and", "but"];
const OTHER_PARCELS: [&str; 4] = ["V1", "V2", "MT", "4"];

struct Tok {
    form: String,
    upos: &'static str,
    xpos: &'static str,
    head: Option<usize>,
    rel: &'static str,
}

/// Builds one sentence's bracketed tree and dependency rows together.
struct SentenceBuilder<'r> {
    rng: &'r mut ChaCha8Rng,
    toks: Vec<Tok>,
}

impl SentenceBuilder<'_> {
    fn pick<'a>(&mut self, words: &[&'a str]) -> &'a str {
        words[self.rng.random_range(0..words.len())]
    }

    fn push(&mut self, form: &str, upos: &'static str, xpos: &'static str) -> (String, usize) {
        self.toks.push(Tok { form: form.to_string(), upos, xpos, head: None, rel: "dep" });
        (format!("({xpos} {form})"), self.toks.len() - 1)
    }

    fn attach(&mut self, dep: usize, head: usize, rel: &'static str) {
        self.toks[dep].head = Some(head);
        self.toks[dep].rel = rel;
    }

    fn np(&mut self, depth: usize) -> (String, usize) {
        let w = self.pick(&DT);
        let (dt, d) = self.push(w, "DET", "DT");
        let mut parts = vec![dt];
        let mut adj = None;
        if self.rng.random_bool(0.4) {
            let w = self.pick(&JJ);
            let (s, j) = self.push(w, "ADJ", "JJ");
            parts.push(s);
            adj = Some(j);
        }
        let w = self.pick(&NN);
        let (nn, n) = self.push(w, "NOUN", "NN");
        parts.push(nn);
        self.attach(d, n, "det");
        if let Some(j) = adj {
            self.attach(j, n, "amod");
        }
        let base = format!("(NP {})", parts.join(" "));
        if depth < 2 && self.rng.random_bool(0.25) {
            let (pp, pn) = self.pp(depth + 1);
            self.attach(pn, n, "nmod");
            return (format!("(NP {base} {pp})"), n);
        }
        (base, n)
    }

    /// Returns the PP bracket and the index of its object noun.
    fn pp(&mut self, depth: usize) -> (String, usize) {
        let w = self.pick(&IN);
        let (p, i) = self.push(w, "ADP", "IN");
        let (np, n) = self.np(depth);
        self.attach(i, n, "case");
        (format!("(PP {p} {np})"), n)
    }

    fn clause(&mut self) -> (String, usize) {
        let (subj, s) = if self.rng.random_bool(0.3) {
            let w = self.pick(&PRP);
            let (t, i) = self.push(w, "PRON", "PRP");
            (format!("(NP {t})"), i)
        } else {
            self.np(1)
        };
        let w = self.pick(&VBD);
        let (vb, v) = self.push(w, "VERB", "VBD");
        let (obj, o) = self.np(0);
        self.attach(o, v, "obj");
        self.attach(s, v, "nsubj");
        let mut vp = format!("(VP {vb} {obj}");
        if self.rng.random_bool(0.3) {
            let (pp, pn) = self.pp(1);
            self.attach(pn, v, "obl");
            vp.push(' ');
            vp.push_str(&pp);
        }
        vp.push(')');
        (format!("(S {subj} {vp})"), v)
    }

    fn sentence(mut self) -> (String, Vec<Tok>) {
        let (c1, v1) = self.clause();
        let tree = if self.rng.random_bool(0.3) {
            let (comma, ci) = self.push(",", "PUNCT", ",");
            let w = self.pick(&CC);
            let (cc, cci) = self.push(w, "CCONJ", "CC");
            let (c2, v2) = self.clause();
            let (stop, si) = self.push(".", "PUNCT", ".");
            self.attach(ci, v2, "punct");
            self.attach(cci, v2, "cc");
            self.attach(v2, v1, "conj");
            self.attach(si, v1, "punct");
            format!("(S {c1} {comma} {cc} {c2} {stop})")
        } else {
            let (stop, si) = self.push(".", "PUNCT", ".");
            self.attach(si, v1, "punct");
            // re-wrap the clause so the period sits under the top S
            format!("(S {} {stop})", &c1[3..c1.len() - 1])
        };
        self.toks[v1].rel = "root";
        (tree, self.toks)
    }
}

/// Text files of a generated story.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCorpus {
    pub trees: String,
    pub conllu: String,
    pub timing: String,
    pub frequency: String,
    pub n_sentences: usize,
    pub n_tokens: usize,
    /// Offset of the last word, in seconds.
    pub duration_sec: f64,
}

/// Generate sentences until the narration would run past `max_duration_sec`.
pub fn toy_corpus(max_duration_sec: f64, seed: u64) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut trees, mut conllu, mut timing) = (String::new(), String::new(), String::from("word\tonset\toffset\tsentence\ttoken\n"));
    let mut words = std::collections::BTreeSet::new();
    let mut t = 0.5;
    let (mut n_sentences, mut n_tokens, mut last) = (0, 0, 0.0);
    loop {
        let (tree, toks) = SentenceBuilder { rng: &mut rng, toks: Vec::new() }.sentence();
        let mut rows = String::new();
        let mut clock = t;
        for (i, tok) in toks.iter().enumerate() {
            let (on, off) = if tok.upos == "PUNCT" {
                (clock, clock)
            } else {
                let d = rng.random_range(0.2..0.45);
                let on = clock;
                clock += d + 0.05;
                (on, on + d)
            };
            let _ = writeln!(rows, "{}\t{on:.3}\t{off:.3}\t{n_sentences}\t{i}", tok.form);
            last = off;
        }
        if clock > max_duration_sec - 1.0 && n_sentences > 0 {
            break;
        }
        timing.push_str(&rows);
        trees.push_str(&tree);
        trees.push('\n');
        let _ = writeln!(conllu, "# sent_id = {}", n_sentences + 1);
        for (i, tok) in toks.iter().enumerate() {
            let head = tok.head.map_or(0, |h| h + 1);
            let _ = writeln!(conllu, "{}\t{}\t{}\t{}\t{}\t_\t{head}\t{}\t_\t_", i + 1, tok.form, tok.form, tok.upos, tok.xpos, tok.rel);
            words.insert(tok.form.to_lowercase());
        }
        conllu.push('\n');
        n_sentences += 1;
        n_tokens += toks.len();
        t = clock + 0.4;
        if clock > max_duration_sec - 1.0 {
            break;
        }
    }
    let _ = last;
    let mut frequency = String::new();
    for w in &words {
        let _ = writeln!(frequency, "{w}\t{:.1}", 10f64.powf(rng.random_range(3.0..7.0)));
    }
    let duration_sec = timing
        .lines()
        .skip(1)
        .filter_map(|l| l.split('\t').nth(2)?.parse::<f64>().ok())
        .fold(0.0, f64::max);
    ToyCorpus { trees, conllu, timing, frequency, n_sentences, n_tokens, duration_sec }
}

/// Which voxels carry the `B` signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plant {
    None,
    Roi(&'static str, Hemisphere),
    Everywhere,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub n_voxels: usize,
    pub n_tr: usize,
    pub tr: f64,
    /// Columns of each extra word-level space.
    pub ext_dim: usize,
    pub plant: Plant,
    /// Signal variance over noise variance in planted voxels.
    pub snr: f64,
    pub seed: u64,
    /// Additional built-in spaces to request in the config.
    pub builtin_spaces: Vec<FeatureSpace>,
    pub n_permutations: usize,
    pub n_bootstrap: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 3,
            n_voxels: 2000,
            n_tr: 282,
            tr: 1.5,
            ext_dim: 4,
            plant: Plant::Roi("AG", Hemisphere::Left),
            snr: 1.0,
            seed: 0,
            builtin_spaces: Vec::new(),
            n_permutations: 1000,
            n_bootstrap: 1000,
        }
    }
}

/// Paths of a written dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub subjects: Vec<String>,
    /// Planted voxel indices per subject.
    pub planted: Vec<Vec<usize>>,
}

/// Parcel label per voxel: left hemisphere first, voxels cycling over the
/// eight ROIs and a non-language bucket.
pub fn synth_parcels(n_voxels: usize) -> Vec<(Hemisphere, String)> {
    let half = n_voxels.div_ceil(2);
    let buckets = ROI_TABLE.len() + 1;
    (0..n_voxels)
        .map(|v| {
            let (h, i) = if v < half { (Hemisphere::Left, v) } else { (Hemisphere::Right, v - half) };
            let b = i % buckets;
            let k = i / buckets;
            let parcel = if b < ROI_TABLE.len() {
                let ps = ROI_TABLE[b].1;
                ps[k % ps.len()]
            } else {
                OTHER_PARCELS[k % OTHER_PARCELS.len()]
            };
            (h, parcel.to_string())
        })
        .collect()
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut *rng))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
    let p = dir.join(name);
    std::fs::write(&p, bytes).map_err(|e| PipelineError::Io { path: p, source: e })
}

/// Write a complete synthetic dataset and config into `dir`.
pub fn write_dataset(dir: &Path, spec: &SynthSpec) -> Result<SynthDataset, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::Io { path: dir.to_path_buf(), source: e })?;
    let run_sec = spec.n_tr as f64 * spec.tr;
    let corpus_text = toy_corpus(run_sec, spec.seed);
    write(dir, "story.trees", corpus_text.trees.as_bytes())?;
    write(dir, "story.conllu", corpus_text.conllu.as_bytes())?;
    write(dir, "story.timing.tsv", corpus_text.timing.as_bytes())?;
    write(dir, "frequency.tsv", corpus_text.frequency.as_bytes())?;

    let trees = parse_bracketed_file(&corpus_text.trees).expect("generated trees parse");
    let corpus: StimulusCorpus =
        load_timing(&StimulusCorpus::from_trees(trees), &corpus_text.timing, None).expect("generated timing is valid");
    let n = corpus.n_tokens();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let a = gaussian(n, spec.ext_dim, &mut rng);
    let b = gaussian(n, spec.ext_dim, &mut rng);
    write(dir, "A.bmat", &encode_bmat(&a))?;
    write(dir, "B.bmat", &encode_bmat(&b))?;

    let fb = FeatureMatrix::new(FeatureSpace::Ext("B".into()), b).expect("finite");
    let resample = ResampleConfig { tr: spec.tr, ..ResampleConfig::default() };
    let xb = align(&fb, &corpus, &resample, &FirConfig::default(), spec.n_tr).expect("valid config").matrix;
    let xb = ZScore::fit(&xb).apply(&xb);

    let parcels = synth_parcels(spec.n_voxels);
    let mut labels_tsv = String::from("voxel\themisphere\tparcel\n");
    for (v, (h, p)) in parcels.iter().enumerate() {
        let _ = writeln!(labels_tsv, "{v}\t{h}\t{p}");
    }
    let planted: Vec<usize> = (0..spec.n_voxels)
        .filter(|&v| match spec.plant {
            Plant::None => false,
            Plant::Everywhere => true,
            Plant::Roi(roi, h) => {
                parcels[v].0 == h && crate::atlas::roi_of_parcel(&parcels[v].1).is_some_and(|r| r == roi)
            }
        })
        .collect();

    let mut subjects = Vec::new();
    let mut cfg = String::new();
    let _ = writeln!(cfg, "# synthetic dataset, seed {}", spec.seed);
    let _ = writeln!(cfg, "trees = story.trees\nconllu = story.conllu\ntiming = story.timing.tsv\nfrequency = frequency.tsv");
    let _ = writeln!(cfg, "ext.A = A.bmat\next.B = B.bmat");
    for s in 0..spec.n_subjects {
        let id = format!("sub-{:02}", s + 1);
        let mut srng = ChaCha8Rng::seed_from_u64(spec.seed);
        srng.set_stream(100 + s as u64);
        let mut y = gaussian(spec.n_tr, spec.n_voxels, &mut srng);
        let w = gaussian(xb.ncols(), planted.len().max(1), &mut srng);
        let signal = &xb * &w;
        for (k, &v) in planted.iter().enumerate() {
            let col = signal.column(k);
            let sd = (col.map(|x| x * x).sum() / col.len() as f64 - col.mean().powi(2)).sqrt().max(1e-12);
            let scale = spec.snr.sqrt() / sd;
            for t in 0..spec.n_tr {
                y[(t, v)] += scale * col[t];
            }
        }
        write(dir, &format!("{id}.bold.bmat"), &encode_bmat(&y))?;
        write(dir, &format!("{id}.parcels.tsv"), labels_tsv.as_bytes())?;
        let _ = writeln!(cfg, "fmri.{id} = {id}.bold.bmat\nparcels.{id} = {id}.parcels.tsv");
        subjects.push(id);
    }
    let mut spaces: Vec<String> = spec.builtin_spaces.iter().map(|s| s.to_string()).collect();
    spaces.extend(["A".to_string(), "B".to_string()]);
    let _ = writeln!(cfg, "subjects = {}", subjects.join(","));
    let _ = writeln!(cfg, "spaces = {}", spaces.join(","));
    let _ = writeln!(cfg, "individual = {}", spaces.join(","));
    let _ = writeln!(cfg, "hierarchy = A,B\npairwise = B:A,A:B");
    let _ = writeln!(cfg, "tr = {}\nseed = {}", spec.tr, spec.seed);
    let _ = writeln!(cfg, "n_permutations = {}\nn_bootstrap = {}", spec.n_permutations, spec.n_bootstrap);
    let _ = writeln!(cfg, "subtree_dim = 32\ngcn_hidden = 16\ngcn_input_dim = 16\ngcn_epochs = 2\npca_dim = 16");
    let config = dir.join("run.cfg");
    write(dir, "run.cfg", cfg.as_bytes())?;
    Ok(SynthDataset {
        dir: dir.to_path_buf(),
        config,
        subjects,
        planted: vec![planted; spec.n_subjects],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_conllu;

    #[test]
    fn corpus_files_agree() {
        let c = toy_corpus(120.0, 3);
        let trees = parse_bracketed_file(&c.trees).unwrap();
        let graphs = parse_conllu(&c.conllu).unwrap();
        assert_eq!(trees.len(), c.n_sentences);
        let corpus = StimulusCorpus::from_trees(trees).with_graphs(graphs).unwrap();
        assert_eq!(corpus.n_tokens(), c.n_tokens);
        let timed = load_timing(&corpus, &c.timing, Some(120.0)).unwrap();
        assert!(timed.is_timed());
        assert!(c.duration_sec <= 119.0 + 0.5, "{}", c.duration_sec);
        assert!(c.duration_sec > 100.0);
        assert_eq!(toy_corpus(120.0, 3), c);
    }

    #[test]
    fn parcels_cover_every_roi() {
        let p = synth_parcels(200);
        for h in Hemisphere::BOTH {
            for (roi, _) in ROI_TABLE {
                assert!(p.iter().any(|(ph, name)| *ph == h && crate::atlas::roi_of_parcel(name) == Some(roi)));
            }
        }
    }
}
