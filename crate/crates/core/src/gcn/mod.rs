//! Edge-gated syntactic graph convolutional network over dependency graphs.
//!
//! Every dependency edge `head → dependent` carries an `in` message to the
//! head and an `out` message to the dependent; each token also has a `self`
//! loop. Layer update for token `v`:
//!
//! ```text
//! h'(v) = ReLU( Σ_{(u→v, dir)} g · (W_dir h(u) + b_dir) ),   g = σ(ŵ_dir · h(u) + b̂_dir)
//! ```

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use train::{gcn_train, gradient_check, masked_loss, GradCheckScope, TrainConfig, TrainReport};

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::features::{FeatureError, FeatureMatrix, FeatureSpace};
use crate::treebank::{DependencyGraph, StimulusCorpus};

#[derive(Debug, Error, PartialEq)]
pub enum GcnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training loss became non-finite at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("corpus has no dependency graphs")]
    MissingGraphs,
}

/// Message direction; also the index into per-layer parameter arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    SelfLoop = 0,
    In = 1,
    Out = 2,
}

pub const DIRECTIONS: [Direction; 3] = [Direction::SelfLoop, Direction::In, Direction::Out];

/// Token used for words outside the vocabulary.
pub const UNK_WORD: &str = "<unk>";

#[derive(Debug, Clone, PartialEq)]
pub struct GcnConfig {
    pub layers: usize,
    pub hidden: usize,
    pub input_dim: usize,
    /// Index 0 is [`UNK_WORD`].
    pub vocab: Vec<String>,
    /// Relation labels seen in the corpus. Messages are parameterized by
    /// direction only; the labels are kept for provenance.
    pub relations: Vec<String>,
}

impl GcnConfig {
    /// Vocabulary and relation set from a corpus's dependency graphs.
    pub fn from_graphs(graphs: &[DependencyGraph], layers: usize, hidden: usize, input_dim: usize) -> Self {
        let words: BTreeSet<String> = graphs.iter().flat_map(|g| g.tokens().iter().map(|t| normalize_word(&t.form))).collect();
        let relations: BTreeSet<String> = graphs.iter().flat_map(|g| g.edges().iter().map(|e| e.relation.clone())).collect();
        let mut vocab = vec![UNK_WORD.to_string()];
        vocab.extend(words.into_iter().filter(|w| w != UNK_WORD));
        Self { layers, hidden, input_dim, vocab, relations: relations.into_iter().collect() }
    }

    pub fn validate(&self) -> Result<(), GcnError> {
        if self.layers < 1 || self.hidden < 1 || self.input_dim < 1 {
            return Err(GcnError::BadConfig("layers, hidden and input_dim must be >= 1".into()));
        }
        if self.vocab.first().map(String::as_str) != Some(UNK_WORD) {
            return Err(GcnError::BadConfig(format!("vocabulary must start with {UNK_WORD}")));
        }
        Ok(())
    }

    fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden
        }
    }
}

pub(crate) fn normalize_word(w: &str) -> String {
    w.to_lowercase()
}

/// Parameters of one layer, indexed by [`Direction`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// H×in message weights.
    pub w: [DMatrix<f64>; 3],
    pub b: [DVector<f64>; 3],
    /// Gate weights over the sender's input state.
    pub gate_w: [DVector<f64>; 3],
    pub gate_b: [f64; 3],
}

impl LayerParams {
    fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            w: std::array::from_fn(|_| DMatrix::zeros(hidden, input)),
            b: std::array::from_fn(|_| DVector::zeros(hidden)),
            gate_w: std::array::from_fn(|_| DVector::zeros(input)),
            gate_b: [0.0; 3],
        }
    }
}

/// All trainable tensors. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// vocab×input_dim input embeddings.
    pub embeddings: DMatrix<f64>,
    pub layers: Vec<LayerParams>,
    /// vocab×H output embeddings scoring masked-word candidates.
    pub output: DMatrix<f64>,
}

/// Which part of the network a tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Embedding,
    Weight,
    Bias,
    GateWeight,
    GateBias,
    Output,
}

impl Params {
    pub fn zeros(cfg: &GcnConfig) -> Self {
        Self {
            embeddings: DMatrix::zeros(cfg.vocab.len(), cfg.input_dim),
            layers: (0..cfg.layers).map(|l| LayerParams::zeros(cfg.hidden, cfg.layer_input(l))).collect(),
            output: DMatrix::zeros(cfg.vocab.len(), cfg.hidden),
        }
    }

    /// Every tensor as a flat slice, in checkpoint order.
    pub fn tensors_mut(&mut self) -> Vec<(TensorKind, &mut [f64])> {
        let mut out: Vec<(TensorKind, &mut [f64])> = vec![(TensorKind::Embedding, self.embeddings.as_mut_slice())];
        for layer in &mut self.layers {
            let LayerParams { w, b, gate_w, gate_b } = layer;
            let gb: Vec<&mut f64> = gate_b.iter_mut().collect();
            for (((w, b), gw), gb) in w.iter_mut().zip(b.iter_mut()).zip(gate_w.iter_mut()).zip(gb) {
                out.push((TensorKind::Weight, w.as_mut_slice()));
                out.push((TensorKind::Bias, b.as_mut_slice()));
                out.push((TensorKind::GateWeight, gw.as_mut_slice()));
                out.push((TensorKind::GateBias, std::slice::from_mut(gb)));
            }
        }
        out.push((TensorKind::Output, self.output.as_mut_slice()));
        out
    }

    pub fn is_finite(&mut self) -> bool {
        self.tensors_mut().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub cfg: GcnConfig,
    pub params: Params,
    word_index: HashMap<String, usize>,
}

impl GcnModel {
    pub fn new(cfg: GcnConfig, params: Params) -> Result<Self, GcnError> {
        cfg.validate()?;
        let expect = Params::zeros(&cfg);
        let shapes_ok = params.embeddings.shape() == expect.embeddings.shape()
            && params.output.shape() == expect.output.shape()
            && params.layers.len() == expect.layers.len()
            && params.layers.iter().zip(&expect.layers).all(|(a, b)| {
                (0..3).all(|d| a.w[d].shape() == b.w[d].shape() && a.b[d].len() == b.b[d].len() && a.gate_w[d].len() == b.gate_w[d].len())
            });
        if !shapes_ok {
            return Err(GcnError::ShapeMismatch("parameters do not match the configuration".into()));
        }
        let word_index = cfg.vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self { cfg, params, word_index })
    }

    /// All-zero parameters.
    pub fn zeros(cfg: GcnConfig) -> Result<Self, GcnError> {
        let p = Params::zeros(&cfg);
        Self::new(cfg, p)
    }

    /// Seeded initialization: embeddings and output table N(0, 0.1²), message
    /// weights N(0, 1/in), gate weights N(0, 0.1²), biases zero.
    pub fn init(cfg: GcnConfig, seed: u64) -> Result<Self, GcnError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let small = Normal::new(0.0, 0.1).expect("valid sigma");
        let mut p = Params::zeros(&cfg);
        p.embeddings.iter_mut().for_each(|v| *v = small.sample(&mut rng));
        for (l, layer) in p.layers.iter_mut().enumerate() {
            let scale = Normal::new(0.0, 1.0 / (cfg.layer_input(l) as f64).sqrt()).expect("valid sigma");
            for d in 0..3 {
                layer.w[d].iter_mut().for_each(|v| *v = scale.sample(&mut rng));
                layer.gate_w[d].iter_mut().for_each(|v| *v = small.sample(&mut rng));
            }
        }
        p.output.iter_mut().for_each(|v| *v = small.sample(&mut rng));
        Self::new(cfg, p)
    }

    pub fn word_id(&self, word: &str) -> usize {
        self.word_index.get(&normalize_word(word)).copied().unwrap_or(0)
    }
}

/// A sentence prepared for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub words: Vec<usize>,
    /// `(sender, receiver, direction)`.
    pub edges: Vec<(usize, usize, Direction)>,
}

impl GraphInput {
    pub fn new(graph: &DependencyGraph, model: &GcnModel) -> Self {
        let words = graph.tokens().iter().map(|t| model.word_id(&t.form)).collect();
        let mut edges: Vec<(usize, usize, Direction)> = (0..graph.len()).map(|i| (i, i, Direction::SelfLoop)).collect();
        for e in graph.edges() {
            if let Some(h) = e.head {
                edges.push((e.dependent, h, Direction::In));
                edges.push((h, e.dependent, Direction::Out));
            }
        }
        Self { words, edges }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    /// `h[l]` is the n×in input to layer `l`; `h[L]` is the output.
    pub h: Vec<DMatrix<f64>>,
    /// Per layer, per direction: n×H messages `h W_dirᵀ + b_dir` of every sender.
    pub msg: Vec<[DMatrix<f64>; 3]>,
    /// Per layer: gate value of every edge, in `GraphInput::edges` order.
    pub gates: Vec<Vec<f64>>,
    /// Per layer: n×H pre-activations.
    pub pre: Vec<DMatrix<f64>>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Forward pass; `masked` tokens get a zero input embedding.
pub(crate) fn forward_cached(input: &GraphInput, params: &Params, masked: Option<usize>) -> ForwardCache {
    let n = input.len();
    let d0 = params.embeddings.ncols();
    let mut h0 = DMatrix::zeros(n, d0);
    for (i, &w) in input.words.iter().enumerate() {
        if Some(i) != masked {
            h0.set_row(i, &params.embeddings.row(w));
        }
    }
    let mut cache = ForwardCache { h: vec![h0], msg: Vec::new(), gates: Vec::new(), pre: Vec::new() };
    for layer in &params.layers {
        let h = cache.h.last().expect("input layer present");
        let hidden = layer.w[0].nrows();
        let msg: [DMatrix<f64>; 3] = std::array::from_fn(|d| {
            let mut m = h * layer.w[d].transpose();
            for mut row in m.row_iter_mut() {
                row += layer.b[d].transpose();
            }
            m
        });
        let gate_in: [DVector<f64>; 3] = std::array::from_fn(|d| h * &layer.gate_w[d]);
        let mut pre = DMatrix::zeros(n, hidden);
        let mut gates = Vec::with_capacity(input.edges.len());
        for &(u, v, dir) in &input.edges {
            let d = dir as usize;
            let g = sigmoid(gate_in[d][u] + layer.gate_b[d]);
            gates.push(g);
            let mut row = pre.row_mut(v);
            row += msg[d].row(u) * g;
        }
        let out = pre.map(|x| x.max(0.0));
        cache.msg.push(msg);
        cache.gates.push(gates);
        cache.pre.push(pre);
        cache.h.push(out);
    }
    cache
}

/// Top-layer states (n×H) for one sentence.
pub fn gcn_forward(graph: &DependencyGraph, model: &GcnModel) -> Result<DMatrix<f64>, GcnError> {
    let input = GraphInput::new(graph, model);
    Ok(forward_cached(&input, &model.params, None).h.pop().expect("at least one layer"))
}

/// DEP feature space: top-layer state of every token, in corpus order.
pub fn extract_dep_features(corpus: &StimulusCorpus, model: &GcnModel) -> Result<FeatureMatrix, FeatureError> {
    let graphs = corpus.graphs().ok_or(FeatureError::MissingGraphs(FeatureSpace::DEP))?;
    let per: Vec<DMatrix<f64>> = graphs
        .par_iter()
        .map(|g| gcn_forward(g, model).expect("graph input is always well-formed"))
        .collect();
    let n: usize = per.iter().map(|m| m.nrows()).sum();
    let h = model.cfg.hidden;
    let mut out = DMatrix::zeros(n, h);
    let mut r = 0;
    for m in per {
        out.rows_mut(r, m.nrows()).copy_from(&m);
        r += m.nrows();
    }
    Ok(FeatureMatrix::new(FeatureSpace::DEP, out)?
        .with_meta("layers", model.cfg.layers)
        .with_meta("hidden", h))
}
