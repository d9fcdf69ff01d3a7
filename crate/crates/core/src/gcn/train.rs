//! Masked-word training objective, hand-written backward pass, SGD and a
//! finite-difference gradient check.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};

use super::{forward_cached, sigmoid, ForwardCache, GcnConfig, GcnError, GcnModel, GraphInput, Params, TensorKind};
use crate::treebank::StimulusCorpus;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Negative samples per masked position, drawn once from unigram^0.75.
    pub negatives: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 20, lr: 0.05, negatives: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean loss per masked position before any update.
    pub initial_loss: f64,
    /// Mean loss per masked position after each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Negative-sampling loss for predicting the word at `pos` with its input
/// embedding zeroed: `−log σ(o_t·h) − Σ_n log σ(−o_n·h)`.
pub fn masked_loss(input: &GraphInput, params: &Params, pos: usize, negatives: &[usize]) -> f64 {
    let cache = forward_cached(input, params, Some(pos));
    loss_from_cache(&cache, params, input.words[pos], pos, negatives)
}

fn loss_from_cache(cache: &ForwardCache, params: &Params, target: usize, pos: usize, negatives: &[usize]) -> f64 {
    let h = cache.h.last().expect("output layer").row(pos);
    let mut loss = -log_sigmoid(params.output.row(target).dot(&h));
    for &n in negatives {
        loss -= log_sigmoid(-params.output.row(n).dot(&h));
    }
    loss
}

/// Accumulate the gradient of the masked loss at `pos` into `grads`.
fn backward(
    input: &GraphInput,
    params: &Params,
    cache: &ForwardCache,
    pos: usize,
    negatives: &[usize],
    grads: &mut Params,
) {
    let n_layers = params.layers.len();
    let top = &cache.h[n_layers];
    let h_pos = top.row(pos).transpose();
    let mut dh = DMatrix::zeros(top.nrows(), top.ncols());
    let target = input.words[pos];
    let mut score_grads = vec![(target, sigmoid(params.output.row(target).dot(&h_pos.transpose())) - 1.0)];
    for &n in negatives {
        score_grads.push((n, sigmoid(params.output.row(n).dot(&h_pos.transpose()))));
    }
    for (w, ds) in score_grads {
        let mut g_out = grads.output.row_mut(w);
        g_out += h_pos.transpose() * ds;
        let mut d = dh.row_mut(pos);
        d += params.output.row(w) * ds;
    }
    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        let g = &mut grads.layers[l];
        let h_in = &cache.h[l];
        let pre = &cache.pre[l];
        let dpre = dh.zip_map(pre, |d, p| if p > 0.0 { d } else { 0.0 });
        let mut dmsg: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(h_in.nrows(), layer.w[0].nrows()));
        let mut dz: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(h_in.nrows()));
        for (e, &(u, v, dir)) in input.edges.iter().enumerate() {
            let d = dir as usize;
            let gate = cache.gates[l][e];
            let dp = dpre.row(v);
            let mut row = dmsg[d].row_mut(u);
            row += dp * gate;
            let dgate = dp.dot(&cache.msg[l][d].row(u));
            dz[d][u] += dgate * gate * (1.0 - gate);
        }
        let mut dh_in = DMatrix::zeros(h_in.nrows(), h_in.ncols());
        for d in 0..3 {
            g.w[d] += dmsg[d].transpose() * h_in;
            for row in dmsg[d].row_iter() {
                g.b[d] += row.transpose();
            }
            g.gate_w[d] += h_in.transpose() * &dz[d];
            g.gate_b[d] += dz[d].sum();
            dh_in += &dmsg[d] * &layer.w[d];
            dh_in += &dz[d] * layer.gate_w[d].transpose();
        }
        dh = dh_in;
    }
    for (i, &w) in input.words.iter().enumerate() {
        if i != pos {
            let mut row = grads.embeddings.row_mut(w);
            row += dh.row(i);
        }
    }
}

/// Unigram^0.75 sampler over the vocabulary (UNK excluded when possible).
fn negative_sampler(inputs: &[GraphInput], vocab: usize) -> WeightedIndex<f64> {
    let mut counts = vec![0.0; vocab];
    for inp in inputs {
        for &w in &inp.words {
            counts[w] += 1.0;
        }
    }
    let weights: Vec<f64> = counts.iter().map(|c: &f64| c.powf(0.75)).collect();
    if weights.iter().all(|&w| w == 0.0) {
        return WeightedIndex::new(vec![1.0; vocab]).expect("non-empty vocabulary");
    }
    WeightedIndex::new(weights).expect("positive weights")
}

fn mean_loss(inputs: &[GraphInput], params: &Params, negs: &[Vec<Vec<usize>>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (s, inp) in inputs.iter().enumerate() {
        for pos in 0..inp.len() {
            total += masked_loss(inp, params, pos, &negs[s][pos]);
            count += 1;
        }
    }
    total / count.max(1) as f64
}

/// Train on the corpus's dependency graphs with plain SGD, one update per
/// masked token, visiting tokens in a seeded shuffled order each epoch.
pub fn gcn_train(corpus: &StimulusCorpus, cfg: GcnConfig, tc: &TrainConfig) -> Result<(GcnModel, TrainReport), GcnError> {
    if !(tc.lr >= 0.0 && tc.lr.is_finite()) {
        return Err(GcnError::BadConfig(format!("learning rate must be >= 0, got {}", tc.lr)));
    }
    let graphs = corpus.graphs().ok_or(GcnError::MissingGraphs)?;
    let mut model = GcnModel::init(cfg, tc.seed)?;
    let inputs: Vec<GraphInput> = graphs.iter().map(|g| GraphInput::new(g, &model)).collect();
    let sampler = negative_sampler(&inputs, model.cfg.vocab.len());
    let mut neg_rng = ChaCha8Rng::seed_from_u64(tc.seed);
    neg_rng.set_stream(1);
    let negs: Vec<Vec<Vec<usize>>> = inputs
        .iter()
        .map(|inp| (0..inp.len()).map(|_| (0..tc.negatives).map(|_| sampler.sample(&mut neg_rng)).collect()).collect())
        .collect();
    let initial_loss = mean_loss(&inputs, &model.params, &negs);
    let mut order: Vec<(usize, usize)> =
        inputs.iter().enumerate().flat_map(|(s, inp)| (0..inp.len()).map(move |p| (s, p))).collect();
    let mut grads = Params::zeros(&model.cfg);
    let mut epoch_losses = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
        rng.set_stream(2 + epoch as u64);
        order.shuffle(&mut rng);
        for &(s, pos) in &order {
            let inp = &inputs[s];
            let cache = forward_cached(inp, &model.params, Some(pos));
            backward(inp, &model.params, &cache, pos, &negs[s][pos], &mut grads);
            let mut touched_out = negs[s][pos].clone();
            touched_out.push(inp.words[pos]);
            sgd_step(&mut model.params, &mut grads, tc.lr, &inp.words, &touched_out);
        }
        let loss = mean_loss(&inputs, &model.params, &negs);
        if !loss.is_finite() || !model.params.is_finite() {
            return Err(GcnError::DivergenceDetected { epoch });
        }
        log::debug!("gcn epoch {epoch}: loss {loss:.6}");
        epoch_losses.push(loss);
    }
    Ok((model, TrainReport { initial_loss, epoch_losses }))
}

/// `params -= lr * grads`, then clear the gradient rows that were used.
fn sgd_step(params: &mut Params, grads: &mut Params, lr: f64, emb_rows: &[usize], out_rows: &[usize]) {
    for (p, g) in params.layers.iter_mut().zip(grads.layers.iter_mut()) {
        for d in 0..3 {
            p.w[d] -= &g.w[d] * lr;
            p.b[d].axpy(-lr, &g.b[d], 1.0);
            p.gate_w[d].axpy(-lr, &g.gate_w[d], 1.0);
            p.gate_b[d] -= lr * g.gate_b[d];
            g.w[d].fill(0.0);
            g.b[d].fill(0.0);
            g.gate_w[d].fill(0.0);
            g.gate_b[d] = 0.0;
        }
    }
    let mut rows: Vec<usize> = emb_rows.to_vec();
    rows.sort_unstable();
    rows.dedup();
    for r in rows {
        let gr = grads.embeddings.row(r).clone_owned();
        let mut pr = params.embeddings.row_mut(r);
        pr -= gr * lr;
        grads.embeddings.row_mut(r).fill(0.0);
    }
    let mut rows: Vec<usize> = out_rows.to_vec();
    rows.sort_unstable();
    rows.dedup();
    for r in rows {
        let gr = grads.output.row(r).clone_owned();
        let mut pr = params.output.row_mut(r);
        pr -= gr * lr;
        grads.output.row_mut(r).fill(0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradCheckScope {
    All,
    GatesOnly,
}

/// Total masked loss over every position of a sentence, its sign pattern of
/// pre-activations, and optionally its gradient.
fn sentence_objective(
    input: &GraphInput,
    params: &Params,
    negs: &[Vec<usize>],
    grads: Option<&mut Params>,
) -> (f64, Vec<bool>) {
    let mut loss = 0.0;
    let mut signs = Vec::new();
    let mut grads = grads;
    for pos in 0..input.len() {
        let cache = forward_cached(input, params, Some(pos));
        loss += loss_from_cache(&cache, params, input.words[pos], pos, &negs[pos]);
        signs.extend(cache.pre.iter().flat_map(|p| p.iter().map(|&x| x > 0.0)));
        if let Some(g) = grads.as_deref_mut() {
            backward(input, params, &cache, pos, &negs[pos], g);
        }
    }
    (loss, signs)
}

/// Largest relative error `|a − n| / max(|a| + |n|, 1e-7)` between analytic
/// and central-difference gradients of the summed masked loss of `graph`.
/// Coordinates whose perturbation flips a ReLU are skipped.
pub fn gradient_check(
    model: &GcnModel,
    graph: &crate::treebank::DependencyGraph,
    eps: f64,
    scope: GradCheckScope,
    negatives_seed: u64,
) -> f64 {
    let input = GraphInput::new(graph, model);
    let vocab = model.cfg.vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(negatives_seed);
    let uniform = WeightedIndex::new(vec![1.0; vocab]).expect("non-empty vocabulary");
    let negs: Vec<Vec<usize>> = (0..input.len()).map(|_| (0..5).map(|_| uniform.sample(&mut rng)).collect()).collect();

    let mut analytic = Params::zeros(&model.cfg);
    let (_, base_signs) = sentence_objective(&input, &model.params, &negs, Some(&mut analytic));
    let analytic_flat: Vec<(TensorKind, Vec<f64>)> =
        analytic.tensors_mut().into_iter().map(|(k, t)| (k, t.to_vec())).collect();

    let mut params = model.params.clone();
    let n_tensors = analytic_flat.len();
    let mut worst = 0.0f64;
    for ti in 0..n_tensors {
        let (kind, ref grad) = analytic_flat[ti];
        let included = match scope {
            GradCheckScope::All => true,
            GradCheckScope::GatesOnly => matches!(kind, TensorKind::GateWeight | TensorKind::GateBias),
        };
        if !included {
            continue;
        }
        for (ci, &a) in grad.iter().enumerate() {
            let orig = params.tensors_mut()[ti].1[ci];
            params.tensors_mut()[ti].1[ci] = orig + eps;
            let (lp, sp) = sentence_objective(&input, &params, &negs, None);
            params.tensors_mut()[ti].1[ci] = orig - eps;
            let (lm, sm) = sentence_objective(&input, &params, &negs, None);
            params.tensors_mut()[ti].1[ci] = orig;
            if sp != base_signs || sm != base_signs {
                continue;
            }
            let num = (lp - lm) / (2.0 * eps);
            let rel = (a - num).abs() / (a.abs() + num.abs()).max(1e-7);
            worst = worst.max(rel);
        }
    }
    worst
}
