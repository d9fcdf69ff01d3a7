//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use parsebrain::atlas::Hemisphere;
use parsebrain::encoder::{cross_validate, ridge_fit, ridge_objective, FoldSpec, RidgeConfig};
use parsebrain::features::{complete_subtree, incomplete_subtree, node_count};
use parsebrain::gcn::{gradient_check, GcnConfig, GcnModel, GradCheckScope};
use parsebrain::incparser::{prefix_logprob, sentence_logprob, Beam, BeamConfig, UNBOUNDED};
use parsebrain::pipeline::{
    cmd_compare, cmd_encode, cmd_features, cmd_probe, cmd_report, max_other_pct, roi_pct, run_pairwise, tree_digest,
    Run, RunConfig, StudyMode,
};
use parsebrain::signal::{fir_expand, lanczos_weight, resample_rows, FirConfig, ResampleConfig};
use parsebrain::stats::{bh_fdr, block_permutation_test, StatsConfig};
use parsebrain::synth::{write_dataset, Plant, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.1?}, limit {limit:?}"))?;
    Ok(took)
}

fn subtree_oracle() -> Outcome {
    let start = Instant::now();
    let mut tokens = 0;
    for seed in 0..50 {
        let t = common::random_tree(seed, 12, 6);
        ensure(t.n_tokens() <= 12 && common::levels(&t) <= 6, || format!("generator out of bounds at seed {seed}"))?;
        let n = t.n_tokens();
        tokens += n;
        let all: Vec<String> = {
            let mut v: Vec<String> = t.subtree_productions(t.root()).iter().map(|p| p.to_string()).collect();
            v.sort();
            v
        };
        let mut prev: Option<Vec<String>> = None;
        let mut nc = 0;
        for k in 0..n {
            let cc = complete_subtree(&t, k);
            ensure(cc == common::oracle_complete(&t, k), || format!("seed {seed} k {k}: CC node differs"))?;
            let mut ci: Vec<String> = incomplete_subtree(&t, k, None).items().collect();
            ci.sort();
            ensure(ci == common::oracle_incomplete(&t, k), || format!("seed {seed} k {k}: CI items differ"))?;
            let prods: Vec<String> = ci.iter().filter(|s| !s.ends_with("->?")).cloned().collect();
            if let Some(p) = &prev {
                let mut rest = prods.clone();
                for x in p {
                    let i = rest.iter().position(|y| y == x).ok_or_else(|| format!("seed {seed} k {k}: CI not nested"))?;
                    rest.swap_remove(i);
                }
            }
            prev = Some(prods);
            nc += node_count(&t, k);
        }
        ensure(prev.as_ref() == Some(&all), || format!("seed {seed}: final CI is not the whole tree"))?;
        ensure(nc == t.internal_ids().count(), || format!("seed {seed}: NC sum {nc} != {}", t.internal_ids().count()))?;
    }
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!("50 trees, {tokens} prefixes match the enumeration oracle; nesting and NC conservation hold ({took:.2?})"))
}

fn parser_equivalence() -> Outcome {
    let start = Instant::now();
    let cfg = BeamConfig { width: UNBOUNDED, ..BeamConfig::default() };
    let (mut n_sent, mut n_prefix, mut worst) = (0, 0, 0.0f64);
    for (name, g) in common::grammar_zoo() {
        let sentences = common::oracle_sentences(&g, 6);
        ensure(!sentences.is_empty(), || format!("{name}: no sentences"))?;
        for (words, p) in &sentences {
            let words: Vec<&str> = words.iter().map(String::as_str).collect();
            let mut beam = Beam::new(&g, cfg.clone());
            for k in 1..=words.len() {
                beam = beam.advance(words[k - 1], &g).map_err(|e| format!("{name} {words:?}: {e}"))?;
                let mut oracle = common::oracle_prefix(&g, &words[..k]);
                let mut got: Vec<(Vec<usize>, Vec<_>, f64)> =
                    beam.derivations().iter().map(|d| (d.applied(), d.pending(), d.logp())).collect();
                ensure(got.len() == oracle.len(), || {
                    format!("{name} {:?}: beam has {} derivations, oracle {}", &words[..k], got.len(), oracle.len())
                })?;
                got.sort_by(|a, b| a.0.cmp(&b.0));
                oracle.sort_by(|a, b| a.applied.cmp(&b.applied));
                for (a, o) in got.iter().zip(&oracle) {
                    ensure(a.0 == o.applied && a.1 == o.pending, || format!("{name} {:?}: derivation sets differ", &words[..k]))?;
                    worst = worst.max((a.2 - o.logp).abs());
                }
                let lp: Vec<f64> = oracle.iter().map(|o| o.logp).collect();
                worst = worst.max((prefix_logprob(&beam) - common::log_sum_exp(&lp)).abs());
                n_prefix += 1;
            }
            let s = sentence_logprob(&words, &g, cfg.clone()).map_err(|e| e.to_string())?;
            worst = worst.max((s - p.ln()).abs());
            n_sent += 1;
        }
    }
    ensure(worst < 1e-9, || format!("largest log-probability error {worst:e}"))?;
    let took = within(Duration::from_secs(10), start)?;
    Ok(format!("10 grammars, {n_sent} sentences, {n_prefix} prefixes; max |Δlogp| {worst:.1e} ({took:.2?})"))
}

fn gcn_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_graph(seed, rng.random_range(3..=7));
        let hidden = rng.random_range(2..=8);
        let layers = rng.random_range(1..=2);
        let cfg = GcnConfig::from_graphs(std::slice::from_ref(&g), layers, hidden, rng.random_range(3..=6));
        let model = GcnModel::init(cfg, seed).map_err(|e| e.to_string())?;
        let err = gradient_check(&model, &g, 1e-5, GradCheckScope::All, seed);
        ensure(err.is_finite(), || format!("seed {seed}: non-finite error"))?;
        worst = worst.max(err);
    }
    ensure(worst < 1e-3, || format!("max relative error {worst:e}"))?;
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!("20 (model, graph) pairs with H <= 8; max relative error {worst:.2e} ({took:.2?})"))
}

fn inverse3(m: &DMatrix<f64>) -> DMatrix<f64> {
    let c = |r: usize, k: usize| m[(r % 3, k % 3)];
    let det = c(0, 0) * (c(1, 1) * c(2, 2) - c(1, 2) * c(2, 1)) - c(0, 1) * (c(1, 0) * c(2, 2) - c(1, 2) * c(2, 0))
        + c(0, 2) * (c(1, 0) * c(2, 1) - c(1, 1) * c(2, 0));
    // adjugate by cyclic cofactors
    DMatrix::from_fn(3, 3, |i, j| (c(j + 1, i + 1) * c(j + 2, i + 2) - c(j + 1, i + 2) * c(j + 2, i + 1)) / det)
}

fn ridge_correctness() -> Outcome {
    let start = Instant::now();
    let x = DMatrix::from_row_slice(
        6,
        3,
        &[1.0, 2.0, 0.5, -1.0, 0.0, 2.0, 0.5, 1.5, -1.0, 2.0, -1.0, 0.0, 0.0, 1.0, 1.0, 1.5, 0.5, -0.5],
    );
    let y = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 2.0, -1.0, 0.5, 0.5, -1.0, 2.0, 0.0, 1.0, 1.5, -0.5]);
    let mut fixture_err = 0.0f64;
    for lambda in [1e-3, 1e-2, 1e-1, 1.0] {
        let a = x.transpose() * &x + DMatrix::identity(3, 3) * lambda;
        let exact = inverse3(&a) * x.transpose() * &y;
        let w = ridge_fit(&x, &y, lambda).map_err(|e| e.to_string())?.weights;
        fixture_err = fixture_err.max((w - exact).amax());
    }
    ensure(fixture_err < 1e-8, || format!("fixture error {fixture_err:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let xr = DMatrix::from_fn(40, 8, |_, _| StandardNormal.sample(&mut rng));
    let yr = DMatrix::from_fn(40, 3, |_, _| StandardNormal.sample(&mut rng));
    let lambda = 0.1;
    let w = ridge_fit(&xr, &yr, lambda).map_err(|e| e.to_string())?.weights;
    let best = ridge_objective(&xr, &yr, &w, lambda);
    for i in 0..100 {
        let scale = 10f64.powf(rng.random_range(-4.0..0.0));
        let d = DMatrix::from_fn(8, 3, |_, _| { let z: f64 = StandardNormal.sample(&mut rng); scale * z });
        let o = ridge_objective(&xr, &yr, &(&w + d), lambda);
        ensure(o >= best - 1e-12 * best.abs(), || format!("perturbation {i} lowered the objective"))?;
    }

    let grid = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3];
    let norms: Vec<f64> = grid.iter().map(|&l| ridge_fit(&xr, &yr, l).map(|m| m.weights.norm()).unwrap_or(f64::NAN)).collect();
    ensure(norms.windows(2).all(|w| w[1] < w[0]), || format!("‖W‖ not decreasing over λ: {norms:?}"))?;
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!("fixture error {fixture_err:.1e}; 100 perturbations never improve; ‖W‖ shrinks over 7 λ values ({took:.2?})"))
}

fn lanczos_fir() -> Outcome {
    let start = Instant::now();
    for (t, want) in [(0.0, 1.0), (1.0, 0.0), (-1.0, 0.0), (2.0, 0.0), (-2.0, 0.0), (3.0, 0.0), (-3.0, 0.0)] {
        let w = lanczos_weight(t, 3);
        ensure(w == want, || format!("lanczos_weight({t}, 3) = {w}"))?;
    }
    let tr = 1.5;
    let n_tr = 282;
    let cfg = ResampleConfig { tr, ..ResampleConfig::default() };
    let onsets: Vec<f64> = (0..(n_tr as f64 * tr / 0.05) as usize).map(|i| i as f64 * 0.05).collect();
    let nyquist = 0.5 / tr;
    let mut worst = 0.0f64;
    for f in [0.02, 0.05, 0.1, 0.9 * nyquist / 2.0] {
        let x = DMatrix::from_fn(onsets.len(), 1, |i, _| (2.0 * std::f64::consts::PI * f * onsets[i]).sin());
        let r = resample_rows(&x, &onsets, &cfg, n_tr);
        let (mut se, mut ss) = (0.0, 0.0);
        for i in 0..n_tr {
            let want = (2.0 * std::f64::consts::PI * f * (i as f64 + 0.5) * tr).sin();
            se += (r[(i, 0)] - want).powi(2);
            ss += want * want;
        }
        let rel = (se / ss).sqrt();
        ensure(rel < 0.02, || format!("sine at {f:.3} Hz: RMS error {:.2}%", 100.0 * rel))?;
        worst = worst.max(rel);
    }
    let n = 12;
    let d = 2;
    let mut imp = DMatrix::zeros(n, d);
    imp[(0, 0)] = 1.0;
    imp[(0, 1)] = 2.0;
    let out = fir_expand(&imp, &FirConfig::default());
    for r in 0..n {
        for c in 0..d * 8 {
            let (delay, col) = (c / d + 1, c % d);
            let want = if r == delay { imp[(0, col)] } else { 0.0 };
            ensure(out[(r, c)] == want, || format!("impulse trace wrong at ({r}, {c})"))?;
        }
    }
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!("kernel exact at integers; worst sine RMS error {:.3}%; impulse trace exact ({took:.2?})", 100.0 * worst))
}

fn ar_noise(n: usize, phi: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(n, 1);
    let mut prev = 0.0;
    for t in 0..n {
        let e: f64 = StandardNormal.sample(rng);
        prev = phi * prev + e;
        y[(t, 0)] = prev;
    }
    y
}

fn ks_uniform(mut ps: Vec<f64>) -> f64 {
    ps.sort_by(f64::total_cmp);
    let m = ps.len() as f64;
    ps.iter().enumerate().map(|(i, &p)| ((i + 1) as f64 / m - p).abs().max((i as f64 / m - p).abs())).fold(0.0, f64::max)
}

/// Null p-values from cross-validated predictions of an FIR design. With
/// `coupled`, predictions are fit to the same run they are tested against.
fn null_pvalues(sims: u64, coupled: bool) -> Result<Vec<f64>, String> {
    let n_tr = 282;
    let folds = FoldSpec::contiguous(n_tr, 4, 10).map_err(|e| e.to_string())?;
    let ridge = RidgeConfig::default();
    let mut ps = Vec::new();
    for sim in 0..sims {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + sim);
        let raw = DMatrix::from_fn(n_tr, 4, |_, _| StandardNormal.sample(&mut rng));
        let x = fir_expand(&raw, &FirConfig::default());
        let y = ar_noise(n_tr, 0.3, &mut rng);
        let fit_to = if coupled { y.clone() } else { ar_noise(n_tr, 0.3, &mut rng) };
        let sc = cross_validate(&x, &fit_to, &folds, &ridge).map_err(|e| e.to_string())?;
        let cfg = StatsConfig { n_permutations: 199, seed: sim, ..StatsConfig::default() };
        ps.push(block_permutation_test(&sc.predictions, &y, &folds, &cfg).map_err(|e| e.to_string())?[0]);
    }
    Ok(ps)
}

fn stats_calibration() -> Outcome {
    let start = Instant::now();
    let ks = ks_uniform(null_pvalues(200, false)?);
    ensure(ks < 0.08, || format!("KS distance {ks:.3}"))?;

    let bh = bh_fdr(&[0.01, 0.02, 0.5], 0.05).map_err(|e| e.to_string())?;
    ensure(bh.reject == [true, true, false], || format!("worked example rejects {:?}", bh.reject))?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..100 {
        let len = rng.random_range(1..200);
        let p: Vec<f64> = (0..len).map(|_| rng.random_range(1e-6..1.0f64).powi(rng.random_range(1..4))).collect();
        let (q1, q2) = (rng.random_range(0.001..0.2), rng.random_range(0.2..0.5));
        let (a, b) = (bh_fdr(&p, q1).unwrap(), bh_fdr(&p, q2).unwrap());
        ensure(a.reject.iter().zip(&b.reject).all(|(x, y)| !x || *y), || format!("vector {i}: not monotone in q"))?;
    }
    let took = within(Duration::from_secs(300), start)?;
    let coupled = ks_uniform(null_pvalues(200, true)?);
    Ok(format!(
        "200 null simulations, KS distance {ks:.3}; worked BH example exact; monotone on 100 vectors ({took:.1?}); \
         note: predictions fit to the tested run itself give KS {coupled:.3}"
    ))
}

fn planted_signal(dir: &Path) -> Outcome {
    let start = Instant::now();
    let (roi, h) = ("AG", Hemisphere::Left);
    let spec = SynthSpec { plant: Plant::Roi(roi, h), n_permutations: 1000, n_bootstrap: 5000, seed: 11, ..SynthSpec::default() };
    let data = write_dataset(&dir.join("planted"), &spec).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::load(&data.config).map_err(|e| e.to_string())?;
    cfg.out = dir.join("planted-out");
    let (_, outcome) = run_pairwise(cfg).map_err(|e| e.to_string())?;
    let hit = roi_pct(&outcome, "B-A", roi, h).unwrap_or(0.0);
    let other = max_other_pct(&outcome, "B-A", roi, h);
    let reverse = roi_pct(&outcome, "A-B", roi, h).unwrap_or(100.0);
    ensure(hit > 50.0, || format!("planted ROI only {hit:.1}% significant"))?;
    ensure(other < 5.0, || format!("another ROI reached {other:.1}%"))?;
    ensure(reverse < 5.0, || format!("A-B in the planted ROI reached {reverse:.1}%"))?;

    let null = SynthSpec { plant: Plant::None, seed: 12, ..spec };
    let data = write_dataset(&dir.join("null"), &null).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::load(&data.config).map_err(|e| e.to_string())?;
    cfg.out = dir.join("null-out");
    let (run, pairwise) = run_pairwise(cfg).map_err(|e| e.to_string())?;
    let hier = cmd_compare(&run, StudyMode::Hierarchical).map_err(|e| e.to_string())?;
    let mut worst_excess = f64::NEG_INFINITY;
    for o in [&pairwise, &hier] {
        for r in &o.reports {
            for s in &r.summary {
                let voxels: usize = r.rows.iter().filter(|x| x.roi == s.roi && x.hemisphere == s.hemisphere).map(|x| x.n_voxels).sum();
                let tol = 300.0 * (0.05 * 0.95 / voxels as f64).sqrt();
                worst_excess = worst_excess.max(s.mean_pct - (5.0 + tol));
                ensure(s.mean_pct <= 5.0 + tol, || format!("null {} {}-{}: {:.1}%", o.mode, s.roi, s.hemisphere, s.mean_pct))?;
            }
        }
    }
    let took = within(Duration::from_secs(600), start)?;
    Ok(format!(
        "{roi}-{h} B-A {hit:.1}%, other ROIs <= {other:.1}%, A-B {reverse:.1}%; null run within 5% + 3σ everywhere ({took:.1?})"
    ))
}

fn run_everything(cfg: RunConfig) -> Result<(), String> {
    let run = Run::new(cfg).map_err(|e| e.to_string())?;
    cmd_features(&run).map_err(|e| e.to_string())?;
    cmd_encode(&run, &[]).map_err(|e| e.to_string())?;
    for m in [StudyMode::Individual, StudyMode::Hierarchical, StudyMode::Pairwise] {
        cmd_compare(&run, m).map_err(|e| e.to_string())?;
    }
    cmd_report(&run, &[]).map_err(|e| e.to_string())?;
    cmd_probe(&run).map_err(|e| e.to_string())?;
    Ok(())
}

fn determinism(dir: &Path) -> Outcome {
    use parsebrain::features::FeatureSpace::*;
    let start = Instant::now();
    let spec = SynthSpec {
        n_subjects: 2,
        n_voxels: 240,
        builtin_spaces: vec![PU, CM, PD, CC, CI, INC, DEP],
        n_permutations: 200,
        n_bootstrap: 200,
        seed: 5,
        ..SynthSpec::default()
    };
    let data = write_dataset(&dir.join("det"), &spec).map_err(|e| e.to_string())?;
    let mut text = std::fs::read_to_string(&data.config).map_err(|e| e.to_string())?;
    text.push_str("probe_targets = A.bmat\n");
    std::fs::write(&data.config, text).map_err(|e| e.to_string())?;
    let mut digests = Vec::new();
    for pass in ["det-1", "det-2"] {
        let mut cfg = RunConfig::load(&data.config).map_err(|e| e.to_string())?;
        cfg.out = dir.join(pass);
        run_everything(cfg)?;
        digests.push(tree_digest(&dir.join(pass)).map_err(|e| e.to_string())?);
    }
    let differing: Vec<&String> =
        digests[0].keys().chain(digests[1].keys()).filter(|k| digests[0].get(*k) != digests[1].get(*k)).collect();
    ensure(differing.is_empty(), || format!("{} file(s) differ, e.g. {}", differing.len(), differing[0]))?;
    Ok(format!("{} output files byte-identical across two full runs ({:.1?})", digests[0].len(), start.elapsed()))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path().to_path_buf();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("subtree oracle equivalence", Box::new(subtree_oracle)),
        ("incremental parser equivalence", Box::new(parser_equivalence)),
        ("GCN gradient check", Box::new(gcn_gradients)),
        ("ridge correctness", Box::new(ridge_correctness)),
        ("Lanczos/FIR", Box::new(lanczos_fir)),
        ("statistical calibration", Box::new(stats_calibration)),
        ("end-to-end planted signal", Box::new({
            let d = dir.clone();
            move || planted_signal(&d)
        })),
        ("determinism", Box::new({
            let d = dir.clone();
            move || determinism(&d)
        })),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
