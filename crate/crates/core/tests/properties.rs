mod common;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use parsebrain::encoder::{cross_validate, ridge_fit, ridge_objective, FoldSpec, RidgeConfig};
use parsebrain::features::{encode_subtree, incomplete_subtree, node_count, SubtreeEncodingConfig};
use parsebrain::incparser::{parse_incrementally, prefix_logprob, BeamConfig};
use parsebrain::signal::{fir_expand, lanczos_weight, resample_rows, FirConfig, ResampleConfig};
use parsebrain::stats::bh_fdr;
use parsebrain::treebank::ConstituencyTree;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{grammar_zoo, oracle_sentences, random_graph, random_tree};

fn multiset(items: impl Iterator<Item = String>) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracketed_round_trip(seed in any::<u64>()) {
        let t = random_tree(seed, 12, 6);
        let back = ConstituencyTree::parse_bracketed(&t.to_bracketed()).unwrap();
        prop_assert_eq!(back.to_bracketed(), t.to_bracketed());
        prop_assert_eq!(back.nodes().len(), t.nodes().len());
    }

    #[test]
    fn leaves_cover_tokens_once(seed in any::<u64>()) {
        let t = random_tree(seed, 12, 6);
        let mut covered = vec![0usize; t.n_tokens()];
        for &l in t.leaves() {
            let (s, e) = t.node(l).span();
            prop_assert_eq!(e, s + 1);
            covered[s] += 1;
        }
        prop_assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn dependency_edges_form_a_tree(seed in any::<u64>(), n in 1usize..15) {
        let g = random_graph(seed, n);
        prop_assert_eq!(g.edges().len(), n);
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for e in g.edges() {
            if let Some(h) = e.head {
                let (a, b) = (find(&mut parent, h), find(&mut parent, e.dependent));
                prop_assert_ne!(a, b);
                parent[a] = b;
            }
        }
        let r = find(&mut parent, 0);
        prop_assert!((0..n).all(|i| find(&mut parent, i) == r));
    }

    #[test]
    fn incomplete_subtrees_nest(seed in any::<u64>()) {
        let t = random_tree(seed, 12, 6);
        let n = t.n_tokens();
        let prods = |k: usize| multiset(incomplete_subtree(&t, k, None).productions.iter().map(|p| p.to_string()));
        for k in 0..n.saturating_sub(1) {
            let (a, b) = (prods(k), prods(k + 1));
            for (item, c) in &a {
                prop_assert!(b.get(item).copied().unwrap_or(0) >= *c, "{} lost at k={}", item, k);
            }
        }
        let full = tree_productions(&t);
        prop_assert_eq!(prods(n - 1), full);
    }

    #[test]
    fn node_counts_sum_to_internal_nodes(seed in any::<u64>()) {
        let t = random_tree(seed, 12, 6);
        let total: usize = (0..t.n_tokens()).map(|k| node_count(&t, k)).sum();
        prop_assert_eq!(total, t.internal_ids().count());
    }

    #[test]
    fn hashed_l1_counts_items(seed in any::<u64>(), dim in 1usize..40, k_frac in 0.0f64..1.0) {
        let t = random_tree(seed, 12, 6);
        let k = ((t.n_tokens() as f64 * k_frac) as usize).min(t.n_tokens() - 1);
        let view = incomplete_subtree(&t, k, None);
        let v = encode_subtree(&view, &SubtreeEncodingConfig { dim, ..SubtreeEncodingConfig::default() });
        prop_assert_eq!(v.len(), dim);
        prop_assert_eq!(v.iter().map(|x| x.abs()).sum::<f64>(), (view.productions.len() + view.open.len()) as f64);
    }

    #[test]
    fn lanczos_is_symmetric(t in -5.0f64..5.0, a in 1usize..6) {
        prop_assert_eq!(lanczos_weight(t, a), lanczos_weight(-t, a));
    }

    #[test]
    fn resampling_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, n in 5usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut onsets: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..30.0)).collect();
        onsets.sort_by(f64::total_cmp);
        let x = gaussian(n, 3, seed ^ 1);
        let y = gaussian(n, 3, seed ^ 2);
        let cfg = ResampleConfig::default();
        let lhs = resample_rows(&(&x * alpha + &y * beta), &onsets, &cfg, 20);
        let rhs = resample_rows(&x, &onsets, &cfg, 20) * alpha + resample_rows(&y, &onsets, &cfg, 20) * beta;
        prop_assert!((lhs - rhs).abs().max() < 1e-9);
    }

    #[test]
    fn fir_shape(rows in 0usize..30, cols in 1usize..5, n_delays in 1usize..10) {
        let x = gaussian(rows, cols, 3);
        let f = fir_expand(&x, &FirConfig { n_delays });
        prop_assert_eq!(f.shape(), (rows, cols * n_delays));
    }

    #[test]
    fn bh_grows_with_q(ps in prop::collection::vec(1e-6f64..=1.0, 1..60), q1 in 0.001f64..0.5, dq in 0.0f64..0.4) {
        let a = bh_fdr(&ps, q1).unwrap();
        let b = bh_fdr(&ps, q1 + dq).unwrap();
        prop_assert!(a.reject.iter().zip(&b.reject).all(|(x, y)| !x || *y));
    }

    #[test]
    fn ridge_is_optimal(seed in any::<u64>(), lambda in 1e-3f64..1e3) {
        let x = gaussian(20, 4, seed);
        let y = gaussian(20, 2, seed ^ 7);
        let m = ridge_fit(&x, &y, lambda).unwrap();
        let best = ridge_objective(&x, &y, &m.weights, lambda);
        let d = gaussian(4, 2, seed ^ 9) * 1e-3;
        prop_assert!(ridge_objective(&x, &y, &(&m.weights + d), lambda) >= best - 1e-9 * best.max(1.0));
    }
}

fn tree_productions(t: &ConstituencyTree) -> BTreeMap<String, usize> {
    multiset(t.internal_ids().map(|i| t.production(i).unwrap().to_string()))
}

#[test]
fn prefix_logprob_never_increases() {
    for (name, g) in grammar_zoo() {
        for (words, _) in oracle_sentences(&g, 6) {
            let words: Vec<&str> = words.iter().map(String::as_str).collect();
            let beams = parse_incrementally(&words, &g, &BeamConfig::default());
            let mut last = 0.0;
            for b in beams.iter().flatten() {
                let lp = prefix_logprob(b);
                assert!(lp <= last + 1e-12, "{name} {words:?}: {lp} after {last}");
                last = lp;
            }
        }
    }
}

#[test]
fn held_out_rows_leave_fold_model_alone() {
    let x = gaussian(120, 6, 1);
    let y = gaussian(120, 3, 2);
    let folds = FoldSpec::contiguous(120, 4, 10).unwrap();
    let cfg = RidgeConfig::default();
    let base = cross_validate(&x, &y, &folds, &cfg).unwrap();
    assert_eq!(base, cross_validate(&x, &y, &folds, &cfg).unwrap());
    // fold 0 predictions come from a model that never saw fold 0 targets
    let mut y2 = y.clone();
    let r = folds.folds()[0].clone();
    for i in r.clone() {
        for j in 0..y2.ncols() {
            y2[(i, j)] = -y[(r.end - 1 - (i - r.start), j)];
        }
    }
    let other = cross_validate(&x, &y2, &folds, &cfg).unwrap();
    for i in r {
        for j in 0..y.ncols() {
            assert_eq!(base.predictions[(i, j)], other.predictions[(i, j)]);
        }
    }
}
