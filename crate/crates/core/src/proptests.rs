//! Cross-module properties on random trees.

use proptest::prelude::*;

use crate::haar::{verify_haar, HaarParams, HaarSystem};
use crate::metric::{ball, delta, verify_ultrametric, TripleSample};
use crate::operators::{
    apply_multiplier, apply_multiplier_adjoint, assemble_kernel, petermichl_adjoint_apply,
    petermichl_apply, petermichl_compose_diag, petermichl_symbol, random_mean_zero, AlphaSequence,
    Symbol,
};
use crate::tree::{DyadicTree, RandomTreeParams, WeightLaw};
use crate::LeafFunction;

fn arb_tree() -> impl Strategy<Value = DyadicTree<f64>> {
    (any::<u64>(), 1usize..=4, 2usize..=4, 0usize..=1, 0.0f64..0.3).prop_map(
        |(seed, depth, lo, extra, early)| {
            DyadicTree::build_random(&RandomTreeParams {
                seed,
                depth,
                branching: (lo, lo + extra),
                weight_law: WeightLaw::LogUniform { spread: 5.0 },
                early_leaf_prob: early,
            })
            .unwrap()
        },
    )
}

fn arb_setup() -> impl Strategy<Value = (DyadicTree<f64>, HaarSystem<f64>, u64)> {
    (arb_tree(), any::<u64>()).prop_map(|(t, seed)| {
        let h = HaarSystem::build(
            &t,
            &HaarParams {
                seed,
                ..HaarParams::default()
            },
        )
        .unwrap();
        (t, h, seed)
    })
}

fn values(n: usize, seed: u64) -> LeafFunction<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    LeafFunction::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analyze_synthesize_round_trip_and_parseval((t, h, seed) in arb_setup()) {
        let f = values(t.n_leaves(), seed);
        let c = h.analyze(&t, &f).unwrap();
        let back = h.synthesize(&t, &c).unwrap();
        prop_assert!(back.max_abs_diff(&f) < 1e-12);
        let energy = f.inner(&f, &t);
        prop_assert!(close(c.sum_of_squares(), energy, 1e-12));
    }

    #[test]
    fn haar_gram_matches_dense_oracle((t, h, _) in arb_setup()) {
        let v: Vec<LeafFunction<f64>> = (0..h.len()).map(|k| h.to_leaf_function(&t, k)).collect();
        let mut worst = 0f64;
        for a in 0..v.len() {
            worst = worst.max(v[a].integral(&t).abs());
            for b in 0..v.len() {
                let g = v[a].inner(&v[b], &t);
                worst = worst.max((g - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        prop_assert!(worst < 1e-10, "dense Gram residual {worst}");
        prop_assert!(verify_haar(&t, &h).passed());
    }

    #[test]
    fn multiplier_adjoint_identity((t, h, seed) in arb_setup()) {
        let alphas = AlphaSequence::random(h.len(), seed);
        let s = petermichl_symbol(&t, &h, &alphas).unwrap();
        let f = values(t.n_leaves(), seed ^ 1);
        let g = values(t.n_leaves(), seed ^ 2);
        let lhs = apply_multiplier(&t, &h, &s, &f).unwrap().inner(&g, &t);
        let rhs = f.inner(&apply_multiplier_adjoint(&t, &h, &s, &g).unwrap(), &t);
        prop_assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
        let lhs = petermichl_apply(&t, &h, &alphas, &f).unwrap().inner(&g, &t);
        let rhs = f.inner(&petermichl_adjoint_apply(&t, &h, &alphas, &g).unwrap(), &t);
        prop_assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn kernel_reproduces_operator((t, h, seed) in arb_setup()) {
        let alphas = AlphaSequence::random(h.len(), seed);
        let s = petermichl_symbol(&t, &h, &alphas).unwrap();
        let k = assemble_kernel(&t, &h, &s).unwrap();
        let f = values(t.n_leaves(), seed);
        let direct = apply_multiplier(&t, &h, &s, &f).unwrap();
        prop_assert!(k.apply(&t, &f).max_abs_diff(&direct) < 1e-10);
    }

    #[test]
    fn symbol_form_equals_shift((t, h, seed) in arb_setup()) {
        let alphas = AlphaSequence::random(h.len(), seed);
        let s = petermichl_symbol(&t, &h, &alphas).unwrap();
        let f = values(t.n_leaves(), seed);
        let a = apply_multiplier(&t, &h, &s, &f).unwrap();
        let b = petermichl_apply(&t, &h, &alphas, &f).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-10);
    }

    #[test]
    fn composition_diagonal_matches_closed_form((t, h, seed) in arb_setup()) {
        let r = petermichl_compose_diag(&t, &h, &AlphaSequence::random(h.len(), seed)).unwrap();
        prop_assert!(r.closed_form_residual < 1e-12);
        prop_assert!(r.offdiag_cross_cube < 1e-12);
    }

    #[test]
    fn delta_is_an_ultrametric_with_cube_balls(t in arb_tree()) {
        prop_assert!(verify_ultrametric(&t, TripleSample::Exhaustive).holds);
        let n = t.n_leaves();
        for x in 0..n {
            for q in t.ancestors(x) {
                let r = t.measure(q);
                let span = ball(&t, x, r).unwrap();
                for y in 0..n {
                    prop_assert_eq!(delta(&t, x, y).unwrap() <= r, span.contains(&y));
                }
            }
        }
    }

    #[test]
    fn unit_symbol_removes_the_mean((t, h, seed) in arb_setup()) {
        let f = values(t.n_leaves(), seed);
        let g = apply_multiplier(&t, &h, &Symbol::identity(&h), &f).unwrap();
        let want = f.clone().mean_zero(&t);
        prop_assert!(g.max_abs_diff(&want) < 1e-12);
        let z = random_mean_zero(&t, &h, seed);
        prop_assert!(apply_multiplier(&t, &h, &Symbol::identity(&h), &z).unwrap().max_abs_diff(&z) < 1e-10);
    }

    #[test]
    fn single_precision_round_trip(seed in any::<u64>(), depth in 1usize..=4) {
        let t = DyadicTree::<f32>::build_random(&RandomTreeParams {
            seed,
            depth,
            branching: (2, 3),
            weight_law: WeightLaw::Uniform { lo: 0.5, hi: 2.0 },
            early_leaf_prob: 0.0,
        })
        .unwrap();
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        let f = LeafFunction::new((0..t.n_leaves()).map(|i| (i as f32 * 0.7).sin()).collect());
        let back = h.synthesize(&t, &h.analyze(&t, &f).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&f) < 1e-4);
    }
}
