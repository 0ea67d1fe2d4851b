mod common;

use proptest::prelude::*;
use relaxalign::distributions::{density_ratio_sup, DiscreteDistribution};
use relaxalign::divergences::{
    dual_divergence_discrete, kept_count, primal_divergence, relax, reweighted_distance_discrete, sort_reweight,
    GeneratorFunction, TotalVariation,
};
use relaxalign::theory::knn::knn_density_ratio;
use relaxalign::transport::{relaxed_wasserstein_dual, relaxed_wasserstein_primal, wasserstein1};

const BETAS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];

fn mass() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 3 => 0.01f64..1.0]
}

/// Two mass vectors with positive totals on `1..=max` shared planar atoms.
fn pair(max: usize) -> impl Strategy<Value = (DiscreteDistribution, DiscreteDistribution)> {
    prop::collection::vec((mass(), mass(), 0.0f64..0.5, 0.0f64..3.0), 1..=max)
        .prop_filter("positive totals", |v| v.iter().map(|e| e.0).sum::<f64>() > 0.0 && v.iter().map(|e| e.1).sum::<f64>() > 0.0)
        .prop_map(|v| {
            let points: Vec<Vec<f64>> = v.iter().enumerate().map(|(i, e)| vec![i as f64 + e.2, e.3]).collect();
            let p: Vec<f64> = v.iter().map(|e| e.0).collect();
            let q: Vec<f64> = v.iter().map(|e| e.1).collect();
            common::pair_on(&points, &p, &q)
        })
}

fn distances(p: &DiscreteDistribution, q: &DiscreteDistribution, beta: f64) -> [f64; 4] {
    let gan = relax(GeneratorFunction::Gan, beta).unwrap();
    let kl = relax(GeneratorFunction::Kl, beta).unwrap();
    [
        primal_divergence(&gan, p, q).unwrap(),
        primal_divergence(&kl, p, q).unwrap(),
        relaxed_wasserstein_primal(p, q, beta).unwrap().0,
        reweighted_distance_discrete(&TotalVariation, p, q, beta).unwrap().value,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn zero_exactly_when_ratio_is_bounded((p, q) in pair(10)) {
        let ratio = density_ratio_sup(&p, &q);
        for beta in BETAS {
            // stay away from the boundary, where zero is a matter of rounding
            prop_assume!((ratio - (1.0 + beta)).abs() > 1e-6);
            let admissible = ratio <= 1.0 + beta;
            for (k, d) in distances(&p, &q, beta).into_iter().enumerate() {
                prop_assert!(d >= -1e-12, "distance {k} negative: {d}");
                prop_assert_eq!(d <= 1e-9, admissible, "distance {} = {} at beta {}, ratio {}", k, d, beta, ratio);
            }
        }
    }

    #[test]
    fn identical_distributions_are_at_distance_zero((p, _) in pair(10), beta in 0.0f64..5.0) {
        for d in distances(&p, &p, beta) {
            prop_assert!(d.abs() <= 1e-9, "{d}");
        }
    }

    #[test]
    fn distances_do_not_increase_with_beta((p, q) in pair(8), b1 in 0.0f64..4.0, db in 0.0f64..4.0) {
        let lo = distances(&p, &q, b1);
        let hi = distances(&p, &q, b1 + db);
        for k in 0..4 {
            prop_assert!(hi[k] <= lo[k] + 1e-9, "distance {k}: {} at {b1}, {} at {}", lo[k], hi[k], b1 + db);
        }
    }

    #[test]
    fn f_divergence_primal_equals_dual((p, q) in pair(12), beta in 0.0f64..5.0) {
        for base in [GeneratorFunction::Gan, GeneratorFunction::Kl] {
            let gen = relax(base, beta).unwrap();
            let primal = primal_divergence(&gen, &p, &q).unwrap();
            let dual = dual_divergence_discrete(&gen, &p, &q).unwrap();
            prop_assert!((primal - dual).abs() <= 1e-9, "{base:?}: {primal} vs {dual}");
        }
    }

    #[test]
    fn wasserstein_strong_duality((p, q) in pair(12), beta in 0.0f64..5.0) {
        let (primal, coupling) = relaxed_wasserstein_primal(&p, &q, beta).unwrap();
        let (dual, potential) = relaxed_wasserstein_dual(&p, &q, beta).unwrap();
        prop_assert!((primal - dual).abs() <= 1e-6, "{primal} vs {dual}");
        prop_assert!(coupling.is_feasible(p.mass(), q.mass(), beta));
        prop_assert!(potential.is_feasible(1e-7));
    }

    #[test]
    fn unrelaxed_wasserstein_is_classical((p, q) in pair(10)) {
        let relaxed = relaxed_wasserstein_primal(&p, &q, 0.0).unwrap().0;
        let classical = wasserstein1(&p, &q).unwrap();
        prop_assert!((relaxed - classical).abs() <= 1e-9, "{relaxed} vs {classical}");
    }

    #[test]
    fn sorting_keeps_the_top_scores(scores in prop::collection::vec(-5.0f64..5.0, 1..40), beta in 0.0f64..6.0) {
        let w = sort_reweight(&scores, beta).unwrap();
        let kept = w.kept();
        prop_assert_eq!(kept.len(), kept_count(scores.len(), beta));
        prop_assert!(kept.len() as f64 >= scores.len() as f64 / (1.0 + beta) - 1e-9);
        let lowest_kept = kept.iter().map(|&i| scores[i]).fold(f64::INFINITY, f64::min);
        for (i, s) in scores.iter().enumerate() {
            if w.weights[i] == 0.0 {
                prop_assert!(*s <= lowest_kept);
            }
        }
    }

    #[test]
    fn delta1_curve_is_monotone(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let s = ndarray::Array2::from_shape_fn((60, 2), |_| rng.gen::<f64>());
        let t = ndarray::Array2::from_shape_fn((50, 2), |_| rng.gen::<f64>() * 1.5);
        let r = knn_density_ratio(&t, &s, 5).unwrap();
        let mass = |b: f64| r.iter().filter(|x| **x > 1.0 + b).count();
        let mut prev = usize::MAX;
        for b in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let m = mass(b);
            prop_assert!(m <= prev);
            prev = m;
        }
    }
}
