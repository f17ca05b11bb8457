//! Randomized invariants over the library surface.

use proptest::prelude::*;
use rand::SeedableRng;

use osgood::graph::WeightedGraph;
use osgood::semigroup::{SemigroupAction, SemigroupOperator};
use osgood::source_term::SourceTerm;

fn source_strategy() -> impl Strategy<Value = SourceTerm> {
    prop_oneof![
        (0.3f64..3.0).prop_map(|a| SourceTerm::power(a).unwrap()),
        Just(SourceTerm::exp_minus_one()),
        Just(SourceTerm::power_over_exp()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn osgood_round_trip(src in source_strategy(), y in 1e-3f64..1e2) {
        let f = src.osgood();
        let x = f.inverse(y).unwrap();
        let back = f.eval(x).unwrap();
        prop_assert!(((back - y) / y).abs() <= 1e-8);
    }

    #[test]
    fn osgood_strictly_decreasing(src in source_strategy(), t in 1e-2f64..1e2, step in 1.01f64..4.0) {
        let f = src.osgood();
        prop_assert!(f.eval(t * step).unwrap() < f.eval(t).unwrap());
    }

    #[test]
    fn semigroup_is_sub_markov(seed in 0u64..1000, n in 2usize..25, t in 1e-2f64..20.0) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sg = SemigroupOperator::new(WeightedGraph::random_connected(&mut rng, n));
        use rand::Rng;
        let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let v = sg.apply(t, &phi).unwrap();
        for &x in &v {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x));
        }
    }

    #[test]
    fn jensen_inequality(seed in 0u64..1000, n in 2usize..25, t in 1e-2f64..10.0, alpha in 0.5f64..2.5) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sg = SemigroupOperator::new(WeightedGraph::random_connected(&mut rng, n));
        use rand::Rng;
        let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
        let f = SourceTerm::power(alpha).unwrap();
        let rep = sg.check_jensen(&f, t, &phi).unwrap();
        prop_assert!(rep.min_slack >= -1e-9, "slack {}", rep.min_slack);
    }

    #[test]
    fn semigroup_law(seed in 0u64..1000, n in 2usize..20, t in 1e-2f64..5.0, s in 1e-2f64..5.0) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sg = SemigroupOperator::new(WeightedGraph::random_connected(&mut rng, n));
        use rand::Rng;
        let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let two_step = sg.apply(t, &sg.apply(s, &phi).unwrap()).unwrap();
        let one_step = sg.apply(t + s, &phi).unwrap();
        for (a, b) in two_step.iter().zip(&one_step) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }
}
