mod common;

use blepi::{certify_lower_bound, solve_mg, MgStatus, SolverOptions};

#[test]
fn random_balanced_data_converge_and_dominate_certificates() {
    for seed in 0..30 {
        let mut rng = common::rng(seed);
        let datum = common::random_datum(&mut rng, true);
        let res = solve_mg(&datum, &SolverOptions::default()).unwrap();
        assert_eq!(res.status, MgStatus::Converged, "seed {seed}: {}", res.message);
        assert!(res.stationarity <= 1e-8);
        for _ in 0..200 {
            let b = common::random_block_pd(&mut rng, datum.partition(), 1e3);
            assert!(certify_lower_bound(&datum, &b).unwrap() <= res.value + 1e-6);
        }
        assert!(res.trace.windows(2).all(|w| w[1].objective >= w[0].objective));
    }
}

#[test]
fn lifted_pairs_double_the_scalar_constant() {
    for seed in 0..40 {
        let mut rng = common::rng(100 + seed);
        let scalar = common::random_datum(&mut rng, true);
        let (lifted, offset) = common::lift_to_pairs(&mut rng, &scalar);
        let a = solve_mg(&scalar, &SolverOptions::default()).unwrap();
        let b = solve_mg(&lifted, &SolverOptions::default()).unwrap();
        assert_eq!(b.status, MgStatus::Converged, "seed {seed}: {}", b.message);
        let expected = 2.0 * a.value + offset;
        assert!((b.value - expected).abs() < 1e-6 * (1.0 + expected.abs()), "seed {seed}: {} vs {}", b.value, expected);
    }
}

#[test]
fn unbalanced_random_data_are_unbounded() {
    for seed in 0..10 {
        let mut rng = common::rng(200 + seed);
        let datum = common::random_datum(&mut rng, false);
        let res = solve_mg(&datum, &SolverOptions::default()).unwrap();
        assert_eq!(res.status, MgStatus::Unbounded);
        assert!(res.mg().is_infinite());
    }
}
