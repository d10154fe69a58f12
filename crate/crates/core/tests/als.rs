mod common;

use common::*;
use mrlr::{als_fit, als_refine, cp_reconstruct, init_factors, nfe, AlsConfig, DenseTensor, Matrix};
use proptest::prelude::*;

fn five_restarts() -> AlsConfig {
    AlsConfig {
        max_sweeps: 500,
        rel_tol: 1e-12,
        seed: 7,
        restarts: 5,
    }
}

fn recovery(rank: usize, seed: u64) -> f64 {
    let f = random_factors(&[6, 7, 8], rank, seed);
    let x = cp_tensor_oracle(&f);
    let (g, _) = als_fit(&x, rank, &five_restarts()).unwrap();
    nfe(&x, &cp_reconstruct(&g, x.shape()).unwrap()).unwrap()
}

#[test]
fn recovers_rank_one() {
    for seed in 0..3 {
        let e = recovery(1, seed);
        assert!(e <= 1e-6, "seed {seed}: nfe {e}");
    }
}

#[test]
fn recovers_rank_two() {
    for seed in 0..3 {
        let e = recovery(2, 100 + seed);
        assert!(e <= 1e-6, "seed {seed}: nfe {e}");
    }
}

#[test]
fn sweep_errors_do_not_increase() {
    for (rank, seed) in [(1, 1), (3, 2), (5, 3)] {
        let x = random_tensor(&[6, 7, 8], seed);
        let cfg = AlsConfig { max_sweeps: 60, rel_tol: 0.0, ..Default::default() };
        let (_, trace) = als_fit(&x, rank, &cfg).unwrap();
        assert_eq!(trace.errors.len(), trace.sweeps_run);
        for w in trace.errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * w[0].max(1.0), "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn order_two_matches_truncated_svd() {
    for seed in 0..4 {
        let m = Matrix::from_row_slice(20, 30, random_tensor(&[600], seed).data());
        let x = DenseTensor::new(vec![20, 30], m.as_slice().to_vec()).unwrap();
        for rank in [1, 3, 5] {
            let (_, trace) = als_fit(&x, rank, &five_restarts()).unwrap();
            let got = trace.final_error().unwrap();
            let best = svd_tail_error(&m, rank);
            assert!((got - best).abs() <= 1e-6 * best, "rank {rank}: {got} vs {best}");
        }
    }
}

#[test]
fn reported_error_is_the_true_error() {
    let x = random_tensor(&[5, 4, 6], 11);
    let (f, trace) = als_fit(&x, 3, &AlsConfig::default()).unwrap();
    let direct = x.distance(&cp_reconstruct(&f, x.shape()).unwrap()).unwrap();
    let reported = trace.final_error().unwrap();
    assert!((direct - reported).abs() <= 1e-10 * direct);
}

#[test]
fn same_seed_same_factors() {
    let x = random_tensor(&[5, 6, 4], 4);
    let cfg = AlsConfig { restarts: 3, seed: 99, ..Default::default() };
    let a = als_fit(&x, 2, &cfg).unwrap();
    let b = als_fit(&x, 2, &cfg).unwrap();
    assert_eq!(a, b);
    let c = als_fit(&x, 2, &cfg.with_seed(5000)).unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn refine_does_not_worsen_from_start() {
    let x = random_tensor(&[4, 5, 6], 8);
    let start = init_factors(x.shape(), 2, 3).unwrap();
    let before = x.distance(&cp_reconstruct(&start, x.shape()).unwrap()).unwrap();
    let (_, trace) = als_refine(&x, start.clone(), &AlsConfig::default()).unwrap();
    assert!(trace.final_error().unwrap() <= before + 1e-12);
}

#[test]
fn rejects_bad_input() {
    let x = random_tensor(&[3, 3], 1);
    assert!(als_fit(&x, 0, &AlsConfig::default()).is_err());
    let cfg = AlsConfig { restarts: 0, ..Default::default() };
    assert!(als_fit(&x, 1, &cfg).is_err());
    let mut bad = x.clone();
    bad.data_mut()[4] = f64::NAN;
    assert!(als_fit(&bad, 1, &AlsConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn error_bounded_by_norm(
        shape in prop::collection::vec(1usize..=5, 2..=4),
        rank in 1usize..=3,
        seed in any::<u64>(),
    ) {
        let x = random_tensor(&shape, seed);
        let cfg = AlsConfig { max_sweeps: 30, ..Default::default() };
        let (_, trace) = als_fit(&x, rank, &cfg).unwrap();
        // the first sweep's least-squares step is never worse than zero
        prop_assert!(trace.final_error().unwrap() <= x.frobenius_norm() * (1.0 + 1e-12));
    }
}
