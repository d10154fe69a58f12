mod common;

use common::*;
use mrlr::{
    cp_mat_form, cp_reconstruct, cp_reshape_factors, khatri_rao, mat_fold, mat_unfold,
    ten_reshape, unten_reshape, DenseTensor, ModePartition,
};
use proptest::prelude::*;

fn shape_strategy(min_order: usize, max_order: usize, max_entries: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=6, min_order..=max_order)
        .prop_filter("too many entries", move |s| s.iter().product::<usize>() <= max_entries)
}

#[test]
fn reshape_matches_index_map_for_every_partition() {
    for order in 1..=4 {
        let shape: Vec<usize> = [2, 3, 4, 2][..order].to_vec();
        let x = random_tensor(&shape, order as u64);
        for p in all_partitions(order) {
            let y = ten_reshape(&x, &p).unwrap();
            assert_eq!(y, reshape_oracle(&x, &p), "partition {p}");
            assert_eq!(unten_reshape(&y, &p, &shape).unwrap(), x);
        }
    }
}

#[test]
fn partition_enumeration_counts() {
    // ordered groups of ordered modes: sum_k I! C(I-1, k-1)
    assert_eq!(all_partitions(1).len(), 1);
    assert_eq!(all_partitions(3).len(), 24);
    assert_eq!(all_partitions(4).len(), 192);
}

#[test]
fn unfold_matches_entry_definition() {
    let shape = [3, 2, 4];
    let x = random_tensor(&shape, 9);
    for p in 1..=3 {
        let m = mat_unfold(&x, p).unwrap();
        for idx in multi_indices(&shape) {
            // row index: remaining modes colexicographically
            let mut k = 0;
            let mut stride = 1;
            for (i, (&n, &size)) in idx.iter().zip(&shape).enumerate() {
                if i + 1 != p {
                    k += n * stride;
                    stride *= size;
                }
            }
            assert_eq!(m[(k, idx[p - 1])], x.get(&idx));
        }
    }
}

#[test]
fn cp_reshape_factors_by_hand() {
    let f = random_factors(&[2, 3, 2], 2, 4);
    let g = cp_reshape_factors(&f, &"1,2|3".parse().unwrap()).unwrap();
    assert_eq!(g.shape(), vec![6, 2]);
    let y = ten_reshape(&cp_tensor_oracle(&f), &"1,2|3".parse().unwrap()).unwrap();
    let z = cp_reconstruct(&g, &[6, 2]).unwrap();
    assert!(rel_diff(z.data(), y.data()) <= 1e-12);

    let v = cp_reshape_factors(&f, &ModePartition::vectorize(3)).unwrap();
    let fs = f.factors();
    for r in 0..2 {
        for (row, idx) in multi_indices(&[2, 3, 2]).iter().enumerate() {
            let expected = fs[0][(idx[0], r)] * fs[1][(idx[1], r)] * fs[2][(idx[2], r)];
            assert!((v.factors()[0][(row, r)] - expected).abs() < 1e-15);
        }
    }
}

#[test]
fn cp_mat_form_random_order_three() {
    let f = random_factors(&[3, 4, 5], 2, 12);
    let oracle = cp_tensor_oracle(&f);
    for p in 1..=3 {
        let got = cp_mat_form(&f, p).unwrap();
        let want = mat_unfold(&oracle, p).unwrap();
        assert!(rel_diff(got.as_slice(), want.as_slice()) <= 1e-12);
    }
}

#[test]
fn cp_reconstruct_matches_brute_force() {
    for (i, shape) in [vec![4], vec![3, 5], vec![2, 3, 4], vec![2, 2, 3, 2, 2]].iter().enumerate() {
        let f = random_factors(shape, 3, i as u64);
        let x = cp_reconstruct(&f, shape).unwrap();
        assert!(rel_diff(x.data(), cp_tensor_oracle(&f).data()) <= 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unfold_fold_round_trip(shape in shape_strategy(1, 5, 4096), seed in any::<u64>()) {
        let x = random_tensor(&shape, seed);
        for p in 1..=shape.len() {
            let m = mat_unfold(&x, p).unwrap();
            prop_assert_eq!(mat_fold(&m, &shape, p).unwrap(), x.clone());
        }
    }

    #[test]
    fn vectorize_is_storage_order(shape in shape_strategy(1, 5, 4096), seed in any::<u64>()) {
        let x = random_tensor(&shape, seed);
        let v = ten_reshape(&x, &ModePartition::vectorize(shape.len())).unwrap();
        prop_assert_eq!(v.data(), x.data());
    }

    #[test]
    fn matricized_cp_identity(shape in shape_strategy(2, 5, 10_000), rank in 1usize..=4, seed in any::<u64>()) {
        let f = random_factors(&shape, rank, seed);
        let x = cp_reconstruct(&f, &shape).unwrap();
        for p in 1..=shape.len() {
            let lhs = mat_unfold(&x, p).unwrap();
            let rhs = cp_mat_form(&f, p).unwrap();
            prop_assert!(rel_diff(lhs.as_slice(), rhs.as_slice()) <= 1e-12);
        }
    }

    #[test]
    fn tensorized_cp_identity(shape in shape_strategy(1, 4, 10_000), rank in 1usize..=4, seed in any::<u64>()) {
        let f = random_factors(&shape, rank, seed);
        let x = cp_reconstruct(&f, &shape).unwrap();
        for p in all_partitions(shape.len()) {
            let lhs = ten_reshape(&x, &p).unwrap();
            let g = cp_reshape_factors(&f, &p).unwrap();
            let rhs = cp_reconstruct(&g, lhs.shape()).unwrap();
            prop_assert!(rel_diff(lhs.data(), rhs.data()) <= 1e-12);
        }
    }

    #[test]
    fn khatri_rao_is_associative(
        ra in 1usize..5, rb in 1usize..5, rc in 1usize..5, cols in 1usize..4, seed in any::<u64>()
    ) {
        let f = random_factors(&[ra, rb, rc], cols, seed);
        let [a, b, c] = [0, 1, 2].map(|i| f.factors()[i].clone());
        let left = khatri_rao(&khatri_rao(&a, &b).unwrap(), &c).unwrap();
        let right = khatri_rao(&a, &khatri_rao(&b, &c).unwrap()).unwrap();
        prop_assert!((left - right).norm() <= 1e-14);
    }

    #[test]
    fn partition_spec_round_trips(order in 1usize..=5, pick in any::<prop::sample::Index>()) {
        let all = all_partitions(order);
        let p = &all[pick.index(all.len())];
        let text = p.to_string();
        prop_assert_eq!(&text.parse::<ModePartition>().unwrap(), p);
    }
}

#[test]
fn reshape_is_thread_count_independent() {
    let x = random_tensor(&[5, 6, 7], 3);
    let p: ModePartition = "3,1|2".parse().unwrap();
    let serial = ten_reshape(&x, &p).unwrap();
    let parallel: Vec<DenseTensor> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).map(|_| s.spawn(|| ten_reshape(&x, &p).unwrap())).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for y in parallel {
        assert_eq!(y, serial);
    }
}
