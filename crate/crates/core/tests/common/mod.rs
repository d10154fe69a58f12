//! Brute-force oracles shared by the integration tests. Nothing here goes
//! through the library's reshape or Khatri-Rao code paths.

#![allow(dead_code)]

use mrlr::{DenseTensor, FactorSet, Matrix, ModePartition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
    let mut r = rng(seed);
    DenseTensor::from_fn(shape.to_vec(), |_| r.random_range(-1.0..1.0)).unwrap()
}

pub fn random_factors(shape: &[usize], rank: usize, seed: u64) -> FactorSet {
    let mut r = rng(seed);
    FactorSet::new(
        shape
            .iter()
            .map(|&n| Matrix::from_fn(n, rank, |_, _| r.random_range(-1.0..1.0)))
            .collect(),
    )
    .unwrap()
}

/// All 0-based multi-indices of `shape` in colexicographic order.
pub fn multi_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in shape {
        let mut next = Vec::with_capacity(out.len() * n);
        for i in 0..n {
            for prefix in &out {
                let mut v: Vec<usize> = prefix.clone();
                v.push(i);
                next.push(v);
            }
        }
        out = next;
    }
    // built with the last mode outermost, i.e. first mode fastest
    out
}

/// Entry of a CP tensor straight from the rank-1 sum.
pub fn cp_entry(factors: &FactorSet, idx: &[usize]) -> f64 {
    (0..factors.rank())
        .map(|r| {
            factors
                .factors()
                .iter()
                .zip(idx)
                .map(|(f, &i)| f[(i, r)])
                .product::<f64>()
        })
        .sum()
}

pub fn cp_tensor_oracle(factors: &FactorSet) -> DenseTensor {
    let shape = factors.shape();
    DenseTensor::from_fn(shape, |idx| cp_entry(factors, idx)).unwrap()
}

/// Index map of the partition reshape, group by group: with 1-based
/// indices `k_p = n_{P_p(1)} + sum_{i>=2} (n_{P_p(i)} - 1) prod_{j<i} N_{P_p(j)}`.
pub fn reshape_index(partition: &ModePartition, shape: &[usize], idx: &[usize]) -> Vec<usize> {
    partition
        .groups()
        .iter()
        .map(|g| {
            let n1 = idx[g[0] - 1] + 1;
            let mut k = n1;
            for i in 1..g.len() {
                let prod: usize = g[..i].iter().map(|&m| shape[m - 1]).product();
                k += idx[g[i] - 1] * prod;
            }
            k - 1
        })
        .collect()
}

pub fn reshape_oracle(x: &DenseTensor, partition: &ModePartition) -> DenseTensor {
    let out_shape: Vec<usize> = partition
        .groups()
        .iter()
        .map(|g| g.iter().map(|&m| x.shape()[m - 1]).product())
        .collect();
    let mut out = DenseTensor::zeros(out_shape).unwrap();
    for idx in multi_indices(x.shape()) {
        let k = reshape_index(partition, x.shape(), &idx);
        let off = out.offset(&k);
        out.data_mut()[off] = x.get(&idx);
    }
    out
}

/// Every ordered partition of `{1..order}` into ordered groups.
pub fn all_partitions(order: usize) -> Vec<ModePartition> {
    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.is_empty() {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let head = rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }
    // a permutation of the modes cut into consecutive non-empty runs
    let modes: Vec<usize> = (1..=order).collect();
    let mut out = Vec::new();
    for perm in permutations(&modes) {
        for cuts in 0..(1u32 << (order - 1)) {
            let mut groups = vec![vec![perm[0]]];
            for (i, &m) in perm.iter().enumerate().skip(1) {
                if cuts & (1 << (i - 1)) != 0 {
                    groups.push(vec![m]);
                } else {
                    groups.last_mut().unwrap().push(m);
                }
            }
            out.push(ModePartition::new(groups).unwrap());
        }
    }
    out
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Truncated-SVD optimal Frobenius error of a rank-`rank` approximation.
pub fn svd_tail_error(m: &Matrix, rank: usize) -> f64 {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s[rank.min(s.len())..].iter().map(|v| v * v).sum::<f64>().sqrt()
}
