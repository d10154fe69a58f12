//! Rank-R PARAFAC fitting by alternating least squares.
//!
//! Each sweep updates the factors in ascending mode order. A factor update
//! is an exact least-squares solve against the mode unfolding, with the
//! Khatri-Rao design matrix never materialized: its Gram matrix is the
//! Hadamard product of the other factors' Gram matrices, and the
//! right-hand side comes from a matricized-tensor-times-Khatri-Rao product
//! computed by two GEMM-shaped contractions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cp::{cp_mat_form, FactorSet};
use crate::error::{Error, Result};
use crate::linalg::{gemm, khatri_rao_colex, solve_gram, Strided};
use crate::tensor::DenseTensor;
use crate::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct AlsConfig {
    pub max_sweeps: usize,
    /// Stop once the relative change of the fit error between two sweeps
    /// drops below this.
    pub rel_tol: f64,
    pub seed: u64,
    /// Independent random starts; the best final fit is kept. Restart `k`
    /// is seeded with `seed + k`.
    pub restarts: usize,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 200,
            rel_tol: 1e-8,
            seed: 0,
            restarts: 1,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return Err(Error::InvalidConfig("rel_tol must be non-negative".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlsTrace {
    /// Frobenius fit error `||X - X_hat||_F` after each completed sweep.
    pub errors: Vec<f64>,
    pub sweeps_run: usize,
    pub converged: bool,
    /// Number of factor updates that fell back to the pseudo-inverse.
    pub singular_solves: usize,
    /// Seed of the restart that produced the returned factors.
    pub seed: u64,
}

impl AlsTrace {
    pub fn final_error(&self) -> Option<f64> {
        self.errors.last().copied()
    }
}

/// Standard normal factors from a ChaCha8 stream seeded with `seed`,
/// filled mode by mode in column-major order.
pub fn init_factors(shape: &[usize], rank: usize, seed: u64) -> Result<FactorSet> {
    if rank == 0 {
        return Err(Error::InvalidRank(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = shape
        .iter()
        .map(|&n| Matrix::from_fn(n, rank, |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    FactorSet::new(factors)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsSolution {
    /// Minimizer `H` of `||X_p - K H^T||_F`.
    pub h: Matrix,
    /// The Gram system was singular and the pseudo-inverse was used.
    pub singular: bool,
}

/// Least-squares factor update `argmin_H ||xhat - K H^T||_F` through the
/// Gram system `(K^T K) H^T = K^T xhat`.
pub fn ls_update(xhat: &Matrix, k: &Matrix) -> Result<LsSolution> {
    if xhat.nrows() != k.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "unfolding has {} rows, design matrix has {}",
            xhat.nrows(),
            k.nrows()
        )));
    }
    let gram = k.tr_mul(k);
    let rhs = xhat.tr_mul(k);
    let (h, singular) = solve_gram(&gram, &rhs);
    Ok(LsSolution { h, singular })
}

/// `mat_p(X)^T (F_I ⊙ ... ⊙ F_{p+1} ⊙ F_{p-1} ⊙ ... ⊙ F_1)` for a 0-based
/// mode `p`, an `N_p x R` matrix.
///
/// Viewing the data as `A x N_p x B` (A the product of the leading mode
/// sizes, B of the trailing ones) the contraction splits into one GEMM over
/// the larger of A and B followed by a row-weighted reduction over the
/// smaller one.
pub(crate) fn mttkrp(x: &DenseTensor, factors: &[Matrix], p: usize) -> Matrix {
    let shape = x.shape();
    let rank = factors[0].ncols();
    let np = shape[p];
    let a: usize = shape[..p].iter().product();
    let b: usize = shape[p + 1..].iter().product();
    let lead: Vec<&Matrix> = factors[..p].iter().collect();
    let trail: Vec<&Matrix> = factors[p + 1..].iter().collect();
    let left = khatri_rao_colex(&lead, rank);
    let right = khatri_rao_colex(&trail, rank);
    let data = x.data();
    let mut out = Matrix::zeros(np, rank);
    if a >= b {
        // W[(n, b), r] = sum_a X[a, (n, b)] L[a, r]
        let w = gemm(
            Strided::col_major(data, a, np * b).t(),
            Strided::matrix(&left),
        );
        for r in 0..rank {
            let wc = w.column(r);
            let rc = right.column(r);
            let mut oc = out.column_mut(r);
            for bi in 0..b {
                let s = rc[bi];
                for n in 0..np {
                    oc[n] += s * wc[n + np * bi];
                }
            }
        }
    } else {
        // U[(a, n), r] = sum_b X[(a, n), b] R[b, r]
        let u = gemm(
            Strided::col_major(data, a * np, b),
            Strided::matrix(&right),
        );
        for r in 0..rank {
            let uc = u.column(r);
            let lc = left.column(r);
            let mut oc = out.column_mut(r);
            for n in 0..np {
                let block = &uc.as_slice()[a * n..a * (n + 1)];
                oc[n] = block.iter().zip(lc.iter()).map(|(u, l)| u * l).sum();
            }
        }
    }
    out
}

fn hadamard_gram(grams: &[Matrix], skip: usize, rank: usize) -> Matrix {
    let mut g = Matrix::from_element(rank, rank, 1.0);
    for (i, gi) in grams.iter().enumerate() {
        if i != skip {
            g.component_mul_assign(gi);
        }
    }
    g
}

/// Frobenius fit error of `factors` against `x`, by explicit reconstruction.
pub(crate) fn fit_error(x: &DenseTensor, factors: &FactorSet) -> f64 {
    // the last-mode unfolding shares the tensor's linear layout
    let approx = cp_mat_form(factors, factors.order()).expect("mode in range");
    x.data()
        .iter()
        .zip(approx.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Runs ALS sweeps from `start` until convergence or `max_sweeps`.
fn run_sweeps(
    x: &DenseTensor,
    mut factors: FactorSet,
    max_sweeps: usize,
    rel_tol: f64,
    norm: f64,
) -> (FactorSet, AlsTrace) {
    let rank = factors.rank();
    let order = factors.order();
    let mut grams: Vec<Matrix> = factors.factors().iter().map(|f| f.tr_mul(f)).collect();
    let mut trace = AlsTrace::default();
    let mut prev = fit_error(x, &factors);
    for _ in 0..max_sweeps {
        for p in 0..order {
            let m = mttkrp(x, factors.factors(), p);
            let g = hadamard_gram(&grams, p, rank);
            let (h, singular) = solve_gram(&g, &m);
            if singular {
                trace.singular_solves += 1;
            }
            grams[p] = h.tr_mul(&h);
            factors.factors_mut()[p] = h;
        }
        let err = fit_error(x, &factors);
        trace.errors.push(err);
        trace.sweeps_run += 1;
        let change = (prev - err).abs();
        if err <= f64::EPSILON * norm || change < rel_tol * prev {
            trace.converged = true;
            break;
        }
        prev = err;
    }
    (factors, trace)
}

fn check_input(x: &DenseTensor, config: &AlsConfig) -> Result<()> {
    config.validate()?;
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Fits a rank-`rank` PARAFAC model to `x`, keeping the best of
/// `config.restarts` random starts.
pub fn als_fit(x: &DenseTensor, rank: usize, config: &AlsConfig) -> Result<(FactorSet, AlsTrace)> {
    check_input(x, config)?;
    if rank == 0 {
        return Err(Error::InvalidRank(0));
    }
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        let trace = AlsTrace {
            errors: vec![0.0],
            sweeps_run: 1,
            converged: true,
            singular_solves: 0,
            seed: config.seed,
        };
        return Ok((FactorSet::zeros(x.shape(), rank)?, trace));
    }
    let runs: Vec<(FactorSet, AlsTrace)> = (0..config.restarts as u64)
        .into_par_iter()
        .map(|k| {
            let seed = config.seed.wrapping_add(k);
            let start = init_factors(x.shape(), rank, seed)?;
            let (f, mut t) = run_sweeps(x, start, config.max_sweeps, config.rel_tol, norm);
            t.seed = seed;
            Ok((f, t))
        })
        .collect::<Result<_>>()?;
    // first minimum wins so the choice does not depend on scheduling
    let best = runs
        .into_iter()
        .reduce(|best, run| {
            if run.1.final_error() < best.1.final_error() {
                run
            } else {
                best
            }
        })
        .expect("restarts >= 1");
    Ok(best)
}

/// Continues ALS from given factors (one run, no restarts). Used for warm
/// starts, where the fit can only improve on `start`.
pub fn als_refine(
    x: &DenseTensor,
    start: FactorSet,
    config: &AlsConfig,
) -> Result<(FactorSet, AlsTrace)> {
    check_input(x, config)?;
    if start.shape() != x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "factor row counts {:?} do not match shape {:?}",
            start.shape(),
            x.shape()
        )));
    }
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        let trace = AlsTrace {
            errors: vec![0.0],
            sweeps_run: 1,
            converged: true,
            singular_solves: 0,
            seed: config.seed,
        };
        return Ok((FactorSet::zeros(x.shape(), start.rank())?, trace));
    }
    let (f, mut t) = run_sweeps(x, start, config.max_sweeps, config.rel_tol, norm);
    t.seed = config.seed;
    Ok((f, t))
}
