//! Rank-R PARAFAC (CP) factor sets and the identities that connect them to
//! the unfolding and reshaping operators.

use crate::error::{Error, Result};
use crate::linalg::{gemm, khatri_rao_colex, Strided};
use crate::tensor::{DenseTensor, ModePartition};
use crate::Matrix;

/// One factor matrix per mode, all sharing the column count `rank`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSet {
    factors: Vec<Matrix>,
}

impl FactorSet {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        let rank = match factors.first() {
            Some(f) => f.ncols(),
            None => return Err(Error::InvalidShape("a factor set needs one factor per mode".into())),
        };
        if rank == 0 {
            return Err(Error::InvalidRank(0));
        }
        if let Some(i) = factors.iter().position(|f| f.ncols() != rank) {
            return Err(Error::DimensionMismatch(format!(
                "factor {} has {} columns, expected {rank}",
                i + 1,
                factors[i].ncols()
            )));
        }
        if factors.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite);
        }
        Ok(Self { factors })
    }

    pub fn zeros(shape: &[usize], rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidRank(0));
        }
        Self::new(shape.iter().map(|&n| Matrix::zeros(n, rank)).collect())
    }

    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub(crate) fn factors_mut(&mut self) -> &mut [Matrix] {
        &mut self.factors
    }

    pub fn into_factors(self) -> Vec<Matrix> {
        self.factors
    }

    /// Row counts, i.e. the shape of the tensor these factors describe.
    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::nrows).collect()
    }

    /// Number of stored scalars: `rank * sum_i N_i`.
    pub fn param_count(&self) -> usize {
        self.factors.iter().map(|f| f.nrows() * f.ncols()).sum()
    }

    fn check_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::DimensionMismatch(format!(
                "factor row counts {:?} do not match shape {shape:?}",
                self.shape()
            )));
        }
        Ok(())
    }
}

/// Sum over `r` of the outer products of the `r`-th factor columns.
pub fn cp_reconstruct(factors: &FactorSet, shape: &[usize]) -> Result<DenseTensor> {
    factors.check_shape(shape)?;
    let mut out = DenseTensor::zeros(shape.to_vec())?;
    let (head, last) = factors.factors.split_at(factors.order() - 1);
    let last = &last[0];
    let lead: usize = shape[..shape.len() - 1].iter().product();
    let mut term = vec![0.0; lead];
    let mut scratch = vec![0.0; lead];
    for r in 0..factors.rank() {
        // outer product of the leading columns, first mode fastest
        term[0] = 1.0;
        let mut len = 1;
        for f in head {
            let col = f.column(r);
            scratch[..len].copy_from_slice(&term[..len]);
            for (i, &c) in col.iter().enumerate() {
                for (t, s) in term[i * len..(i + 1) * len].iter_mut().zip(&scratch[..len]) {
                    *t = c * s;
                }
            }
            len *= col.len();
        }
        let data = out.data_mut();
        for (n, &c) in last.column(r).iter().enumerate() {
            for (o, t) in data[n * lead..(n + 1) * lead].iter_mut().zip(&term) {
                *o += c * t;
            }
        }
    }
    Ok(out)
}

/// `(F_I ⊙ ... ⊙ F_{p+1} ⊙ F_{p-1} ⊙ ... ⊙ F_1) F_p^T`, the mode-`p`
/// unfolding of the CP tensor (mode numbers 1-based).
pub fn cp_mat_form(factors: &FactorSet, mode: usize) -> Result<Matrix> {
    let order = factors.order();
    if mode == 0 || mode > order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    if order == 1 {
        // mat_unfold of an order-1 tensor is a single row
        let ones = Matrix::from_element(1, factors.rank(), 1.0);
        return Ok(ones * factors.factors[0].transpose());
    }
    let others: Vec<&Matrix> = factors
        .factors
        .iter()
        .enumerate()
        .filter(|&(i, _)| i + 1 != mode)
        .map(|(_, f)| f)
        .collect();
    let k = khatri_rao_colex(&others, factors.rank());
    Ok(gemm(
        Strided::matrix(&k),
        Strided::matrix(&factors.factors[mode - 1]).t(),
    ))
}

/// Factors of the reshaped CP tensor: group `p` gets
/// `F_{P_p(last)} ⊙ ... ⊙ F_{P_p(1)}`.
pub fn cp_reshape_factors(factors: &FactorSet, partition: &ModePartition) -> Result<FactorSet> {
    partition.check_order(factors.order())?;
    let grouped = partition
        .groups()
        .iter()
        .map(|g| {
            let members: Vec<&Matrix> = g.iter().map(|&m| &factors.factors[m - 1]).collect();
            khatri_rao_colex(&members, factors.rank())
        })
        .collect();
    FactorSet::new(grouped)
}
