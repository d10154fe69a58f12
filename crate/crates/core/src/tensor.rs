//! Dense tensor storage and the index-arithmetic operators built on it.
//!
//! Entries are stored colexicographically: the first mode index varies
//! fastest. Mode numbers in this module (and in [`ModePartition`]) are
//! 1-based, element indices are 0-based.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::Matrix;

/// A real tensor of order `I >= 1` with colexicographic storage.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::InvalidShape("tensor order must be at least 1".into()));
    }
    if let Some(pos) = shape.iter().position(|&n| n == 0) {
        return Err(Error::InvalidShape(format!(
            "mode {} has size 0",
            pos + 1
        )));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::InvalidShape(format!("{shape:?} overflows the address space")))
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if data.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = check_shape(&shape)?;
        Ok(Self {
            shape,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every 0-based multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_shape(&shape)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for (i, n) in idx.iter_mut().zip(&shape) {
                *i += 1;
                if *i < *n {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Linear offset of a 0-based multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &n) in idx.iter().zip(&self.shape) {
            debug_assert!(i < n);
            off += i * stride;
            stride *= n;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &DenseTensor) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &DenseTensor) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

/// Ordered partition of the mode set `{1..I}` into non-empty, disjoint,
/// ordered groups. The order inside a group fixes the index map used by
/// [`ten_reshape`]: the first listed mode varies fastest.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModePartition {
    groups: Vec<Vec<usize>>,
}

impl ModePartition {
    /// Groups hold 1-based mode numbers. The union must be exactly
    /// `{1..I}` where `I` is the total number of listed modes.
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidPartition("no groups".into()));
        }
        let order: usize = groups.iter().map(Vec::len).sum();
        let mut seen = vec![false; order];
        for (g, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidPartition(format!("group {} is empty", g + 1)));
            }
            for &m in group {
                if m == 0 || m > order {
                    return Err(Error::InvalidPartition(format!(
                        "mode {m} is outside 1..={order}"
                    )));
                }
                if std::mem::replace(&mut seen[m - 1], true) {
                    return Err(Error::InvalidPartition(format!("mode {m} appears twice")));
                }
            }
        }
        Ok(Self { groups })
    }

    /// `{{1},{2},...,{I}}`
    pub fn identity(order: usize) -> Self {
        Self {
            groups: (1..=order).map(|m| vec![m]).collect(),
        }
    }

    /// `{{1,...,I}}`
    pub fn vectorize(order: usize) -> Self {
        Self {
            groups: vec![(1..=order).collect()],
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Number of groups, i.e. the order of the reshaped tensor.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Order of the tensors this partition applies to.
    pub fn order(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.groups
            .iter()
            .enumerate()
            .all(|(i, g)| g.len() == 1 && g[0] == i + 1)
    }

    pub fn check_order(&self, order: usize) -> Result<()> {
        if self.order() != order {
            return Err(Error::InvalidPartition(format!(
                "partition {self} covers {} modes, tensor has order {order}",
                self.order()
            )));
        }
        Ok(())
    }

    /// Mode sizes of the reshaped tensor: products of the grouped sizes.
    pub fn reshaped_shape(&self, shape: &[usize]) -> Result<Vec<usize>> {
        self.check_order(shape.len())?;
        Ok(self
            .groups
            .iter()
            .map(|g| g.iter().map(|&m| shape[m - 1]).product())
            .collect())
    }

    /// For every original mode, its stride in the reshaped tensor's
    /// linear layout.
    fn output_strides(&self, shape: &[usize]) -> Vec<usize> {
        let mut strides = vec![0; shape.len()];
        let mut outer = 1;
        for group in &self.groups {
            let mut inner = 1;
            for &m in group {
                strides[m - 1] = outer * inner;
                inner *= shape[m - 1];
            }
            outer *= inner;
        }
        strides
    }
}

impl fmt::Display for ModePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, group) in self.groups.iter().enumerate() {
            if g > 0 {
                f.write_str("|")?;
            }
            for (i, m) in group.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{m}")?;
            }
        }
        Ok(())
    }
}

/// Parses `"1,2|3"` as `{{1,2},{3}}`.
impl FromStr for ModePartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let groups = s
            .split('|')
            .map(|group| {
                group
                    .split(',')
                    .map(|m| {
                        m.trim().parse::<usize>().map_err(|_| {
                            Error::Parse(format!("bad mode index {m:?} in partition {s:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        ModePartition::new(groups)
    }
}

/// Visits every linear index of `shape` together with the matching offset
/// under `strides`.
fn for_each_mapped(shape: &[usize], strides: &[usize], mut f: impl FnMut(usize, usize)) {
    let len: usize = shape.iter().product();
    let inner = shape[0];
    let inner_stride = strides[0];
    let mut idx = vec![0usize; shape.len()];
    let mut base = 0usize;
    let mut lin = 0usize;
    while lin < len {
        for i in 0..inner {
            f(lin + i, base + i * inner_stride);
        }
        lin += inner;
        for k in 1..shape.len() {
            idx[k] += 1;
            base += strides[k];
            if idx[k] < shape[k] {
                break;
            }
            base -= strides[k] * shape[k];
            idx[k] = 0;
        }
    }
}

/// Reshapes `x` into the order-`|P|` tensor whose mode `p` enumerates
/// tuples of the modes in group `P_p`, first listed mode fastest.
pub fn ten_reshape(x: &DenseTensor, partition: &ModePartition) -> Result<DenseTensor> {
    let out_shape = partition.reshaped_shape(x.shape())?;
    let strides = partition.output_strides(x.shape());
    let mut out = vec![0.0; x.len()];
    let src = x.data();
    for_each_mapped(x.shape(), &strides, |lin, off| out[off] = src[lin]);
    Ok(DenseTensor {
        shape: out_shape,
        data: out,
    })
}

/// Inverse of [`ten_reshape`]: recovers the tensor of shape `shape`.
pub fn unten_reshape(
    y: &DenseTensor,
    partition: &ModePartition,
    shape: &[usize],
) -> Result<DenseTensor> {
    check_shape(shape)?;
    let expected = partition.reshaped_shape(shape)?;
    if y.shape() != expected.as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "partition {partition} of shape {shape:?} gives {expected:?}, tensor has {:?}",
            y.shape()
        )));
    }
    let strides = partition.output_strides(shape);
    let mut out = vec![0.0; y.len()];
    let src = y.data();
    for_each_mapped(shape, &strides, |lin, off| out[lin] = src[off]);
    Ok(DenseTensor {
        shape: shape.to_vec(),
        data: out,
    })
}

fn unfold_partition(order: usize, mode: usize) -> Result<Option<ModePartition>> {
    if mode == 0 || mode > order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    if order == 1 {
        return Ok(None);
    }
    let rest: Vec<usize> = (1..=order).filter(|&m| m != mode).collect();
    Ok(Some(ModePartition {
        groups: vec![rest, vec![mode]],
    }))
}

/// Mode-`p` unfolding: a `(prod_{i != p} N_i) x N_p` matrix whose rows
/// enumerate the remaining modes colexicographically.
pub fn mat_unfold(x: &DenseTensor, mode: usize) -> Result<Matrix> {
    match unfold_partition(x.order(), mode)? {
        None => Ok(Matrix::from_row_slice(1, x.len(), x.data())),
        Some(partition) => {
            let y = ten_reshape(x, &partition)?;
            let (rows, cols) = (y.shape[0], y.shape[1]);
            Ok(Matrix::from_vec(rows, cols, y.data))
        }
    }
}

/// Inverse of [`mat_unfold`].
pub fn mat_fold(m: &Matrix, shape: &[usize], mode: usize) -> Result<DenseTensor> {
    check_shape(shape)?;
    let order = shape.len();
    let partition = unfold_partition(order, mode)?;
    let cols = shape[mode - 1];
    let rows: usize = shape.iter().product::<usize>() / cols;
    let (mr, mc) = m.shape();
    let ok = match partition {
        None => mr == 1 && mc == cols,
        Some(_) => mr == rows && mc == cols,
    };
    if !ok {
        return Err(Error::DimensionMismatch(format!(
            "a mode-{mode} unfolding of shape {shape:?} is {}x{cols}, got {mr}x{mc}",
            if order == 1 { 1 } else { rows }
        )));
    }
    match partition {
        None => DenseTensor::new(shape.to_vec(), m.iter().copied().collect()),
        Some(partition) => {
            let y = DenseTensor {
                shape: vec![rows, cols],
                data: m.as_slice().to_vec(),
            };
            unten_reshape(&y, &partition, shape)
        }
    }
}
