//! Python bindings for `mrlr`.
//!
//! Tensors cross the boundary as flat lists in colexicographic order (mode
//! 1 fastest); matrices are lists of rows.

use mrlr::mrlr::{mrlr_fit_with, FitOptions};
use mrlr::{io, AlsConfig, DenseTensor, Error, FactorSet, Matrix, ModePartition, MrlrModel, PartitionPlan};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::NonFinite | Error::ZeroNorm => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for mrlr::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn factor_set(factors: &[Vec<Vec<f64>>]) -> PyResult<FactorSet> {
    let mats = factors.iter().map(|f| from_rows(f)).collect::<PyResult<Vec<_>>>()?;
    FactorSet::new(mats).py()
}

/// Factor matrices, each as a list of rows.
type Factors = Vec<Vec<Vec<f64>>>;

fn factor_rows(f: &FactorSet) -> Factors {
    f.factors().iter().map(to_rows).collect()
}

fn parse_partition(spec: &str) -> PyResult<ModePartition> {
    spec.parse().py()
}

/// Dense real tensor.
#[pyclass(name = "Tensor", module = "pymrlr")]
pub struct PyTensor {
    inner: DenseTensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(shape: Vec<usize>, data: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: DenseTensor::new(shape, data).py()?,
        })
    }

    #[staticmethod]
    fn zeros(shape: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: DenseTensor::zeros(shape).py()?,
        })
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn get(&self, index: Vec<usize>) -> PyResult<f64> {
        let shape = self.inner.shape();
        if index.len() != shape.len() || index.iter().zip(shape).any(|(i, n)| i >= n) {
            return Err(PyIndexError::new_err(format!("index {index:?} outside shape {shape:?}")));
        }
        Ok(self.inner.get(&index))
    }

    fn norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    fn reshape(&self, partition: &str) -> PyResult<Self> {
        ten_reshape(self, partition)
    }

    fn unfold(&self, mode: usize) -> PyResult<Vec<Vec<f64>>> {
        mat_unfold(self, mode)
    }

    fn __eq__(&self, other: PyRef<'_, Self>) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.inner.shape())
    }
}

/// Fitted multi-resolution model.
#[pyclass(name = "Model", module = "pymrlr")]
pub struct PyModel {
    inner: MrlrModel,
    stage_nfe: Vec<Option<f64>>,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    /// `(partition, rank)` per stage in fit order.
    #[getter]
    fn stages(&self) -> Vec<(String, usize)> {
        self.inner
            .stages()
            .iter()
            .map(|s| (s.partition.to_string(), s.rank()))
            .collect()
    }

    /// Cumulative NFE after each stage, `None` where unknown.
    #[getter]
    fn stage_nfe(&self) -> Vec<Option<f64>> {
        self.stage_nfe.clone()
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn stored_scalars(&self) -> usize {
        self.inner.stored_scalars()
    }

    fn factors(&self, stage: usize) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let s = self
            .inner
            .stages()
            .get(stage)
            .ok_or_else(|| PyIndexError::new_err(format!("no stage {stage}")))?;
        Ok(factor_rows(&s.factors))
    }

    fn reconstruct(&self) -> PyResult<PyTensor> {
        Ok(PyTensor {
            inner: mrlr::mrlr_reconstruct(&self.inner).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(shape={:?}, stages={}, params={})",
            self.inner.shape(),
            self.inner.stages().len(),
            self.inner.param_count()
        )
    }
}

#[pyfunction]
fn ten_reshape(x: &PyTensor, partition: &str) -> PyResult<PyTensor> {
    Ok(PyTensor {
        inner: mrlr::ten_reshape(&x.inner, &parse_partition(partition)?).py()?,
    })
}

#[pyfunction]
fn unten_reshape(y: &PyTensor, partition: &str, shape: Vec<usize>) -> PyResult<PyTensor> {
    Ok(PyTensor {
        inner: mrlr::unten_reshape(&y.inner, &parse_partition(partition)?, &shape).py()?,
    })
}

#[pyfunction]
fn mat_unfold(x: &PyTensor, mode: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&mrlr::mat_unfold(&x.inner, mode).py()?))
}

#[pyfunction]
fn mat_fold(rows: Vec<Vec<f64>>, shape: Vec<usize>, mode: usize) -> PyResult<PyTensor> {
    Ok(PyTensor {
        inner: mrlr::mat_fold(&from_rows(&rows)?, &shape, mode).py()?,
    })
}

#[pyfunction]
fn khatri_rao(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&mrlr::khatri_rao(&from_rows(&a)?, &from_rows(&b)?).py()?))
}

/// `sum_r f1[:, r] o f2[:, r] o ...` for factor matrices given as rows.
#[pyfunction]
fn cp_reconstruct(factors: Vec<Vec<Vec<f64>>>, shape: Vec<usize>) -> PyResult<PyTensor> {
    Ok(PyTensor {
        inner: mrlr::cp_reconstruct(&factor_set(&factors)?, &shape).py()?,
    })
}

fn config(seed: u64, restarts: usize, max_sweeps: usize, tol: f64) -> PyResult<AlsConfig> {
    let cfg = AlsConfig {
        max_sweeps,
        rel_tol: tol,
        seed,
        restarts,
    };
    cfg.validate().py()?;
    Ok(cfg)
}

/// Rank-`rank` CP fit; returns `(factors, errors_per_sweep)`.
#[pyfunction]
#[pyo3(signature = (x, rank, seed=0, restarts=1, max_sweeps=200, tol=1e-8))]
fn als_fit(
    py: Python<'_>,
    x: &PyTensor,
    rank: usize,
    seed: u64,
    restarts: usize,
    max_sweeps: usize,
    tol: f64,
) -> PyResult<(Factors, Vec<f64>)> {
    let cfg = config(seed, restarts, max_sweeps, tol)?;
    let x = x.inner.clone();
    let (f, trace) = py.detach(|| mrlr::als_fit(&x, rank, &cfg)).py()?;
    Ok((factor_rows(&f), trace.errors))
}

#[pyfunction]
fn regular_partitions(order: usize) -> PyResult<Vec<String>> {
    Ok(mrlr::regular_partitions(order)
        .py()?
        .iter()
        .map(ToString::to_string)
        .collect())
}

#[pyfunction]
fn estimate_params_regular(eta: f64, order: usize, ranks: Vec<usize>) -> f64 {
    mrlr::estimate_params_regular(eta, order, &ranks)
}

/// Fits the stages `[(partition, rank), ...]` in the order given.
#[pyfunction]
#[pyo3(signature = (x, plan, seed=0, restarts=1, max_sweeps=200, tol=1e-8, refine=0))]
#[allow(clippy::too_many_arguments)]
fn mrlr_fit(
    py: Python<'_>,
    x: &PyTensor,
    plan: Vec<(String, usize)>,
    seed: u64,
    restarts: usize,
    max_sweeps: usize,
    tol: f64,
    refine: usize,
) -> PyResult<PyModel> {
    let cfg = config(seed, restarts, max_sweeps, tol)?;
    let stages = plan
        .iter()
        .map(|(p, r)| Ok((parse_partition(p)?, *r)))
        .collect::<PyResult<Vec<_>>>()?;
    let plan = PartitionPlan::as_given(stages).py()?;
    let x = x.inner.clone();
    let options = FitOptions {
        refinement_cycles: refine,
    };
    let fit = py.detach(|| mrlr_fit_with(&x, &plan, &cfg, options)).py()?;
    let mut stage_nfe: Vec<Option<f64>> = fit.report.stages.iter().map(|s| Some(s.nfe)).collect();
    if let (Some(last), Some(&v)) = (stage_nfe.last_mut(), fit.report.refinement_nfe.last()) {
        *last = Some(v);
    }
    Ok(PyModel {
        inner: fit.model,
        stage_nfe,
    })
}

#[pyfunction]
fn nfe(x: &PyTensor, approx: &PyTensor) -> PyResult<f64> {
    mrlr::nfe(&x.inner, &approx.inner).py()
}

/// The three-variable test function sampled on `count^3` points.
#[pyfunction]
#[pyo3(signature = (start=-5.0, step=0.1, count=100))]
fn sample_function_tensor(start: f64, step: f64, count: usize) -> PyResult<PyTensor> {
    let grid = mrlr::GridSpec::uniform(start, step, count).py()?;
    Ok(PyTensor {
        inner: mrlr::sample_function_tensor(&grid).py()?,
    })
}

#[pyfunction]
fn read_tensor(path: &str) -> PyResult<PyTensor> {
    Ok(PyTensor {
        inner: io::read_tensor(path).py()?,
    })
}

#[pyfunction]
fn write_tensor(path: &str, x: &PyTensor) -> PyResult<()> {
    io::write_tensor(path, &x.inner).py()
}

#[pyfunction]
fn read_model(path: &str) -> PyResult<PyModel> {
    let file = io::read_model(path).py()?;
    Ok(PyModel {
        inner: file.model,
        stage_nfe: file.stage_nfe,
    })
}

#[pyfunction]
fn write_model(path: &str, model: &PyModel) -> PyResult<()> {
    io::write_model(path, &model.inner, &model.stage_nfe).py()
}

#[pymodule]
fn pymrlr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(ten_reshape, m)?)?;
    m.add_function(wrap_pyfunction!(unten_reshape, m)?)?;
    m.add_function(wrap_pyfunction!(mat_unfold, m)?)?;
    m.add_function(wrap_pyfunction!(mat_fold, m)?)?;
    m.add_function(wrap_pyfunction!(khatri_rao, m)?)?;
    m.add_function(wrap_pyfunction!(cp_reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(als_fit, m)?)?;
    m.add_function(wrap_pyfunction!(regular_partitions, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_params_regular, m)?)?;
    m.add_function(wrap_pyfunction!(mrlr_fit, m)?)?;
    m.add_function(wrap_pyfunction!(nfe, m)?)?;
    m.add_function(wrap_pyfunction!(sample_function_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(read_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(write_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(read_model, m)?)?;
    m.add_function(wrap_pyfunction!(write_model, m)?)?;
    m.add("TENSOR_MAGIC", io::TENSOR_MAGIC)?;
    Ok(())
}
