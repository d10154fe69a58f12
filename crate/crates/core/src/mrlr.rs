//! The multi-resolution low-rank model: partition plans, the sequential
//! residual fit, reconstruction and parameter counting.

use std::time::Instant;

use crate::als::{als_fit, als_refine, AlsConfig, AlsTrace};
use crate::cp::{cp_reconstruct, FactorSet};
use crate::error::{Error, Result};
use crate::tensor::{ten_reshape, unten_reshape, DenseTensor, ModePartition};

/// Residuals below this fraction of `||X||_F` are treated as exhausted.
pub const DEGENERATE_RESIDUAL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanOrdering {
    /// Stage `l` has no more groups than stage `l + 1`.
    CoarseToFine,
    /// Stages are fitted in the listed order, no constraint.
    AsGiven,
}

/// Ordered list of `(partition, rank)` stages; the list order is the fit
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPlan {
    stages: Vec<(ModePartition, usize)>,
    ordering: PlanOrdering,
}

impl PartitionPlan {
    pub fn new(stages: Vec<(ModePartition, usize)>, ordering: PlanOrdering) -> Result<Self> {
        let order = match stages.first() {
            Some((p, _)) => p.order(),
            None => return Err(Error::EmptyPlan),
        };
        for (i, (p, rank)) in stages.iter().enumerate() {
            p.check_order(order)?;
            if *rank == 0 {
                return Err(Error::InvalidRank(0));
            }
            if ordering == PlanOrdering::CoarseToFine && i > 0 && stages[i - 1].0.len() > p.len() {
                return Err(Error::InvalidPartition(format!(
                    "stage {} ({}) has fewer groups than stage {} ({}), not coarse-to-fine",
                    i + 1,
                    p,
                    i,
                    stages[i - 1].0
                )));
            }
        }
        Ok(Self { stages, ordering })
    }

    pub fn coarse_to_fine(stages: Vec<(ModePartition, usize)>) -> Result<Self> {
        Self::new(stages, PlanOrdering::CoarseToFine)
    }

    pub fn as_given(stages: Vec<(ModePartition, usize)>) -> Result<Self> {
        Self::new(stages, PlanOrdering::AsGiven)
    }

    /// The regular construction for an order-`order` tensor, one rank per
    /// level.
    pub fn regular(order: usize, ranks: &[usize]) -> Result<Self> {
        let parts = regular_partitions(order)?;
        if ranks.len() != parts.len() {
            return Err(Error::DimensionMismatch(format!(
                "the regular plan of order {order} has {} stages, got {} ranks",
                parts.len(),
                ranks.len()
            )));
        }
        Self::coarse_to_fine(parts.into_iter().zip(ranks.iter().copied()).collect())
    }

    /// Same stages, fitted finest first.
    pub fn reversed(&self) -> Self {
        let mut stages = self.stages.clone();
        stages.reverse();
        Self {
            stages,
            ordering: PlanOrdering::AsGiven,
        }
    }

    pub fn with_last_rank(&self, rank: usize) -> Result<Self> {
        let mut stages = self.stages.clone();
        stages.last_mut().expect("plans are non-empty").1 = rank;
        Self::new(stages, self.ordering)
    }

    pub fn stages(&self) -> &[(ModePartition, usize)] {
        &self.stages
    }

    pub fn ordering(&self) -> PlanOrdering {
        self.ordering
    }

    pub fn order(&self) -> usize {
        self.stages[0].0.order()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.1).collect()
    }

    /// `sum_l R_l * sum_p prod_{j in P_p^(l)} N_j`
    pub fn param_count(&self, shape: &[usize]) -> Result<usize> {
        self.stages.iter().try_fold(0, |acc, (p, rank)| {
            let sizes = p.reshaped_shape(shape)?;
            Ok(acc + rank * sizes.iter().sum::<usize>())
        })
    }

    /// Per-stage parameter counts.
    pub fn stage_params(&self, shape: &[usize]) -> Result<Vec<usize>> {
        self.stages
            .iter()
            .map(|(p, rank)| Ok(rank * p.reshaped_shape(shape)?.iter().sum::<usize>()))
            .collect()
    }
}

/// One fitted component: a CP factor set living on the reshaped modes.
#[derive(Clone, Debug, PartialEq)]
pub struct MrlrStage {
    pub partition: ModePartition,
    pub factors: FactorSet,
    pub trace: AlsTrace,
}

impl MrlrStage {
    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    /// The component mapped back to the original tensor's modes.
    pub fn component(&self, shape: &[usize]) -> Result<DenseTensor> {
        let reshaped = self.partition.reshaped_shape(shape)?;
        let z = cp_reconstruct(&self.factors, &reshaped)?;
        unten_reshape(&z, &self.partition, shape)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MrlrModel {
    shape: Vec<usize>,
    stages: Vec<MrlrStage>,
}

impl MrlrModel {
    pub fn new(shape: Vec<usize>, stages: Vec<MrlrStage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::EmptyPlan);
        }
        for (i, s) in stages.iter().enumerate() {
            let expected = s.partition.reshaped_shape(&shape)?;
            if s.factors.shape() != expected {
                return Err(Error::DimensionMismatch(format!(
                    "stage {} factors have {:?} rows, partition {} of {shape:?} needs {expected:?}",
                    i + 1,
                    s.factors.shape(),
                    s.partition
                )));
            }
        }
        Ok(Self { shape, stages })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn stages(&self) -> &[MrlrStage] {
        &self.stages
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.stages.iter().map(MrlrStage::rank).collect()
    }

    pub fn plan(&self) -> PartitionPlan {
        PartitionPlan {
            stages: self
                .stages
                .iter()
                .map(|s| (s.partition.clone(), s.rank()))
                .collect(),
            ordering: PlanOrdering::AsGiven,
        }
    }

    pub fn param_count(&self) -> usize {
        self.plan()
            .param_count(&self.shape)
            .expect("stages validated against the shape")
    }

    /// Literal number of scalars held in the stage factor matrices.
    pub fn stored_scalars(&self) -> usize {
        self.stages
            .iter()
            .flat_map(|s| s.factors.factors())
            .map(|f| f.len())
            .sum()
    }
}

/// Sum of all stage components.
pub fn mrlr_reconstruct(model: &MrlrModel) -> Result<DenseTensor> {
    let mut out = DenseTensor::zeros(model.shape.clone())?;
    for stage in &model.stages {
        out.add_assign(&stage.component(&model.shape)?)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub partition: ModePartition,
    pub rank: usize,
    /// NFE of the approximation made of stages `1..=l`.
    pub nfe: f64,
    pub params: usize,
    pub cumulative_params: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub stages: Vec<StageReport>,
    pub seed: u64,
    /// NFE after each refinement cycle, empty for a single pass.
    pub refinement_nfe: Vec<f64>,
}

impl FitReport {
    pub fn final_nfe(&self) -> f64 {
        self.refinement_nfe
            .last()
            .or_else(|| self.stages.last().map(|s| &s.nfe))
            .copied()
            .unwrap_or(1.0)
    }

    pub fn total_sweeps(&self) -> usize {
        self.stages.iter().map(|s| s.sweeps).sum()
    }

    pub fn total_seconds(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MrlrFit {
    pub model: MrlrModel,
    pub report: FitReport,
    /// `X - mrlr_reconstruct(model)` as accumulated during the fit.
    pub residual: DenseTensor,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FitOptions {
    /// Extra passes re-fitting each stage against the residual of all the
    /// others, warm-started from its current factors.
    pub refinement_cycles: usize,
}

/// Seed of stage `index` (0-based) derived from the run seed.
pub fn stage_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Single sequential pass: stage `i` is fitted against
/// `X - sum_{l<i} Z_l` with later stages absent.
pub fn mrlr_fit(x: &DenseTensor, plan: &PartitionPlan, config: &AlsConfig) -> Result<MrlrFit> {
    mrlr_fit_with(x, plan, config, FitOptions::default())
}

pub fn mrlr_fit_with(
    x: &DenseTensor,
    plan: &PartitionPlan,
    config: &AlsConfig,
    options: FitOptions,
) -> Result<MrlrFit> {
    config.validate()?;
    let shape = x.shape().to_vec();
    for (p, _) in plan.stages() {
        p.check_order(x.order())?;
    }
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }

    let mut residual = x.clone();
    let mut stages = Vec::with_capacity(plan.stages().len());
    let mut reports = Vec::with_capacity(plan.stages().len());
    let mut cumulative = 0;
    for (i, (partition, rank)) in plan.stages().iter().enumerate() {
        let start = Instant::now();
        let reshaped = partition.reshaped_shape(&shape)?;
        let stage_config = config.with_seed(stage_seed(config.seed, i));
        let (factors, trace) = if residual.frobenius_norm() < DEGENERATE_RESIDUAL * norm {
            let trace = AlsTrace {
                errors: vec![residual.frobenius_norm()],
                sweeps_run: 0,
                converged: true,
                singular_solves: 0,
                seed: stage_config.seed,
            };
            (FactorSet::zeros(&reshaped, *rank)?, trace)
        } else {
            let y = ten_reshape(&residual, partition)?;
            als_fit(&y, *rank, &stage_config)?
        };
        let stage = MrlrStage {
            partition: partition.clone(),
            factors,
            trace,
        };
        residual.sub_assign(&stage.component(&shape)?)?;
        let params = stage.factors.param_count();
        cumulative += params;
        reports.push(StageReport {
            partition: partition.clone(),
            rank: *rank,
            nfe: residual.frobenius_norm() / norm,
            params,
            cumulative_params: cumulative,
            sweeps: stage.trace.sweeps_run,
            converged: stage.trace.converged,
            seconds: start.elapsed().as_secs_f64(),
        });
        stages.push(stage);
    }

    let mut refinement_nfe = Vec::with_capacity(options.refinement_cycles);
    for cycle in 0..options.refinement_cycles {
        for (i, stage) in stages.iter_mut().enumerate() {
            residual.add_assign(&stage.component(&shape)?)?;
            let y = ten_reshape(&residual, &stage.partition)?;
            let seed = stage_seed(config.seed, i).wrapping_add(cycle as u64 + 1);
            let (factors, trace) = als_refine(&y, stage.factors.clone(), &config.with_seed(seed))?;
            stage.factors = factors;
            stage.trace = trace;
            residual.sub_assign(&stage.component(&shape)?)?;
        }
        refinement_nfe.push(residual.frobenius_norm() / norm);
    }

    Ok(MrlrFit {
        model: MrlrModel { shape, stages },
        report: FitReport {
            stages: reports,
            seed: config.seed,
            refinement_nfe,
        },
        residual,
    })
}

/// The regular multi-resolution partitions of `{1..order}`: level `l`
/// (1-based) splits the modes into `l + 1` contiguous groups, group `n`
/// covering `floor((n-1) I / (l+1)) + 1 ..= floor(n I / (l+1))`.
pub fn regular_partitions(order: usize) -> Result<Vec<ModePartition>> {
    if order < 2 {
        return Err(Error::InvalidShape(format!(
            "regular partitions need order >= 2, got {order}"
        )));
    }
    (1..order)
        .map(|l| {
            let parts = l + 1;
            let groups = (1..=parts)
                .map(|n| ((n - 1) * order / parts + 1..=n * order / parts).collect())
                .collect();
            ModePartition::new(groups)
        })
        .collect()
}

/// `sum_l R_l (l+1) eta^(I/(l+1))`, the approximate parameter count of the
/// regular plan on an `eta x ... x eta` tensor of order `order`. `ranks[l-1]`
/// is the rank of level `l`.
pub fn estimate_params_regular(eta: f64, order: usize, ranks: &[usize]) -> f64 {
    ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let parts = (i + 2) as f64;
            r as f64 * parts * eta.powf(order as f64 / parts)
        })
        .sum()
}
