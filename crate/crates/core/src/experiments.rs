//! Error metric, synthetic data, and the parameter-budget sweep harness.

use std::time::Instant;

use rayon::prelude::*;

use crate::als::{als_fit, AlsConfig};
use crate::cp::cp_reconstruct;
use crate::error::{Error, Result};
use crate::mrlr::{mrlr_fit, PartitionPlan};
use crate::tensor::{DenseTensor, ModePartition};

pub const MRLR_LABEL: &str = "mrlr";
pub const PARAFAC_LABEL: &str = "parafac";

/// Normalized Frobenius error `||X - X_hat||_F / ||X||_F`.
pub fn nfe(x: &DenseTensor, approx: &DenseTensor) -> Result<f64> {
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(x.distance(approx)? / norm)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }
}

/// Per-axis sampling grid for the built-in three-variable function.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub axes: [Axis; 3],
}

impl GridSpec {
    pub fn uniform(start: f64, step: f64, count: usize) -> Result<Self> {
        let axis = Axis { start, step, count };
        let grid = Self { axes: [axis; 3] };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.axes.iter().enumerate() {
            if a.count == 0 {
                return Err(Error::InvalidShape(format!("grid axis {} has no points", i + 1)));
            }
            if a.step <= 0.0 || !a.start.is_finite() || !a.step.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "grid axis {} needs a finite start and a positive step",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }
}

impl Default for GridSpec {
    /// 100 points per axis from -5.0 in steps of 0.1 (last point 4.9).
    fn default() -> Self {
        Self {
            axes: [Axis {
                start: -5.0,
                step: 0.1,
                count: 100,
            }; 3],
        }
    }
}

/// `f(x1, x2, x3) = (x1^2 + x2^2) / e^{|x2 + x3|}`
pub fn test_function(x1: f64, x2: f64, x3: f64) -> f64 {
    (x1 * x1 + x2 * x2) * (-(x2 + x3).abs()).exp()
}

pub fn sample_function_tensor(grid: &GridSpec) -> Result<DenseTensor> {
    grid.validate()?;
    let [a1, a2, a3] = grid.axes;
    DenseTensor::from_fn(grid.shape(), |i| {
        test_function(a1.value(i[0]), a2.value(i[1]), a3.value(i[2]))
    })
}

/// One point of an NFE-versus-parameters curve.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub stage_ranks: Vec<usize>,
    pub params: usize,
    pub nfe: f64,
    pub sweeps: usize,
    pub seconds: f64,
    pub seed: u64,
}

/// Seed of a sweep point, a function of the base seed and the swept rank
/// only, so serial and parallel runs agree.
pub fn point_seed(seed: u64, rank: usize) -> u64 {
    seed ^ (rank as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Plain PARAFAC fit at one rank.
pub fn parafac_row(x: &DenseTensor, rank: usize, config: &AlsConfig) -> Result<SweepRow> {
    let start = Instant::now();
    let cfg = config.with_seed(point_seed(config.seed, rank));
    let (factors, trace) = als_fit(x, rank, &cfg)?;
    let approx = cp_reconstruct(&factors, x.shape())?;
    Ok(SweepRow {
        method: PARAFAC_LABEL.into(),
        stage_ranks: vec![rank],
        params: factors.param_count(),
        nfe: nfe(x, &approx)?,
        sweeps: trace.sweeps_run,
        seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
    })
}

/// MRLR fit of `plan` recorded as a sweep row; the seed derives from the
/// swept rank.
pub fn mrlr_row(
    x: &DenseTensor,
    plan: &PartitionPlan,
    swept_rank: usize,
    config: &AlsConfig,
) -> Result<SweepRow> {
    let start = Instant::now();
    let cfg = config.with_seed(point_seed(config.seed, swept_rank));
    let fit = mrlr_fit(x, plan, &cfg)?;
    Ok(SweepRow {
        method: MRLR_LABEL.into(),
        stage_ranks: plan.ranks(),
        params: fit.model.param_count(),
        nfe: fit.report.final_nfe(),
        sweeps: fit.report.total_sweeps(),
        seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
    })
}

/// PARAFAC ranks whose parameter counts bracket each budget.
pub fn bracketing_ranks(shape: &[usize], budgets: &[usize]) -> Vec<usize> {
    let per_rank: usize = shape.iter().sum();
    let mut ranks: Vec<usize> = budgets
        .iter()
        .flat_map(|&b| [(b / per_rank).max(1), b.div_ceil(per_rank).max(1)])
        .collect();
    ranks.sort_unstable();
    ranks.dedup();
    ranks
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SweepOptions {
    /// Fit each swept plan finest stage first.
    pub reverse: bool,
    /// Method label for the MRLR rows, `"mrlr"` when unset.
    pub label: Option<String>,
}

/// Fits MRLR with the last stage's rank set to each of `sweep_ranks`
/// (earlier ranks as in `base_plan`). With `baseline`, also fits plain
/// PARAFAC at the ranks bracketing every MRLR budget. Rows come back sorted
/// by `(method, params)`.
pub fn rank_sweep(
    x: &DenseTensor,
    base_plan: &PartitionPlan,
    sweep_ranks: &[usize],
    baseline: bool,
    config: &AlsConfig,
) -> Result<Vec<SweepRow>> {
    rank_sweep_with(x, base_plan, sweep_ranks, baseline, config, &SweepOptions::default())
}

pub fn rank_sweep_with(
    x: &DenseTensor,
    base_plan: &PartitionPlan,
    sweep_ranks: &[usize],
    baseline: bool,
    config: &AlsConfig,
    options: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    if sweep_ranks.is_empty() {
        return Err(Error::InvalidConfig("no sweep ranks given".into()));
    }
    if sweep_ranks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!(
            "sweep ranks must be strictly ascending, got {sweep_ranks:?}"
        )));
    }
    let plans = sweep_ranks
        .iter()
        .map(|&r| {
            let plan = base_plan.with_last_rank(r)?;
            plan.param_count(x.shape())?;
            Ok((r, if options.reverse { plan.reversed() } else { plan }))
        })
        .collect::<Result<Vec<_>>>()?;
    let label = options.label.as_deref().unwrap_or(MRLR_LABEL);
    let mut rows = plans
        .par_iter()
        .map(|(r, plan)| {
            let mut row = mrlr_row(x, plan, *r, config)?;
            row.method = label.to_string();
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    if baseline {
        let budgets: Vec<usize> = rows.iter().map(|r| r.params).collect();
        let ranks = bracketing_ranks(x.shape(), &budgets);
        let base = ranks
            .par_iter()
            .map(|&r| parafac_row(x, r, config))
            .collect::<Result<Vec<_>>>()?;
        rows.extend(base);
    }
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| a.method.cmp(&b.method).then(a.params.cmp(&b.params)));
}

/// Coarse-to-fine plan for the sampled test function: the mode-1
/// unfolding `{{2,3},{1}}` (10000 x 100 on the default grid) at
/// `coarse_rank`, then the full three-mode tensor at `fine_rank`.
///
/// Mode 1 is the one to split off because `x1` enters only through `x1^2`,
/// so that unfolding has a dominant rank-1 part; splitting off mode 3
/// leaves most of the energy outside the leading singular pair.
pub fn function_plan(coarse_rank: usize, fine_rank: usize) -> Result<PartitionPlan> {
    PartitionPlan::coarse_to_fine(vec![
        (ModePartition::new(vec![vec![2, 3], vec![1]])?, coarse_rank),
        (ModePartition::identity(3), fine_rank),
    ])
}

/// The single-stage identity-partition plan, i.e. plain PARAFAC.
pub fn parafac_plan(order: usize, rank: usize) -> Result<PartitionPlan> {
    PartitionPlan::coarse_to_fine(vec![(ModePartition::identity(order), rank)])
}

/// Lower envelope of an NFE-versus-parameters point cloud: points sorted
/// by budget keeping only those that improve on every cheaper point.
pub fn pareto_front<'a>(rows: impl IntoIterator<Item = &'a SweepRow>) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = rows
        .into_iter()
        .map(|r| (r.params as f64, r.nfe))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut front: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        // ties on budget are sorted best first, so only the first survives
        if front.last().is_none_or(|last| p.1 < last.1) {
            front.push(p);
        }
    }
    front
}

/// Piecewise-linear interpolation of a front; `None` outside its range.
pub fn interpolate(front: &[(f64, f64)], budget: f64) -> Option<f64> {
    let first = front.first()?;
    let last = front.last()?;
    if budget < first.0 || budget > last.0 {
        return None;
    }
    let i = front.partition_point(|p| p.0 < budget);
    if front[i].0 == budget || i == 0 {
        return Some(front[i].1);
    }
    let (x0, y0) = front[i - 1];
    let (x1, y1) = front[i];
    Some(y0 + (y1 - y0) * (budget - x0) / (x1 - x0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetComparison {
    pub budgets: Vec<f64>,
    pub candidate: Vec<f64>,
    pub baseline: Vec<f64>,
}

impl BudgetComparison {
    /// Fraction of budgets where the candidate is at or below the baseline.
    pub fn dominance(&self) -> f64 {
        let wins = self
            .candidate
            .iter()
            .zip(&self.baseline)
            .filter(|(c, b)| c <= b)
            .count();
        wins as f64 / self.budgets.len() as f64
    }
}

/// Compares two fronts at `samples` evenly spaced budgets over the range
/// both cover.
pub fn compare_at_budgets(
    candidate: &[(f64, f64)],
    baseline: &[(f64, f64)],
    samples: usize,
) -> Option<BudgetComparison> {
    let lo = candidate.first()?.0.max(baseline.first()?.0);
    let hi = candidate.last()?.0.min(baseline.last()?.0);
    if samples == 0 || lo > hi {
        return None;
    }
    let budgets: Vec<f64> = if samples == 1 {
        vec![lo]
    } else {
        (0..samples)
            .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
            .collect()
    };
    let candidate = budgets
        .iter()
        .map(|&b| interpolate(candidate, b))
        .collect::<Option<Vec<_>>>()?;
    let baseline = budgets
        .iter()
        .map(|&b| interpolate(baseline, b))
        .collect::<Option<Vec<_>>>()?;
    Some(BudgetComparison {
        budgets,
        candidate,
        baseline,
    })
}
