//! Command-line driver: `generate`, `decompose`, `sweep` and `info`.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::als::{init_factors, AlsConfig};
use crate::cp::cp_reconstruct;
use crate::error::{Error, Result};
use crate::experiments::{
    rank_sweep_with, sample_function_tensor, sort_rows, Axis, GridSpec, SweepOptions, SweepRow,
    MRLR_LABEL,
};
use crate::io;
use crate::mrlr::{mrlr_fit_with, regular_partitions, FitOptions, PartitionPlan};
use crate::tensor::{unten_reshape, DenseTensor, ModePartition};

#[derive(Debug, Parser)]
#[command(name = "mrlr", version, about = "Multi-resolution low-rank tensor decomposition")]
pub struct Cli {
    /// Worker threads (falls back to MRLR_THREADS, then the core count).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic tensor file.
    Generate(GenerateArgs),
    /// Fit an MRLR model to a tensor file.
    Decompose(DecomposeArgs),
    /// Sweep the finest stage's rank and record NFE against parameters.
    Sweep(SweepArgs),
    /// Describe a tensor or model file.
    Info(InfoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Function {
    /// (x1^2 + x2^2) / e^|x2 + x3| on a three-dimensional grid
    PaperF3,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, conflicts_with = "random_cp", required_unless_present = "random_cp")]
    pub function: Option<Function>,
    /// Grid as START,STEP,COUNT applied to every axis.
    #[arg(long, requires = "function")]
    pub grid: Option<String>,
    /// Random CP tensor as SHAPE/RANK/SEED, e.g. 6x7x8/2/42.
    #[arg(long)]
    pub random_cp: Option<String>,
    /// Draw the random CP factors on the modes of this partition and map
    /// the result back, e.g. "2|1,3".
    #[arg(long, requires = "random_cp")]
    pub partition: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct AlsArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 200)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Record wall-clock seconds in the CSV (otherwise written as 0 so that
    /// output is reproducible byte for byte).
    #[arg(long)]
    pub timings: bool,
}

impl AlsArgs {
    fn config(&self) -> Result<AlsConfig> {
        let cfg = AlsConfig {
            max_sweeps: self.max_sweeps,
            rel_tol: self.tol,
            seed: self.seed,
            restarts: self.restarts,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// "auto" for the regular construction, or stages like "1,2|3;1|2|3".
    #[arg(long, default_value = "auto")]
    pub partitions: String,
    /// One rank per kept stage, comma separated.
    #[arg(long)]
    pub ranks: String,
    /// With --partitions auto, the 1-based levels to keep (default all).
    #[arg(long)]
    pub levels: Option<String>,
    /// Fit the stages finest first.
    #[arg(long)]
    pub reverse: bool,
    /// Refinement cycles after the sequential pass.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    #[arg(long)]
    pub model_out: PathBuf,
    #[arg(long)]
    pub report_out: PathBuf,
    #[command(flatten)]
    pub als: AlsArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// "auto" or stages like "2|1,3;1|2|3"; the last stage's rank is swept.
    #[arg(long)]
    pub plan: String,
    /// Ranks of the fixed stages (all but the last), default 1 each.
    #[arg(long)]
    pub ranks: Option<String>,
    /// With --plan auto, the 1-based levels to keep (default all).
    #[arg(long)]
    pub levels: Option<String>,
    /// Swept ranks: "A:B", "A:B:STEP" or a comma list.
    #[arg(long)]
    pub sweep: String,
    /// Also fit plain PARAFAC at bracketing budgets.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub reverse: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub als: AlsArgs,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad {what} {t:?} in {s:?}")))
        })
        .collect()
}

/// `"A:B"`, `"A:B:STEP"` or `"a,b,c"`.
pub fn parse_sweep(s: &str) -> Result<Vec<usize>> {
    if !s.contains(':') {
        return parse_list(s, "rank");
    }
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad sweep range {s:?}")))
    };
    let (lo, hi, step) = match parts.as_slice() {
        [a, b] => (num(a)?, num(b)?, 1),
        [a, b, c] => (num(a)?, num(b)?, num(c)?),
        _ => return Err(Error::Parse(format!("bad sweep range {s:?}"))),
    };
    if step == 0 || lo > hi {
        return Err(Error::Parse(format!("empty sweep range {s:?}")));
    }
    Ok((lo..=hi).step_by(step).collect())
}

/// Stage partitions from "auto" (regular construction with optional level
/// selection) or a ';'-separated list of partition specs.
pub fn parse_partitions(spec: &str, order: usize, levels: Option<&str>) -> Result<Vec<ModePartition>> {
    if spec == "auto" {
        let all = regular_partitions(order)?;
        return match levels {
            None => Ok(all),
            Some(levels) => parse_list(levels, "level")?
                .into_iter()
                .map(|l| {
                    all.get(l.wrapping_sub(1)).cloned().ok_or_else(|| {
                        Error::InvalidPartition(format!(
                            "level {l} outside 1..={} for order {order}",
                            all.len()
                        ))
                    })
                })
                .collect(),
        };
    }
    if levels.is_some() {
        return Err(Error::Parse("--levels only applies to auto partitions".into()));
    }
    spec.split(';').map(str::parse).collect()
}

fn build_plan(partitions: Vec<ModePartition>, ranks: Vec<usize>) -> Result<PartitionPlan> {
    if partitions.len() != ranks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} stages but {} ranks",
            partitions.len(),
            ranks.len()
        )));
    }
    PartitionPlan::as_given(partitions.into_iter().zip(ranks).collect())
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = s.split(',').collect();
    let [start, step, count] = parts.as_slice() else {
        return Err(Error::Parse(format!("grid {s:?} is not START,STEP,COUNT")));
    };
    let bad = || Error::Parse(format!("bad grid {s:?}"));
    let axis = Axis {
        start: start.trim().parse().map_err(|_| bad())?,
        step: step.trim().parse().map_err(|_| bad())?,
        count: count.trim().parse().map_err(|_| bad())?,
    };
    let grid = GridSpec { axes: [axis; 3] };
    grid.validate()?;
    Ok(grid)
}

fn parse_shape(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad shape {s:?}")))
        })
        .collect()
}

/// Random CP tensor from `SHAPE/RANK/SEED`, optionally drawn on the modes
/// of a partition.
pub fn random_cp_tensor(spec: &str, partition: Option<&str>) -> Result<DenseTensor> {
    let parts: Vec<&str> = spec.split('/').collect();
    let [shape, rank, seed] = parts.as_slice() else {
        return Err(Error::Parse(format!("--random-cp {spec:?} is not SHAPE/RANK/SEED")));
    };
    let shape = parse_shape(shape)?;
    DenseTensor::zeros(shape.clone())?;
    let rank: usize = rank
        .parse()
        .map_err(|_| Error::Parse(format!("bad rank in {spec:?}")))?;
    let seed: u64 = seed
        .parse()
        .map_err(|_| Error::Parse(format!("bad seed in {spec:?}")))?;
    let partition = match partition {
        Some(p) => p.parse()?,
        None => ModePartition::identity(shape.len()),
    };
    let reshaped = partition.reshaped_shape(&shape)?;
    let y = cp_reconstruct(&init_factors(&reshaped, rank, seed)?, &reshaped)?;
    unten_reshape(&y, &partition, &shape)
}

fn shape_str(shape: &[usize]) -> String {
    shape
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("x")
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let x = match (&args.function, &args.random_cp) {
        (Some(Function::PaperF3), _) => {
            let grid = match &args.grid {
                Some(g) => parse_grid(g)?,
                None => GridSpec::default(),
            };
            sample_function_tensor(&grid)?
        }
        (None, Some(spec)) => random_cp_tensor(spec, args.partition.as_deref())?,
        (None, None) => return Err(Error::Parse("need --function or --random-cp".into())),
    };
    io::write_tensor(&args.out, &x)
}

fn decompose(args: &DecomposeArgs) -> Result<()> {
    let x = io::read_tensor(&args.input)?;
    let config = args.als.config()?;
    let partitions = parse_partitions(&args.partitions, x.order(), args.levels.as_deref())?;
    let mut plan = build_plan(partitions, parse_list(&args.ranks, "rank")?)?;
    if args.reverse {
        plan = plan.reversed();
    }
    let fit = mrlr_fit_with(
        &x,
        &plan,
        &config,
        FitOptions {
            refinement_cycles: args.refine,
        },
    )?;
    let nfe: Vec<Option<f64>> = fit.report.stages.iter().map(|s| Some(s.nfe)).collect();
    io::write_model(&args.model_out, &fit.model, &nfe)?;

    let label = if args.reverse { "mrlr-reverse" } else { MRLR_LABEL };
    let time = |s: f64| if args.als.timings { s } else { 0.0 };
    let mut rows: Vec<SweepRow> = fit
        .report
        .stages
        .iter()
        .enumerate()
        .map(|(i, s)| SweepRow {
            method: label.into(),
            stage_ranks: plan.ranks()[..=i].to_vec(),
            params: s.cumulative_params,
            nfe: s.nfe,
            sweeps: s.sweeps,
            seconds: time(s.seconds),
            seed: config.seed,
        })
        .collect();
    for &v in &fit.report.refinement_nfe {
        rows.push(SweepRow {
            method: format!("{label}-refined"),
            stage_ranks: plan.ranks(),
            params: fit.model.param_count(),
            nfe: v,
            sweeps: 0,
            seconds: 0.0,
            seed: config.seed,
        });
    }
    sort_rows(&mut rows);
    io::write_csv_file(&args.report_out, &rows)
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let x = io::read_tensor(&args.input)?;
    let config = args.als.config()?;
    let partitions = parse_partitions(&args.plan, x.order(), args.levels.as_deref())?;
    let fixed = partitions.len() - 1;
    let mut ranks = match &args.ranks {
        Some(r) => parse_list(r, "rank")?,
        None => vec![1; fixed],
    };
    if ranks.len() == fixed {
        ranks.push(1);
    }
    let plan = build_plan(partitions, ranks)?;
    let sweep_ranks = parse_sweep(&args.sweep)?;
    let options = SweepOptions {
        reverse: args.reverse,
        label: args.reverse.then(|| "mrlr-reverse".to_string()),
    };
    let mut rows = rank_sweep_with(&x, &plan, &sweep_ranks, args.baseline, &config, &options)?;
    if !args.als.timings {
        for row in &mut rows {
            row.seconds = 0.0;
        }
    }
    io::write_csv_file(&args.out, &rows)
}

/// Human-readable description of a tensor or model file.
pub fn describe(path: &std::path::Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::new();
    if bytes.starts_with(io::MODEL_MAGIC.as_bytes()) {
        let file = io::decode_model(&bytes)?;
        let model = &file.model;
        writeln!(out, "kind: model").unwrap();
        writeln!(out, "shape: {}", shape_str(model.shape())).unwrap();
        writeln!(out, "stages: {}", model.stages().len()).unwrap();
        let mut cumulative = 0;
        for (i, stage) in model.stages().iter().enumerate() {
            let params = stage.factors.param_count();
            cumulative += params;
            let nfe = match file.stage_nfe[i] {
                Some(v) => io::format_real(v),
                None => "unknown".into(),
            };
            writeln!(
                out,
                "stage {}: partition {} reshaped {} rank {} params {} cumulative_params {} nfe {}",
                i + 1,
                stage.partition,
                shape_str(&stage.factors.shape()),
                stage.rank(),
                params,
                cumulative,
                nfe
            )
            .unwrap();
        }
        writeln!(out, "params: {}", model.param_count()).unwrap();
        writeln!(out, "stored_scalars: {}", model.stored_scalars()).unwrap();
    } else {
        let x = io::decode_tensor(&bytes)?;
        writeln!(out, "kind: tensor").unwrap();
        writeln!(out, "shape: {}", shape_str(x.shape())).unwrap();
        writeln!(out, "params: {}", x.len()).unwrap();
        writeln!(out, "norm: {}", io::format_real(x.frobenius_norm())).unwrap();
    }
    Ok(out)
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let threads = match threads {
        Some(n) => Some(n),
        None => match std::env::var("MRLR_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("MRLR_THREADS={v:?} is not a number")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        // a pool may already exist when driven from tests; keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match &cli.command {
        Command::Generate(args) => generate(args),
        Command::Decompose(args) => decompose(args),
        Command::Sweep(args) => sweep(args),
        Command::Info(args) => {
            print!("{}", describe(&args.input)?);
            Ok(())
        }
    }
}
