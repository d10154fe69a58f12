//! Multi-resolution low-rank (MRLR) tensor decomposition.
//!
//! A tensor is approximated as a sum of components, each of which is
//! low-rank after reshaping the tensor into a lower-order tensor under a
//! mode partition. Components are fitted one after another against the
//! running residual with rank-R PARAFAC alternating least squares.
//!
//! ```
//! use mrlr::{mrlr_fit, AlsConfig, DenseTensor, ModePartition, PartitionPlan};
//!
//! let x = DenseTensor::from_fn(vec![6, 5, 4], |i| {
//!     (1.0 + i[0] as f64) * (2.0 + i[1] as f64) + (i[2] as f64).cos()
//! })
//! .unwrap();
//! let plan = PartitionPlan::coarse_to_fine(vec![
//!     ("1,2|3".parse::<ModePartition>().unwrap(), 1),
//!     (ModePartition::identity(3), 2),
//! ])
//! .unwrap();
//! let fit = mrlr_fit(&x, &plan, &AlsConfig::default()).unwrap();
//! assert!(fit.report.final_nfe() < 0.05);
//! ```

pub mod als;
pub mod cli;
pub mod cp;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod mrlr;
pub mod tensor;

/// Column-major dense matrix used for unfoldings and factors.
pub type Matrix = nalgebra::DMatrix<f64>;

pub use als::{als_fit, als_refine, init_factors, ls_update, AlsConfig, AlsTrace, LsSolution};
pub use cp::{cp_mat_form, cp_reconstruct, cp_reshape_factors, FactorSet};
pub use error::{Error, Result};
pub use experiments::{nfe, rank_sweep, rank_sweep_with, sample_function_tensor, GridSpec, SweepRow};
pub use linalg::khatri_rao;
pub use mrlr::{
    estimate_params_regular, mrlr_fit, mrlr_reconstruct, regular_partitions, FitReport, MrlrFit,
    MrlrModel, MrlrStage, PartitionPlan, PlanOrdering,
};
pub use tensor::{mat_fold, mat_unfold, ten_reshape, unten_reshape, DenseTensor, ModePartition};
