//! Minimum-energy reference trajectories and the transformer training set.

pub mod bspline;
pub mod cmaes;
pub mod dataset;
pub mod lhs;
pub mod optimizer;
pub mod rollout;

pub use bspline::BSplineControl;
pub use dataset::{build_dataset, by_split, read_jsonl, write_jsonl, DatasetEntry, DatasetSettings, Split};
pub use lhs::lhs_sample;
pub use optimizer::{initial_guess, optimize, optimize_from, OptimizeResult, OptimizerSettings};
pub use rollout::{rollout, rollout_controls, FlightCondition, Residuals, Rollout};
