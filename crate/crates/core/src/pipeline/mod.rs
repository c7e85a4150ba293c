//! Experiment orchestration: configuration, the `(δ_n, ε_n)` sweep, the weak
//! residual of the limit equation, acceptance criteria and report files.

pub mod config;
pub mod criteria;
pub mod report;
pub mod residual;
pub mod sweep;

pub use config::{AnnulusConfig, ExperimentConfig, MaterialSpec};
pub use residual::{homogenized_residual_check, ResidualReport};
pub use sweep::{run_sweep, ConvergenceReport, Stage, SweepRow, Verdicts};
pub use report::{full_report, FullReport};
