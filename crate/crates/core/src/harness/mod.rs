//! Experiment orchestration: the Monte Carlo study, the rolling
//! out-of-sample evaluation and the data readers they rely on.

pub mod config;
pub mod data;
pub mod mc;
pub mod rolling;

pub use data::{centered_absolute_returns, DataFormat};
pub use mc::{run_mc_study, MCStudyResult, MCStudySpec, RepSummary};
pub use rolling::{run_rolling_eval, EvalReport, HorizonSummary, ModelKind, RefitRecord, RollingSpec};
