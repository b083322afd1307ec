//! Fractionally integrated noise with a score-driven, time-varying memory
//! parameter.
//!
//! The model is `(1 - B)^{d_t} y_t = eps_t` with Gaussian innovations, where
//! `d_t = Λ(g_t)` is a bounded logistic transform of a state that follows
//! `g_{t+1} = ω + β g_t + α s_t` and `s_t` is the Fisher-scaled score of the
//! one-step predictive likelihood.
//!
//! Modules, bottom-up:
//!
//! - [`fraccore`]: fractional-differencing weights and their `d`-derivatives.
//! - [`simulate`]: synthetic FI(d) and time-varying paths.
//! - [`gasfilter`]: link function, score, Fisher scaling and the filter.
//! - [`estimate`]: maximum likelihood for the time-varying and constant-d models.
//! - [`forecast`]: analytic one-step and simulated multi-step predictive laws.
//! - [`evalscore`]: CRPS, Diebold-Mariano with HAC variance, cumulative score gaps.
//! - [`harness`]: Monte Carlo study, rolling out-of-sample evaluation, data I/O.

pub mod error;
pub mod estimate;
pub mod evalscore;
pub mod forecast;
pub mod fraccore;
pub mod gasfilter;
pub mod harness;
pub mod optim;
pub mod rng;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
pub use fraccore::Truncation;
pub use gasfilter::{FilterOutput, StaticParams};
