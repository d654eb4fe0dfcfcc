//! Two-stage treatment regimes that maximize the probability of exceeding a
//! threshold or a quantile of the final outcome, with mean-optimal
//! comparators, a simulation harness and a brute-force oracle.

pub mod baselines;
pub mod conditional_joint;
pub mod domain;
pub mod error;
pub mod io;
pub mod linalg;
pub mod normal;
mod par;
pub mod qiq;
pub mod regime;
pub mod residual_cdf;
pub mod simgen;
pub mod stage2;
pub mod tiq;
pub mod value_oracle;

pub use domain::{sgn, validate_dataset, Dataset, History1, History2, RawRow, Trajectory, Treatment};
pub use error::{Error, Result};
pub use qiq::{fit_qiq, QiqConfig, QiqModel};
pub use regime::Regime;
pub use tiq::{fit_components, fit_tiq, Components, EstimatorConfig, TiqModel};
