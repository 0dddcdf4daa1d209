//! Survival prediction through jackknife pseudo conditional survival
//! probabilities.
//!
//! Right-censored data are turned into a discrete-time regression table: each
//! subject contributes one row per interval it enters, with a pseudo value for
//! surviving that interval as the response. A feed-forward network with a
//! sigmoid output is then fit by plain mean squared error, and marginal
//! survival is recovered as the running product of the predicted conditional
//! probabilities. Censoring that depends on covariates is handled by
//! replacing the Kaplan-Meier estimate with an inverse-probability-of-censoring
//! weighted Nelson-Aalen estimate.
//!
//! ```
//! use pseudosurv::{data::Dataset, pseudo::{pseudo_conditional, TimeGrid}};
//!
//! let data = Dataset::from_times(&[2.0, 5.0, 7.0, 9.0, 12.0], &[true, false, true, true, false]).unwrap();
//! let grid = TimeGrid::new(vec![4.0, 8.0]).unwrap();
//! let table = pseudo_conditional(&data, &grid, None).unwrap();
//! assert_eq!(table.rows.len(), 5 + 4);
//! ```

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cox;
pub mod curve;
pub mod data;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod fmt;
mod linalg;
pub mod metrics;
pub mod net;
pub mod pseudo;
pub mod sim;

pub use curve::StepCurve;
pub use data::{Dataset, SurvivalRecord};
pub use error::{Result, SurvError};
