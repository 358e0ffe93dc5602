//! Stochastic electricity-price models, Monte Carlo pricing of
//! reliability-option premia, and cost-recovery analytics.
//!
//! The pipeline runs bottom-up:
//!
//! * [`market_data`] turns CSV exports into a uniform [`PriceSeries`];
//! * [`calibration`] fits OU, jump, GARCH and regime-switching models;
//! * [`models`] simulates them with exact OU transitions;
//! * [`pricing`] values the premium as a strip of calls;
//! * [`risk`] and [`economics`] add CVaR strikes, NetCONE and break-even
//!   durations; [`metrics`] scores simulated against empirical tails.

// `!(x > 0.0)` style checks are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibration;
pub mod cli;
pub mod economics;
pub mod error;
pub mod market_data;
pub mod metrics;
pub mod models;
pub mod numeric;
pub mod pricing;
pub mod risk;
pub mod synthetic;

pub use error::{Error, Result};
pub use market_data::PriceSeries;
pub use models::ModelSpec;
pub use pricing::{ContractTerms, PremiumResult};

