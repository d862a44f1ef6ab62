//! Panel local projections: impulse responses of an outcome to discrete
//! shocks, estimated horizon by horizon with two-way fixed effects and
//! entity-clustered (CR1) inference.
//!
//! The pipeline is [`ingest`] → [`panel`] transforms → [`events`] dummies →
//! [`lp::estimate_irf`] over a [`lp::Specification`] chosen from the
//! [`lp::Registry`]. [`simgen`] generates panels with a known response for
//! validation and [`validate`] holds the oracle suites.

pub mod error;
pub mod estimator;
pub mod events;
pub mod ingest;
pub mod lp;
pub mod panel;
pub mod pipeline;
pub mod simgen;
pub mod validate;

pub use error::{Error, Result};
