//! Evaluation of randomized-experiment strategies under network treatment
//! interference.
//!
//! The library models a finite population of units connected by a fixed
//! interference graph. A treatment vector `z ∈ {0,1}^n` is drawn from a
//! [`design::Design`], each unit's exposure level is computed by an
//! [`exposure::ExposureModel`], fixed potential outcomes are looked up in a
//! [`outcomes::PotentialOutcomeTable`], and an estimator from [`estimator`]
//! turns the observed outcomes into an estimate of a causal contrast.
//!
//! Two evaluation paths exist and cross-check each other:
//!
//! * exact enumeration of the design's support ([`harness::exact_expectation`]
//!   and [`propensity::enumerated_propensity`]) for desk-scale problems, and
//! * closed-form propensity/bias/variance expressions ([`propensity`],
//!   [`analytic`]) plus Monte-Carlo replication ([`harness::run`]) at scale.

#![allow(clippy::needless_range_loop)]

pub mod analytic;
pub mod design;
pub mod error;
pub mod estimator;
pub mod exposure;
pub mod graph;
pub mod harness;
pub mod outcomes;
pub mod propensity;
pub(crate) mod util;

pub use error::{Error, Result};
