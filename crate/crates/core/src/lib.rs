//! Budgeted expert-feedback elicitation for sparse linear regression with
//! extremely few training samples.
//!
//! The pipeline has three stages. A sparse initial estimate is fitted from a
//! handful of samples ([`regression`]). A simulated expert is then queried on
//! a budgeted set of features picked by a ranking strategy, and each answer
//! replaces the corresponding coordinate of the estimate ([`elicitation`]).
//! Finally the prediction loss at a single target feature vector is tracked
//! as a function of the budget, aggregated over many seeded repetitions
//! ([`experiment`]).
//!
//! Training data come either from seeded synthetic generators ([`synthgen`])
//! or from expression/response tables with a leave-one-out pseudo-ground-truth
//! pipeline ([`realdata`]).

pub mod data;
pub mod elicitation;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod realdata;
pub mod regression;
pub mod seed;
pub mod synthgen;

pub use data::{Dataset, WeightVector};
pub use error::{Error, Result};
