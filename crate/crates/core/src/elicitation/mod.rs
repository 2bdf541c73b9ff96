//! Budgeted expert-feedback elicitation.
//!
//! A strategy ranks features, the expert is asked about them in that order,
//! and every answer overwrites the matching coordinate of the initial
//! estimate. The quality of an estimate is its squared prediction error at
//! the target's feature vector:
//!
//! ```text
//! L(theta_hat) = (x* . theta_hat - x* . theta*)^2 = (sum_i Delta_i)^2,
//! Delta_i = x*(i) * (theta_hat(i) - theta*(i))
//! ```

mod expert;
mod strategy;
pub mod theorem;

use ndarray::Array1;

pub use expert::{ExpertModel, Feedback};
pub use strategy::{rank_features, StrategyKind, StrategySpec};

use crate::data::WeightVector;
use crate::error::{Error, Result};

/// The individual we want to predict for.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetCase {
    pub x_star: Array1<f64>,
    /// Hidden from strategies; only the expert and the loss see it.
    pub theta_star: WeightVector,
}

impl TargetCase {
    pub fn new(x_star: Array1<f64>, theta_star: WeightVector) -> Result<Self> {
        if x_star.len() != theta_star.len() {
            return Err(Error::dims("target case", x_star.len(), theta_star.len()));
        }
        if !x_star.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("target features contain non-finite entries"));
        }
        Ok(TargetCase { x_star, theta_star })
    }

    pub fn p(&self) -> usize {
        self.x_star.len()
    }
}

/// Noise-free squared prediction error at `x*`.
pub fn target_loss(theta_hat: &WeightVector, target: &TargetCase) -> Result<f64> {
    if theta_hat.len() != target.p() {
        return Err(Error::dims("target_loss", target.p(), theta_hat.len()));
    }
    let err: f64 = target
        .x_star
        .iter()
        .zip(theta_hat.as_array())
        .zip(target.theta_star.as_array())
        .map(|((x, h), t)| x * (h - t))
        .sum();
    Ok(err * err)
}

/// Replaces one coordinate with the expert's value.
pub fn apply_feedback(theta: &WeightVector, feedback: Feedback) -> Result<WeightVector> {
    theta.with_coordinate(feedback.feature_index, feedback.value)
}

#[derive(Debug, Clone)]
pub struct ElicitationRun {
    /// `trajectory[t]` is the loss after `t` queries; length `budget + 1`.
    pub trajectory: Vec<f64>,
    pub final_weights: WeightVector,
    /// Features asked about, in order (answered or not).
    pub queried: Vec<usize>,
    /// True when the ranking ran out before the budget did and the
    /// trajectory was padded with its last value. Never set for
    /// [`StrategyKind::NoInteraction`], which queries nothing by definition.
    pub padded: bool,
}

/// Runs one non-adaptive elicitation session.
///
/// The ranking is computed once from the initial estimate. Each query costs
/// one unit of budget, whether or not the expert could answer it; a
/// mask-respecting strategy never asks about unknown features in the first
/// place.
pub fn run_elicitation(
    theta_init: &WeightVector,
    target: &TargetCase,
    expert: &ExpertModel,
    strategy: &StrategySpec,
    budget: usize,
) -> Result<ElicitationRun> {
    let p = target.p();
    if budget > p {
        return Err(Error::invalid(format!("budget {budget} exceeds p = {p}")));
    }
    if expert.truth().len() != p {
        return Err(Error::dims("expert truth", p, expert.truth().len()));
    }
    let order = rank_features(strategy, &target.x_star, theta_init, expert.knowledge_mask())?;

    let mut theta = theta_init.clone();
    let mut trajectory = Vec::with_capacity(budget + 1);
    trajectory.push(target_loss(&theta, target)?);
    let queried: Vec<usize> = order.into_iter().take(budget).collect();
    for (counter, &feature) in queried.iter().enumerate() {
        if let Some(feedback) = expert.answer(feature, counter as u64) {
            theta = apply_feedback(&theta, feedback)?;
        }
        trajectory.push(target_loss(&theta, target)?);
    }
    let padded = trajectory.len() < budget + 1 && strategy.kind != StrategyKind::NoInteraction;
    let last = *trajectory.last().expect("trajectory starts with the initial loss");
    trajectory.resize(budget + 1, last);
    Ok(ElicitationRun {
        trajectory,
        final_weights: theta,
        queried,
        padded,
    })
}

/// Brute force: the single exact replacement that minimises the target loss.
/// Ties go to the smallest index.
pub fn oracle_best_single_replacement(theta_init: &WeightVector, target: &TargetCase) -> Result<usize> {
    if target.p() == 0 {
        return Err(Error::invalid("oracle needs at least one feature"));
    }
    let mut best = (0, f64::INFINITY);
    for i in 0..target.p() {
        let replaced = theta_init.with_coordinate(i, target.theta_star[i])?;
        let loss = target_loss(&replaced, target)?;
        if loss < best.1 {
            best = (i, loss);
        }
    }
    Ok(best.0)
}
