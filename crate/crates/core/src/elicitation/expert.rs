use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::WeightVector;
use crate::error::{Error, Result};
use crate::seed;

/// One answered query: the expert's value for a single target weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub feature_index: usize,
    pub value: f64,
}

/// A simulated expert who knows the target's true weights, possibly only on
/// a subset of features, and answers with optional Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertModel {
    truth: WeightVector,
    knowledge_mask: Vec<bool>,
    noise_variance: f64,
    rng_seed: u64,
}

impl ExpertModel {
    /// An expert who knows every weight exactly.
    pub fn exact(truth: WeightVector) -> Self {
        let p = truth.len();
        ExpertModel {
            truth,
            knowledge_mask: vec![true; p],
            noise_variance: 0.0,
            rng_seed: 0,
        }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.truth.len() {
            return Err(Error::dims("knowledge mask", self.truth.len(), mask.len()));
        }
        self.knowledge_mask = mask;
        Ok(self)
    }

    pub fn with_noise(mut self, variance: f64, rng_seed: u64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be finite and >= 0, got {variance}")));
        }
        self.noise_variance = variance;
        self.rng_seed = rng_seed;
        Ok(self)
    }

    pub fn truth(&self) -> &WeightVector {
        &self.truth
    }

    pub fn knowledge_mask(&self) -> &[bool] {
        &self.knowledge_mask
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn knows(&self, feature_index: usize) -> bool {
        self.knowledge_mask.get(feature_index).copied().unwrap_or(false)
    }

    /// Answer for `feature_index`, or `None` when the expert has no knowledge
    /// of it. The noise for query number `query_counter` comes from its own
    /// stream, so answers do not depend on which queries came before.
    pub fn answer(&self, feature_index: usize, query_counter: u64) -> Option<Feedback> {
        if !self.knows(feature_index) {
            return None;
        }
        let truth = self.truth[feature_index];
        let value = if self.noise_variance == 0.0 {
            truth
        } else {
            let mut rng = seed::rng(seed::derive_seed(self.rng_seed, &[seed::stream::EXPERT, query_counter]));
            truth + self.noise_variance.sqrt() * rng.sample::<f64, _>(StandardNormal)
        };
        Some(Feedback { feature_index, value })
    }
}
