use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use rand::seq::SliceRandom;

use crate::data::WeightVector;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    /// Never queries; the initial estimate is the final one.
    NoInteraction,
    /// Uniformly random order, without repeats.
    Random,
    /// Largest `|x*(i)|` first.
    LargestTargetFeature,
    /// Largest `|x*(i) * theta_init(i)|` first.
    LargestProductFeature,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::NoInteraction,
        StrategyKind::Random,
        StrategyKind::LargestTargetFeature,
        StrategyKind::LargestProductFeature,
    ];

    fn id(self) -> u64 {
        self as u64
    }
}

/// A query-selection rule.
///
/// With `respect_mask`, features the expert cannot answer are dropped from
/// the ranking, so the budget is spent on the best features the expert
/// does know.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub respect_mask: bool,
    /// Only used by [`StrategyKind::Random`].
    pub rng_seed: u64,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Self {
        StrategySpec {
            kind,
            respect_mask: false,
            rng_seed: 0,
        }
    }

    pub fn subset_aware(kind: StrategyKind) -> Self {
        StrategySpec {
            respect_mask: true,
            ..Self::new(kind)
        }
    }

    pub fn with_seed(self, rng_seed: u64) -> Self {
        StrategySpec { rng_seed, ..self }
    }

    /// Stable identifier, used in result files and for seeding.
    pub fn name(&self) -> &'static str {
        match (self.kind, self.respect_mask) {
            (StrategyKind::NoInteraction, _) => "no_interaction",
            (StrategyKind::Random, false) => "random",
            (StrategyKind::Random, true) => "random_subset",
            (StrategyKind::LargestTargetFeature, false) => "largest_target",
            (StrategyKind::LargestTargetFeature, true) => "largest_target_subset",
            (StrategyKind::LargestProductFeature, false) => "largest_product",
            (StrategyKind::LargestProductFeature, true) => "largest_product_subset",
        }
    }

    pub(crate) fn seed_id(&self) -> u64 {
        self.kind.id() * 2 + u64::from(self.respect_mask)
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, respect_mask) = match s.strip_suffix("_subset") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let kind = match base {
            "no_interaction" => StrategyKind::NoInteraction,
            "random" => StrategyKind::Random,
            "largest_target" => StrategyKind::LargestTargetFeature,
            "largest_product" => StrategyKind::LargestProductFeature,
            _ => return Err(Error::invalid(format!("unknown strategy '{s}'"))),
        };
        Ok(StrategySpec {
            kind,
            respect_mask,
            rng_seed: 0,
        })
    }
}

/// Indices sorted by descending score, ties by ascending index.
fn order_by_score(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = scores.enumerate().collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(i, _)| i).collect()
}

/// The full query order a strategy would follow.
///
/// `mask[i]` says whether the expert can answer feature `i`; it is only
/// consulted when the strategy respects it.
pub fn rank_features(
    strategy: &StrategySpec,
    x_star: &Array1<f64>,
    theta_init: &WeightVector,
    mask: &[bool],
) -> Result<Vec<usize>> {
    let p = x_star.len();
    if theta_init.len() != p {
        return Err(Error::dims("rank_features theta_init", p, theta_init.len()));
    }
    if mask.len() != p {
        return Err(Error::dims("rank_features mask", p, mask.len()));
    }
    let mut order = match strategy.kind {
        StrategyKind::NoInteraction => return Ok(Vec::new()),
        StrategyKind::Random => {
            let mut order: Vec<usize> = (0..p).collect();
            order.shuffle(&mut seed::rng(strategy.rng_seed));
            order
        }
        StrategyKind::LargestTargetFeature => order_by_score(x_star.iter().map(|v| v.abs())),
        StrategyKind::LargestProductFeature => order_by_score(
            x_star
                .iter()
                .zip(theta_init.as_array())
                .map(|(x, t)| (x * t).abs()),
        ),
    };
    if strategy.respect_mask {
        order.retain(|&i| mask[i]);
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn largest_product_with_index_tie_break() {
        let s = StrategySpec::new(StrategyKind::LargestProductFeature);
        let order = rank_features(&s, &array![2.0, -3.0, 0.5], &w(&[1.0, 1.0, 4.0]), &[true; 3]).unwrap();
        assert_eq!(order, vec![1, 0, 2]);
    }

    #[test]
    fn largest_target_uses_magnitude() {
        let s = StrategySpec::new(StrategyKind::LargestTargetFeature);
        let order = rank_features(&s, &array![0.1, -5.0, 2.0], &w(&[0.0; 3]), &[true; 3]).unwrap();
        assert_eq!(order, vec![1, 2, 0]);
    }

    #[test]
    fn subset_variant_drops_unknown_features() {
        let s = StrategySpec::subset_aware(StrategyKind::LargestProductFeature);
        let order =
            rank_features(&s, &array![2.0, -3.0, 0.5], &w(&[1.0, 1.0, 4.0]), &[true, false, true]).unwrap();
        assert_eq!(order, vec![0, 2]);
        // the mask is ignored when not respected
        let s = StrategySpec::new(StrategyKind::LargestProductFeature);
        let order =
            rank_features(&s, &array![2.0, -3.0, 0.5], &w(&[1.0, 1.0, 4.0]), &[true, false, true]).unwrap();
        assert_eq!(order, vec![1, 0, 2]);
    }

    #[test]
    fn no_interaction_is_empty_and_random_is_seeded_permutation() {
        let x = Array1::linspace(-1.0, 1.0, 20);
        let t = WeightVector::zeros(20);
        let none = StrategySpec::new(StrategyKind::NoInteraction);
        assert!(rank_features(&none, &x, &t, &[true; 20]).unwrap().is_empty());

        let r = StrategySpec::new(StrategyKind::Random).with_seed(11);
        let a = rank_features(&r, &x, &t, &[true; 20]).unwrap();
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
        assert_eq!(a, rank_features(&r, &x, &t, &[true; 20]).unwrap());
        assert_ne!(a, rank_features(&r.with_seed(12), &x, &t, &[true; 20]).unwrap());
    }

    #[test]
    fn names_round_trip() {
        for kind in StrategyKind::ALL {
            for spec in [StrategySpec::new(kind), StrategySpec::subset_aware(kind)] {
                let parsed: StrategySpec = spec.name().parse().unwrap();
                if kind != StrategyKind::NoInteraction {
                    assert_eq!(parsed, spec);
                }
            }
        }
        assert!("largest".parse::<StrategySpec>().is_err());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let s = StrategySpec::new(StrategyKind::LargestProductFeature);
        assert!(rank_features(&s, &array![1.0, 2.0], &w(&[1.0]), &[true; 2]).is_err());
        assert!(rank_features(&s, &array![1.0, 2.0], &w(&[1.0, 2.0]), &[true]).is_err());
    }
}
