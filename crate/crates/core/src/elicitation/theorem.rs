//! Monte-Carlo check of the sufficient conditions under which querying the
//! largest-product feature first beats any other single query on average.
//!
//! Writing `Delta_i = x*(i) * (theta_hat(i) - theta*(i))` for an estimate
//! fitted on a random training set, and `c` for the feature with the largest
//! `|x*(k) * theta_hat(k)|`, the conditions are
//!
//! ```text
//! E[Delta_c^2]         >= E[Delta_i^2]            for all i != c
//! E[Delta_c Delta_k]   >= E[Delta_i Delta_k]      for all i != k != c
//! ```
//!
//! and under them `E[L(theta^{c*})] <= E[L(theta^{i*})]`, where `theta^{i*}`
//! is the estimate with coordinate `i` replaced by the truth. All moments are
//! estimated from the same resamples, and each inequality is accepted when it
//! holds within two standard errors.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::TargetCase;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regression::Estimator;
use crate::seed::{self, stream};

/// Draws independent training sets for a fixed target.
pub trait TrainingSampler: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Dataset>;
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub p: usize,
    pub num_resamples: usize,
    /// Most frequent largest-product feature across resamples (ties to the
    /// smaller index).
    pub modal_c: usize,
    /// Share of resamples whose largest-product feature was `modal_c`.
    pub modal_c_frequency: f64,
    pub mean_delta_sq: Vec<f64>,
    pub sem_delta_sq: Vec<f64>,
    /// Sample variance of `x*(i) * theta_hat(i)`.
    pub var_product: Vec<f64>,
    /// Features `i` for which `E[Delta_c^2] >= E[Delta_i^2]` failed.
    pub variance_violations: Vec<usize>,
    /// Number of `(i, k)` pairs for which the cross-moment inequality failed.
    pub cross_violations: usize,
    /// Every resample produced the same `Delta` vector.
    pub zero_variance: bool,
    pub mean_loss_init: f64,
    /// Monte-Carlo `E[L(theta^{i*})]` for every `i`.
    pub mean_loss_replaced: Vec<f64>,
    pub sem_loss_replaced: Vec<f64>,
    /// Standard error of the paired difference `L(theta^{c*}) - L(theta^{i*})`.
    pub sem_loss_difference: Vec<f64>,
    /// Features `i` with `E[L(theta^{c*})] > E[L(theta^{i*})] + 2 SEM`.
    pub ordering_violations: Vec<usize>,
}

impl ConditionReport {
    pub fn variance_condition_holds(&self) -> bool {
        self.variance_violations.is_empty()
    }

    pub fn cross_condition_holds(&self) -> bool {
        self.cross_violations == 0
    }

    pub fn conditions_hold(&self) -> bool {
        self.variance_condition_holds() && self.cross_condition_holds()
    }

    pub fn ordering_holds(&self) -> bool {
        self.ordering_violations.is_empty()
    }

    pub fn summary(&self) -> String {
        let verdict = |ok: bool| if ok { "hold" } else { "fail" };
        let mut s = String::new();
        s.push_str(&format!("features: {}\nresamples: {}\n", self.p, self.num_resamples));
        s.push_str(&format!(
            "largest-product feature c: {} (in {:.1}% of resamples)\n",
            self.modal_c,
            100.0 * self.modal_c_frequency
        ));
        if self.zero_variance {
            s.push_str("warning: every resample gave the same estimate error (zero variance)\n");
        }
        s.push_str(&format!(
            "variance condition: {} ({} violations)\n",
            verdict(self.variance_condition_holds()),
            self.variance_violations.len()
        ));
        s.push_str(&format!(
            "cross-moment condition: {} ({} violating pairs)\n",
            verdict(self.cross_condition_holds()),
            self.cross_violations
        ));
        s.push_str(&format!("conditions: {}\n", verdict(self.conditions_hold())));
        s.push_str(&format!(
            "loss ordering (replacing c is best within 2 SEM): {} ({} violations)\n",
            verdict(self.ordering_holds()),
            self.ordering_violations.len()
        ));
        s.push_str(&format!(
            "mean loss: initial {:.6}, replacing c {:.6}\n",
            self.mean_loss_init, self.mean_loss_replaced[self.modal_c]
        ));
        s
    }

    /// One row per feature.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "feature",
            "is_c",
            "mean_delta_sq",
            "sem_delta_sq",
            "var_product",
            "mean_loss_replaced",
            "sem_loss_replaced",
            "sem_loss_difference",
        ])
        .map_err(csv_err)?;
        for i in 0..self.p {
            w.write_record([
                i.to_string(),
                u8::from(i == self.modal_c).to_string(),
                self.mean_delta_sq[i].to_string(),
                self.sem_delta_sq[i].to_string(),
                self.var_product[i].to_string(),
                self.mean_loss_replaced[i].to_string(),
                self.sem_loss_replaced[i].to_string(),
                self.sem_loss_difference[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

/// Mean and standard error of the mean (sample sd / sqrt(n)).
fn mean_sem(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `mean >= -2 sem`, with a rounding allowance relative to the magnitudes
/// involved so that exactly-zero-variance differences are judged exactly.
fn holds_within_two_sem(values: impl Iterator<Item = f64> + Clone) -> bool {
    let n = values.clone().count() as f64;
    let scale = values.clone().map(f64::abs).sum::<f64>() / n;
    let (mean, sem) = mean_sem(values);
    mean >= -2.0 * sem - 1e-12 * scale
}

fn largest_product(products: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in products.iter().enumerate() {
        if v.abs() > products[best].abs() {
            best = k;
        }
    }
    best
}

/// Estimates both theorem conditions and the single-replacement losses from
/// `num_resamples` independent training sets.
pub fn estimate_theorem_conditions(
    sampler: &dyn TrainingSampler,
    estimator: &dyn Estimator,
    target: &TargetCase,
    num_resamples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if num_resamples < 2 {
        return Err(Error::invalid(format!(
            "at least 2 resamples are needed for a standard error, got {num_resamples}"
        )));
    }
    let p = target.p();

    // per resample: Delta vector and x* . theta_hat products
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..num_resamples)
        .into_par_iter()
        .map(|r| -> Result<(Vec<f64>, Vec<f64>)> {
            let draw_seed = seed::derive_seed(seed, &[stream::RESAMPLE, r as u64]);
            let data = sampler.sample(&mut seed::rng(draw_seed))?;
            if data.p() != p {
                return Err(Error::dims("resampled training set", p, data.p()));
            }
            let fit = estimator.estimate(&data, seed::derive_seed(draw_seed, &[stream::CV]))?;
            let products: Vec<f64> = target
                .x_star
                .iter()
                .zip(fit.weights.as_array())
                .map(|(x, w)| x * w)
                .collect();
            let deltas = products
                .iter()
                .zip(target.x_star.iter().zip(target.theta_star.as_array()))
                .map(|(prod, (x, t))| prod - x * t)
                .collect();
            Ok((deltas, products))
        })
        .collect::<Result<_>>()?;

    let mut c_counts = vec![0usize; p];
    for (_, products) in &draws {
        c_counts[largest_product(products)] += 1;
    }
    let mut modal_c = 0;
    for (k, &count) in c_counts.iter().enumerate() {
        if count > c_counts[modal_c] {
            modal_c = k;
        }
    }
    let c = modal_c;

    let delta = |r: usize, i: usize| draws[r].0[i];
    let resamples = 0..num_resamples;

    let (mean_delta_sq, sem_delta_sq): (Vec<f64>, Vec<f64>) = (0..p)
        .map(|i| mean_sem(resamples.clone().map(|r| delta(r, i).powi(2))))
        .unzip();
    let var_product: Vec<f64> = (0..p)
        .map(|i| {
            let (_, sem) = mean_sem(resamples.clone().map(|r| draws[r].1[i]));
            sem * sem * num_resamples as f64
        })
        .collect();

    let variance_violations: Vec<usize> = (0..p)
        .filter(|&i| i != c)
        .filter(|&i| !holds_within_two_sem(resamples.clone().map(|r| delta(r, c).powi(2) - delta(r, i).powi(2))))
        .collect();

    let cross_violations: usize = (0..p)
        .into_par_iter()
        .filter(|&i| i != c)
        .map(|i| {
            (0..p)
                .filter(|&k| k != c && k != i)
                .filter(|&k| {
                    !holds_within_two_sem(
                        resamples.clone().map(|r| delta(r, k) * (delta(r, c) - delta(r, i))),
                    )
                })
                .count()
        })
        .sum();

    let zero_variance = draws.iter().all(|(d, _)| d == &draws[0].0);

    let totals: Vec<f64> = draws.iter().map(|(d, _)| d.iter().sum()).collect();
    let mean_loss_init = totals.iter().map(|s| s * s).sum::<f64>() / num_resamples as f64;
    let replaced_loss = |r: usize, i: usize| (totals[r] - delta(r, i)).powi(2);
    let (mean_loss_replaced, sem_loss_replaced): (Vec<f64>, Vec<f64>) = (0..p)
        .map(|i| mean_sem(resamples.clone().map(|r| replaced_loss(r, i))))
        .unzip();
    let sem_loss_difference: Vec<f64> = (0..p)
        .map(|i| mean_sem(resamples.clone().map(|r| replaced_loss(r, c) - replaced_loss(r, i))).1)
        .collect();
    let ordering_violations = (0..p)
        .filter(|&i| mean_loss_replaced[c] > mean_loss_replaced[i] + 2.0 * sem_loss_difference[i])
        .collect();

    Ok(ConditionReport {
        p,
        num_resamples,
        modal_c,
        modal_c_frequency: c_counts[c] as f64 / num_resamples as f64,
        mean_delta_sq,
        sem_delta_sq,
        var_product,
        variance_violations,
        cross_violations,
        zero_variance,
        mean_loss_init,
        mean_loss_replaced,
        sem_loss_replaced,
        sem_loss_difference,
        ordering_violations,
    })
}
