//! Seeded synthetic data in the "small n" (one shared weight vector) and
//! "n = 1" (one weight vector per patient, common support, bounded pairwise
//! distance) settings.
//!
//! Every output is a pure function of [`SyntheticConfig`]. The observation
//! stream does not depend on `n_train`: rows come from one seeded permutation
//! of the pool and noise is drawn in permutation order, so the training set
//! for a smaller `n_train` is a prefix of the one for a larger value.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, WeightVector};
use crate::elicitation::theorem::TrainingSampler;
use crate::elicitation::TargetCase;
use crate::error::{Error, Result};
use crate::seed::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// All patients and the target share one weight vector.
    SharedTheta,
    /// Each patient, and the target, has its own weight vector.
    PerPatientTheta,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::SharedTheta => "shared",
            Scenario::PerPatientTheta => "per_patient",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSource {
    /// A fresh standard-normal feature vector outside the pool.
    Fresh,
    /// A pool row that is never used for training.
    HeldOutPoolRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub pool_size: usize,
    pub p: usize,
    /// Number of nonzero weights.
    pub s: usize,
    pub n_train: usize,
    pub obs_noise_variance: f64,
    pub scenario: Scenario,
    /// Upper bound on `|theta_i - theta_j|_2` between any two patients.
    pub max_pairwise_theta_distance: f64,
    pub target_source: TargetSource,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            pool_size: 1000,
            p: 150,
            s: 5,
            n_train: 10,
            obs_noise_variance: 1.0,
            scenario: Scenario::SharedTheta,
            max_pairwise_theta_distance: 0.5,
            target_source: TargetSource::Fresh,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.pool_size == 0 || self.s == 0 || self.n_train == 0 {
            return Err(Error::invalid("pool_size, p, s and n_train must all be positive"));
        }
        if self.s > self.p {
            return Err(Error::invalid(format!("sparsity {} exceeds p = {}", self.s, self.p)));
        }
        if self.n_train > self.pool_size {
            return Err(Error::invalid(format!(
                "n_train {} exceeds pool size {}",
                self.n_train, self.pool_size
            )));
        }
        if self.target_source == TargetSource::HeldOutPoolRow && self.n_train >= self.pool_size {
            return Err(Error::invalid("a held-out pool target needs n_train < pool_size"));
        }
        if !(self.obs_noise_variance >= 0.0 && self.obs_noise_variance.is_finite()) {
            return Err(Error::invalid("observation noise variance must be finite and >= 0"));
        }
        if !(self.max_pairwise_theta_distance > 0.0 && self.max_pairwise_theta_distance.is_finite()) {
            return Err(Error::invalid("pairwise theta distance bound must be positive"));
        }
        Ok(())
    }

    fn stream(&self, tag: u64) -> ChaCha8Rng {
        seed::rng(seed::derive_seed(self.seed, &[tag]))
    }
}

fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// `pool_size x p` i.i.d. standard-normal features.
pub fn generate_pool(config: &SyntheticConfig) -> Result<Array2<f64>> {
    config.validate()?;
    Ok(standard_normal_matrix(config.pool_size, config.p, &mut config.stream(stream::POOL)))
}

/// True weight vectors.
///
/// One vector for [`Scenario::SharedTheta`]. For
/// [`Scenario::PerPatientTheta`], `pool_size + 1` vectors, the last being
/// the target's: each is a common base plus a perturbation on the same
/// support drawn uniformly from the ball of radius half the pairwise bound.
pub fn generate_thetas(config: &SyntheticConfig) -> Result<Vec<WeightVector>> {
    config.validate()?;
    let mut rng = config.stream(stream::THETA);
    let mut support: Vec<usize> = (0..config.p).collect();
    support.shuffle(&mut rng);
    support.truncate(config.s);
    support.sort_unstable();

    let mut base = Array1::zeros(config.p);
    for &i in &support {
        base[i] = rng.sample(StandardNormal);
    }
    match config.scenario {
        Scenario::SharedTheta => Ok(vec![WeightVector::new(base)?]),
        Scenario::PerPatientTheta => {
            let radius = 0.5 * config.max_pairwise_theta_distance;
            (0..=config.pool_size)
                .map(|_| {
                    let direction: Vec<f64> = (0..config.s).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let u: f64 = rng.random();
                    let length = radius * u.powf(1.0 / config.s as f64);
                    let mut theta = base.clone();
                    if norm > 0.0 {
                        for (&i, d) in support.iter().zip(&direction) {
                            theta[i] += length * d / norm;
                        }
                    }
                    WeightVector::new(theta)
                })
                .collect()
        }
    }
}

/// The weight vector that generated pool row `row`.
fn theta_for_row<'a>(thetas: &'a [WeightVector], row: usize) -> &'a WeightVector {
    if thetas.len() == 1 {
        &thetas[0]
    } else {
        &thetas[row]
    }
}

/// Seeded permutation of pool rows; training rows are taken from the front
/// and a held-out target row from the back.
pub fn row_order(config: &SyntheticConfig) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..config.pool_size).collect();
    rows.shuffle(&mut config.stream(stream::OBSERVATION));
    rows
}

fn check_inputs(pool: &Array2<f64>, thetas: &[WeightVector], config: &SyntheticConfig) -> Result<()> {
    config.validate()?;
    if pool.dim() != (config.pool_size, config.p) {
        return Err(Error::invalid(format!(
            "pool is {:?}, config expects {}x{}",
            pool.dim(),
            config.pool_size,
            config.p
        )));
    }
    let expected = match config.scenario {
        Scenario::SharedTheta => 1,
        Scenario::PerPatientTheta => config.pool_size + 1,
    };
    if thetas.len() != expected {
        return Err(Error::dims("theta list", expected, thetas.len()));
    }
    if let Some(t) = thetas.iter().find(|t| t.len() != config.p) {
        return Err(Error::dims("theta length", config.p, t.len()));
    }
    Ok(())
}

/// `n_train` distinct pool rows with responses `x . theta_row + noise`.
pub fn generate_observations(pool: &Array2<f64>, thetas: &[WeightVector], config: &SyntheticConfig) -> Result<Dataset> {
    check_inputs(pool, thetas, config)?;
    let rows = row_order(config);
    let mut noise_rng = config.stream(stream::OBSERVATION ^ stream::TRAINING);
    let sd = config.obs_noise_variance.sqrt();
    let chosen = &rows[..config.n_train];
    let features = pool.select(ndarray::Axis(0), chosen);
    let responses: Array1<f64> = chosen
        .iter()
        .map(|&row| {
            let mean = pool.row(row).dot(theta_for_row(thetas, row).as_array());
            let eta: f64 = noise_rng.sample(StandardNormal);
            if sd == 0.0 {
                mean
            } else {
                mean + sd * eta
            }
        })
        .collect();
    Dataset::new(features, responses)
}

/// The target patient for this configuration.
pub fn generate_target(pool: &Array2<f64>, thetas: &[WeightVector], config: &SyntheticConfig) -> Result<TargetCase> {
    check_inputs(pool, thetas, config)?;
    match config.target_source {
        TargetSource::Fresh => {
            let mut rng = config.stream(stream::TARGET);
            let x_star: Array1<f64> = (0..config.p).map(|_| rng.sample(StandardNormal)).collect();
            let theta = thetas.last().expect("at least one theta").clone();
            TargetCase::new(x_star, theta)
        }
        TargetSource::HeldOutPoolRow => {
            let row = *row_order(config).last().expect("non-empty pool");
            TargetCase::new(pool.row(row).to_owned(), theta_for_row(thetas, row).clone())
        }
    }
}

/// Everything one synthetic repetition needs.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub pool: Array2<f64>,
    pub thetas: Vec<WeightVector>,
    pub target: TargetCase,
}

impl SyntheticInstance {
    pub fn generate(config: &SyntheticConfig) -> Result<Self> {
        let pool = generate_pool(config)?;
        let thetas = generate_thetas(config)?;
        let target = generate_target(&pool, &thetas, config)?;
        Ok(SyntheticInstance { pool, thetas, target })
    }

    pub fn observations(&self, config: &SyntheticConfig) -> Result<Dataset> {
        generate_observations(&self.pool, &self.thetas, config)
    }
}

/// Resamples training sets of `n_train` pool rows with fresh observation
/// noise, holding the pool, the weights and the target fixed.
pub struct PoolResampler {
    pub instance: SyntheticInstance,
    pub config: SyntheticConfig,
}

impl TrainingSampler for PoolResampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        let config = SyntheticConfig {
            seed: rng.random(),
            ..self.config.clone()
        };
        self.instance.observations(&config)
    }
}
