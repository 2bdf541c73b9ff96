//! Elastic-net / lasso estimation by cyclic coordinate descent, with
//! K-fold cross-validated penalty selection.
//!
//! The objective minimised is
//!
//! ```text
//! (1/2n) * sum_i (y_i - x_i . w)^2 + lambda * (alpha * |w|_1 + (1 - alpha)/2 * |w|_2^2)
//! ```
//!
//! There is no intercept. With `standardize`, columns are centered and scaled
//! to unit population variance before solving and the weights are mapped back
//! to the original column scale; the penalty then applies on the standardized
//! scale.

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::{Dataset, WeightVector};
use crate::error::{Error, Result};
use crate::seed::{self, stream};

/// Smallest grid value relative to the largest.
pub const LAMBDA_GRID_FLOOR: f64 = 1e-3;

/// `sign(z) * max(|z| - gamma, 0)`.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0, "soft threshold gamma must be non-negative");
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Noiseless linear prediction `x . w`.
pub fn predict(weights: &WeightVector, x: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != weights.len() {
        return Err(Error::dims("predict", weights.len(), x.len()));
    }
    Ok(weights.as_array().dot(&x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoConfig {
    /// Elastic-net mixing; 1 is the pure lasso.
    pub alpha: f64,
    pub lambda: f64,
    pub max_sweeps: usize,
    /// Convergence threshold on the largest absolute coordinate change in a
    /// full sweep.
    pub tolerance: f64,
    pub standardize: bool,
    /// Keep the objective value after every full sweep in
    /// [`LassoFit::objective_history`].
    pub record_objective: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            alpha: 1.0,
            lambda: 0.0,
            max_sweeps: 100_000,
            tolerance: 1e-7,
            standardize: false,
            record_objective: false,
        }
    }
}

impl LassoConfig {
    pub fn lasso(lambda: f64) -> Self {
        LassoConfig {
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub weights: WeightVector,
    pub lambda: f64,
    /// False when `max_sweeps` ran out; `weights` then holds the last iterate.
    pub converged: bool,
    pub sweeps: usize,
    /// `mean(y) - mean(x) . weights` when standardized, else zero. The
    /// weights alone are the model; this offset only matters when scoring
    /// raw-scale predictions (e.g. held-out cross-validation rows).
    pub intercept: f64,
    /// Columns left at zero because they have no variance (or no norm).
    pub skipped_columns: Vec<usize>,
    /// Objective after each full sweep, on the solver's (possibly
    /// standardized) scale. Empty unless requested.
    pub objective_history: Vec<f64>,
}

/// Column-major working copy of a design, optionally standardized.
struct Design {
    n: usize,
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    /// Divide a solver weight by this to get the original-scale weight.
    scale: Vec<f64>,
    /// Column and response means removed by standardization (zero otherwise).
    x_mean: Vec<f64>,
    y_mean: f64,
    /// `|x_j|^2 / n` on the solver scale; zero marks a skipped column.
    mean_square: Vec<f64>,
    skipped: Vec<usize>,
}

impl Design {
    fn new(data: &Dataset, standardize: bool) -> Design {
        let n = data.n();
        let nf = n as f64;
        let x = data.features();
        let mut columns = Vec::with_capacity(data.p());
        let mut scale = Vec::with_capacity(data.p());
        let mut mean_square = Vec::with_capacity(data.p());
        let mut skipped = Vec::new();
        let mut x_mean = vec![0.0; data.p()];
        for (j, col) in x.columns().into_iter().enumerate() {
            let mut c: Vec<f64> = col.to_vec();
            if standardize {
                let mean = c.iter().sum::<f64>() / nf;
                x_mean[j] = mean;
                c.iter_mut().for_each(|v| *v -= mean);
                let sd = (c.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
                let magnitude = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if sd <= 1e-12 * magnitude.max(1.0) {
                    log::warn!("column {j} has zero variance; its weight is fixed at 0");
                    c.iter_mut().for_each(|v| *v = 0.0);
                    skipped.push(j);
                    scale.push(1.0);
                    mean_square.push(0.0);
                } else {
                    c.iter_mut().for_each(|v| *v /= sd);
                    scale.push(sd);
                    mean_square.push(c.iter().map(|v| v * v).sum::<f64>() / nf);
                }
            } else {
                let ms = c.iter().map(|v| v * v).sum::<f64>() / nf;
                if ms == 0.0 {
                    skipped.push(j);
                }
                scale.push(1.0);
                mean_square.push(ms);
            }
            columns.push(c);
        }
        let mut y = data.responses().to_vec();
        let y_mean = if standardize { y.iter().sum::<f64>() / nf } else { 0.0 };
        y.iter_mut().for_each(|v| *v -= y_mean);
        Design {
            n,
            columns,
            y,
            scale,
            x_mean,
            y_mean,
            mean_square,
            skipped,
        }
    }

    fn p(&self) -> usize {
        self.columns.len()
    }

    fn lambda_max(&self, alpha: f64) -> f64 {
        let nf = self.n as f64;
        let max_corr = self
            .columns
            .iter()
            .zip(&self.mean_square)
            .filter(|(_, &ms)| ms > 0.0)
            .map(|(c, _)| dot(c, &self.y).abs() / nf)
            .fold(0.0f64, f64::max);
        max_corr / alpha.max(LAMBDA_GRID_FLOOR)
    }

    fn objective(&self, w: &[f64], resid: &[f64], alpha: f64, lambda: f64) -> f64 {
        let loss = resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * self.n as f64);
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        let l2: f64 = w.iter().map(|v| v * v).sum();
        loss + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
    }

    fn to_original(&self, w: &[f64]) -> WeightVector {
        let out: Array1<f64> = w.iter().zip(&self.scale).map(|(v, s)| v / s).collect();
        WeightVector::new(out).expect("coordinate descent keeps weights finite")
    }

    /// Offset implied by centering, for original-scale `weights`.
    fn intercept(&self, weights: &WeightVector) -> f64 {
        self.y_mean - dot(&self.x_mean, weights.as_slice())
    }

    /// One pass of coordinate updates over `indices`; returns the largest
    /// absolute change.
    fn sweep(
        &self,
        indices: impl Iterator<Item = usize>,
        l1: f64,
        l2: f64,
        w: &mut [f64],
        resid: &mut [f64],
    ) -> f64 {
        let nf = self.n as f64;
        let mut max_change = 0.0f64;
        for j in indices {
            let ms = self.mean_square[j];
            if ms == 0.0 {
                continue;
            }
            let col = &self.columns[j];
            let old = w[j];
            let z = dot(col, resid) / nf + ms * old;
            let new = soft_threshold(z, l1) / (ms + l2);
            if new != old {
                let delta = new - old;
                resid.iter_mut().zip(col).for_each(|(r, x)| *r -= delta * x);
                w[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Cyclic coordinate descent from the warm start `w` (with matching
    /// residual). After each full sweep that has not converged, sweeps are
    /// restricted to the active set until it settles, then a full sweep
    /// re-checks every coordinate. Convergence is only declared on a full
    /// sweep.
    fn solve(
        &self,
        alpha: f64,
        lambda: f64,
        max_sweeps: usize,
        tolerance: f64,
        w: &mut [f64],
        resid: &mut [f64],
        mut history: Option<&mut Vec<f64>>,
    ) -> (bool, usize) {
        let l1 = lambda * alpha;
        let l2 = lambda * (1.0 - alpha);
        let p = self.p();
        let mut sweeps = 0;
        let mut active = Vec::with_capacity(p);
        loop {
            if sweeps >= max_sweeps {
                return (false, sweeps);
            }
            let change = self.sweep(0..p, l1, l2, w, resid);
            sweeps += 1;
            if let Some(h) = history.as_deref_mut() {
                h.push(self.objective(w, resid, alpha, lambda));
            }
            if change < tolerance {
                return (true, sweeps);
            }
            active.clear();
            active.extend((0..p).filter(|&j| w[j] != 0.0));
            loop {
                if sweeps >= max_sweeps {
                    return (false, sweeps);
                }
                let change = self.sweep(active.iter().copied(), l1, l2, w, resid);
                sweeps += 1;
                if change < tolerance {
                    break;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits the elastic net at a single penalty, starting from zero.
pub fn fit_lasso(data: &Dataset, config: &LassoConfig) -> Result<LassoFit> {
    config.validate()?;
    let design = Design::new(data, config.standardize);
    let mut w = vec![0.0; design.p()];
    let mut resid = design.y.clone();
    let mut history = Vec::new();
    let (converged, sweeps) = design.solve(
        config.alpha,
        config.lambda,
        config.max_sweeps,
        config.tolerance,
        &mut w,
        &mut resid,
        config.record_objective.then_some(&mut history),
    );
    if !converged {
        log::warn!(
            "coordinate descent did not converge within {} sweeps (lambda = {})",
            config.max_sweeps,
            config.lambda
        );
    }
    let weights = design.to_original(&w);
    Ok(LassoFit {
        intercept: design.intercept(&weights),
        weights,
        lambda: config.lambda,
        converged,
        sweeps,
        skipped_columns: design.skipped,
        objective_history: history,
    })
}

/// The elastic-net objective of `weights` on the unstandardized data.
pub fn elastic_net_objective(data: &Dataset, weights: &WeightVector, alpha: f64, lambda: f64) -> Result<f64> {
    if weights.len() != data.p() {
        return Err(Error::dims("objective", data.p(), weights.len()));
    }
    let resid = data.responses() - &data.features().dot(weights.as_array());
    let loss = resid.dot(&resid) / (2.0 * data.n() as f64);
    let l1: f64 = weights.as_array().iter().map(|v| v.abs()).sum();
    let l2: f64 = weights.as_array().dot(weights.as_array());
    Ok(loss + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2))
}

/// Smallest penalty at which every weight is zero: `max_j |x_j . y| / (n alpha)`.
pub fn lambda_max(data: &Dataset, alpha: f64, standardize: bool) -> f64 {
    Design::new(data, standardize).lambda_max(alpha)
}

/// `size` log-spaced values from `max` down to `max * 1e-3`.
pub fn lambda_grid(max: f64, size: usize) -> Vec<f64> {
    if size == 1 {
        return vec![max];
    }
    let last = (size - 1) as f64;
    (0..size)
        .map(|k| {
            if k == 0 {
                max
            } else {
                max * LAMBDA_GRID_FLOOR.powf(k as f64 / last)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub alpha: f64,
    pub folds: usize,
    pub grid_size: usize,
    pub seed: u64,
    /// Solver settings for every fit; `lambda` and `alpha` are overridden.
    pub fit: LassoConfig,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            alpha: 1.0,
            folds: 10,
            grid_size: 100,
            seed: 0,
            fit: LassoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// Descending.
    pub lambda_grid: Vec<f64>,
    pub mean_cv_error: Vec<f64>,
    pub lambda_min: f64,
}

impl CvResult {
    pub fn index_of_min(&self) -> usize {
        self.lambda_grid
            .iter()
            .position(|&l| l == self.lambda_min)
            .expect("lambda_min is a grid value")
    }
}

/// Fold index for every row: rows are shuffled with the seed and dealt out
/// round-robin, so each fold gets `n / folds` or one more rows.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive_seed(seed, &[stream::CV])));
    let mut fold = vec![0; n];
    for (k, &row) in order.iter().enumerate() {
        fold[row] = k % folds;
    }
    fold
}

/// Mean held-out squared error for each penalty in `grid`, averaged over
/// folds. Each fold walks the grid in order with warm starts.
pub fn cv_errors_on_grid(data: &Dataset, grid: &[f64], options: &CvOptions) -> Result<Vec<f64>> {
    let folds = options.folds;
    if folds < 2 {
        return Err(Error::invalid(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    if data.n() < folds {
        return Err(Error::invalid(format!(
            "cross-validation with {folds} folds needs at least {folds} rows, got {}",
            data.n()
        )));
    }
    if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::invalid("penalty grid must be non-empty, finite and non-negative"));
    }
    let fit = LassoConfig {
        alpha: options.alpha,
        ..options.fit.clone()
    };
    fit.validate()?;

    let assignment = fold_assignment(data.n(), folds, options.seed);
    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let (test_rows, train_rows): (Vec<usize>, Vec<usize>) =
                (0..data.n()).partition(|&i| assignment[i] == k);
            let train = data.select_rows(&train_rows)?;
            let design = Design::new(&train, fit.standardize);
            let mut w = vec![0.0; design.p()];
            let mut resid = design.y.clone();
            let mut errors = Vec::with_capacity(grid.len());
            for &lambda in grid {
                let (converged, _) =
                    design.solve(fit.alpha, lambda, fit.max_sweeps, fit.tolerance, &mut w, &mut resid, None);
                if !converged {
                    log::warn!("fold {k}: no convergence at lambda = {lambda}");
                }
                let weights = design.to_original(&w);
                let intercept = design.intercept(&weights);
                let sse: f64 = test_rows
                    .iter()
                    .map(|&i| {
                        let e = data.responses()[i] - intercept - data.row(i).dot(weights.as_array());
                        e * e
                    })
                    .sum();
                errors.push(sse / test_rows.len() as f64);
            }
            Ok(errors)
        })
        .collect::<Result<_>>()?;

    let mut mean = vec![0.0; grid.len()];
    for errors in &per_fold {
        mean.iter_mut().zip(errors).for_each(|(m, e)| *m += e);
    }
    mean.iter_mut().for_each(|m| *m /= folds as f64);
    Ok(mean)
}

/// Picks the penalty with the smallest mean cross-validated error on a
/// log-spaced grid below `lambda_max`. Ties go to the larger penalty.
pub fn cv_select_lambda(data: &Dataset, options: &CvOptions) -> Result<CvResult> {
    if options.grid_size < 2 {
        return Err(Error::invalid(format!("grid_size must be >= 2, got {}", options.grid_size)));
    }
    let max = lambda_max(data, options.alpha, options.fit.standardize);
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::DegenerateResponse);
    }
    let grid = lambda_grid(max, options.grid_size);
    let mean_cv_error = cv_errors_on_grid(data, &grid, options)?;
    let mut best = 0;
    for (g, &e) in mean_cv_error.iter().enumerate() {
        if e < mean_cv_error[best] {
            best = g;
        }
    }
    Ok(CvResult {
        lambda_min: grid[best],
        lambda_grid: grid,
        mean_cv_error,
    })
}

/// Something that turns a training set into a weight estimate.
pub trait Estimator: Sync {
    fn estimate(&self, data: &Dataset, seed: u64) -> Result<LassoFit>;
}

/// A lasso/elastic-net fit at a fixed penalty.
#[derive(Debug, Clone)]
pub struct FixedPenalty(pub LassoConfig);

impl Estimator for FixedPenalty {
    fn estimate(&self, data: &Dataset, _seed: u64) -> Result<LassoFit> {
        fit_lasso(data, &self.0)
    }
}

/// Cross-validated penalty selection followed by a refit on all rows.
///
/// The fold count is capped at the number of rows. Responses orthogonal to
/// every feature yield the all-zero estimate.
#[derive(Debug, Clone, Default)]
pub struct CrossValidated(pub CvOptions);

impl Estimator for CrossValidated {
    fn estimate(&self, data: &Dataset, seed: u64) -> Result<LassoFit> {
        let options = CvOptions {
            folds: self.0.folds.min(data.n()),
            seed,
            ..self.0.clone()
        };
        match cv_select_lambda(data, &options) {
            Ok(cv) => fit_lasso(
                data,
                &LassoConfig {
                    alpha: options.alpha,
                    lambda: cv.lambda_min,
                    ..options.fit.clone()
                },
            ),
            Err(Error::DegenerateResponse) => Ok(LassoFit {
                weights: WeightVector::zeros(data.p()),
                intercept: if options.fit.standardize { data.responses().mean().unwrap_or(0.0) } else { 0.0 },
                lambda: 0.0,
                converged: true,
                sweeps: 0,
                skipped_columns: Vec::new(),
                objective_history: Vec::new(),
            }),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_dataset(n: usize, p: usize, seed_value: u64) -> Dataset {
        let mut rng = seed::rng(seed_value);
        let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(1.0, 1.0), 0.0);
    }

    #[test]
    fn predict_examples() {
        let zero = WeightVector::zeros(3);
        assert_eq!(predict(&zero, array![1.0, -2.0, 7.0].view()).unwrap(), 0.0);
        let w = WeightVector::from_vec(vec![1.0, -2.0]).unwrap();
        assert_eq!(predict(&w, array![3.0, 1.0].view()).unwrap(), 1.0);
        let e2 = WeightVector::from_vec(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(predict(&e2, array![0.3, -4.0, 2.5].view()).unwrap(), 2.5);
        assert!(predict(&w, array![1.0].view()).is_err());
    }

    #[test]
    fn univariate_least_squares_slope() {
        // X = [1;2;3] (scaled ones would be degenerate for a slope check), y = 2x + noise
        let x = array![[1.0], [2.0], [3.0]];
        let y = array![2.1, 3.9, 6.2];
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let fit = fit_lasso(&data, &LassoConfig::lasso(0.0)).unwrap();
        let slope = x.column(0).dot(&y) / x.column(0).dot(&x.column(0));
        assert!(fit.converged);
        assert!((fit.weights[0] - slope).abs() < 1e-12);
    }

    #[test]
    fn standardized_fit_reports_centering_offset() {
        let x = array![[1.0], [2.0], [4.0], [7.0]];
        let y = x.column(0).mapv(|v| 3.0 + 2.0 * v);
        let data = Dataset::new(x, y).unwrap();
        let fit = fit_lasso(&data, &LassoConfig { standardize: true, ..LassoConfig::lasso(0.0) }).unwrap();
        assert!((fit.weights[0] - 2.0).abs() < 1e-9);
        assert!((fit.intercept - 3.0).abs() < 1e-9);
        let raw = fit_lasso(&data, &LassoConfig::lasso(0.0)).unwrap();
        assert_eq!(raw.intercept, 0.0);
    }

    #[test]
    fn constant_column_slope() {
        let x = array![[2.0], [2.0], [2.0]];
        let y = array![1.0, 2.0, 3.0];
        let data = Dataset::new(x, y).unwrap();
        let fit = fit_lasso(&data, &LassoConfig::lasso(0.0)).unwrap();
        // least squares through the origin: sum(xy)/sum(x^2) = 12/12
        assert!((fit.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_penalty_gives_zero_vector() {
        let data = random_dataset(8, 20, 3);
        let lmax = lambda_max(&data, 1.0, false);
        let fit = fit_lasso(&data, &LassoConfig::lasso(lmax)).unwrap();
        assert_eq!(fit.weights.nnz(), 0);
        let fit = fit_lasso(&data, &LassoConfig::lasso(lmax * 0.9)).unwrap();
        assert!(fit.weights.nnz() > 0);
    }

    #[test]
    fn objective_never_increases_across_sweeps() {
        for s in 0..10 {
            let data = random_dataset(10, 40, 100 + s);
            for &alpha in &[1.0, 0.5] {
                let lmax = lambda_max(&data, alpha, false);
                let config = LassoConfig {
                    alpha,
                    lambda: 0.05 * lmax,
                    record_objective: true,
                    ..Default::default()
                };
                let fit = fit_lasso(&data, &config).unwrap();
                assert!(fit.converged);
                for pair in fit.objective_history.windows(2) {
                    assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-15, "{pair:?}");
                }
            }
        }
    }

    #[test]
    fn standardized_zero_variance_column_is_skipped() {
        let x = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [4.0, 5.0]];
        let y = array![1.0, 2.0, 2.5, 4.5];
        let data = Dataset::new(x, y).unwrap();
        let config = LassoConfig {
            lambda: 0.01,
            standardize: true,
            ..Default::default()
        };
        let fit = fit_lasso(&data, &config).unwrap();
        assert_eq!(fit.skipped_columns, vec![1]);
        assert_eq!(fit.weights[1], 0.0);
        assert!(fit.weights[0] > 0.0);
    }

    #[test]
    fn exhausted_sweeps_are_flagged() {
        let data = random_dataset(6, 30, 9);
        let config = LassoConfig {
            lambda: 1e-4,
            max_sweeps: 2,
            ..Default::default()
        };
        let fit = fit_lasso(&data, &config).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.sweeps, 2);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let data = random_dataset(4, 2, 1);
        for config in [
            LassoConfig { alpha: 1.5, ..Default::default() },
            LassoConfig { lambda: -1.0, ..Default::default() },
            LassoConfig { tolerance: 0.0, ..Default::default() },
            LassoConfig { max_sweeps: 0, ..Default::default() },
        ] {
            assert!(matches!(fit_lasso(&data, &config), Err(Error::Invalid(_))));
        }
    }

    #[test]
    fn grid_is_log_spaced_and_descending() {
        let g = lambda_grid(2.0, 100);
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 2.0);
        assert!((g[99] - 2e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
        let ratio = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - ratio).abs() < 1e-12));
    }

    #[test]
    fn folds_are_balanced() {
        let a = fold_assignment(23, 10, 5);
        for k in 0..10 {
            let c = a.iter().filter(|&&f| f == k).count();
            assert!(c == 2 || c == 3);
        }
        assert_eq!(a, fold_assignment(23, 10, 5));
    }

    #[test]
    fn cv_tie_goes_to_larger_penalty() {
        let data = random_dataset(12, 5, 21);
        // both penalties exceed every fold's zero threshold, so both fits are
        // all-zero and the errors tie exactly
        let big = 100.0 * lambda_max(&data, 1.0, false);
        let options = CvOptions { folds: 3, ..Default::default() };
        let errors = cv_errors_on_grid(&data, &[2.0 * big, big], &options).unwrap();
        assert_eq!(errors[0], errors[1]);
    }

    #[test]
    fn cv_preconditions() {
        let data = random_dataset(5, 3, 2);
        let options = CvOptions { folds: 6, ..Default::default() };
        assert!(matches!(cv_select_lambda(&data, &options), Err(Error::Invalid(_))));
        let options = CvOptions { folds: 5, grid_size: 1, ..Default::default() };
        assert!(matches!(cv_select_lambda(&data, &options), Err(Error::Invalid(_))));
        let zero = Dataset::new(Array2::ones((5, 3)), Array1::zeros(5)).unwrap();
        let options = CvOptions { folds: 5, ..Default::default() };
        assert!(matches!(cv_select_lambda(&zero, &options), Err(Error::DegenerateResponse)));
        let fit = CrossValidated(options).estimate(&zero, 0).unwrap();
        assert_eq!(fit.weights.nnz(), 0);
    }

    #[test]
    fn cv_is_deterministic() {
        let data = random_dataset(20, 30, 77);
        let options = CvOptions { folds: 5, grid_size: 30, seed: 4, ..Default::default() };
        let a = cv_select_lambda(&data, &options).unwrap();
        let b = cv_select_lambda(&data, &options).unwrap();
        assert_eq!(a, b);
        let best = a.index_of_min();
        assert!(a.mean_cv_error.iter().all(|&e| e >= a.mean_cv_error[best]));
    }

    #[test]
    fn ridge_limit_matches_normal_equations() {
        // alpha = 0, one column: w = (x.y/n) / (x.x/n + lambda)
        let x = array![[1.0], [-2.0], [0.5], [3.0]];
        let y = array![0.3, -1.0, 0.8, 2.0];
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let config = LassoConfig { alpha: 0.0, lambda: 0.7, ..Default::default() };
        let fit = fit_lasso(&data, &config).unwrap();
        let n = 4.0;
        let expected = (x.column(0).dot(&y) / n) / (x.column(0).dot(&x.column(0)) / n + 0.7);
        assert!((fit.weights[0] - expected).abs() < 1e-12);
    }
}
