//! Repeated, seeded elicitation experiments and their aggregation into
//! mean-loss curves with standard errors.
//!
//! Within one repetition every strategy and expert setting works from the
//! same initial estimate and the same target, so curves are paired
//! comparisons. Repetitions run on a worker pool but are aggregated in
//! repetition order, so the worker count never changes a result bit.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::WeightVector;
use crate::elicitation::{run_elicitation, ExpertModel, StrategyKind, StrategySpec, TargetCase};
use crate::error::{Error, Result};
use crate::realdata::{self, ExpressionTable, PseudoGroundTruth, ResponseTable};
use crate::regression::{CrossValidated, CvOptions, Estimator, FixedPenalty, LassoConfig, LassoFit};
use crate::seed::{self, float_id, str_id, stream};
use crate::synthgen::{SyntheticConfig, SyntheticInstance};

pub const RESULTS_HEADER: [&str; 9] = [
    "scenario",
    "strategy",
    "n_train",
    "noise_var",
    "knowledge_frac",
    "budget",
    "mean_loss",
    "sem",
    "reps",
];

/// How the initial estimate is fitted from the small training set.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialEstimator {
    /// Lasso with the penalty chosen by cross-validation on a log grid; the
    /// fold count is `min(max_folds, n_train)`.
    CrossValidated { max_folds: usize, grid_size: usize },
    /// Lasso at a fixed penalty.
    FixedPenalty(f64),
}

impl Default for InitialEstimator {
    fn default() -> Self {
        InitialEstimator::CrossValidated {
            max_folds: 10,
            grid_size: 100,
        }
    }
}

impl InitialEstimator {
    pub fn build(&self, standardize: bool) -> Box<dyn Estimator> {
        let fit = LassoConfig {
            standardize,
            ..LassoConfig::default()
        };
        match *self {
            InitialEstimator::CrossValidated { max_folds, grid_size } => Box::new(CrossValidated(CvOptions {
                folds: max_folds,
                grid_size,
                fit,
                ..CvOptions::default()
            })),
            InitialEstimator::FixedPenalty(lambda) => Box::new(FixedPenalty(LassoConfig { lambda, ..fit })),
        }
    }
}

/// What a standard error is computed over for real data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SemMode {
    /// One sample per repetition: the mean over that repetition's targets.
    #[default]
    Repetitions,
    /// One sample per (repetition, drug, cell line) pair.
    Pairs,
}

#[derive(Debug, Clone)]
pub struct RealDataSource {
    pub expression: ExpressionTable,
    pub responses: ResponseTable,
    pub ground_truth: PseudoGroundTruth,
    /// Candidate drugs and target cell lines; each repetition samples from them.
    pub drugs: Vec<String>,
    pub cells: Vec<String>,
    pub drugs_per_rep: usize,
    pub cells_per_rep: usize,
    pub sem_mode: SemMode,
}

#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Real(Box<RealDataSource>),
}

impl DataSource {
    pub fn scenario_name(&self) -> &'static str {
        match self {
            DataSource::Synthetic(c) => c.scenario.name(),
            DataSource::Real(_) => "real",
        }
    }

    fn p(&self) -> usize {
        match self {
            DataSource::Synthetic(c) => c.p,
            DataSource::Real(r) => r.expression.gene_ids().len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub n_train_grid: Vec<usize>,
    pub budget_max: usize,
    pub strategies: Vec<StrategySpec>,
    /// Expert feedback noise variances; `0` is an exact expert.
    pub noise_grid: Vec<f64>,
    /// Share of features the expert knows; the mask is redrawn every
    /// repetition.
    pub knowledge_grid: Vec<f64>,
    /// Apply the knowledge mask to strategies that do not respect it too.
    /// By default only mask-aware strategies face the restricted expert.
    pub mask_all_strategies: bool,
    pub repetitions: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub estimator: InitialEstimator,
}

impl ExperimentConfig {
    pub fn synthetic(config: SyntheticConfig) -> Self {
        ExperimentConfig {
            source: DataSource::Synthetic(config),
            n_train_grid: vec![5, 10, 15, 20, 25, 30],
            budget_max: 10,
            strategies: StrategyKind::ALL.iter().map(|&k| StrategySpec::new(k)).collect(),
            noise_grid: vec![0.0],
            knowledge_grid: vec![1.0],
            mask_all_strategies: false,
            repetitions: 100,
            master_seed: 0,
            workers: 1,
            estimator: InitialEstimator::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.source.p();
        if self.repetitions < 2 {
            return Err(Error::invalid(format!(
                "at least 2 repetitions are needed for a standard error, got {}",
                self.repetitions
            )));
        }
        if self.budget_max > p {
            return Err(Error::invalid(format!("budget {} exceeds p = {p}", self.budget_max)));
        }
        if self.strategies.is_empty() {
            return Err(Error::invalid("no strategies requested"));
        }
        if self.n_train_grid.is_empty() || self.noise_grid.is_empty() || self.knowledge_grid.is_empty() {
            return Err(Error::invalid("n_train, noise and knowledge grids must be non-empty"));
        }
        if let Some(f) = self.knowledge_grid.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::invalid(format!("knowledge fraction {f} is outside [0, 1]")));
        }
        if let Some(v) = self.noise_grid.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("noise variance {v} must be finite and >= 0")));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        if let Some(&n) = self.n_train_grid.iter().find(|&&n| n < 2) {
            return Err(Error::invalid(format!("n_train {n} is too small to fit an initial estimate (need >= 2)")));
        }
        match &self.estimator {
            InitialEstimator::CrossValidated { max_folds, grid_size } => {
                if *max_folds < 2 || *grid_size < 2 {
                    return Err(Error::invalid("cross-validation needs >= 2 folds and >= 2 grid points"));
                }
            }
            InitialEstimator::FixedPenalty(l) => {
                if !(*l >= 0.0 && l.is_finite()) {
                    return Err(Error::invalid(format!("fixed penalty {l} must be finite and >= 0")));
                }
            }
        }
        match &self.source {
            DataSource::Synthetic(c) => {
                c.validate()?;
                let n_max = *self.n_train_grid.iter().max().expect("non-empty");
                SyntheticConfig { n_train: n_max, ..c.clone() }.validate()?;
            }
            DataSource::Real(r) => {
                if r.drugs.is_empty() || r.cells.is_empty() {
                    return Err(Error::invalid("real-data experiment needs at least one drug and one cell line"));
                }
                if r.drugs_per_rep == 0 || r.cells_per_rep == 0 {
                    return Err(Error::invalid("drugs and cells per repetition must be positive"));
                }
                let n_max = *self.n_train_grid.iter().max().expect("non-empty");
                for drug in &r.drugs {
                    let available = realdata::responsive_cell_lines(&r.expression, &r.responses, drug, None).len();
                    if available < n_max + 1 {
                        return Err(Error::invalid(format!(
                            "drug '{drug}' has responses for {available} cell lines; n_train {n_max} plus a target needs {}",
                            n_max + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn cells(&self) -> Vec<CurveKey> {
        let mut keys = Vec::new();
        for &n_train in &self.n_train_grid {
            for &noise_variance in &self.noise_grid {
                for &knowledge_fraction in &self.knowledge_grid {
                    for s in &self.strategies {
                        keys.push(CurveKey {
                            strategy: s.name().to_string(),
                            n_train,
                            noise_variance,
                            knowledge_fraction,
                        });
                    }
                }
            }
        }
        keys
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveKey {
    pub strategy: String,
    pub n_train: usize,
    pub noise_variance: f64,
    pub knowledge_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub budget: usize,
    pub mean_loss: f64,
    pub sem: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossCurve {
    pub key: CurveKey,
    /// Budgets `0..=budget_max`.
    pub points: Vec<CurvePoint>,
}

impl LossCurve {
    pub fn at(&self, budget: usize) -> &CurvePoint {
        &self.points[budget]
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub scenario: String,
    pub curves: Vec<LossCurve>,
    /// Initial fits that stopped at the sweep limit (their last iterate was used).
    pub nonconverged_fits: usize,
}

impl ExperimentResult {
    pub fn curve(&self, strategy: &str, n_train: usize, noise_variance: f64, knowledge_fraction: f64) -> Option<&LossCurve> {
        self.curves.iter().find(|c| {
            c.key.strategy == strategy
                && c.key.n_train == n_train
                && c.key.noise_variance == noise_variance
                && c.key.knowledge_fraction == knowledge_fraction
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_results_csv(out, &self.scenario, &self.curves)
    }
}

/// Pointwise mean and standard error over equal-length trajectories,
/// summed in the given order.
pub fn aggregate(trajectories: &[Vec<f64>]) -> Result<Vec<CurvePoint>> {
    let reps = trajectories.len();
    if reps < 2 {
        return Err(Error::invalid(format!("need at least 2 trajectories, got {reps}")));
    }
    let len = trajectories[0].len();
    if let Some(t) = trajectories.iter().find(|t| t.len() != len) {
        return Err(Error::dims("trajectory length", len, t.len()));
    }
    let count = reps as f64;
    Ok((0..len)
        .map(|b| {
            let mean = trajectories.iter().map(|t| t[b]).sum::<f64>() / count;
            let ss = trajectories.iter().map(|t| (t[b] - mean).powi(2)).sum::<f64>();
            CurvePoint {
                budget: b,
                mean_loss: mean,
                sem: (ss / (count - 1.0)).sqrt() / count.sqrt(),
                reps,
            }
        })
        .collect())
}

/// `round(fraction * p)` known features, chosen uniformly.
fn knowledge_mask(p: usize, fraction: f64, seed_value: u64) -> Vec<bool> {
    let known = (fraction * p as f64).round() as usize;
    if known >= p {
        return vec![true; p];
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut seed::rng(seed_value));
    let mut mask = vec![false; p];
    for &i in &order[..known] {
        mask[i] = true;
    }
    mask
}

/// Per cell, the trajectories one repetition contributes.
type RepOutput = (Vec<Vec<Vec<f64>>>, usize);

struct Runner<'a> {
    config: &'a ExperimentConfig,
    estimator: Box<dyn Estimator>,
}

impl Runner<'_> {
    /// Elicitation for every (noise, fraction, strategy) cell of one
    /// `n_train`, pushing one trajectory per cell into `out` starting at
    /// `offset`.
    fn elicit_all(
        &self,
        rep_seed: u64,
        cell_seed: &[u64],
        theta_init: &WeightVector,
        target: &TargetCase,
        out: &mut [Vec<Vec<f64>>],
    ) -> Result<()> {
        let c = self.config;
        let p = target.p();
        let mut slot = 0;
        for &noise in &c.noise_grid {
            for &fraction in &c.knowledge_grid {
                let mask = knowledge_mask(p, fraction, seed::derive_seed(rep_seed, &[stream::MASK, float_id(fraction)]));
                let mut expert_id = vec![stream::EXPERT, float_id(noise), float_id(fraction)];
                expert_id.extend_from_slice(cell_seed);
                let expert = ExpertModel::exact(target.theta_star.clone())
                    .with_noise(noise, seed::derive_seed(rep_seed, &expert_id))?;
                let masked = expert.clone().with_mask(mask)?;
                for spec in &c.strategies {
                    let mut strategy_id = vec![stream::STRATEGY, spec.seed_id(), spec.rng_seed];
                    strategy_id.extend_from_slice(cell_seed);
                    let spec = spec.with_seed(seed::derive_seed(rep_seed, &strategy_id));
                    let who = if spec.respect_mask || c.mask_all_strategies { &masked } else { &expert };
                    let run = run_elicitation(theta_init, target, who, &spec, c.budget_max)?;
                    out[slot].push(run.trajectory);
                    slot += 1;
                }
            }
        }
        Ok(())
    }

    fn fit(&self, data: &crate::data::Dataset, seed_value: u64) -> Result<LassoFit> {
        self.estimator.estimate(data, seed_value)
    }

    fn cells_per_n(&self) -> usize {
        let c = self.config;
        c.noise_grid.len() * c.knowledge_grid.len() * c.strategies.len()
    }

    fn synthetic_rep(&self, base: &SyntheticConfig, r: usize) -> Result<RepOutput> {
        let c = self.config;
        let rep_seed = seed::derive_seed(c.master_seed, &[stream::REPETITION, r as u64]);
        let n_max = *c.n_train_grid.iter().max().expect("validated");
        let config = SyntheticConfig {
            seed: rep_seed,
            n_train: n_max,
            ..base.clone()
        };
        let instance = SyntheticInstance::generate(&config)?;
        let per_n = self.cells_per_n();
        let mut out = vec![Vec::with_capacity(1); per_n * c.n_train_grid.len()];
        let mut nonconverged = 0;
        for (ni, &n) in c.n_train_grid.iter().enumerate() {
            let data = instance.observations(&SyntheticConfig {
                n_train: n,
                ..config.clone()
            })?;
            let fit = self.fit(&data, seed::derive_seed(rep_seed, &[stream::CV, n as u64]))?;
            nonconverged += usize::from(!fit.converged);
            self.elicit_all(
                rep_seed,
                &[n as u64],
                &fit.weights,
                &instance.target,
                &mut out[ni * per_n..(ni + 1) * per_n],
            )?;
        }
        Ok((out, nonconverged))
    }

    fn real_rep(&self, source: &RealDataSource, targets: &[(String, String, TargetCase)], r: usize) -> Result<RepOutput> {
        let c = self.config;
        let rep_seed = seed::derive_seed(c.master_seed, &[stream::REPETITION, r as u64]);
        let mut rng = seed::rng(seed::derive_seed(rep_seed, &[stream::TARGET]));
        let mut drugs = source.drugs.clone();
        drugs.shuffle(&mut rng);
        drugs.truncate(source.drugs_per_rep);
        let mut cells = source.cells.clone();
        cells.shuffle(&mut rng);
        cells.truncate(source.cells_per_rep);

        let per_n = self.cells_per_n();
        let mut out = vec![Vec::new(); per_n * c.n_train_grid.len()];
        let mut nonconverged = 0;
        for drug in &drugs {
            for cell in &cells {
                let target = &targets
                    .iter()
                    .find(|(d, cl, _)| d == drug && cl == cell)
                    .expect("targets cover every candidate pair")
                    .2;
                let pair = [str_id(drug), str_id(cell)];
                for (ni, &n) in c.n_train_grid.iter().enumerate() {
                    let mut id = vec![stream::TRAINING, n as u64];
                    id.extend_from_slice(&pair);
                    let mut train_rng = seed::rng(seed::derive_seed(rep_seed, &id));
                    let data =
                        realdata::sample_training_set(&source.expression, &source.responses, drug, cell, n, &mut train_rng)?;
                    id[0] = stream::CV;
                    let fit = self.fit(&data, seed::derive_seed(rep_seed, &id))?;
                    nonconverged += usize::from(!fit.converged);
                    let cell_seed = [n as u64, pair[0], pair[1]];
                    self.elicit_all(rep_seed, &cell_seed, &fit.weights, target, &mut out[ni * per_n..(ni + 1) * per_n])?;
                }
            }
        }
        if source.sem_mode == SemMode::Repetitions {
            for samples in &mut out {
                let count = samples.len() as f64;
                let len = samples[0].len();
                let mean: Vec<f64> = (0..len)
                    .map(|b| samples.iter().map(|t| t[b]).sum::<f64>() / count)
                    .collect();
                *samples = vec![mean];
            }
        }
        Ok((out, nonconverged))
    }
}

/// Runs `f` on a dedicated pool of `workers` threads; parallel iterators
/// inside it are capped at that many threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Err(Error::invalid("workers must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every repetition and aggregates one curve per
/// (n_train, noise, knowledge fraction, strategy) cell, in that nesting order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (standardize, targets) = match &config.source {
        DataSource::Synthetic(_) => (false, Vec::new()),
        DataSource::Real(r) => {
            let mut targets = Vec::with_capacity(r.drugs.len() * r.cells.len());
            for drug in &r.drugs {
                for cell in &r.cells {
                    let case = realdata::build_target_cases(
                        &r.ground_truth,
                        &r.expression,
                        std::slice::from_ref(drug),
                        std::slice::from_ref(cell),
                    )?
                    .pop()
                    .expect("one pair gives one case");
                    targets.push((drug.clone(), cell.clone(), case));
                }
            }
            (true, targets)
        }
    };
    let runner = Runner {
        config,
        estimator: config.estimator.build(standardize),
    };
    let reps: Vec<RepOutput> = with_workers(config.workers, || {
        (0..config.repetitions)
            .into_par_iter()
            .map(|r| match &config.source {
                DataSource::Synthetic(base) => runner.synthetic_rep(base, r),
                DataSource::Real(source) => runner.real_rep(source, &targets, r),
            })
            .collect::<Result<_>>()
    })??;

    let keys = config.cells();
    let mut samples: Vec<Vec<Vec<f64>>> = vec![Vec::new(); keys.len()];
    let mut nonconverged_fits = 0;
    for (rep, nc) in reps {
        nonconverged_fits += nc;
        for (cell, trajectories) in rep.into_iter().enumerate() {
            samples[cell].extend(trajectories);
        }
    }
    let curves = keys
        .into_iter()
        .zip(samples)
        .map(|(key, s)| Ok(LossCurve { key, points: aggregate(&s)? }))
        .collect::<Result<_>>()?;
    if nonconverged_fits > 0 {
        log::warn!("{nonconverged_fits} initial fits hit the sweep limit");
    }
    Ok(ExperimentResult {
        scenario: config.source.scenario_name().to_string(),
        curves,
        nonconverged_fits,
    })
}

pub fn write_results_csv<W: Write>(out: W, scenario: &str, curves: &[LossCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(|e| Error::Io(e.into()))?;
    for curve in curves {
        for point in &curve.points {
            w.write_record([
                scenario.to_string(),
                curve.key.strategy.clone(),
                curve.key.n_train.to_string(),
                curve.key.noise_variance.to_string(),
                curve.key.knowledge_fraction.to_string(),
                point.budget.to_string(),
                point.mean_loss.to_string(),
                point.sem.to_string(),
                point.reps.to_string(),
            ])
            .map_err(|e| Error::Io(e.into()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a results CSV back into `(scenario, curve)` pairs, grouping
/// consecutive rows with the same key.
pub fn read_results_csv<R: Read>(input: R, source_name: &str) -> Result<Vec<(String, LossCurve)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != RESULTS_HEADER {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: 1,
            message: format!("expected header '{}'", RESULTS_HEADER.join(",")),
        });
    }
    let mut out: Vec<(String, LossCurve)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |field: &str| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: format!("cannot parse {field}"),
        };
        let key = CurveKey {
            strategy: record[1].to_string(),
            n_train: record[2].parse().map_err(|_| bad("n_train"))?,
            noise_variance: record[3].parse().map_err(|_| bad("noise_var"))?,
            knowledge_fraction: record[4].parse().map_err(|_| bad("knowledge_frac"))?,
        };
        let point = CurvePoint {
            budget: record[5].parse().map_err(|_| bad("budget"))?,
            mean_loss: record[6].parse().map_err(|_| bad("mean_loss"))?,
            sem: record[7].parse().map_err(|_| bad("sem"))?,
            reps: record[8].parse().map_err(|_| bad("reps"))?,
        };
        match out.last_mut() {
            Some((scenario, curve)) if *scenario == record[0] && curve.key == key => curve.points.push(point),
            _ => out.push((record[0].to_string(), LossCurve { key, points: vec![point] })),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{Scenario, TargetSource};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn tiny(scenario: Scenario) -> ExperimentConfig {
        ExperimentConfig {
            n_train_grid: vec![6],
            budget_max: 4,
            repetitions: 3,
            master_seed: 5,
            estimator: InitialEstimator::FixedPenalty(0.1),
            ..ExperimentConfig::synthetic(SyntheticConfig {
                pool_size: 40,
                p: 12,
                s: 3,
                scenario,
                ..Default::default()
            })
        }
    }

    #[test]
    fn aggregate_examples() {
        let pts = aggregate(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(pts[0].mean_loss, 1.0);
        assert!((pts[0].sem - 1.0).abs() < 1e-15);
        assert_eq!(pts[1].reps, 2);

        let pts = aggregate(&vec![vec![0.3, 0.1]; 5]).unwrap();
        assert!(pts.iter().all(|p| p.sem == 0.0));

        assert!(aggregate(&[vec![1.0]]).is_err());
        assert!(aggregate(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn sem_of_standard_normal_samples() {
        let mut rng = seed::rng(2024);
        let samples: Vec<Vec<f64>> = (0..1000).map(|_| vec![rng.sample(StandardNormal)]).collect();
        let sem = aggregate(&samples).unwrap()[0].sem;
        let expected = 1.0 / 1000f64.sqrt();
        assert!((sem - expected).abs() < 0.2 * expected, "sem {sem}");
    }

    #[test]
    fn budget_zero_is_mean_of_initial_losses() {
        let config = ExperimentConfig {
            budget_max: 0,
            repetitions: 2,
            strategies: vec![StrategySpec::new(StrategyKind::LargestProductFeature)],
            ..tiny(Scenario::SharedTheta)
        };
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.curves.len(), 1);
        assert_eq!(result.curves[0].points.len(), 1);
        let flat = ExperimentConfig {
            strategies: vec![StrategySpec::new(StrategyKind::NoInteraction)],
            ..config
        };
        let other = run_experiment(&flat).unwrap();
        assert_eq!(result.curves[0].points[0], other.curves[0].points[0]);
    }

    #[test]
    fn no_interaction_curve_is_flat() {
        let result = run_experiment(&tiny(Scenario::PerPatientTheta)).unwrap();
        let c = result.curve("no_interaction", 6, 0.0, 1.0).unwrap();
        assert!(c.points.iter().all(|p| p.mean_loss == c.points[0].mean_loss));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let one = run_experiment(&tiny(Scenario::SharedTheta)).unwrap();
        let many = run_experiment(&ExperimentConfig { workers: 4, ..tiny(Scenario::SharedTheta) }).unwrap();
        assert_eq!(one.curves, many.curves);
    }

    #[test]
    fn validation_catches_infeasible_configs() {
        let base = tiny(Scenario::SharedTheta);
        for bad in [
            ExperimentConfig { budget_max: 13, ..base.clone() },
            ExperimentConfig { repetitions: 1, ..base.clone() },
            ExperimentConfig { knowledge_grid: vec![1.2], ..base.clone() },
            ExperimentConfig { noise_grid: vec![-0.1], ..base.clone() },
            ExperimentConfig { n_train_grid: vec![41], ..base.clone() },
            ExperimentConfig { workers: 0, ..base.clone() },
        ] {
            assert!(matches!(run_experiment(&bad), Err(Error::Invalid(_))));
        }
    }

    #[test]
    fn masks_have_requested_size() {
        let m = knowledge_mask(150, 0.7, 3);
        assert_eq!(m.iter().filter(|&&b| b).count(), 105);
        assert!(knowledge_mask(10, 1.0, 3).iter().all(|&b| b));
        assert!(knowledge_mask(10, 0.0, 3).iter().all(|&b| !b));
    }

    #[test]
    fn results_csv_round_trips() {
        let result = run_experiment(&tiny(Scenario::SharedTheta)).unwrap();
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 5);
        let back = read_results_csv(buf.as_slice(), "r").unwrap();
        let curves: Vec<LossCurve> = back.into_iter().map(|(_, c)| c).collect();
        assert_eq!(curves, result.curves);
    }

    #[test]
    fn held_out_pool_targets_work() {
        let mut config = tiny(Scenario::PerPatientTheta);
        if let DataSource::Synthetic(s) = &mut config.source {
            s.target_source = TargetSource::HeldOutPoolRow;
        }
        assert!(run_experiment(&config).is_ok());
    }
}
