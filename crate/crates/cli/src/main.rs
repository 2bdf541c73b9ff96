//! `elicit`: run simulated expert-feedback experiments from the command line.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use elicit_core::elicitation::theorem::estimate_theorem_conditions;
use elicit_core::elicitation::{StrategyKind, StrategySpec};
use elicit_core::experiment::{
    self, DataSource, ExperimentConfig, ExperimentResult, InitialEstimator, LossCurve, RealDataSource, SemMode,
};
use elicit_core::plot;
use elicit_core::realdata::{self, ExpressionTable, PseudoGroundTruth, ResponseTable};
use elicit_core::synthgen::{PoolResampler, Scenario, SyntheticConfig, SyntheticInstance};
use elicit_core::Error;

const DEFAULT_NOISE_GRID: &str = "0.1,0.2,0.3,0.4,0.5";
const DEFAULT_SUBSET_GRID: &str = "0.9,0.7,0.5";

#[derive(Parser, Debug)]
#[command(name = "elicit", version, about = "Simulated expert feedback for small-n, large-p regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run strategy comparisons on simulated data.
    RunSynthetic(RunSynthetic),
    /// Run strategy comparisons on expression / drug-response tables.
    RunReal(RunReal),
    /// Learn and cache the pseudo-ground-truth weights used by run-real.
    LearnGroundTruth(LearnGroundTruth),
    /// Check the conditions under which querying the largest-product feature is optimal.
    CheckTheorem(CheckTheorem),
    /// Render SVG charts from a results CSV.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct RunOptions {
    /// Master seed; all randomness derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of repetitions (at least 2).
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Largest number of expert queries.
    #[arg(long, default_value_t = 10)]
    budget: usize,
    /// Worker threads; never changes the output.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Results CSV path.
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
    /// Also write one SVG chart per (n, noise, fraction) cell into this directory.
    #[arg(long, value_name = "DIR")]
    plot: Option<PathBuf>,
    /// Training-set sizes.
    #[arg(long = "n", value_delimiter = ',', default_value = "5,10,15,20,25,30")]
    n: Vec<usize>,
    /// Expert noise variances. Without a value the grid 0.1,...,0.5 is used; omitted means an exact expert.
    #[arg(long, value_delimiter = ',', num_args = 0..=1, default_missing_value = DEFAULT_NOISE_GRID)]
    noise: Option<Vec<f64>>,
    /// Fractions of features the expert knows. Without a value the grid 0.9,0.7,0.5 is used.
    /// Adds the mask-aware largest_product_subset strategy.
    #[arg(long, value_delimiter = ',', num_args = 0..=1, default_missing_value = DEFAULT_SUBSET_GRID)]
    subset: Option<Vec<f64>>,
    /// Apply the knowledge mask to every strategy, not only the mask-aware ones.
    #[arg(long)]
    mask_all: bool,
    /// Strategies to compare (default: no_interaction,random,largest_target,largest_product).
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<StrategySpec>>,
    /// Fit the initial estimate at this fixed penalty instead of cross-validating.
    #[arg(long)]
    lambda: Option<f64>,
    /// Exit with code 3 if any initial fit stops at the sweep limit.
    #[arg(long)]
    strict_convergence: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ScenarioArg {
    Shared,
    PerPatient,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Shared => Scenario::SharedTheta,
            ScenarioArg::PerPatient => Scenario::PerPatientTheta,
        }
    }
}

#[derive(Args, Debug)]
struct GeneratorOptions {
    #[arg(long, value_enum, default_value = "shared")]
    scenario: ScenarioArg,
    /// Number of features.
    #[arg(long, default_value_t = 150)]
    p: usize,
    /// Number of nonzero true weights.
    #[arg(long, default_value_t = 5)]
    sparsity: usize,
    /// Size of the feature pool training rows are drawn from.
    #[arg(long, default_value_t = 1000)]
    pool: usize,
    /// Observation noise variance.
    #[arg(long, default_value_t = 1.0)]
    obs_noise: f64,
    /// Bound on the distance between two patients' weights (per-patient scenario).
    #[arg(long, default_value_t = 0.5)]
    theta_dist: f64,
}

impl GeneratorOptions {
    fn config(&self, n_train: usize, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            pool_size: self.pool,
            p: self.p,
            s: self.sparsity,
            n_train,
            obs_noise_variance: self.obs_noise,
            scenario: self.scenario.into(),
            max_pairwise_theta_distance: self.theta_dist,
            seed,
            ..SyntheticConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct RunSynthetic {
    #[command(flatten)]
    generator: GeneratorOptions,
    #[command(flatten)]
    run: RunOptions,
}

#[derive(Args, Debug)]
struct TableOptions {
    /// Expression CSV (`cell_line,<genes...>`, optional `#scale=raw|log2` line).
    #[arg(long)]
    expr: PathBuf,
    /// Response CSV (`cell_line,drug,log_ic50`).
    #[arg(long)]
    resp: PathBuf,
    /// Optional gene filter, one gene id per line.
    #[arg(long)]
    genes: Option<PathBuf>,
    /// Pseudo-ground-truth cache directory.
    #[arg(long)]
    cache: PathBuf,
    /// Drugs to use (default: all).
    #[arg(long, value_delimiter = ',')]
    drugs: Option<Vec<String>>,
    /// Cell lines to use (default: all with data).
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<String>>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SemOver {
    Repetitions,
    Pairs,
}

#[derive(Args, Debug)]
struct RunReal {
    #[command(flatten)]
    tables: TableOptions,
    #[command(flatten)]
    run: RunOptions,
    /// Drugs sampled per repetition.
    #[arg(long, default_value_t = 10)]
    drugs_per_rep: usize,
    /// Target cell lines sampled per repetition.
    #[arg(long, default_value_t = 10)]
    cells_per_rep: usize,
    /// What the standard error is computed over.
    #[arg(long, value_enum, default_value = "repetitions")]
    sem_over: SemOver,
}

#[derive(Args, Debug)]
struct LearnGroundTruth {
    #[command(flatten)]
    tables: TableOptions,
    /// Seed for the cross-validation folds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Learn one weight vector per drug from all cell lines instead of one per held-out cell line.
    #[arg(long)]
    per_drug: bool,
}

#[derive(Args, Debug)]
struct CheckTheorem {
    #[command(flatten)]
    generator: GeneratorOptions,
    /// Training-set size.
    #[arg(long = "n", default_value_t = 10)]
    n: usize,
    /// Number of resampled training sets (at least 2).
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    /// Fixed penalty for the estimator (default: cross-validated).
    #[arg(long)]
    lambda: Option<f64>,
    /// Seed for the generator and the resampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; never changes the output.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Per-feature CSV report path.
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Results CSV written by run-synthetic or run-real.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for the SVG files.
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
    NotConverged(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(Error::Io(_)) => 2,
            Failure::Core(Error::Numerical(_) | Error::DegenerateResponse) | Failure::NotConverged(_) => 3,
            Failure::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::NotConverged(k) => write!(f, "{k} initial fits did not converge (--strict-convergence)"),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Core(Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn strategies(run: &RunOptions) -> Vec<StrategySpec> {
    let mut list = run
        .strategies
        .clone()
        .unwrap_or_else(|| StrategyKind::ALL.iter().map(|&k| StrategySpec::new(k)).collect());
    let subset = StrategySpec::subset_aware(StrategyKind::LargestProductFeature);
    if run.subset.is_some() && !list.contains(&subset) {
        list.push(subset);
    }
    list
}

fn experiment_config(source: DataSource, run: &RunOptions) -> ExperimentConfig {
    ExperimentConfig {
        source,
        n_train_grid: run.n.clone(),
        budget_max: run.budget,
        strategies: strategies(run),
        noise_grid: run.noise.clone().unwrap_or_else(|| vec![0.0]),
        knowledge_grid: run.subset.clone().unwrap_or_else(|| vec![1.0]),
        mask_all_strategies: run.mask_all,
        repetitions: run.reps,
        master_seed: run.seed,
        workers: run.workers,
        estimator: run.lambda.map_or_else(InitialEstimator::default, InitialEstimator::FixedPenalty),
    }
}

fn fmt_value(v: f64) -> String {
    v.to_string().replace('.', "p")
}

fn write_plots(dir: &Path, scenario: &str, curves: &[LossCurve]) -> Result<usize, Failure> {
    fs::create_dir_all(dir)?;
    let mut written = 0;
    let mut seen: Vec<(usize, f64, f64)> = Vec::new();
    for c in curves {
        let cell = (c.key.n_train, c.key.noise_variance, c.key.knowledge_fraction);
        if seen.contains(&cell) {
            continue;
        }
        seen.push(cell);
        let group: Vec<&LossCurve> = curves
            .iter()
            .filter(|o| (o.key.n_train, o.key.noise_variance, o.key.knowledge_fraction) == cell)
            .collect();
        let title = format!(
            "{scenario}: n = {}, expert noise = {}, known = {}",
            cell.0, cell.1, cell.2
        );
        let name = format!("{scenario}_n{}_noise{}_known{}.svg", cell.0, fmt_value(cell.1), fmt_value(cell.2));
        let mut out = create(&dir.join(name))?;
        out.write_all(plot::render_svg(&title, &group).as_bytes())?;
        out.flush()?;
        written += 1;
    }
    Ok(written)
}

fn finish_run(result: &ExperimentResult, run: &RunOptions) -> CmdResult {
    let mut out = create(&run.out)?;
    result.write_csv(&mut out)?;
    out.flush()?;
    log::info!("wrote {}", run.out.display());
    if let Some(dir) = &run.plot {
        let n = write_plots(dir, &result.scenario, &result.curves)?;
        log::info!("wrote {n} charts to {}", dir.display());
    }
    if run.strict_convergence && result.nonconverged_fits > 0 {
        return Err(Failure::NotConverged(result.nonconverged_fits));
    }
    Ok(())
}

fn run_synthetic(cmd: &RunSynthetic) -> CmdResult {
    let n_max = cmd.run.n.iter().copied().max().unwrap_or(0);
    let source = DataSource::Synthetic(cmd.generator.config(n_max, cmd.run.seed));
    let config = experiment_config(source, &cmd.run);
    let result = experiment::run_experiment(&config)?;
    finish_run(&result, &cmd.run)
}

struct Tables {
    expr: ExpressionTable,
    resp: ResponseTable,
}

fn load_tables(opts: &TableOptions) -> Result<Tables, Failure> {
    let mut expr = realdata::load_expression(&opts.expr)?;
    if let Some(path) = &opts.genes {
        let genes = realdata::load_gene_filter(path)?;
        expr = expr.restrict_genes(&genes)?;
    }
    let resp = realdata::load_responses(&opts.resp)?;
    Ok(Tables { expr, resp })
}

fn check_drugs(drugs: &[String], available: &[String], what: &str) -> CmdResult {
    for d in drugs {
        if !available.contains(d) {
            return Err(Failure::Usage(format!("drug '{d}' not found in {what}")));
        }
    }
    Ok(())
}

fn check_cells(cells: &[String], expr: &ExpressionTable) -> CmdResult {
    for c in cells {
        if expr.row_index(c).is_none() {
            return Err(Failure::Usage(format!("cell line '{c}' not found in the expression table")));
        }
    }
    Ok(())
}

fn learn_ground_truth(cmd: &LearnGroundTruth) -> CmdResult {
    let Tables { expr, resp } = load_tables(&cmd.tables)?;
    let drugs = cmd.tables.drugs.clone().unwrap_or_else(|| resp.drugs());
    check_drugs(&drugs, &resp.drugs(), "the response table")?;
    if let Some(cells) = &cmd.tables.cells {
        check_cells(cells, &expr)?;
    }
    let mut pgt = PseudoGroundTruth::new(expr.gene_ids().to_vec());
    for drug in &drugs {
        let cells = match &cmd.tables.cells {
            Some(c) => c.clone(),
            None => realdata::responsive_cell_lines(&expr, &resp, drug, None),
        };
        let learned = experiment::with_workers(cmd.workers, || {
            realdata::learn_all(&expr, &resp, std::slice::from_ref(drug), &cells, cmd.per_drug, cmd.seed)
        })??;
        for e in learned.entries() {
            pgt.insert(e.clone())?;
        }
        log::info!("learned {drug}");
    }
    realdata::write_cache(&cmd.tables.cache, &pgt)?;
    println!("wrote {} entries for {} drugs to {}", pgt.len(), drugs.len(), cmd.tables.cache.display());
    Ok(())
}

fn run_real(cmd: &RunReal) -> CmdResult {
    if !cmd.tables.cache.is_dir() {
        return Err(Failure::Core(Error::Io(io::Error::new(
            io::ErrorKind::NotFound,
            format!(
                "pseudo-ground-truth cache '{}' not found; run `elicit learn-ground-truth` first",
                cmd.tables.cache.display()
            ),
        ))));
    }
    let Tables { expr, resp } = load_tables(&cmd.tables)?;
    let ground_truth = realdata::read_cache(&cmd.tables.cache)?;
    if ground_truth.is_empty() {
        return Err(Failure::Usage(format!(
            "cache '{}' is empty; run `elicit learn-ground-truth` first",
            cmd.tables.cache.display()
        )));
    }
    let drugs = cmd.tables.drugs.clone().unwrap_or_else(|| ground_truth.drugs());
    check_drugs(&drugs, &resp.drugs(), "the response table")?;
    check_drugs(&drugs, &ground_truth.drugs(), "the pseudo-ground-truth cache")?;
    let cells = match &cmd.tables.cells {
        Some(c) => {
            check_cells(c, &expr)?;
            c.clone()
        }
        None => {
            // every cell line that can be a target for every chosen drug
            let mut common: Option<BTreeSet<String>> = None;
            for d in &drugs {
                let ok: BTreeSet<String> = expr
                    .cell_line_ids()
                    .iter()
                    .filter(|c| ground_truth.get(d, c).is_some())
                    .cloned()
                    .collect();
                common = Some(match common {
                    None => ok,
                    Some(prev) => prev.intersection(&ok).cloned().collect(),
                });
            }
            let cells: Vec<String> = common.unwrap_or_default().into_iter().collect();
            if cells.is_empty() {
                return Err(Failure::Usage(
                    "no cell line has pseudo-ground truth for every chosen drug".to_string(),
                ));
            }
            cells
        }
    };
    let source = RealDataSource {
        expression: expr,
        responses: resp,
        ground_truth,
        drugs,
        cells,
        drugs_per_rep: cmd.drugs_per_rep,
        cells_per_rep: cmd.cells_per_rep,
        sem_mode: match cmd.sem_over {
            SemOver::Repetitions => SemMode::Repetitions,
            SemOver::Pairs => SemMode::Pairs,
        },
    };
    let config = experiment_config(DataSource::Real(Box::new(source)), &cmd.run);
    let result = experiment::run_experiment(&config)?;
    finish_run(&result, &cmd.run)
}

fn check_theorem(cmd: &CheckTheorem) -> CmdResult {
    let config = cmd.generator.config(cmd.n, cmd.seed);
    config.validate()?;
    let instance = SyntheticInstance::generate(&config)?;
    let estimator = match cmd.lambda {
        Some(l) => InitialEstimator::FixedPenalty(l),
        None => InitialEstimator::default(),
    };
    if let InitialEstimator::FixedPenalty(l) = estimator {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Failure::Usage(format!("--lambda must be finite and >= 0, got {l}")));
        }
    }
    let target = instance.target.clone();
    let sampler = PoolResampler { instance, config };
    let report = experiment::with_workers(cmd.workers, || {
        estimate_theorem_conditions(&sampler, estimator.build(false).as_ref(), &target, cmd.resamples, cmd.seed)
    })??;
    print!("{}", report.summary());
    if let Some(path) = &cmd.out {
        let mut out = create(path)?;
        report.write_csv(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn plot_cmd(cmd: &PlotArgs) -> CmdResult {
    let file = File::open(&cmd.input)
        .map_err(|e| Failure::Core(Error::Io(io::Error::new(e.kind(), format!("{}: {e}", cmd.input.display())))))?;
    let rows = experiment::read_results_csv(file, &cmd.input.display().to_string())?;
    if rows.is_empty() {
        return Err(Failure::Usage(format!("{} has no result rows", cmd.input.display())));
    }
    let mut scenarios: Vec<String> = rows.iter().map(|(s, _)| s.clone()).collect();
    scenarios.dedup();
    let mut total = 0;
    for scenario in scenarios {
        let curves: Vec<LossCurve> = rows
            .iter()
            .filter(|(s, _)| *s == scenario)
            .map(|(_, c)| c.clone())
            .collect();
        total += write_plots(&cmd.out, &scenario, &curves)?;
    }
    println!("wrote {total} charts to {}", cmd.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::RunSynthetic(c) => run_synthetic(c),
        Command::RunReal(c) => run_real(c),
        Command::LearnGroundTruth(c) => learn_ground_truth(c),
        Command::CheckTheorem(c) => check_theorem(c),
        Command::Plot(c) => plot_cmd(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
