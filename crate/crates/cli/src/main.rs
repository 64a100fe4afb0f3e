//! Command-line front end.
//!
//! Every long flag has a same-named (underscored) key in the optional
//! `--config` JSON file; explicit flags beat file keys, and built-in
//! defaults apply last. All randomness is seeded, so rerunning a command
//! with the same inputs reproduces every artifact byte for byte.
//!
//! Errors leave on stderr as a single JSON line and set the exit status:
//! 2 for configuration and input problems, 3 when the requested loss bound
//! admits no model, 4 for numerical failure.

mod commands;
mod config;
mod error;
mod ingest;
mod model;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{load_file_config, pick, BackgroundSpec, EpsilonSpec, FileConfig, SplitSpec};
use error::{CliError, Result};
use rashomon_core::forest::LossKind;

const DEFAULT_OUT: &str = "out";
const DEFAULT_STEPS: usize = 200;
const DEFAULT_BASIS: &str = "linear";
const DEFAULT_KERNEL: &str = "gaussian:1.0";
const DEFAULT_LAMBDA: f64 = 1e-3;
const DEFAULT_TREES: usize = 100;
const DEFAULT_MIN_LEAF: usize = 1;
const DEFAULT_GRID: usize = 20;
const DEFAULT_FOLDS: usize = 5;

/// What every model in an admissible family agrees on.
#[derive(Parser)]
#[command(name = "rashomon", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit an additive model (linear or spline basis per column)
    FitAdditive(FitAdditiveCli),
    /// Fit kernel ridge regression
    FitKernel(FitKernelCli),
    /// Grid-search kernel hyperparameters by k-fold cross-validation
    TuneKernel(TuneKernelCli),
    /// Train a pool of bagged trees
    FitForest(FitForestCli),
    /// Wrap an externally trained tree pool for the explanation commands
    ImportForest(ImportForestCli),
    /// Emit consensus statements, importance order and attribution ranges
    Explain(ExplainCli),
    /// Sweep the loss bound and report the consensus utility at each value
    UtilityCurve(UtilityCurveCli),
    /// Worst-case sub-ensemble loss per size, and the smallest admissible size
    CurveEpsilonPlus(CurveEpsilonPlusCli),
}

#[derive(Args)]
struct CommonCli {
    /// JSON file whose keys mirror the long flags; flags win on conflict
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Table ingestion flags shared by the fitting commands.
#[derive(Args)]
struct TableCli {
    #[command(flatten)]
    common: CommonCli,
    /// Training table: CSV with a header row
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Target column name
    #[arg(long, value_name = "NAME")]
    target: Option<String>,
    /// Comma-separated categorical columns, one-hot encoded on load
    #[arg(long, value_name = "COLS", value_delimiter = ',')]
    categorical: Option<Vec<String>>,
    /// Master seed for anything randomized [default: 0]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitCli {
    #[command(flatten)]
    table: TableCli,
    /// Hold out a seeded test side; the value is the training share
    #[arg(long, value_name = "RATIO", num_args = 0..=1, default_missing_value = "0.8")]
    split: Option<f64>,
}

/// Merges table flags with the config file. `split_flag` is the raw
/// command-line value; `honor_file_split` is false for commands that never
/// split (cross-validation brings its own folds).
fn resolve_table(
    t: &TableCli,
    split_flag: Option<f64>,
    honor_file_split: bool,
) -> Result<(commands::DataArgs, FileConfig)> {
    let cfg = load_file_config(t.common.config.as_deref())?;
    let seed = pick(t.seed, cfg.seed).unwrap_or(0);
    let ratio = if honor_file_split {
        pick(split_flag, cfg.split)
    } else {
        split_flag
    };
    let split = ratio.map(|r| SplitSpec::new(r, seed)).transpose()?;
    let args = commands::DataArgs {
        data: pick(t.data.clone(), cfg.data.clone())
            .ok_or_else(|| CliError::config("--data is required"))?,
        target: pick(t.target.clone(), cfg.target.clone())
            .ok_or_else(|| CliError::config("--target is required"))?,
        categorical: pick(t.categorical.clone(), cfg.categorical.clone()).unwrap_or_default(),
        out: pick(t.common.out.clone(), cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        seed,
        split,
    };
    Ok((args, cfg))
}

#[derive(Args)]
struct FitAdditiveCli {
    #[command(flatten)]
    fit: FitCli,
    /// Per-column basis: linear, or spline:DEGREE:KNOTS [default: linear]
    #[arg(long, value_name = "SPEC")]
    basis: Option<String>,
}

impl FitAdditiveCli {
    fn resolve(&self) -> Result<commands::FitAdditiveArgs> {
        let (data, cfg) = resolve_table(&self.fit.table, self.fit.split, true)?;
        Ok(commands::FitAdditiveArgs {
            data,
            basis: pick(self.basis.clone(), cfg.basis.clone())
                .unwrap_or_else(|| DEFAULT_BASIS.to_string()),
        })
    }
}

#[derive(Args)]
struct FitKernelCli {
    #[command(flatten)]
    fit: FitCli,
    /// Kernel: gaussian:GAMMA or poly:GAMMA:DEGREE [default: gaussian:1.0]
    #[arg(long, value_name = "SPEC")]
    kernel: Option<String>,
    /// Ridge strength [default: 0.001]
    #[arg(long, value_name = "L")]
    lambda: Option<f64>,
}

impl FitKernelCli {
    fn resolve(&self) -> Result<commands::FitKernelArgs> {
        let (data, cfg) = resolve_table(&self.fit.table, self.fit.split, true)?;
        Ok(commands::FitKernelArgs {
            data,
            kernel: pick(self.kernel.clone(), cfg.kernel.clone())
                .unwrap_or_else(|| DEFAULT_KERNEL.to_string()),
            lambda: pick(self.lambda, cfg.lambda).unwrap_or(DEFAULT_LAMBDA),
        })
    }
}

#[derive(Args)]
struct TuneKernelCli {
    #[command(flatten)]
    table: TableCli,
    /// Comma-separated kernel width candidates
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Comma-separated ridge strength candidates
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Cross-validation folds [default: 5]
    #[arg(long, value_name = "K")]
    folds: Option<usize>,
    /// Polynomial degree; Gaussian kernel when omitted
    #[arg(long, value_name = "P")]
    degree: Option<u32>,
}

impl TuneKernelCli {
    fn resolve(&self) -> Result<commands::TuneKernelArgs> {
        let (data, cfg) = resolve_table(&self.table, None, false)?;
        Ok(commands::TuneKernelArgs {
            data,
            gammas: pick(self.gammas.clone(), cfg.gammas.clone()).unwrap_or_default(),
            lambdas: pick(self.lambdas.clone(), cfg.lambdas.clone()).unwrap_or_default(),
            folds: pick(self.folds, cfg.folds).unwrap_or(DEFAULT_FOLDS),
            degree: pick(self.degree, cfg.degree),
        })
    }
}

#[derive(Args)]
struct FitForestCli {
    #[command(flatten)]
    fit: FitCli,
    /// Number of bagged trees [default: 100]
    #[arg(long, value_name = "M")]
    trees: Option<usize>,
    /// Depth cap per tree [default: unlimited]
    #[arg(long, value_name = "D")]
    max_depth: Option<usize>,
    /// Minimum rows per leaf [default: 1]
    #[arg(long, value_name = "N")]
    min_leaf: Option<usize>,
    /// Columns sampled per split [default: all]
    #[arg(long, value_name = "K")]
    max_features: Option<usize>,
    /// regression or classification [default: regression]
    #[arg(long, value_name = "TASK")]
    task: Option<String>,
    /// Player partition NAME=COL+COL;... [default: one per original column]
    #[arg(long, value_name = "SPEC")]
    groups: Option<String>,
    /// Admissibility loss: squared or zero-one [default: by task]
    #[arg(long, value_name = "KIND")]
    loss: Option<String>,
}

impl FitForestCli {
    fn resolve(&self) -> Result<commands::FitForestArgs> {
        let (data, cfg) = resolve_table(&self.fit.table, self.fit.split, true)?;
        let task = match pick(self.task.clone(), cfg.task.clone()) {
            None => rashomon_core::forest::Task::Regression,
            Some(s) => commands::parse_task(&s)?,
        };
        Ok(commands::FitForestArgs {
            data,
            trees: pick(self.trees, cfg.trees).unwrap_or(DEFAULT_TREES),
            max_depth: pick(self.max_depth, cfg.max_depth),
            min_leaf: pick(self.min_leaf, cfg.min_leaf).unwrap_or(DEFAULT_MIN_LEAF),
            max_features: pick(self.max_features, cfg.max_features),
            task,
            groups: pick(self.groups.clone(), cfg.groups.clone()),
            loss: resolve_loss(self.loss.as_deref(), &cfg)?,
        })
    }
}

fn resolve_loss(flag: Option<&str>, cfg: &FileConfig) -> Result<Option<LossKind>> {
    pick(flag.map(str::to_string), cfg.loss.clone())
        .map(|s| commands::parse_loss(&s))
        .transpose()
}

#[derive(Args)]
struct ImportForestCli {
    #[command(flatten)]
    common: CommonCli,
    /// Forest JSON to import: a saved model or a bare tree pool
    #[arg(long, value_name = "PATH")]
    file: Option<PathBuf>,
    /// Optional table checked against the forest's encoded columns
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Target column recorded for later commands (bare pools only)
    #[arg(long, value_name = "NAME")]
    target: Option<String>,
    /// Categorical columns recorded for later commands (bare pools only)
    #[arg(long, value_name = "COLS", value_delimiter = ',')]
    categorical: Option<Vec<String>>,
}

impl ImportForestCli {
    fn resolve(&self) -> Result<commands::ImportForestArgs> {
        let cfg = load_file_config(self.common.config.as_deref())?;
        Ok(commands::ImportForestArgs {
            file: pick(self.file.clone(), cfg.file.clone())
                .ok_or_else(|| CliError::config("--file is required"))?,
            out: pick(self.common.out.clone(), cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            data: pick(self.data.clone(), cfg.data.clone()),
            target: pick(self.target.clone(), cfg.target.clone()),
            categorical: pick(self.categorical.clone(), cfg.categorical.clone())
                .unwrap_or_default(),
        })
    }
}

/// Flags naming a saved model and the table to read instances from.
#[derive(Args)]
struct ModelDataCli {
    #[command(flatten)]
    common: CommonCli,
    /// Saved model JSON produced by a fit or import command
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Data table; must re-encode to the model's columns
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
}

impl ModelDataCli {
    fn resolve(&self) -> Result<(PathBuf, PathBuf, PathBuf, FileConfig)> {
        let cfg = load_file_config(self.common.config.as_deref())?;
        let model = pick(self.model.clone(), cfg.model.clone())
            .ok_or_else(|| CliError::config("--model is required"))?;
        let data = pick(self.data.clone(), cfg.data.clone())
            .ok_or_else(|| CliError::config("--data is required"))?;
        let out = pick(self.common.out.clone(), cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok((model, data, out, cfg))
    }
}

/// The three ways to place the loss bound; mutually exclusive.
#[derive(Args)]
struct EpsilonCli {
    /// Absolute loss bound delimiting the admissible family
    #[arg(long, value_name = "E")]
    epsilon: Option<f64>,
    /// Loss bound as the family minimum plus this slack
    #[arg(long, value_name = "DELTA", conflicts_with = "epsilon")]
    epsilon_excess: Option<f64>,
    /// Loss bound as the family minimum times this factor
    #[arg(long, value_name = "FACTOR", conflicts_with_all = ["epsilon", "epsilon_excess"])]
    epsilon_mult: Option<f64>,
}

impl EpsilonCli {
    /// Any bound flag on the command line hides all bound keys in the file:
    /// the three idioms act as one setting.
    fn resolve(&self, cfg: &FileConfig) -> Result<Option<EpsilonSpec>> {
        if self.epsilon.is_some() || self.epsilon_excess.is_some() || self.epsilon_mult.is_some()
        {
            EpsilonSpec::from_options(self.epsilon, self.epsilon_excess, self.epsilon_mult)
        } else {
            EpsilonSpec::from_options(cfg.epsilon, cfg.epsilon_excess, cfg.epsilon_mult)
        }
    }

    fn require(&self, cfg: &FileConfig) -> Result<EpsilonSpec> {
        self.resolve(cfg)?.ok_or_else(|| {
            CliError::config(
                "a loss bound is required: --epsilon, --epsilon-excess or --epsilon-mult",
            )
        })
    }
}

#[derive(Args)]
struct ExplainCli {
    #[command(flatten)]
    md: ModelDataCli,
    #[command(flatten)]
    eps: EpsilonCli,
    /// Comma-separated 0-based row indices to explain
    #[arg(long, value_name = "ROWS", value_delimiter = ',')]
    instances: Option<Vec<usize>>,
    /// Attribution background: full, sample:SIZE:SEED or row:INDEX
    /// [default: full; kernel models need row:INDEX]
    #[arg(long, value_name = "SPEC")]
    background: Option<String>,
    /// Path-integral resolution for kernel attributions [default: 200]
    #[arg(long, value_name = "Q")]
    steps: Option<usize>,
    /// Robustness margin added to every certification threshold [default: 0]
    #[arg(long, value_name = "ETA")]
    margin: Option<f64>,
    /// Diagonal inflation rescuing degenerate geometry; never applied
    /// implicitly [default: 0]
    #[arg(long, value_name = "J")]
    jitter: Option<f64>,
    /// Forest admissibility loss: squared or zero-one [default: by task]
    #[arg(long, value_name = "KIND")]
    loss: Option<String>,
}

/// [`ExplainCli`] merged with the file config; the loss-bound sweep reuses it.
struct ExplainCommon {
    model: PathBuf,
    data: PathBuf,
    out: PathBuf,
    instances: Vec<usize>,
    epsilon: EpsilonSpec,
    background: BackgroundSpec,
    steps: usize,
    margin: f64,
    jitter: f64,
    loss: Option<LossKind>,
    cfg: FileConfig,
}

impl ExplainCli {
    fn resolve_common(&self) -> Result<ExplainCommon> {
        let (model, data, out, cfg) = self.md.resolve()?;
        let epsilon = self.eps.require(&cfg)?;
        let background = match pick(self.background.clone(), cfg.background.clone()) {
            None => BackgroundSpec::Full,
            Some(s) => BackgroundSpec::parse(&s)?,
        };
        Ok(ExplainCommon {
            model,
            data,
            out,
            instances: pick(self.instances.clone(), cfg.instances.clone()).unwrap_or_default(),
            epsilon,
            background,
            steps: pick(self.steps, cfg.steps).unwrap_or(DEFAULT_STEPS),
            margin: pick(self.margin, cfg.margin).unwrap_or(0.0),
            jitter: pick(self.jitter, cfg.jitter).unwrap_or(0.0),
            loss: resolve_loss(self.loss.as_deref(), &cfg)?,
            cfg,
        })
    }

    fn resolve(&self) -> Result<commands::ExplainArgs> {
        let c = self.resolve_common()?;
        Ok(commands::ExplainArgs {
            model: c.model,
            data: c.data,
            out: c.out,
            instances: c.instances,
            epsilon: c.epsilon,
            background: c.background,
            steps: c.steps,
            margin: c.margin,
            jitter: c.jitter,
            loss: c.loss,
        })
    }
}

#[derive(Args)]
struct UtilityCurveCli {
    #[command(flatten)]
    explain: ExplainCli,
    /// Number of loss bounds between the family minimum and the given bound
    /// [default: 20]
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
}

impl UtilityCurveCli {
    fn resolve(&self) -> Result<commands::UtilityCurveArgs> {
        let c = self.explain.resolve_common()?;
        Ok(commands::UtilityCurveArgs {
            model: c.model,
            data: c.data,
            out: c.out,
            instances: c.instances,
            epsilon: c.epsilon,
            grid: pick(self.grid, c.cfg.grid).unwrap_or(DEFAULT_GRID),
            margin: c.margin,
            background: c.background,
            steps: c.steps,
            jitter: c.jitter,
            loss: c.loss,
        })
    }
}

#[derive(Args)]
struct CurveEpsilonPlusCli {
    #[command(flatten)]
    md: ModelDataCli,
    #[command(flatten)]
    eps: EpsilonCli,
    /// Admissibility loss: squared or zero-one [default: by task]
    #[arg(long, value_name = "KIND")]
    loss: Option<String>,
}

impl CurveEpsilonPlusCli {
    fn resolve(&self) -> Result<commands::CurveEpsilonPlusArgs> {
        let (model, data, out, cfg) = self.md.resolve()?;
        Ok(commands::CurveEpsilonPlusArgs {
            model,
            data,
            out,
            epsilon: self.eps.resolve(&cfg)?,
            loss: resolve_loss(self.loss.as_deref(), &cfg)?,
        })
    }
}

fn run() -> Result<()> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                print!("{e}");
                return Ok(());
            }
            return Err(CliError::config(e.to_string()));
        }
    };
    match cli.command {
        Cmd::FitAdditive(c) => commands::fit_additive(&c.resolve()?),
        Cmd::FitKernel(c) => commands::fit_kernel(&c.resolve()?),
        Cmd::TuneKernel(c) => commands::tune_kernel(&c.resolve()?),
        Cmd::FitForest(c) => commands::fit_forest(&c.resolve()?),
        Cmd::ImportForest(c) => commands::import_forest(&c.resolve()?),
        Cmd::Explain(c) => commands::explain(&c.resolve()?),
        Cmd::UtilityCurve(c) => commands::utility_curve(&c.resolve()?),
        Cmd::CurveEpsilonPlus(c) => commands::curve_epsilon_plus(&c.resolve()?),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{}", e.stderr_json());
        std::process::exit(e.exit_code());
    }
}
