//! Subcommand implementations over resolved arguments.
//!
//! Each command reads inputs, does the work, writes artifacts into the
//! output directory, and prints a short summary to stdout. All artifacts are
//! deterministic functions of the arguments (see [`crate::report`]).

use std::path::{Path, PathBuf};

use serde::Serialize;

use rashomon_core::additive::{self, BasisSpec, FeatureBasis};
use rashomon_core::consensus::{
    build_partial_order, epsilon_linesearch, sign_attr, sign_gap, statements_for, ConsensusOpts,
    Sign,
};
use rashomon_core::forest::{
    choose_m, epsilon_plus, train_forest, CartParams, FeatureGroup, FeatureGroups, ForestModel,
    LossKind, Task, TreeModel,
};
use rashomon_core::kernel::{fit_krr, KernelSpec, KrrFitFile};

use crate::config::{parse_groups, BackgroundSpec, EpsilonSpec, SplitSpec};
use crate::error::{CliError, Result};
use crate::ingest::{load_csv, Dataset};
use crate::model::{build_family, default_loss, BuildOpts, ModelMeta, SavedModel};
use crate::report::{ensure_dir, fmt, instance_path, write_csv, write_json, write_text};

/// Arguments every data-consuming command shares.
pub struct DataArgs {
    pub data: PathBuf,
    pub target: String,
    pub categorical: Vec<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub split: Option<SplitSpec>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        load_csv(&self.data, &self.target, &self.categorical)
    }

    /// `(train, held-out)` datasets; no split means train on everything.
    fn split_dataset(&self, ds: &Dataset) -> Result<(Dataset, Option<Dataset>)> {
        match self.split {
            None => Ok((ds.clone(), None)),
            Some(split) => {
                let (train, test) = split.rows(ds.n_rows())?;
                Ok((ds.select(&train), Some(ds.select(&test))))
            }
        }
    }

    fn meta(&self) -> ModelMeta {
        ModelMeta {
            target: self.target.clone(),
            categorical: self.categorical.clone(),
            split: self.split,
        }
    }
}

fn model_path(out: &Path) -> PathBuf {
    out.join("model.json")
}

fn mse(pred: impl Iterator<Item = f64>, y: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for (p, t) in pred.zip(y) {
        acc += (p - t) * (p - t);
        n += 1;
    }
    acc / n as f64
}

// ---------------------------------------------------------------------------
// fit-additive

pub struct FitAdditiveArgs {
    pub data: DataArgs,
    pub basis: String,
}

#[derive(Serialize)]
struct FitSummary {
    family: &'static str,
    rows_train: usize,
    rows_test: usize,
    columns: usize,
    /// Smallest loss any family member attains (the fit's own loss).
    min_loss: f64,
    /// Plain mean squared error on the held-out rows, when split.
    test_loss: Option<f64>,
}

/// `linear`, or `spline:DEGREE:KNOTS` applied to every non-indicator column.
fn parse_basis(s: &str) -> Result<FeatureBasis> {
    if s == "linear" {
        return Ok(FeatureBasis::Linear);
    }
    if let Some(rest) = s.strip_prefix("spline:") {
        if let Some((d, k)) = rest.split_once(':') {
            if let (Ok(degree), Ok(n_knots)) = (d.parse(), k.parse()) {
                return Ok(FeatureBasis::Spline { degree, n_knots });
            }
        }
    }
    Err(CliError::config(format!(
        "invalid basis '{s}': expected linear or spline:DEGREE:KNOTS"
    )))
}

pub fn fit_additive(args: &FitAdditiveArgs) -> Result<()> {
    let ds = args.data.load()?;
    let (train, test) = args.data.split_dataset(&ds)?;
    let per_column = parse_basis(&args.basis)?;
    // Indicator columns carry two values; they always get the linear basis.
    let spec = BasisSpec {
        features: ds
            .indicator
            .iter()
            .map(|&ind| if ind { FeatureBasis::Linear } else { per_column.clone() })
            .collect(),
    };
    let fit = additive::fit(&train.x, &train.y, &spec, ds.column_names.clone())?;
    let test_loss = test
        .as_ref()
        .map(|t| mse((0..t.n_rows()).map(|i| fit.predict_row(t.x.row(i))), &t.y));
    ensure_dir(&args.data.out)?;
    let summary = FitSummary {
        family: "additive",
        rows_train: train.n_rows(),
        rows_test: test.as_ref().map_or(0, Dataset::n_rows),
        columns: ds.column_names.len(),
        min_loss: fit.train_loss,
        test_loss,
    };
    let min_loss = fit.train_loss;
    let saved = SavedModel::Additive {
        meta: args.data.meta(),
        fit,
    };
    write_json(&model_path(&args.data.out), &saved)?;
    write_json(&args.data.out.join("fit.json"), &summary)?;
    println!("fit-additive: min loss {}", fmt(min_loss));
    Ok(())
}

// ---------------------------------------------------------------------------
// fit-kernel

pub struct FitKernelArgs {
    pub data: DataArgs,
    pub kernel: String,
    pub lambda: f64,
}

/// `gaussian:GAMMA` or `poly:GAMMA:DEGREE`.
fn parse_kernel(s: &str) -> Result<KernelSpec> {
    let bad = || {
        CliError::config(format!(
            "invalid kernel '{s}': expected gaussian:GAMMA or poly:GAMMA:DEGREE"
        ))
    };
    if let Some(g) = s.strip_prefix("gaussian:") {
        return Ok(KernelSpec::Gaussian {
            gamma: g.parse().map_err(|_| bad())?,
        });
    }
    if let Some(rest) = s.strip_prefix("poly:") {
        let (g, d) = rest.split_once(':').ok_or_else(bad)?;
        return Ok(KernelSpec::Polynomial {
            gamma: g.parse().map_err(|_| bad())?,
            degree: d.parse().map_err(|_| bad())?,
        });
    }
    Err(bad())
}

pub fn fit_kernel(args: &FitKernelArgs) -> Result<()> {
    let ds = args.data.load()?;
    let (train, test) = args.data.split_dataset(&ds)?;
    let spec = parse_kernel(&args.kernel)?;
    let mut fit = fit_krr(&train.x, &train.y, &spec, args.lambda)?;
    fit.column_names = ds.column_names.clone();
    let test_loss = test
        .as_ref()
        .map(|t| mse((0..t.n_rows()).map(|i| fit.predict_row(t.x.row(i))), &t.y));
    ensure_dir(&args.data.out)?;
    let summary = FitSummary {
        family: "kernel",
        rows_train: train.n_rows(),
        rows_test: test.as_ref().map_or(0, Dataset::n_rows),
        columns: ds.column_names.len(),
        min_loss: fit.reg_loss,
        test_loss,
    };
    let min_loss = fit.reg_loss;
    let saved = SavedModel::Kernel {
        meta: args.data.meta(),
        fit: KrrFitFile::from_fit(&fit),
    };
    write_json(&model_path(&args.data.out), &saved)?;
    write_json(&args.data.out.join("fit.json"), &summary)?;
    println!("fit-kernel: min loss {}", fmt(min_loss));
    Ok(())
}

// ---------------------------------------------------------------------------
// tune-kernel

pub struct TuneKernelArgs {
    pub data: DataArgs,
    pub gammas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub folds: usize,
    /// Polynomial degree; Gaussian kernel when absent.
    pub degree: Option<u32>,
}

pub fn tune_kernel(args: &TuneKernelArgs) -> Result<()> {
    if args.gammas.is_empty() || args.lambdas.is_empty() {
        return Err(CliError::config("--gammas and --lambdas must be non-empty"));
    }
    if args.folds < 2 {
        return Err(CliError::config("--folds must be at least 2"));
    }
    let ds = args.data.load()?;
    let n = ds.n_rows();
    if n < args.folds {
        return Err(CliError::config(format!(
            "{n} rows cannot form {} folds",
            args.folds
        )));
    }
    // Seeded shuffle, then contiguous chunks as equal as possible.
    let folds = fold_indices(n, args.folds, args.data.seed);
    let spec_for = |gamma: f64| match args.degree {
        None => KernelSpec::Gaussian { gamma },
        Some(degree) => KernelSpec::Polynomial { gamma, degree },
    };
    let mut rows = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None;
    for &gamma in &args.gammas {
        for &lambda in &args.lambdas {
            let spec = spec_for(gamma);
            let mut total = 0.0;
            for fold in &folds {
                let train_rows: Vec<usize> =
                    (0..n).filter(|i| !fold.contains(i)).collect();
                let train = ds.select(&train_rows);
                let val = ds.select(fold);
                let fit = fit_krr(&train.x, &train.y, &spec, lambda)?;
                total += mse(
                    (0..val.n_rows()).map(|i| fit.predict_row(val.x.row(i))),
                    &val.y,
                );
            }
            let mean = total / folds.len() as f64;
            if best.map_or(true, |(_, _, b)| mean < b) {
                best = Some((gamma, lambda, mean));
            }
            rows.push(vec![fmt(gamma), fmt(lambda), fmt(mean)]);
        }
    }
    ensure_dir(&args.data.out)?;
    write_csv(
        &args.data.out.join("grid_search.csv"),
        &["gamma", "lambda", "mean_cv_loss"],
        &rows,
    )?;
    let (g, l, loss) = best.expect("grid is non-empty");
    println!(
        "tune-kernel: best gamma {} lambda {} (mean CV loss {})",
        fmt(g),
        fmt(l),
        fmt(loss)
    );
    Ok(())
}

/// Fold membership lists: a seeded shuffle cut into near-equal chunks,
/// each sorted ascending.
fn fold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    folds
}

// ---------------------------------------------------------------------------
// fit-forest

pub struct FitForestArgs {
    pub data: DataArgs,
    pub trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: Option<usize>,
    pub task: Task,
    /// Manual player partition over encoded columns; ingest groups otherwise.
    pub groups: Option<String>,
    pub loss: Option<LossKind>,
}

#[derive(Serialize)]
struct ForestFitSummary {
    family: &'static str,
    rows_train: usize,
    /// Rows the worst-case curve is computed on (held-out side when split).
    rows_eval: usize,
    trees: usize,
    /// Floor of the worst-case loss curve: the loss bound of the full pool.
    min_loss: f64,
    /// Loss of the full-pool average prediction on the evaluation rows.
    full_ensemble_loss: f64,
}

fn forest_loss(trees: &[TreeModel], eval: &Dataset, loss: LossKind) -> f64 {
    let preds = (0..eval.n_rows()).map(|i| {
        trees.iter().map(|t| t.predict(eval.x.row(i))).sum::<f64>() / trees.len() as f64
    });
    match loss {
        LossKind::Squared => mse(preds, &eval.y),
        LossKind::ZeroOne => {
            let wrong = preds
                .zip(&eval.y)
                .filter(|&(p, &t)| (p > 0.5) != (t >= 0.5))
                .count();
            wrong as f64 / eval.n_rows() as f64
        }
    }
}

pub fn fit_forest(args: &FitForestArgs) -> Result<()> {
    let ds = args.data.load()?;
    let (train, test) = args.data.split_dataset(&ds)?;
    let params = CartParams {
        max_depth: args.max_depth,
        min_samples_leaf: args.min_leaf,
        min_samples_split: 2 * args.min_leaf.max(1),
        max_features: args.max_features,
    };
    let groups = match &args.groups {
        None => ds.groups.clone(),
        Some(spec) => {
            let parsed = parse_groups(spec, &ds.column_names)?;
            let groups = FeatureGroups {
                groups: parsed
                    .into_iter()
                    .map(|(name, columns)| FeatureGroup { name, columns })
                    .collect(),
            };
            groups.validate(ds.x.cols())?;
            groups
        }
    };
    let trees = train_forest(
        &train.x,
        &train.y,
        args.trees,
        args.data.seed,
        &params,
        args.task,
    )?;
    let eval = test.as_ref().unwrap_or(&train);
    let loss = args.loss.unwrap_or(default_loss(args.task));
    let curve = epsilon_plus(&trees, &eval.x, &eval.y, loss)?;
    ensure_dir(&args.data.out)?;
    let summary = ForestFitSummary {
        family: "forest",
        rows_train: train.n_rows(),
        rows_eval: eval.n_rows(),
        trees: trees.len(),
        min_loss: *curve.last().expect("one entry per tree"),
        full_ensemble_loss: forest_loss(&trees, eval, loss),
    };
    let saved = SavedModel::Forest {
        meta: args.data.meta(),
        model: ForestModel {
            task: args.task,
            trees,
            column_names: ds.column_names.clone(),
            groups,
        },
    };
    write_json(&model_path(&args.data.out), &saved)?;
    write_json(&args.data.out.join("fit.json"), &summary)?;
    println!("fit-forest: min loss {}", fmt(summary.min_loss));
    Ok(())
}

// ---------------------------------------------------------------------------
// import-forest

pub struct ImportForestArgs {
    pub file: PathBuf,
    pub out: PathBuf,
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub categorical: Vec<String>,
}

#[derive(Serialize)]
struct ImportSummary {
    family: &'static str,
    trees: usize,
    columns: usize,
    groups: usize,
}

pub fn import_forest(args: &ImportForestArgs) -> Result<()> {
    let text =
        std::fs::read_to_string(&args.file).map_err(|e| CliError::io(&args.file, e))?;
    let saved = if let Ok(saved) = serde_json::from_str::<SavedModel>(&text) {
        match saved {
            SavedModel::Forest { .. } => saved,
            other => {
                return Err(CliError::config(format!(
                    "{} holds a {} model, not a forest",
                    args.file.display(),
                    other.family_name()
                )))
            }
        }
    } else {
        // A bare tree pool produced elsewhere; wrap it with fresh settings.
        let model: ForestModel = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", args.file.display())))?;
        let target = args.target.clone().ok_or_else(|| {
            CliError::config("importing a bare forest needs --target for later commands")
        })?;
        SavedModel::Forest {
            meta: ModelMeta {
                target,
                categorical: args.categorical.clone(),
                split: None,
            },
            model,
        }
    };
    saved.validate()?;
    let SavedModel::Forest { ref model, ref meta } = saved else {
        unreachable!("checked above");
    };
    if let Some(data) = &args.data {
        let ds = load_csv(data, &meta.target, &meta.categorical)?;
        if ds.column_names != model.column_names {
            return Err(CliError::config(format!(
                "data encodes to columns [{}] but the forest expects [{}]",
                ds.column_names.join(", "),
                model.column_names.join(", ")
            )));
        }
    }
    ensure_dir(&args.out)?;
    let summary = ImportSummary {
        family: "forest",
        trees: model.trees.len(),
        columns: model.column_names.len(),
        groups: model.groups.len(),
    };
    write_json(&model_path(&args.out), &saved)?;
    write_json(&args.out.join("import.json"), &summary)?;
    println!("import-forest: {} trees over {} columns", summary.trees, summary.columns);
    Ok(())
}

// ---------------------------------------------------------------------------
// explain

pub struct ExplainArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub instances: Vec<usize>,
    pub epsilon: EpsilonSpec,
    pub background: BackgroundSpec,
    pub steps: usize,
    pub margin: f64,
    pub jitter: f64,
    pub loss: Option<LossKind>,
}

#[derive(Serialize)]
struct ExplainInstance {
    instance: usize,
    gap_lo: f64,
    gap_hi: f64,
    gap_center: f64,
    gap_sign: Option<Sign>,
    statements: usize,
}

#[derive(Serialize)]
struct ExplainSummary {
    family: &'static str,
    epsilon: f64,
    excess: f64,
    min_loss: f64,
    margin: f64,
    /// Minimum sub-ensemble size; forest families only.
    #[serde(skip_serializing_if = "Option::is_none")]
    subset_size: Option<usize>,
    instances: Vec<ExplainInstance>,
}

/// Loads the model and data together, enforcing that the data re-encodes to
/// the columns the model was fitted on.
fn load_pair(model: &Path, data: &Path) -> Result<(SavedModel, Dataset)> {
    let saved = SavedModel::load(model)?;
    let meta = saved.meta();
    let ds = load_csv(data, &meta.target, &meta.categorical)?;
    Ok((saved, ds))
}

fn check_instances(instances: &[usize], n_rows: usize) -> Result<()> {
    if instances.is_empty() {
        return Err(CliError::config("--instances needs at least one row index"));
    }
    for &i in instances {
        if i >= n_rows {
            return Err(CliError::config(format!(
                "instance {i} out of range for {n_rows} rows"
            )));
        }
    }
    Ok(())
}

pub fn explain(args: &ExplainArgs) -> Result<()> {
    let (saved, ds) = load_pair(&args.model, &args.data)?;
    check_instances(&args.instances, ds.n_rows())?;
    let ctx = build_family(
        &saved,
        &ds,
        &BuildOpts {
            background: args.background,
            steps: args.steps,
            jitter: args.jitter,
            loss: args.loss,
        },
    )?;
    let epsilon = args.epsilon.resolve(ctx.min_loss);
    let provider = ctx.family.builder().at_epsilon(epsilon)?;
    let opts = ConsensusOpts::new(args.margin)?;
    ensure_dir(&args.out)?;
    let mut instances = Vec::new();
    let mut total_statements = 0usize;
    for &idx in &args.instances {
        let attr = provider.explain(ds.x.row(idx))?;
        let statements = statements_for(&attr, &opts, idx, epsilon)?;
        write_json(
            &instance_path(&args.out, "statements", idx, "json"),
            &statements,
        )?;
        let order = build_partial_order(&attr, &opts, idx, epsilon)?;
        write_text(&instance_path(&args.out, "hasse", idx, "dot"), &order.to_dot())?;
        let mut rows = Vec::with_capacity(ctx.players.len());
        for (p, name) in ctx.players.iter().enumerate() {
            let (lo, hi) = attr.attr_range(p)?;
            let sign = match sign_attr(&attr, p, opts.margin)? {
                Some(s) => s.glyph().to_string(),
                None => "?".to_string(),
            };
            rows.push(vec![
                name.clone(),
                sign,
                fmt(lo),
                fmt(hi),
                fmt(attr.center_attr(p)),
            ]);
        }
        write_csv(
            &instance_path(&args.out, "attributions", idx, "csv"),
            &["feature", "sign", "lo", "hi", "center"],
            &rows,
        )?;
        let (gap_lo, gap_hi) = attr.gap_range()?;
        total_statements += statements.len();
        instances.push(ExplainInstance {
            instance: idx,
            gap_lo,
            gap_hi,
            gap_center: attr.gap_center(),
            gap_sign: sign_gap(&attr, opts.margin)?,
            statements: statements.len(),
        });
    }
    let subset_size = match ctx.family.forest() {
        Some(forest) => Some(choose_m(forest.curve(), epsilon)?),
        None => None,
    };
    let summary = ExplainSummary {
        family: saved.family_name(),
        epsilon,
        excess: epsilon - ctx.min_loss,
        min_loss: ctx.min_loss,
        margin: args.margin,
        subset_size,
        instances,
    };
    write_json(&args.out.join("explain.json"), &summary)?;
    println!(
        "explain: {} statements across {} instances at loss bound {}",
        total_statements,
        args.instances.len(),
        fmt(epsilon)
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// utility-curve

pub struct UtilityCurveArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub instances: Vec<usize>,
    /// Top of the bound grid; the bottom is the family minimum.
    pub epsilon: EpsilonSpec,
    pub grid: usize,
    pub margin: f64,
    pub background: BackgroundSpec,
    pub steps: usize,
    pub jitter: f64,
    pub loss: Option<LossKind>,
}

pub fn utility_curve(args: &UtilityCurveArgs) -> Result<()> {
    if args.grid == 0 {
        return Err(CliError::config("--grid must be at least 1"));
    }
    let (saved, ds) = load_pair(&args.model, &args.data)?;
    check_instances(&args.instances, ds.n_rows())?;
    let ctx = build_family(
        &saved,
        &ds,
        &BuildOpts {
            background: args.background,
            steps: args.steps,
            jitter: args.jitter,
            loss: args.loss,
        },
    )?;
    let top = args.epsilon.resolve(ctx.min_loss);
    if top < ctx.min_loss {
        return Err(CliError {
            kind: crate::error::ErrorKind::EmptyFamily,
            message: format!(
                "loss bound {top} is below the minimal loss {}: empty model set",
                ctx.min_loss
            ),
        });
    }
    let epsilons: Vec<f64> = (1..=args.grid)
        .map(|k| ctx.min_loss + (top - ctx.min_loss) * k as f64 / args.grid as f64)
        .collect();
    let probes = ds.x.select_rows(&args.instances);
    let opts = ConsensusOpts::new(args.margin)?;
    let points = epsilon_linesearch(ctx.family.builder(), &probes, &epsilons, &opts)?;
    ensure_dir(&args.out)?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![fmt(p.epsilon), fmt(p.excess), fmt(p.utility)])
        .collect();
    write_csv(
        &args.out.join("utility_curve.csv"),
        &["epsilon", "excess_epsilon", "utility"],
        &rows,
    )?;
    println!(
        "utility-curve: {} points from {} to {}",
        points.len(),
        fmt(epsilons[0]),
        fmt(top)
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// curve-epsilon-plus

pub struct CurveEpsilonPlusArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub epsilon: Option<EpsilonSpec>,
    pub loss: Option<LossKind>,
}

#[derive(Serialize)]
struct ChosenSize {
    epsilon: f64,
    /// Floor of the curve (the bound the full pool satisfies).
    min_loss: f64,
    /// Smallest admissible sub-ensemble size under the bound.
    m: usize,
}

pub fn curve_epsilon_plus(args: &CurveEpsilonPlusArgs) -> Result<()> {
    let (saved, ds) = load_pair(&args.model, &args.data)?;
    let SavedModel::Forest { meta, model } = &saved else {
        return Err(CliError::config(format!(
            "worst-case size curves are a forest construct; {} holds a {} model",
            args.model.display(),
            saved.family_name()
        )));
    };
    let eval_rows: Vec<usize> = match meta.split {
        Some(split) => split.rows(ds.n_rows())?.1,
        None => (0..ds.n_rows()).collect(),
    };
    let eval = ds.select(&eval_rows);
    let loss = args.loss.unwrap_or(default_loss(model.task));
    let curve = epsilon_plus(&model.trees, &eval.x, &eval.y, loss)?;
    ensure_dir(&args.out)?;
    let rows: Vec<Vec<String>> = curve
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![format!("{}", i + 1), fmt(v)])
        .collect();
    write_csv(&args.out.join("epsilon_plus.csv"), &["m", "epsilon_plus"], &rows)?;
    let floor = *curve.last().expect("one entry per tree");
    if let Some(spec) = args.epsilon {
        let epsilon = spec.resolve(floor);
        let m = choose_m(&curve, epsilon)?;
        write_json(
            &args.out.join("chosen_m.json"),
            &ChosenSize {
                epsilon,
                min_loss: floor,
                m,
            },
        )?;
        println!(
            "curve-epsilon-plus: {} sizes, m = {m} at loss bound {}",
            curve.len(),
            fmt(epsilon)
        );
    } else {
        println!(
            "curve-epsilon-plus: {} sizes, floor {}",
            curve.len(),
            fmt(floor)
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// shared parsers for enum-ish flags

pub fn parse_task(s: &str) -> Result<Task> {
    match s {
        "regression" => Ok(Task::Regression),
        "classification" => Ok(Task::Classification),
        _ => Err(CliError::config(format!(
            "invalid task '{s}': expected regression or classification"
        ))),
    }
}

pub fn parse_loss(s: &str) -> Result<LossKind> {
    match s {
        "squared" => Ok(LossKind::Squared),
        "zero-one" | "zero_one" => Ok(LossKind::ZeroOne),
        _ => Err(CliError::config(format!(
            "invalid loss '{s}': expected squared or zero-one"
        ))),
    }
}
