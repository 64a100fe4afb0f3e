//! Saved models on disk.
//!
//! One JSON file per fitted model, tagged by `family` so later commands can
//! dispatch without guessing from shape. The wrapper also records how the
//! data was ingested (target, categorical declarations) and the train/test
//! split, because the admissible set is defined relative to a specific loss
//! on specific rows: rebuilding it later must use exactly the same rows.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use rashomon_core::additive::AdditiveFit;
use rashomon_core::consensus::providers::{AdditiveBuilder, ForestBuilder, KrrBuilder};
use rashomon_core::consensus::FamilyBuilder;
use rashomon_core::forest::{ForestModel, LossKind, Task};
use rashomon_core::kernel::{KrrFit, KrrFitFile};
use rashomon_core::Error as CoreError;

use crate::config::{BackgroundSpec, SplitSpec};
use crate::error::{CliError, Result};
use crate::ingest::Dataset;

/// Ingest and split settings a model was produced under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta {
    pub target: String,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub split: Option<SplitSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SavedModel {
    Additive { meta: ModelMeta, fit: AdditiveFit },
    Kernel { meta: ModelMeta, fit: KrrFitFile },
    Forest { meta: ModelMeta, model: ForestModel },
}

impl SavedModel {
    pub fn meta(&self) -> &ModelMeta {
        match self {
            SavedModel::Additive { meta, .. }
            | SavedModel::Kernel { meta, .. }
            | SavedModel::Forest { meta, .. } => meta,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            SavedModel::Additive { .. } => "additive",
            SavedModel::Kernel { .. } => "kernel",
            SavedModel::Forest { .. } => "forest",
        }
    }

    /// Encoded predictor names the model was fitted on.
    pub fn column_names(&self) -> &[String] {
        match self {
            SavedModel::Additive { fit, .. } => &fit.column_names,
            SavedModel::Kernel { fit, .. } => &fit.column_names,
            SavedModel::Forest { model, .. } => &model.column_names,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let saved: SavedModel = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        saved.validate()?;
        Ok(saved)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SavedModel::Additive { fit, .. } => fit.validate()?,
            SavedModel::Kernel { fit, .. } => {
                // The dictionary must be embedded; re-validate through the
                // conversion used when the model is actually exercised.
                self.kernel_fit()?;
                let _ = fit;
            }
            SavedModel::Forest { model, .. } => model.validate()?,
        }
        Ok(())
    }

    fn kernel_fit(&self) -> Result<KrrFit> {
        let SavedModel::Kernel { fit, .. } = self else {
            unreachable!("called on kernel models only");
        };
        fit.clone()
            .into_fit(|path| {
                Err(CoreError::invalid(format!(
                    "model references an external dictionary '{path}'; embed it inline"
                )))
            })
            .map_err(CliError::from)
    }
}

/// Everything needed to slice a family at loss bounds and explain instances.
pub struct FamilyContext {
    pub family: Family,
    pub players: Vec<String>,
    pub min_loss: f64,
}

pub enum Family {
    Additive(AdditiveBuilder),
    Kernel(KrrBuilder),
    Forest(ForestBuilder),
}

impl Family {
    pub fn builder(&self) -> &dyn FamilyBuilder {
        match self {
            Family::Additive(b) => b,
            Family::Kernel(b) => b,
            Family::Forest(b) => b,
        }
    }

    pub fn forest(&self) -> Option<&ForestBuilder> {
        match self {
            Family::Forest(b) => Some(b),
            _ => None,
        }
    }
}

/// Options that shape the family geometry at explanation time.
pub struct BuildOpts {
    pub background: BackgroundSpec,
    /// Quadrature steps for kernel attributions.
    pub steps: usize,
    /// Diagonal inflation of ellipsoid shapes; 0 means none.
    pub jitter: f64,
    /// Loss the forest bound refers to; defaults from the model task.
    pub loss: Option<LossKind>,
}

/// Rebuilds the admissible-set geometry of a saved model over the dataset it
/// was fitted on. The dataset must encode to exactly the columns the model
/// was trained with.
pub fn build_family(saved: &SavedModel, ds: &Dataset, opts: &BuildOpts) -> Result<FamilyContext> {
    if saved.column_names() != ds.column_names.as_slice() {
        return Err(CliError::config(format!(
            "data encodes to columns [{}] but the model was fitted on [{}]; \
             use the same CSV and categorical declarations",
            ds.column_names.join(", "),
            saved.column_names().join(", ")
        )));
    }
    if saved.meta().target != ds.target {
        return Err(CliError::config(format!(
            "model was fitted with target '{}', data was loaded with target '{}'",
            saved.meta().target,
            ds.target
        )));
    }
    let train_rows: Vec<usize> = match saved.meta().split {
        Some(split) => split.rows(ds.n_rows())?.0,
        None => (0..ds.n_rows()).collect(),
    };
    match saved {
        SavedModel::Additive { fit, .. } => {
            if opts.background != BackgroundSpec::Full {
                return Err(CliError::config(
                    "additive attributions are centered on the training rows; \
                     only --background full is meaningful",
                ));
            }
            let train = ds.x.select_rows(&train_rows);
            let fit = Arc::new(fit.clone());
            let builder = AdditiveBuilder::with_jitter(fit.clone(), &train, opts.jitter)?;
            Ok(FamilyContext {
                players: fit.column_names.clone(),
                min_loss: fit.train_loss,
                family: Family::Additive(builder),
            })
        }
        SavedModel::Kernel { .. } => {
            let BackgroundSpec::Row(idx) = opts.background else {
                return Err(CliError::config(
                    "kernel attributions integrate against one baseline point; \
                     pass --background row:INDEX",
                ));
            };
            if idx >= ds.n_rows() {
                return Err(CliError::config(format!(
                    "baseline row {idx} out of range for {} rows",
                    ds.n_rows()
                )));
            }
            let fit = Arc::new(saved.kernel_fit()?);
            let baseline = ds.x.row(idx).to_vec();
            let builder = KrrBuilder::with_jitter(fit.clone(), baseline, opts.steps, opts.jitter)?;
            Ok(FamilyContext {
                players: fit.column_names.clone(),
                min_loss: fit.reg_loss,
                family: Family::Kernel(builder),
            })
        }
        SavedModel::Forest { meta, model } => {
            // The loss bound refers to held-out rows when the model was fit
            // under a split, otherwise to the full table.
            let eval_rows: Vec<usize> = match meta.split {
                Some(split) => split.rows(ds.n_rows())?.1,
                None => (0..ds.n_rows()).collect(),
            };
            let eval = ds.select(&eval_rows);
            let background = ds.x.select_rows(&opts.background.rows(ds.n_rows())?);
            let builder = ForestBuilder::new(
                Arc::new(model.trees.clone()),
                &model.groups,
                Arc::new(background),
                &eval.x,
                &eval.y,
                opts.loss.unwrap_or(default_loss(model.task)),
            )?;
            let min_loss = builder.min_loss();
            Ok(FamilyContext {
                players: model.groups.names(),
                min_loss,
                family: Family::Forest(builder),
            })
        }
    }
}

pub fn default_loss(task: Task) -> LossKind {
    match task {
        Task::Regression => LossKind::Squared,
        Task::Classification => LossKind::ZeroOne,
    }
}
