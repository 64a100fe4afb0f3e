//! Run configuration shared by the subcommands.
//!
//! `--config FILE` points at a JSON object whose keys mirror the long flag
//! names (underscored). Values given on the command line always win over the
//! file; the three loss-bound idioms count as one setting, so any bound flag
//! on the command line replaces all bound keys in the file. Unknown keys are
//! rejected rather than ignored.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// File-level mirror of the command-line options. Every field is optional;
/// resolution happens after merging.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub categorical: Option<Vec<String>>,
    pub split: Option<f64>,
    pub epsilon: Option<f64>,
    pub epsilon_excess: Option<f64>,
    pub epsilon_mult: Option<f64>,
    pub instances: Option<Vec<usize>>,
    pub background: Option<String>,
    pub steps: Option<usize>,
    pub margin: Option<f64>,
    pub jitter: Option<f64>,
    pub grid: Option<usize>,
    pub model: Option<PathBuf>,
    pub basis: Option<String>,
    pub kernel: Option<String>,
    pub lambda: Option<f64>,
    pub gammas: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub degree: Option<u32>,
    pub trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: Option<usize>,
    pub max_features: Option<usize>,
    pub task: Option<String>,
    pub loss: Option<String>,
    pub groups: Option<String>,
    pub file: Option<PathBuf>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// The merge rule: a command-line value beats a file value.
pub fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// A loss bound, in one of the three accepted idioms. All are resolved to an
/// absolute bound before any family is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSpec {
    /// The bound itself.
    Absolute(f64),
    /// Smallest attainable loss plus this slack.
    Excess(f64),
    /// Smallest attainable loss times this factor.
    Multiplier(f64),
}

impl EpsilonSpec {
    /// Combines the three mutually exclusive options; `None` when none given.
    pub fn from_options(
        absolute: Option<f64>,
        excess: Option<f64>,
        mult: Option<f64>,
    ) -> Result<Option<Self>> {
        let given = [absolute.is_some(), excess.is_some(), mult.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if given > 1 {
            return Err(CliError::config(
                "--epsilon, --epsilon-excess and --epsilon-mult are mutually exclusive",
            ));
        }
        let spec = if let Some(v) = absolute {
            Some(EpsilonSpec::Absolute(v))
        } else if let Some(v) = excess {
            Some(EpsilonSpec::Excess(v))
        } else {
            mult.map(EpsilonSpec::Multiplier)
        };
        if let Some(s) = spec {
            s.validate()?;
        }
        Ok(spec)
    }

    fn validate(self) -> Result<()> {
        let (name, v) = match self {
            EpsilonSpec::Absolute(v) => ("--epsilon", v),
            EpsilonSpec::Excess(v) => ("--epsilon-excess", v),
            EpsilonSpec::Multiplier(v) => ("--epsilon-mult", v),
        };
        if !v.is_finite() {
            return Err(CliError::config(format!("{name} must be finite")));
        }
        match self {
            EpsilonSpec::Excess(v) if v < 0.0 => Err(CliError::config(
                "--epsilon-excess is a slack above the minimum loss and cannot be negative",
            )),
            EpsilonSpec::Multiplier(v) if v <= 0.0 => {
                Err(CliError::config("--epsilon-mult must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// The absolute bound. A bound below `min_loss` is not an error here;
    /// the family constructor reports the empty set with the right context.
    pub fn resolve(self, min_loss: f64) -> f64 {
        match self {
            EpsilonSpec::Absolute(v) => v,
            EpsilonSpec::Excess(v) => min_loss + v,
            EpsilonSpec::Multiplier(v) => min_loss * v,
        }
    }
}

/// Reference inputs that attributions are measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackgroundSpec {
    /// Every data row.
    Full,
    /// `size` rows sampled without replacement, seeded.
    Sample { size: usize, seed: u64 },
    /// One specific data row.
    Row(usize),
}

impl BackgroundSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || {
            CliError::config(format!(
                "invalid background '{s}': expected full, sample:SIZE:SEED or row:INDEX"
            ))
        };
        if s == "full" {
            return Ok(BackgroundSpec::Full);
        }
        if let Some(rest) = s.strip_prefix("sample:") {
            let (size, seed) = rest.split_once(':').ok_or_else(bad)?;
            return Ok(BackgroundSpec::Sample {
                size: size.parse().map_err(|_| bad())?,
                seed: seed.parse().map_err(|_| bad())?,
            });
        }
        if let Some(idx) = s.strip_prefix("row:") {
            return Ok(BackgroundSpec::Row(idx.parse().map_err(|_| bad())?));
        }
        Err(bad())
    }

    /// Data row indices this background stands for, ascending.
    pub fn rows(self, n_rows: usize) -> Result<Vec<usize>> {
        match self {
            BackgroundSpec::Full => Ok((0..n_rows).collect()),
            BackgroundSpec::Row(idx) => {
                if idx >= n_rows {
                    return Err(CliError::config(format!(
                        "background row {idx} out of range for {n_rows} rows"
                    )));
                }
                Ok(vec![idx])
            }
            BackgroundSpec::Sample { size, seed } => {
                if size == 0 || size > n_rows {
                    return Err(CliError::config(format!(
                        "background sample size {size} out of range for {n_rows} rows"
                    )));
                }
                let mut idx: Vec<usize> = (0..n_rows).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                idx.shuffle(&mut rng);
                let mut take = idx[..size].to_vec();
                take.sort_unstable();
                Ok(take)
            }
        }
    }
}

/// A seeded train/test partition. Stored inside saved models so later
/// commands rebuild the exact same sides from the same file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Training fraction, strictly between 0 and 1.
    pub ratio: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratio: f64, seed: u64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(CliError::config(format!(
                "split ratio must be strictly between 0 and 1, got {ratio}"
            )));
        }
        Ok(SplitSpec { ratio, seed })
    }

    /// `(train, test)` row indices, each ascending, both non-empty.
    pub fn rows(self, n_rows: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if n_rows < 2 {
            return Err(CliError::config(
                "splitting needs at least two data rows",
            ));
        }
        let n_train = ((self.ratio * n_rows as f64).floor() as usize).clamp(1, n_rows - 1);
        let mut idx: Vec<usize> = (0..n_rows).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        idx.shuffle(&mut rng);
        let mut train = idx[..n_train].to_vec();
        let mut test = idx[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }
}

/// Parses a manual player partition `name=col+col;name=col` over encoded
/// column names into per-group encoded column indices.
pub fn parse_groups(spec: &str, column_names: &[String]) -> Result<Vec<(String, Vec<usize>)>> {
    let mut out = Vec::new();
    for part in spec.split(';') {
        let (name, cols) = part.split_once('=').ok_or_else(|| {
            CliError::config(format!(
                "invalid group '{part}': expected NAME=COLUMN+COLUMN"
            ))
        })?;
        if name.is_empty() {
            return Err(CliError::config(format!("group '{part}' has no name")));
        }
        let mut columns = Vec::new();
        for col in cols.split('+') {
            let idx = column_names
                .iter()
                .position(|c| c == col)
                .ok_or_else(|| {
                    CliError::config(format!("group '{name}' references unknown column '{col}'"))
                })?;
            columns.push(idx);
        }
        out.push((name.to_string(), columns));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_idioms_resolve_against_the_minimum() {
        let abs = EpsilonSpec::from_options(Some(0.5), None, None)
            .unwrap()
            .unwrap();
        assert_eq!(abs.resolve(0.2), 0.5);
        let excess = EpsilonSpec::from_options(None, Some(0.1), None)
            .unwrap()
            .unwrap();
        assert_eq!(excess.resolve(0.2), 0.30000000000000004);
        let mult = EpsilonSpec::from_options(None, None, Some(1.5))
            .unwrap()
            .unwrap();
        assert_eq!(mult.resolve(0.2), 0.30000000000000004);
        assert!(EpsilonSpec::from_options(Some(0.5), Some(0.1), None).is_err());
        assert!(EpsilonSpec::from_options(None, Some(-0.1), None).is_err());
        assert!(EpsilonSpec::from_options(None, None, Some(0.0)).is_err());
        assert!(EpsilonSpec::from_options(None, None, None)
            .unwrap()
            .is_none());
    }

    #[test]
    fn background_grammar_round_trips() {
        assert_eq!(BackgroundSpec::parse("full").unwrap(), BackgroundSpec::Full);
        assert_eq!(
            BackgroundSpec::parse("sample:16:7").unwrap(),
            BackgroundSpec::Sample { size: 16, seed: 7 }
        );
        assert_eq!(
            BackgroundSpec::parse("row:3").unwrap(),
            BackgroundSpec::Row(3)
        );
        assert!(BackgroundSpec::parse("sample:16").is_err());
        assert!(BackgroundSpec::parse("rows:3").is_err());
    }

    #[test]
    fn background_rows_are_sorted_and_bounded() {
        let rows = BackgroundSpec::Sample { size: 4, seed: 9 }.rows(10).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
        assert!(rows.iter().all(|&r| r < 10));
        assert!(BackgroundSpec::Row(10).rows(10).is_err());
        assert!(BackgroundSpec::Sample { size: 11, seed: 0 }.rows(10).is_err());
    }

    #[test]
    fn split_is_deterministic_and_partitions_the_rows() {
        let split = SplitSpec::new(0.8, 42).unwrap();
        let (tr1, te1) = split.rows(25).unwrap();
        let (tr2, te2) = split.rows(25).unwrap();
        assert_eq!(tr1, tr2);
        assert_eq!(te1, te2);
        assert_eq!(tr1.len(), 20);
        assert_eq!(te1.len(), 5);
        let mut all: Vec<usize> = tr1.iter().chain(te1.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..25).collect::<Vec<_>>());
        assert!(SplitSpec::new(1.0, 0).is_err());
        assert!(SplitSpec::new(0.0, 0).is_err());
    }

    #[test]
    fn group_spec_maps_names_to_indices() {
        let names: Vec<String> = ["a", "b=x", "b=y", "c"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let parsed = parse_groups("ab=a+b=x+b=y;c=c", &names).unwrap();
        assert_eq!(parsed[0].0, "ab");
        assert_eq!(parsed[0].1, vec![0, 1, 2]);
        assert_eq!(parsed[1], ("c".to_string(), vec![3]));
        assert!(parse_groups("z=missing", &names).is_err());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = serde_json::from_str::<FileConfig>("{\"tolerance\": 1.0}");
        assert!(err.is_err());
    }
}
