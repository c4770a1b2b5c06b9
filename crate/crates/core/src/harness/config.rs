use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Proportion, SplitKind};
use crate::models::{ModelConfig, ModelKind, Norm};
use crate::synth::families::FamilySplit;
use crate::synth::properties::{valid_combos, FOLDS};
use crate::synth::PropertyCombo;
use crate::trainer::{TrainConfig, LAMBDA_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PropertyIndividual,
    PropertyJoint,
    Family,
}

/// A model as named in experiment configs. `TransE` alone stands for both
/// norms, selected on validation AP like λ is for the other models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSpec {
    Kind(ModelKind),
    TransE,
}

impl ModelSpec {
    pub fn name(self) -> &'static str {
        match self {
            ModelSpec::Kind(k) => k.name(),
            ModelSpec::TransE => "TransE",
        }
    }

    /// Candidate configurations for one rank.
    pub fn candidates(self, rank: usize, lambdas: &[f64]) -> Vec<ModelConfig> {
        let kinds = match self {
            ModelSpec::Kind(k) => vec![k],
            ModelSpec::TransE => vec![ModelKind::TransE(Norm::L1), ModelKind::TransE(Norm::L2)],
        };
        kinds
            .into_iter()
            .flat_map(|kind| {
                let ls = if kind.uses_regularization() { lambdas.to_vec() } else { vec![0.0] };
                ls.into_iter().map(move |lambda| ModelConfig { kind, rank, lambda })
            })
            .collect()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("transe") {
            Ok(ModelSpec::TransE)
        } else {
            s.parse().map(ModelSpec::Kind)
        }
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Optional overrides of the training defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub batch_count: Option<usize>,
    pub max_epochs: Option<usize>,
    pub eval_every: Option<usize>,
    pub adagrad_epsilon: Option<f64>,
    pub adagrad_sqrt: Option<bool>,
}

fn default_ranks() -> Vec<usize> {
    (1..=10).map(|i| 5 * i).collect()
}

fn default_lambdas() -> Vec<f64> {
    LAMBDA_GRID.to_vec()
}

fn default_runs() -> usize {
    10
}

fn default_folds() -> usize {
    FOLDS
}

fn default_entities() -> usize {
    50
}

fn default_timeout() -> f64 {
    900.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_ranks")]
    pub ranks: Vec<usize>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Training fractions. Individual experiments always use 0.8.
    #[serde(default)]
    pub proportions: Vec<Proportion>,
    /// Family experiments: which splits (`random`, `evidence`, `family`).
    #[serde(default)]
    pub splits: Vec<SplitKind>,
    /// Individual experiments: which property combinations; all 13 if empty.
    #[serde(default)]
    pub combos: Vec<PropertyCombo>,
    /// Independent runs. Individual experiments yield `folds` rows per run.
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Individual experiments: how many of the ten folds to evaluate per run.
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_entities")]
    pub entities: usize,
    #[serde(default)]
    pub train: TrainOverrides,
    /// Wall-clock budget of one training run inside a cell.
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("experiment {:?}: {m}", self.name)));
        if self.name.is_empty() || self.name.contains(['|', '/', ',']) {
            return bad("names must be non-empty and free of '|', '/' and ','".into());
        }
        if self.models.is_empty() || self.ranks.is_empty() || self.lambdas.is_empty() {
            return bad("model, rank and lambda lists must be non-empty".into());
        }
        if self.ranks.contains(&0) || self.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return bad("ranks must be positive and lambdas non-negative".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.folds == 0 || self.folds > FOLDS {
            return bad(format!("folds must lie in 1..={FOLDS}"));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return bad("timeout must be positive".into());
        }
        match self.kind {
            ExperimentKind::PropertyIndividual => {
                if self.entities < 2 {
                    return bad("need at least 2 entities".into());
                }
            }
            ExperimentKind::PropertyJoint => {
                if self.proportions.is_empty() {
                    return bad("joint experiments need a p grid".into());
                }
            }
            ExperimentKind::Family => {
                if self.proportions.is_empty() || self.splits.is_empty() {
                    return bad("family experiments need splits and a p grid".into());
                }
                for s in &self.splits {
                    if !matches!(s, SplitKind::FamilyRandom | SplitKind::FamilyEvidence | SplitKind::FamilyFamily) {
                        return bad(format!("{} is not a family split", s.name()));
                    }
                }
            }
        }
        self.train_config(0).validate()
    }

    pub fn combos(&self) -> Vec<PropertyCombo> {
        if self.combos.is_empty() {
            valid_combos()
        } else {
            self.combos.clone()
        }
    }

    /// `(split descriptor, p)` pairs, in grid order.
    pub fn data_groups(&self) -> Vec<(String, Proportion)> {
        match self.kind {
            ExperimentKind::PropertyIndividual => {
                let p = Proportion::new(4, 5).expect("constant");
                self.combos().iter().map(|c| (c.to_string(), p)).collect()
            }
            ExperimentKind::PropertyJoint => self.proportions.iter().map(|p| ("joint".to_owned(), *p)).collect(),
            ExperimentKind::Family => {
                let mut out = Vec::new();
                for s in &self.splits {
                    for p in &self.proportions {
                        if FamilySplit::new(*s, *p).is_ok() {
                            out.push((s.name().to_owned(), *p));
                        }
                    }
                }
                out
            }
        }
    }

    /// Rows per data group: `runs × folds` for individual experiments.
    pub fn runs_per_group(&self) -> usize {
        match self.kind {
            ExperimentKind::PropertyIndividual => self.runs * self.folds,
            _ => self.runs,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let base = match self.kind {
            ExperimentKind::Family => TrainConfig::families(seed),
            _ => TrainConfig::properties(seed),
        };
        let o = &self.train;
        TrainConfig {
            learning_rate: o.learning_rate.unwrap_or(base.learning_rate),
            batch_count: o.batch_count.unwrap_or(base.batch_count),
            max_epochs: o.max_epochs.unwrap_or(base.max_epochs),
            eval_every: o.eval_every.unwrap_or(base.eval_every),
            adagrad_epsilon: o.adagrad_epsilon.unwrap_or(base.adagrad_epsilon),
            adagrad_sqrt: o.adagrad_sqrt.unwrap_or(base.adagrad_sqrt),
            seed,
            timeout_secs: Some(self.timeout_secs),
        }
    }
}

fn default_seed() -> u64 {
    20_170_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    pub experiments: Vec<ExperimentConfig>,
}

impl HarnessConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: HarnessConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() {
            return Err(Error::invalid("config lists no experiments"));
        }
        let mut names = std::collections::HashSet::new();
        for e in &self.experiments {
            e.validate()?;
            if !names.insert(&e.name) {
                return Err(Error::invalid(format!("experiment name {:?} is used twice", e.name)));
            }
        }
        Ok(())
    }
}
