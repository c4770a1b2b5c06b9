use serde::{Deserialize, Serialize};

use super::{evaluate, train, TrainConfig};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::kg::Dataset;
use crate::models::{ModelConfig, ModelKind};
use crate::seed;

pub const LAMBDA_GRID: [f64; 8] = [0.3, 0.1, 0.03, 0.01, 0.003, 0.001, 0.0003, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda_grid: Vec<f64>,
    pub rank_grid: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { lambda_grid: LAMBDA_GRID.to_vec(), rank_grid: (1..=10).map(|i| 5 * i).collect() }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() || self.rank_grid.is_empty() {
            return Err(Error::invalid("grids must be non-empty"));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::invalid("lambda values must be finite and non-negative"));
        }
        if self.rank_grid.contains(&0) {
            return Err(Error::invalid("ranks must be positive"));
        }
        Ok(())
    }

    /// λ values actually swept for `kind`: unregularized models need only one.
    pub fn lambdas_for(&self, kind: ModelKind) -> Vec<f64> {
        if kind.uses_regularization() {
            self.lambda_grid.clone()
        } else {
            vec![0.0]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CellOutcome {
    Trained { valid_ap: f64, test_ap: f64 },
    Diverged { epoch: usize },
    TimedOut { epoch: usize },
}

/// One trained candidate of a selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub model: ModelConfig,
    pub seed: u64,
    pub outcome: CellOutcome,
}

impl Trial {
    pub fn valid_ap(&self) -> Option<f64> {
        match self.outcome {
            CellOutcome::Trained { valid_ap, .. } => Some(valid_ap),
            _ => None,
        }
    }

    pub fn test_ap(&self) -> Option<f64> {
        match self.outcome {
            CellOutcome::Trained { test_ap, .. } => Some(test_ap),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub rank: usize,
    /// Index into `trials` of the selected model, if any trial finished.
    pub selected: Option<usize>,
    pub trials: Vec<Trial>,
}

impl GridRow {
    pub fn best(&self) -> Option<&Trial> {
        self.selected.map(|i| &self.trials[i])
    }
}

/// Seed for one (K, λ) cell, derived from the base training seed.
pub fn cell_seed(base: u64, model: &ModelConfig) -> u64 {
    seed::derive_keyed(base, &format!("{};rank={};lambda={}", model.kind, model.rank, model.lambda))
}

/// Trains every candidate (concurrently when `exec` allows) and evaluates
/// it on the validation and test sets. Divergence and timeouts are recorded
/// in the outcome; other errors abort.
pub fn train_candidates(
    candidates: &[ModelConfig],
    cfg: &TrainConfig,
    data: &Dataset,
    exec: Execution,
) -> Result<Vec<Trial>> {
    exec::map(candidates, exec, |model| -> Result<Trial> {
        model.validate()?;
        let seed = cell_seed(cfg.seed, model);
        let cell_cfg = TrainConfig { seed, ..cfg.clone() };
        let outcome = match train(model, &cell_cfg, data) {
            Ok(t) => CellOutcome::Trained {
                valid_ap: evaluate(&t.store, data.valid())?,
                test_ap: evaluate(&t.store, data.test())?,
            },
            Err(Error::TrainingDiverged { epoch }) => CellOutcome::Diverged { epoch },
            Err(Error::Timeout { epoch }) => CellOutcome::TimedOut { epoch },
            Err(e) => return Err(e),
        };
        Ok(Trial { model: *model, seed, outcome })
    })
    .into_iter()
    .collect()
}

/// Index of the trial with the best validation AP; ties go to the smaller
/// λ, then to the earlier candidate.
pub fn select(trials: &[Trial]) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, t) in trials.iter().enumerate() {
        if let Some(valid_ap) = t.valid_ap() {
            let lambda = t.model.lambda;
            let better = match best {
                None => true,
                Some((_, ap, l)) => valid_ap > ap || (valid_ap == ap && lambda < l),
            };
            if better {
                best = Some((i, valid_ap, lambda));
            }
        }
    }
    best.map(|b| b.0)
}

/// Trains one model per (K, λ) and keeps, for each K, the λ with the best
/// validation AP; ties go to the smaller λ.
pub fn grid_search(
    kind: ModelKind,
    grid: &GridSpec,
    cfg: &TrainConfig,
    data: &Dataset,
    exec: Execution,
) -> Result<Vec<GridRow>> {
    grid.validate()?;
    let lambdas = grid.lambdas_for(kind);
    let candidates: Vec<ModelConfig> = grid
        .rank_grid
        .iter()
        .flat_map(|&rank| lambdas.iter().map(move |&lambda| ModelConfig { kind, rank, lambda }))
        .collect();
    let mut trials = train_candidates(&candidates, cfg, data, exec)?.into_iter();
    Ok(grid
        .rank_grid
        .iter()
        .map(|&rank| {
            let trials: Vec<Trial> = trials.by_ref().take(lambdas.len()).collect();
            GridRow { rank, selected: select(&trials), trials }
        })
        .collect())
}
