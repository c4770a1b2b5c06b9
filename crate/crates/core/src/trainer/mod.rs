//! Per-fact AdaGrad training with early stopping on validation AP, and the
//! λ/rank grid search built on top of it.

mod grid;

use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{average_precision, Dataset, LabeledFact, ScoredFact, Vocab};
use crate::models::{EmbeddingStore, ModelConfig, ModelKind, SparseGrad};
use crate::seed;

pub use grid::{cell_seed, grid_search, select, train_candidates, CellOutcome, GridRow, GridSpec, Trial, LAMBDA_GRID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_count: usize,
    pub max_epochs: usize,
    pub eval_every: usize,
    pub adagrad_epsilon: f64,
    /// `false` selects the update `α/(g + ε)` without the square root.
    pub adagrad_sqrt: bool,
    pub seed: u64,
    /// Wall-clock budget for one training run.
    #[serde(default)]
    pub timeout_secs: Option<f64>,
}

impl TrainConfig {
    pub fn properties(seed: u64) -> Self {
        TrainConfig {
            learning_rate: 0.1,
            batch_count: 10,
            max_epochs: 5000,
            eval_every: 50,
            adagrad_epsilon: 1e-8,
            adagrad_sqrt: true,
            seed,
            timeout_secs: None,
        }
    }

    pub fn families(seed: u64) -> Self {
        TrainConfig { batch_count: 100, max_epochs: 1000, ..Self::properties(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.adagrad_epsilon.is_nan() || self.adagrad_epsilon <= 0.0 {
            return Err(Error::invalid("AdaGrad epsilon must be positive"));
        }
        if self.eval_every == 0 || self.batch_count == 0 {
            return Err(Error::invalid("eval_every and batch_count must be at least 1"));
        }
        if let Some(t) = self.timeout_secs {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::invalid("timeout must be positive"));
            }
        }
        Ok(())
    }
}

/// AdaGrad with one accumulator per parameter, shaped like the store blocks.
#[derive(Debug, Clone)]
pub struct AdaGrad {
    learning_rate: f64,
    epsilon: f64,
    sqrt: bool,
    accum: Vec<Vec<f64>>,
}

impl AdaGrad {
    pub fn new(cfg: &TrainConfig, store: &EmbeddingStore) -> Self {
        AdaGrad {
            learning_rate: cfg.learning_rate,
            epsilon: cfg.adagrad_epsilon,
            sqrt: cfg.adagrad_sqrt,
            accum: store.blocks().iter().map(|b| vec![0.0; b.data.len()]).collect(),
        }
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        &self.accum
    }

    /// `g += ∇²; v −= α/(√g + ε)·∇` for every coordinate in `grad`.
    pub fn apply(&mut self, store: &mut EmbeddingStore, grad: &SparseGrad) {
        for (e, values) in grad.iter() {
            let row = store.resolve_row(e.row);
            let block = &mut store.blocks_mut()[e.block];
            let acc = &mut self.accum[e.block];
            if acc.len() < block.data.len() {
                acc.resize(block.data.len(), 0.0);
            }
            let off = row * block.cols;
            for (j, &gv) in values.iter().enumerate() {
                let a = &mut acc[off + j];
                *a += gv * gv;
                let denom = if self.sqrt { a.sqrt() } else { *a };
                block.data[off + j] -= self.learning_rate / (denom + self.epsilon) * gv;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub valid_ap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch of the returned snapshot, if any evaluation happened.
    pub best_epoch: Option<usize>,
    pub best_valid_ap: Option<f64>,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn evaluations(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.epochs.iter().filter_map(|r| r.valid_ap.map(|ap| (r.epoch, ap)))
    }

    /// CSV log: `epoch,mean_train_loss,valid_ap`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,mean_train_loss,valid_ap")?;
        for r in &self.epochs {
            match r.valid_ap {
                Some(ap) => writeln!(w, "{},{},{}", r.epoch, r.mean_loss, ap)?,
                None => writeln!(w, "{},{},", r.epoch, r.mean_loss)?,
            }
        }
        Ok(())
    }
}

/// Mutable state of one training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    store: EmbeddingStore,
    optimizer: AdaGrad,
    lambda: f64,
    batch_count: usize,
    epoch: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    grad: SparseGrad,
}

impl TrainState {
    pub fn new(model: &ModelConfig, cfg: &TrainConfig, vocab: &Vocab) -> Result<Self> {
        model.validate()?;
        cfg.validate()?;
        let store = EmbeddingStore::init(model.kind, vocab, model.rank, seed::derive(cfg.seed, 0))?;
        let optimizer = AdaGrad::new(cfg, &store);
        Ok(TrainState {
            store,
            optimizer,
            lambda: model.lambda,
            batch_count: cfg.batch_count,
            epoch: 0,
            rng: seed::rng(seed::derive(cfg.seed, 1)),
            order: Vec::new(),
            grad: SparseGrad::new(),
        })
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        self.optimizer.accumulators()
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One pass over `train`: shuffle, slice into batches, update per fact.
    /// Returns the mean pre-update loss.
    pub fn run_epoch(&mut self, train: &[LabeledFact], deadline: Option<Instant>) -> Result<f64> {
        self.epoch += 1;
        let n = train.len();
        self.order.clear();
        self.order.extend(0..n);
        self.order.shuffle(&mut self.rng);
        let batches = self.batch_count.min(n.max(1));
        let transe = matches!(self.store.kind(), ModelKind::TransE(_));
        let mut total = 0.0;
        for b in 0..batches {
            let (lo, hi) = (b * n / batches, (b + 1) * n / batches);
            for &i in &self.order[lo..hi] {
                let loss = self.store.loss_and_gradient(&train[i], self.lambda, &mut self.grad);
                if !loss.is_finite() {
                    return Err(Error::TrainingDiverged { epoch: self.epoch });
                }
                total += loss;
                self.optimizer.apply(&mut self.store, &self.grad);
            }
            if transe {
                self.store.project_transe_entities()?;
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return Err(Error::Timeout { epoch: self.epoch });
            }
        }
        Ok(if n == 0 { 0.0 } else { total / n as f64 })
    }

    pub fn into_store(self) -> EmbeddingStore {
        self.store
    }
}

/// Non-interpolated AP of `store` on `facts`.
pub fn evaluate(store: &EmbeddingStore, facts: &[LabeledFact]) -> Result<f64> {
    let scored = facts
        .iter()
        .map(|f| Ok(ScoredFact { score: store.score(f.triple)?, label: f.label, triple: f.triple }))
        .collect::<Result<Vec<_>>>()?;
    average_precision(&scored)
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub store: EmbeddingStore,
    pub history: TrainHistory,
}

/// Trains one model. Every `eval_every` epochs the validation AP is
/// computed; training stops as soon as it fails to beat the previous
/// evaluation and the best-scoring snapshot is returned.
pub fn train(model: &ModelConfig, cfg: &TrainConfig, data: &Dataset) -> Result<Trained> {
    if data.train().is_empty() || data.valid().is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    if !data.valid().iter().any(|f| f.label.is_positive()) {
        return Err(Error::invalid("validation set has no positive fact"));
    }
    let mut state = TrainState::new(model, cfg, data.vocab())?;
    let deadline = cfg.timeout_secs.map(|t| Instant::now() + Duration::from_secs_f64(t));
    let mut history = TrainHistory::default();
    let mut best: Option<EmbeddingStore> = None;
    let mut previous = 0.0;
    for epoch in 1..=cfg.max_epochs {
        let mean_loss = state.run_epoch(data.train(), deadline)?;
        let mut record = EpochRecord { epoch, mean_loss, valid_ap: None };
        if epoch % cfg.eval_every == 0 {
            let ap = evaluate(state.store(), data.valid())?;
            record.valid_ap = Some(ap);
            history.epochs.push(record);
            log::debug!("{} epoch {epoch}: loss {mean_loss:.5}, valid AP {ap:.4}", model.kind);
            if ap <= previous {
                history.stopped_early = true;
                break;
            }
            previous = ap;
            history.best_epoch = Some(epoch);
            history.best_valid_ap = Some(ap);
            best = Some(state.store().clone());
        } else {
            history.epochs.push(record);
        }
    }
    let store = best.unwrap_or_else(|| state.into_store());
    Ok(Trained { store, history })
}
