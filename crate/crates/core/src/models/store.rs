use std::borrow::Cow;
use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::grad::{RowKey, SparseGrad};
use super::{ModelKind, Norm};
use crate::error::{Error, Result};
use crate::kg::{LabeledFact, Triple, Vocab};
use crate::seed;

/// A dense row-major parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ParamBlock {
    fn zeros(name: &str, rows: usize, cols: usize) -> Self {
        ParamBlock { name: name.to_owned(), rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

// Block layout per model kind.
const CP_SUBJ: usize = 0;
const CP_OBJ: usize = 1;
const CP_REL: usize = 2;
const ENT: usize = 0;
const REL: usize = 1;
const PAIR: usize = 0;
const CX_ENT_RE: usize = 0;
const CX_ENT_IM: usize = 1;
const CX_REL_RE: usize = 2;
const CX_REL_IM: usize = 3;

/// Logistic function `1 / (1 + e^{-x})`, evaluated without overflow.
pub fn probability(score: f64) -> f64 {
    if score >= 0.0 {
        1.0 / (1.0 + (-score).exp())
    } else {
        let e = score.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Parameters Θ of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    kind: ModelKind,
    rank: usize,
    entity_count: usize,
    relation_count: usize,
    blocks: Vec<ParamBlock>,
    pair_rows: HashMap<(usize, usize), usize>,
    pair_keys: Vec<(usize, usize)>,
    pair_seed: u64,
}

fn layout(kind: ModelKind, ne: usize, nr: usize, k: usize) -> Vec<ParamBlock> {
    match kind {
        ModelKind::Cp => vec![
            ParamBlock::zeros("subject", ne, k),
            ParamBlock::zeros("object", ne, k),
            ParamBlock::zeros("relation", nr, k),
        ],
        ModelKind::Rescal => vec![ParamBlock::zeros("entity", ne, k), ParamBlock::zeros("relation", nr, k * k)],
        ModelKind::TransE(_) | ModelKind::DistMult => {
            vec![ParamBlock::zeros("entity", ne, k), ParamBlock::zeros("relation", nr, k)]
        }
        ModelKind::FModel => vec![ParamBlock::zeros("pair", 0, k), ParamBlock::zeros("relation", nr, k)],
        ModelKind::ComplEx => vec![
            ParamBlock::zeros("entity_re", ne, k),
            ParamBlock::zeros("entity_im", ne, k),
            ParamBlock::zeros("relation_re", nr, k),
            ParamBlock::zeros("relation_im", nr, k),
        ],
    }
}

impl EmbeddingStore {
    /// Draws every parameter i.i.d. from N(0, 1), block by block, from a
    /// stream seeded by `seed`. TransE entities are projected to unit norm.
    pub fn init(kind: ModelKind, vocab: &Vocab, rank: usize, seed: u64) -> Result<Self> {
        if rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        let mut blocks = layout(kind, vocab.entity_count(), vocab.relation_count(), rank);
        let mut rng = seed::rng(seed);
        for b in &mut blocks {
            for v in &mut b.data {
                *v = rng.sample(StandardNormal);
            }
        }
        let mut store = EmbeddingStore {
            kind,
            rank,
            entity_count: vocab.entity_count(),
            relation_count: vocab.relation_count(),
            blocks,
            pair_rows: HashMap::new(),
            pair_keys: Vec::new(),
            pair_seed: seed::derive(seed, u64::MAX),
        };
        if matches!(kind, ModelKind::TransE(_)) {
            store.project_transe_entities()?;
        }
        Ok(store)
    }

    /// Reassembles a store from raw parts, validating the block layout.
    pub fn from_parts(
        kind: ModelKind,
        rank: usize,
        entity_count: usize,
        relation_count: usize,
        blocks: Vec<ParamBlock>,
        pair_keys: Vec<(usize, usize)>,
        pair_seed: u64,
    ) -> Result<Self> {
        let mut expected = layout(kind, entity_count, relation_count, rank);
        if kind == ModelKind::FModel {
            expected[PAIR].rows = pair_keys.len();
        }
        if expected.len() != blocks.len()
            || expected
                .iter()
                .zip(&blocks)
                .any(|(e, b)| e.rows != b.rows || e.cols != b.cols || b.data.len() != b.rows * b.cols)
        {
            return Err(Error::invalid(format!("parameter blocks do not match the {kind} layout")));
        }
        let mut pair_rows = HashMap::with_capacity(pair_keys.len());
        for (i, &(s, o)) in pair_keys.iter().enumerate() {
            if s >= entity_count || o >= entity_count || pair_rows.insert((s, o), i).is_some() {
                return Err(Error::invalid(format!("bad pair key ({s}, {o})")));
            }
        }
        Ok(EmbeddingStore { kind, rank, entity_count, relation_count, blocks, pair_rows, pair_keys, pair_seed })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn pair_keys(&self) -> &[(usize, usize)] {
        &self.pair_keys
    }

    pub fn pair_seed(&self) -> u64 {
        self.pair_seed
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.data.iter().all(|v| v.is_finite()))
    }

    fn check(&self, t: Triple) -> Result<()> {
        if t.relation >= self.relation_count || t.subject >= self.entity_count || t.object >= self.entity_count {
            return Err(Error::invalid(format!("triple {t} out of range for this store")));
        }
        Ok(())
    }

    /// Embedding of an entity pair never seen in training: a standard
    /// Gaussian draw that is a pure function of the store seed and the pair,
    /// so repeated lookups agree without mutating the store.
    fn fresh_pair_embedding(&self, s: usize, o: usize) -> Vec<f64> {
        let stream = (s as u64) * (self.entity_count as u64) + o as u64;
        let mut rng = seed::rng(seed::derive(self.pair_seed, stream));
        (0..self.rank).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn pair_embedding(&self, s: usize, o: usize) -> Cow<'_, [f64]> {
        match self.pair_rows.get(&(s, o)) {
            Some(&i) => Cow::Borrowed(self.blocks[PAIR].row(i)),
            None => Cow::Owned(self.fresh_pair_embedding(s, o)),
        }
    }

    /// Gives the pair `(s, o)` a stored row, drawing it if needed.
    pub fn materialize_pair(&mut self, s: usize, o: usize) -> usize {
        if let Some(&i) = self.pair_rows.get(&(s, o)) {
            return i;
        }
        let fresh = self.fresh_pair_embedding(s, o);
        let block = &mut self.blocks[PAIR];
        block.data.extend_from_slice(&fresh);
        block.rows += 1;
        let i = block.rows - 1;
        self.pair_rows.insert((s, o), i);
        self.pair_keys.push((s, o));
        i
    }

    pub fn row_values(&self, block: usize, key: RowKey) -> Cow<'_, [f64]> {
        match key {
            RowKey::Row(i) => Cow::Borrowed(self.blocks[block].row(i)),
            RowKey::Pair(s, o) => self.pair_embedding(s, o),
        }
    }

    /// Resolves a row key to a stored row index, materializing pair rows.
    pub fn resolve_row(&mut self, key: RowKey) -> usize {
        match key {
            RowKey::Row(i) => i,
            RowKey::Pair(s, o) => self.materialize_pair(s, o),
        }
    }

    pub fn row_mut(&mut self, block: usize, key: RowKey) -> &mut [f64] {
        let i = self.resolve_row(key);
        self.blocks[block].row_mut(i)
    }

    /// φ(r, s, o; Θ).
    pub fn score(&self, t: Triple) -> Result<f64> {
        self.check(t)?;
        Ok(self.score_unchecked(t))
    }

    pub(crate) fn score_unchecked(&self, t: Triple) -> f64 {
        let (r, s, o) = (t.relation, t.subject, t.object);
        let b = &self.blocks;
        match self.kind {
            ModelKind::Cp => {
                let (w, u, v) = (b[CP_REL].row(r), b[CP_SUBJ].row(s), b[CP_OBJ].row(o));
                w.iter().zip(u).zip(v).map(|((w, u), v)| w * u * v).sum()
            }
            ModelKind::DistMult => {
                let (w, es, eo) = (b[REL].row(r), b[ENT].row(s), b[ENT].row(o));
                w.iter().zip(es).zip(eo).map(|((w, x), y)| w * x * y).sum()
            }
            ModelKind::Rescal => {
                let (w, es, eo) = (b[REL].row(r), b[ENT].row(s), b[ENT].row(o));
                let k = self.rank;
                (0..k).map(|i| es[i] * w[i * k..(i + 1) * k].iter().zip(eo).map(|(a, c)| a * c).sum::<f64>()).sum()
            }
            ModelKind::TransE(norm) => {
                let (w, es, eo) = (b[REL].row(r), b[ENT].row(s), b[ENT].row(o));
                let diffs = es.iter().zip(w).zip(eo).map(|((a, b), c)| a + b - c);
                match norm {
                    Norm::L1 => -diffs.map(f64::abs).sum::<f64>(),
                    Norm::L2 => -diffs.map(|d| d * d).sum::<f64>().sqrt(),
                }
            }
            ModelKind::FModel => {
                let d = self.pair_embedding(s, o);
                d.iter().zip(b[REL].row(r)).map(|(x, y)| x * y).sum()
            }
            ModelKind::ComplEx => {
                let (a, bb) = (b[CX_REL_RE].row(r), b[CX_REL_IM].row(r));
                let (c, d) = (b[CX_ENT_RE].row(s), b[CX_ENT_IM].row(s));
                let (f, g) = (b[CX_ENT_RE].row(o), b[CX_ENT_IM].row(o));
                (0..self.rank).map(|j| a[j] * (c[j] * f[j] + d[j] * g[j]) + bb[j] * (c[j] * g[j] - d[j] * f[j])).sum()
            }
        }
    }

    /// Pushes ∂φ/∂row for every row the triple touches into `g`; returns φ.
    fn score_gradient(&self, t: Triple, g: &mut SparseGrad) -> f64 {
        let (r, s, o) = (t.relation, t.subject, t.object);
        let k = self.rank;
        let b = &self.blocks;
        let (rr, rs, ro) = (RowKey::Row(r), RowKey::Row(s), RowKey::Row(o));
        match self.kind {
            ModelKind::Cp => {
                let (w, u, v) = (b[CP_REL].row(r), b[CP_SUBJ].row(s), b[CP_OBJ].row(o));
                mul_into(g.slot(CP_REL, rr, k), u, v);
                mul_into(g.slot(CP_SUBJ, rs, k), w, v);
                mul_into(g.slot(CP_OBJ, ro, k), w, u);
            }
            ModelKind::DistMult => {
                let (w, es, eo) = (b[REL].row(r), b[ENT].row(s), b[ENT].row(o));
                mul_into(g.slot(REL, rr, k), es, eo);
                mul_into(g.slot(ENT, rs, k), w, eo);
                mul_into(g.slot(ENT, ro, k), w, es);
            }
            ModelKind::Rescal => {
                let (w, es, eo) = (b[REL].row(r), b[ENT].row(s), b[ENT].row(o));
                {
                    let gs = g.slot(ENT, rs, k);
                    for i in 0..k {
                        gs[i] += w[i * k..(i + 1) * k].iter().zip(eo).map(|(a, c)| a * c).sum::<f64>();
                    }
                }
                {
                    let go = g.slot(ENT, ro, k);
                    for i in 0..k {
                        for j in 0..k {
                            go[j] += es[i] * w[i * k + j];
                        }
                    }
                }
                let gw = g.slot(REL, rr, k * k);
                for i in 0..k {
                    for j in 0..k {
                        gw[i * k + j] += es[i] * eo[j];
                    }
                }
            }
            ModelKind::TransE(norm) => {
                let (w, es, eo) = (b[REL].row(r), b[ENT].row(s), b[ENT].row(o));
                let diff: Vec<f64> = (0..k).map(|j| es[j] + w[j] - eo[j]).collect();
                let dphi: Vec<f64> = match norm {
                    Norm::L1 => diff.iter().map(|d| if *d == 0.0 { 0.0 } else { -d.signum() }).collect(),
                    Norm::L2 => {
                        let n = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
                        if n == 0.0 {
                            vec![0.0; k]
                        } else {
                            diff.iter().map(|d| -d / n).collect()
                        }
                    }
                };
                add_into(g.slot(ENT, rs, k), &dphi, 1.0);
                add_into(g.slot(REL, rr, k), &dphi, 1.0);
                add_into(g.slot(ENT, ro, k), &dphi, -1.0);
                return match norm {
                    Norm::L1 => -diff.iter().map(|d| d.abs()).sum::<f64>(),
                    Norm::L2 => -diff.iter().map(|d| d * d).sum::<f64>().sqrt(),
                };
            }
            ModelKind::FModel => {
                let d = self.pair_embedding(s, o);
                let w = b[REL].row(r);
                add_into(g.slot(PAIR, RowKey::Pair(s, o), k), w, 1.0);
                add_into(g.slot(REL, rr, k), &d, 1.0);
            }
            ModelKind::ComplEx => {
                let (a, bb) = (b[CX_REL_RE].row(r), b[CX_REL_IM].row(r));
                let (c, d) = (b[CX_ENT_RE].row(s), b[CX_ENT_IM].row(s));
                let (f, gg) = (b[CX_ENT_RE].row(o), b[CX_ENT_IM].row(o));
                // φ = Σ a(cf + dg) + b(cg − df)
                fill(g.slot(CX_REL_RE, rr, k), |j| c[j] * f[j] + d[j] * gg[j]);
                fill(g.slot(CX_REL_IM, rr, k), |j| c[j] * gg[j] - d[j] * f[j]);
                fill(g.slot(CX_ENT_RE, rs, k), |j| a[j] * f[j] + bb[j] * gg[j]);
                fill(g.slot(CX_ENT_IM, rs, k), |j| a[j] * gg[j] - bb[j] * f[j]);
                fill(g.slot(CX_ENT_RE, ro, k), |j| a[j] * c[j] - bb[j] * d[j]);
                fill(g.slot(CX_ENT_IM, ro, k), |j| a[j] * d[j] + bb[j] * c[j]);
            }
        }
        self.score_unchecked(t)
    }

    fn regularized(&self, lambda: f64) -> bool {
        self.kind.uses_regularization() && lambda > 0.0
    }

    /// `log(1 + exp(−y·φ)) + λ·Σ‖row‖²` over the distinct rows the fact
    /// touches (Frobenius norm for a RESCAL relation matrix). TransE carries
    /// no penalty.
    pub fn fact_loss(&self, fact: &LabeledFact, lambda: f64) -> Result<f64> {
        self.check(fact.triple)?;
        let mut g = SparseGrad::new();
        Ok(self.loss_and_gradient(fact, lambda, &mut g))
    }

    /// Exact gradient of [`fact_loss`](Self::fact_loss).
    pub fn fact_gradient(&self, fact: &LabeledFact, lambda: f64) -> Result<SparseGrad> {
        self.check(fact.triple)?;
        let mut g = SparseGrad::new();
        self.loss_and_gradient(fact, lambda, &mut g);
        Ok(g)
    }

    /// Fills `g` with the loss gradient and returns the loss. Indices are
    /// assumed valid.
    pub(crate) fn loss_and_gradient(&self, fact: &LabeledFact, lambda: f64, g: &mut SparseGrad) -> f64 {
        g.clear();
        let y = fact.label.sign();
        let phi = self.score_gradient(fact.triple, g);
        // ∂/∂φ log(1 + e^{−yφ}) = −y·σ(−yφ)
        g.scale(-y * probability(-y * phi));
        let mut loss = softplus(-y * phi);
        if self.regularized(lambda) {
            let (entries, values) = g.parts_mut();
            let mut penalty = 0.0;
            for e in entries {
                let row = self.row_values(e.block, e.row);
                for (gv, x) in values[e.range()].iter_mut().zip(row.iter()) {
                    *gv += 2.0 * lambda * x;
                    penalty += x * x;
                }
            }
            loss += lambda * penalty;
        }
        loss
    }

    /// Rescales every TransE entity row to unit Euclidean norm; an all-zero
    /// row becomes the first basis vector.
    pub fn project_transe_entities(&mut self) -> Result<()> {
        if !matches!(self.kind, ModelKind::TransE(_)) {
            return Err(Error::InvalidState(format!("unit-norm projection applies to TransE, not {}", self.kind)));
        }
        let block = &mut self.blocks[ENT];
        for i in 0..block.rows {
            normalize_row(block.row_mut(i));
        }
        Ok(())
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [ParamBlock] {
        &mut self.blocks
    }

    /// Scores for every fact, in input order.
    pub fn score_all(&self, facts: &[LabeledFact]) -> Result<Vec<f64>> {
        facts.iter().map(|f| self.score(f.triple)).collect()
    }
}

fn normalize_row(row: &mut [f64]) {
    let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        row.iter_mut().for_each(|x| *x = 0.0);
        row[0] = 1.0;
    } else {
        row.iter_mut().for_each(|x| *x /= n);
    }
}

fn mul_into(out: &mut [f64], a: &[f64], b: &[f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o += x * y;
    }
}

fn add_into(out: &mut [f64], a: &[f64], factor: f64) {
    for (o, x) in out.iter_mut().zip(a) {
        *o += factor * x;
    }
}

fn fill(out: &mut [f64], f: impl Fn(usize) -> f64) {
    for (j, o) in out.iter_mut().enumerate() {
        *o += f(j);
    }
}
