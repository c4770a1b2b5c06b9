#![allow(dead_code)]

use rand::Rng;
use relprobe_core::kg::{Label, LabeledFact, Triple, Vocab};
use relprobe_core::models::{EmbeddingStore, ModelKind, Norm, RowKey};
use relprobe_core::seed;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-5;

/// The six models, TransE under both norms.
pub const MODELS: [ModelKind; 7] = ModelKind::ALL;

pub fn model_families() -> [Vec<ModelKind>; 6] {
    [
        vec![ModelKind::Cp],
        vec![ModelKind::Rescal],
        vec![ModelKind::TransE(Norm::L1), ModelKind::TransE(Norm::L2)],
        vec![ModelKind::FModel],
        vec![ModelKind::DistMult],
        vec![ModelKind::ComplEx],
    ]
}

/// A random (store, fact, λ) instance on a small vocabulary; subject and
/// object coincide often enough to exercise accumulation.
pub fn random_instance(kind: ModelKind, seed: u64) -> (EmbeddingStore, LabeledFact, f64) {
    let mut rng = seed::rng(seed);
    let ne = rng.random_range(1..6);
    let nr = rng.random_range(1..4);
    let k = rng.random_range(1..7);
    let vocab = Vocab::new(ne, nr).unwrap();
    let mut store = EmbeddingStore::init(kind, &vocab, k, rng.random()).unwrap();
    let t = Triple::new(rng.random_range(0..nr), rng.random_range(0..ne), rng.random_range(0..ne));
    if kind == ModelKind::FModel && rng.random_bool(0.5) {
        store.materialize_pair(t.subject, t.object);
    }
    let label = Label::from_bool(rng.random_bool(0.5));
    let lambda = [0.0, 0.001, 0.03, 0.3][rng.random_range(0..4)];
    (store, LabeledFact::new(t, label), lambda)
}

fn central_difference(
    store: &EmbeddingStore,
    fact: &LabeledFact,
    lambda: f64,
    block: usize,
    row: RowKey,
    j: usize,
) -> f64 {
    let mut plus = store.clone();
    plus.row_mut(block, row)[j] += FD_STEP;
    let mut minus = store.clone();
    minus.row_mut(block, row)[j] -= FD_STEP;
    (plus.fact_loss(fact, lambda).unwrap() - minus.fact_loss(fact, lambda).unwrap()) / (2.0 * FD_STEP)
}

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= FD_TOL * analytic.abs().max(numeric.abs()).max(1.0)
}

/// Compares every coordinate of the analytic gradient, and every coordinate
/// of the rows it does not touch, against central differences. Returns the
/// first mismatch.
pub fn check_gradient(store: &EmbeddingStore, fact: &LabeledFact, lambda: f64) -> Result<(), String> {
    let g = store.fact_gradient(fact, lambda).unwrap();
    for (e, values) in g.iter() {
        for (j, &a) in values.iter().enumerate() {
            let n = central_difference(store, fact, lambda, e.block, e.row, j);
            if !close(a, n) {
                return Err(format!(
                    "{} block {} row {:?} coord {j}: analytic {a} numeric {n}",
                    store.kind(),
                    e.block,
                    e.row
                ));
            }
        }
    }
    for (b, block) in store.blocks().iter().enumerate() {
        for i in 0..block.rows {
            let key = match store.kind() {
                ModelKind::FModel if b == 0 => {
                    let (s, o) = store.pair_keys()[i];
                    RowKey::Pair(s, o)
                }
                _ => RowKey::Row(i),
            };
            if g.entries().iter().any(|e| e.block == b && e.row == key) {
                continue;
            }
            for j in 0..block.cols {
                let n = central_difference(store, fact, lambda, b, key, j);
                if !close(0.0, n) {
                    return Err(format!("{} untouched block {b} row {i} coord {j} has slope {n}", store.kind()));
                }
            }
        }
    }
    Ok(())
}

use relprobe_core::synth::{PropertyCombo, Reflexivity, SignMatrix, Symmetry};

/// Definitional check of `combo` on `m`, written without the library checker.
pub fn brute_force_check(m: &SignMatrix, combo: PropertyCombo) -> Result<(), String> {
    let n = m.n();
    let y = |i: usize, j: usize| m.get(i, j) == 1;
    for i in 0..n {
        match combo.reflexivity {
            Reflexivity::Reflexive if !y(i, i) => return Err(format!("({i},{i}) is negative")),
            Reflexivity::Irreflexive if y(i, i) => return Err(format!("({i},{i}) is positive")),
            _ => {}
        }
        for j in 0..n {
            match combo.symmetry {
                Symmetry::Symmetric if y(i, j) != y(j, i) => return Err(format!("({i},{j}) not mirrored")),
                Symmetry::Antisymmetric if i != j && y(i, j) && y(j, i) => {
                    return Err(format!("({i},{j}) and ({j},{i}) both positive"))
                }
                _ => {}
            }
            if combo.transitive && y(i, j) {
                for k in 0..n {
                    if y(j, k) && !y(i, k) {
                        return Err(format!("({i},{j}),({j},{k}) without ({i},{k})"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Positives within `slack` cells of half the matrix.
pub fn balanced_within(m: &SignMatrix, slack: usize) -> bool {
    let n2 = m.n() * m.n();
    let pos = (0..m.n()).flat_map(|i| (0..m.n()).map(move |j| (i, j))).filter(|&(i, j)| m.get(i, j) == 1).count();
    (2 * pos).abs_diff(n2) <= 2 * slack
}
