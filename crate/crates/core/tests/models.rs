mod common;

use common::{check_gradient, random_instance, MODELS};
use proptest::prelude::*;
use relprobe_core::kg::{Label, LabeledFact, Triple, Vocab};
use relprobe_core::models::{EmbeddingStore, ModelKind, ParamBlock};

#[test]
fn gradients_match_finite_differences() {
    for kind in MODELS {
        for i in 0..100 {
            let (store, fact, lambda) = random_instance(kind, 1000 + i);
            check_gradient(&store, &fact, lambda).unwrap_or_else(|e| panic!("instance {i}: {e}"));
        }
    }
}

fn store_with(kind: ModelKind, blocks: Vec<ParamBlock>, ne: usize, k: usize) -> EmbeddingStore {
    EmbeddingStore::from_parts(kind, k, ne, 1, blocks, Vec::new(), 0).unwrap()
}

fn block(name: &str, rows: usize, cols: usize, data: Vec<f64>) -> ParamBlock {
    ParamBlock { name: name.into(), rows, cols, data }
}

proptest! {
    #[test]
    fn distmult_is_symmetric(seed in any::<u64>(), s in 0usize..4, o in 0usize..4) {
        let store = EmbeddingStore::init(ModelKind::DistMult, &Vocab::new(4, 2).unwrap(), 5, seed).unwrap();
        for r in 0..2 {
            let a = store.score(Triple::new(r, s, o)).unwrap();
            let b = store.score(Triple::new(r, o, s)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_with_real_parameters_is_distmult(
        ent in proptest::collection::vec(-2.0f64..2.0, 12),
        rel in proptest::collection::vec(-2.0f64..2.0, 4),
        s in 0usize..3,
        o in 0usize..3,
    ) {
        let cx = store_with(ModelKind::ComplEx, vec![
            block("entity_re", 3, 4, ent.clone()),
            block("entity_im", 3, 4, vec![0.0; 12]),
            block("relation_re", 1, 4, rel.clone()),
            block("relation_im", 1, 4, vec![0.0; 4]),
        ], 3, 4);
        let dm = store_with(ModelKind::DistMult, vec![block("entity", 3, 4, ent), block("relation", 1, 4, rel)], 3, 4);
        let t = Triple::new(0, s, o);
        prop_assert!((cx.score(t).unwrap() - dm.score(t).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn complex_imaginary_relation_is_antisymmetric(
        re in proptest::collection::vec(-2.0f64..2.0, 12),
        im in proptest::collection::vec(-2.0f64..2.0, 12),
        rel in proptest::collection::vec(-2.0f64..2.0, 4),
        s in 0usize..3,
        o in 0usize..3,
    ) {
        let cx = store_with(ModelKind::ComplEx, vec![
            block("entity_re", 3, 4, re),
            block("entity_im", 3, 4, im),
            block("relation_re", 1, 4, vec![0.0; 4]),
            block("relation_im", 1, 4, rel),
        ], 3, 4);
        let a = cx.score(Triple::new(0, s, o)).unwrap();
        let b = cx.score(Triple::new(0, o, s)).unwrap();
        prop_assert!((a + b).abs() < 1e-9);
    }

    #[test]
    fn loss_is_finite_and_nonnegative(seed in any::<u64>(), kind in 0usize..7) {
        let (store, fact, lambda) = common::random_instance(MODELS[kind], seed);
        let l = store.fact_loss(&fact, lambda).unwrap();
        prop_assert!(l.is_finite() && l >= 0.0);
    }
}

#[test]
fn label_flip_mirrors_the_loss() {
    let store = EmbeddingStore::init(ModelKind::Cp, &Vocab::new(3, 1).unwrap(), 4, 9).unwrap();
    let t = Triple::new(0, 1, 2);
    let phi = store.score(t).unwrap();
    let pos = store.fact_loss(&LabeledFact::new(t, Label::Positive), 0.0).unwrap();
    let neg = store.fact_loss(&LabeledFact::new(t, Label::Negative), 0.0).unwrap();
    assert!((pos - neg + phi).abs() < 1e-12);
}
