mod common;

use common::{random_instance, MODELS};
use proptest::prelude::*;
use relprobe_core::exec::Execution;
use relprobe_core::kg::{Dataset, Label, LabeledFact, Triple, Vocab};
use relprobe_core::models::{ModelConfig, ModelKind};
use relprobe_core::synth::properties::build_individual_datasets;
use relprobe_core::synth::PropertyCombo;
use relprobe_core::trainer::{evaluate, grid_search, train, GridSpec, TrainConfig, TrainState};

fn symmetric_block() -> Vec<LabeledFact> {
    // Two 2-cliques on four entities.
    let mut facts = Vec::new();
    for s in 0..4 {
        for o in 0..4 {
            facts.push(LabeledFact::new(Triple::new(0, s, o), Label::from_bool(s / 2 == o / 2)));
        }
    }
    facts
}

#[test]
fn complex_rank_two_overfits_a_symmetric_relation() {
    let facts = symmetric_block();
    let model = ModelConfig::new(ModelKind::ComplEx, 2, 0.0).unwrap();
    let cfg = TrainConfig::properties(7);
    let mut state = TrainState::new(&model, &cfg, &Vocab::new(4, 1).unwrap()).unwrap();
    let mut reached = None;
    for epoch in 1..=500 {
        state.run_epoch(&facts, None).unwrap();
        if evaluate(state.store(), &facts).unwrap() == 1.0 {
            reached = Some(epoch);
            break;
        }
    }
    assert!(reached.is_some(), "train AP never reached 1.0");
}

fn small_dataset(seed: u64) -> Dataset {
    let combo: PropertyCombo = "symmetric".parse().unwrap();
    build_individual_datasets(combo, 12, seed).unwrap().swap_remove(0)
}

#[test]
fn identical_seeds_give_identical_runs() {
    let data = small_dataset(3);
    for kind in MODELS {
        let model = ModelConfig::new(kind, 4, 0.01).unwrap();
        let cfg = TrainConfig { max_epochs: 120, eval_every: 10, ..TrainConfig::properties(11) };
        let a = train(&model, &cfg, &data).unwrap();
        let b = train(&model, &cfg, &data).unwrap();
        assert_eq!(a.history, b.history, "{kind}");
        assert_eq!(a.store, b.store, "{kind}");
        let c = train(&model, &TrainConfig { seed: 12, ..cfg }, &data).unwrap();
        assert_ne!(a.store, c.store, "{kind}");
    }
}

#[test]
fn accumulators_never_decrease() {
    let data = small_dataset(4);
    for kind in MODELS {
        let model = ModelConfig::new(kind, 3, 0.03).unwrap();
        let mut state = TrainState::new(&model, &TrainConfig::properties(5), data.vocab()).unwrap();
        let mut prev: Vec<Vec<f64>> = state.accumulators().to_vec();
        for _ in 0..20 {
            state.run_epoch(data.train(), None).unwrap();
            let now = state.accumulators();
            for (p, n) in prev.iter().zip(now) {
                assert!(p.len() <= n.len());
                assert!(p.iter().zip(n).all(|(a, b)| a <= b && *a >= 0.0), "{kind}");
            }
            prev = now.to_vec();
        }
    }
}

/// Smooth models improve the margin at every epoch. TransE oscillates around
/// its non-smooth optimum φ = 0 and is re-projected after every batch, so it
/// is only required to end with a better margin than it started with.
#[test]
fn single_fact_margin_increases() {
    for kind in MODELS {
        let smooth = !matches!(kind, ModelKind::TransE(_));
        for i in 0..10 {
            let (store, fact, _) = random_instance(kind, 500 + i);
            let vocab = Vocab::new(store.entity_count(), store.relation_count()).unwrap();
            let model = ModelConfig::new(kind, store.rank(), 0.0).unwrap();
            let mut state = TrainState::new(&model, &TrainConfig::properties(i), &vocab).unwrap();
            let y = fact.label.sign();
            let initial = y * state.store().score(fact.triple).unwrap();
            let mut margin = initial;
            for epoch in 1..=30 {
                state.run_epoch(&[fact], None).unwrap();
                let m = y * state.store().score(fact.triple).unwrap();
                assert!(!smooth || m >= margin - 1e-12, "{kind} instance {i} epoch {epoch}: {margin} -> {m}");
                margin = m;
            }
            assert!(margin > initial, "{kind} instance {i}: {initial} -> {margin}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn early_stopping_returns_the_best_snapshot(seed in 0u64..1000, kind in 0usize..7) {
        let data = small_dataset(seed % 5);
        let model = ModelConfig::new(MODELS[kind], 3, 0.0).unwrap();
        let cfg = TrainConfig { max_epochs: 200, eval_every: 5, ..TrainConfig::properties(seed) };
        let out = train(&model, &cfg, &data).unwrap();
        let returned = evaluate(&out.store, data.valid()).unwrap();
        if let Some(best) = out.history.best_valid_ap {
            prop_assert_eq!(returned, best);
        }
        for (_, ap) in out.history.evaluations() {
            prop_assert!(returned >= ap || out.history.best_valid_ap.is_none());
        }
    }
}

#[test]
fn single_cell_grid_matches_direct_training() {
    let data = small_dataset(1);
    let grid = GridSpec { lambda_grid: vec![0.01], rank_grid: vec![4] };
    let cfg = TrainConfig { max_epochs: 100, eval_every: 10, ..TrainConfig::properties(9) };
    let rows = grid_search(ModelKind::DistMult, &grid, &cfg, &data, Execution::Sequential).unwrap();
    let trial = rows[0].best().unwrap();
    let direct = train(&trial.model, &TrainConfig { seed: trial.seed, ..cfg }, &data).unwrap();
    assert_eq!(trial.valid_ap(), Some(evaluate(&direct.store, data.valid()).unwrap()));
    assert_eq!(trial.test_ap(), Some(evaluate(&direct.store, data.test()).unwrap()));
}

#[test]
fn parallel_and_sequential_grids_agree() {
    let data = small_dataset(2);
    let grid = GridSpec { lambda_grid: vec![0.1, 0.0], rank_grid: vec![2, 4] };
    let cfg = TrainConfig { max_epochs: 60, eval_every: 10, ..TrainConfig::properties(4) };
    let seq = grid_search(ModelKind::Cp, &grid, &cfg, &data, Execution::Sequential).unwrap();
    let par = grid_search(ModelKind::Cp, &grid, &cfg, &data, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
}
