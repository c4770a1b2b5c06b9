mod common;

use std::collections::HashSet;

use common::{balanced_within, brute_force_check};
use proptest::prelude::*;
use relprobe_core::kg::{Proportion, SplitKind, Triple};
use relprobe_core::oracle::{family_rules, forward_chain};
use relprobe_core::synth::families::{
    build_family_dataset, generate_world, label_kinship, ENTITY_COUNT, FACTS_PER_FAMILY, PERSONS_PER_FAMILY,
};
use relprobe_core::synth::properties::{
    build_individual_datasets, build_joint_dataset, generate_relation, valid_combos, FOLDS, JOINT_COMBOS,
};
use relprobe_core::synth::{FamilySplit, Kinship, PropertyCombo, Sex};

fn percent() -> Proportion {
    Proportion::new(1, 100).unwrap()
}

#[test]
fn thirteen_combos() {
    let combos = valid_combos();
    assert_eq!(combos.len(), 13);
    for c in combos {
        assert_eq!(c.to_string().parse::<PropertyCombo>().unwrap(), c);
    }
    assert!("reflexive".parse::<PropertyCombo>().is_err());
    assert!("irreflexive+symmetric+transitive".parse::<PropertyCombo>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn generated_relations_hold_their_properties(seed in any::<u64>(), c in 0usize..13) {
        let combo = valid_combos()[c];
        let m = generate_relation(combo, 50, percent(), seed).unwrap();
        prop_assert_eq!(brute_force_check(&m, combo), Ok(()));
        prop_assert!(balanced_within(&m, 25));
    }

    #[test]
    fn generated_relations_are_fixpoints(seed in any::<u64>(), c in 0usize..13) {
        let combo = valid_combos()[c];
        let m = generate_relation(combo, 50, percent(), seed).unwrap();
        let mut again = m.clone();
        prop_assert!(!again.diagonal_pass(combo.reflexivity));
        prop_assert!(!again.symmetry_pass(combo.symmetry));
        if combo.transitive {
            prop_assert!(!again.transitivity_pass());
        }
        prop_assert_eq!(again, m);
    }
}

#[test]
fn generation_is_deterministic() {
    for combo in valid_combos() {
        let a = generate_relation(combo, 50, percent(), 77).unwrap();
        let b = generate_relation(combo, 50, percent(), 77).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn folds_partition_the_matrix() {
    let combo: PropertyCombo = "antisymmetric".parse().unwrap();
    let sets = build_individual_datasets(combo, 50, 5).unwrap();
    assert_eq!(sets.len(), FOLDS);
    let mut tested = HashSet::new();
    for d in &sets {
        assert_eq!(d.sizes(), (2000, 250, 250));
        for f in d.test() {
            assert!(tested.insert(f.triple));
        }
    }
    assert_eq!(tested.len(), 2500);
    for k in 0..FOLDS {
        let next: HashSet<Triple> = sets[(k + 1) % FOLDS].test().iter().map(|f| f.triple).collect();
        assert!(sets[k].valid().iter().all(|f| next.contains(&f.triple)));
    }
}

#[test]
fn joint_dataset_sizes() {
    let d = build_joint_dataset(Proportion::new(1, 5).unwrap(), 50, 3).unwrap();
    assert_eq!(d.len(), JOINT_COMBOS.len() * 2500);
    assert_eq!(d.sizes(), (2500, 1250, 8750));
    assert!(build_joint_dataset(Proportion::new(9, 10).unwrap(), 50, 3).is_err());
}

#[test]
fn family_structure() {
    let world = generate_world(11);
    let mut all = 0;
    for tree in &world {
        tree.validate().unwrap();
        assert_eq!(tree.persons.len(), PERSONS_PER_FAMILY);
        let facts = label_kinship(tree).unwrap();
        assert_eq!(facts.len(), FACTS_PER_FAMILY);
        all += facts.len();
        let count = |pred: &dyn Fn(Kinship) -> bool| {
            facts
                .iter()
                .filter(|f| f.label.is_positive() && pred(Kinship::from_index(f.triple.relation).unwrap()))
                .count()
        };
        assert_eq!(count(&|_| true), 260);
        assert_eq!(count(&Kinship::is_main), 60);
        assert_eq!(count(&|k| matches!(k, Kinship::Husband | Kinship::Wife)), 14);
        assert_eq!(count(&|k| k == Kinship::Cousin), 54);
        assert_eq!(count(&|k| matches!(k, Kinship::Grandfather | Kinship::Grandmother)), 36);
    }
    assert_eq!(world.len() * PERSONS_PER_FAMILY, ENTITY_COUNT);
    assert_eq!(all, 44965);
}

fn positives(world: &[relprobe_core::synth::FamilyTree]) -> HashSet<Triple> {
    world.iter().flat_map(|t| label_kinship(t).unwrap()).filter(|f| f.label.is_positive()).map(|f| f.triple).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kinship_invariants(seed in any::<u64>()) {
        let world = generate_world(seed);
        let pos = positives(&world);
        let family = |e: usize| e / PERSONS_PER_FAMILY;
        let sex = |e: usize| world[family(e)].person(e).unwrap().sex;
        let has = |k: Kinship, a: usize, b: usize| pos.contains(&Triple::new(k.index(), a, b));
        for t in &pos {
            let k = Kinship::from_index(t.relation).unwrap();
            let (a, b) = (t.subject, t.object);
            prop_assert_eq!(family(a), family(b));
            prop_assert_ne!(a, b);
            let male = match k {
                Kinship::Father | Kinship::Husband | Kinship::Son | Kinship::Brother | Kinship::Uncle
                | Kinship::Nephew | Kinship::Grandfather | Kinship::Grandson => Some(true),
                Kinship::Cousin => None,
                _ => Some(false),
            };
            if let Some(m) = male {
                prop_assert_eq!(sex(a) == Sex::Male, m, "{} {} {}", k, a, b);
            }
            match k {
                Kinship::Father | Kinship::Mother => {
                    prop_assert!(has(Kinship::Son, b, a) || has(Kinship::Daughter, b, a));
                }
                Kinship::Husband => prop_assert!(has(Kinship::Wife, b, a)),
                Kinship::Cousin => prop_assert!(has(Kinship::Cousin, b, a)),
                Kinship::Brother | Kinship::Sister => {
                    prop_assert!(has(Kinship::Brother, b, a) || has(Kinship::Sister, b, a));
                }
                _ => {}
            }
        }
        // Relations partition by sex: no pair carries both members of a pair.
        let exclusive = [
            (Kinship::Father, Kinship::Mother),
            (Kinship::Son, Kinship::Daughter),
            (Kinship::Husband, Kinship::Wife),
            (Kinship::Brother, Kinship::Sister),
            (Kinship::Uncle, Kinship::Aunt),
            (Kinship::Nephew, Kinship::Niece),
            (Kinship::Grandfather, Kinship::Grandmother),
            (Kinship::Grandson, Kinship::Granddaughter),
        ];
        for a in 0..ENTITY_COUNT {
            for b in 0..ENTITY_COUNT {
                for (x, y) in exclusive {
                    prop_assert!(!(has(x, a, b) && has(y, a, b)));
                }
            }
        }
        let main: HashSet<Triple> =
            pos.iter().copied().filter(|t| Kinship::from_index(t.relation).unwrap().is_main()).collect();
        let derived = forward_chain(&family_rules().unwrap(), &main);
        prop_assert!(derived.is_subset(&pos), "a rule derives a false fact");
    }
}

#[test]
fn published_split_sizes() {
    let cases = [
        (SplitKind::FamilyRandom, (4, 5), (35973, 4496, 4496)),
        (SplitKind::FamilyRandom, (1, 10), (4496, 4496, 35973)),
        (SplitKind::FamilyEvidence, (2, 5), (24334, 3438, 17193)),
        (SplitKind::FamilyFamily, (0, 1), (38088, 688, 6189)),
        (SplitKind::FamilyFamily, (1, 5), (39463, 688, 4814)),
    ];
    for (kind, (n, d), sizes) in cases {
        let split = FamilySplit::new(kind, Proportion::new(n, d).unwrap()).unwrap();
        let data = build_family_dataset(split, 4).unwrap();
        assert_eq!(data.sizes(), sizes, "{split}");
    }
}

#[test]
fn split_membership() {
    let evidence =
        build_family_dataset(FamilySplit::new(SplitKind::FamilyEvidence, Proportion::new(1, 5).unwrap()).unwrap(), 2)
            .unwrap();
    let main = |t: Triple| Kinship::from_index(t.relation).unwrap().is_main();
    assert!(evidence.valid().iter().chain(evidence.test()).all(|f| !main(f.triple)));
    let family = build_family_dataset(FamilySplit::new(SplitKind::FamilyFamily, Proportion::ZERO).unwrap(), 2).unwrap();
    let last = |t: Triple| t.subject / PERSONS_PER_FAMILY == 4 && t.object / PERSONS_PER_FAMILY == 4;
    assert!(family.valid().iter().chain(family.test()).all(|f| !main(f.triple) && last(f.triple)));
}

#[test]
fn off_grid_proportions_use_the_ceiling_rule() {
    let split = FamilySplit::new(SplitKind::FamilyRandom, Proportion::new(1, 2).unwrap()).unwrap();
    assert_eq!(split.published_sizes(), None);
    let data = build_family_dataset(split, 1).unwrap();
    assert_eq!(data.sizes(), (22483, 4497, 17985));
}
