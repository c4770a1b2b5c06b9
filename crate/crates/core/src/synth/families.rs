use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::sampling::split_by_sizes;
use crate::kg::{Dataset, Label, LabeledFact, Proportion, SplitKind, Triple, Vocab};
use crate::seed;

pub const PERSONS_PER_FAMILY: usize = 23;
pub const FAMILY_COUNT: usize = 5;
pub const ENTITY_COUNT: usize = PERSONS_PER_FAMILY * FAMILY_COUNT;
pub const FACTS_PER_FAMILY: usize = Kinship::ALL.len() * PERSONS_PER_FAMILY * PERSONS_PER_FAMILY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn opposite(self) -> Sex {
        match self {
            Sex::Male => Sex::Female,
            Sex::Female => Sex::Male,
        }
    }
}

/// A person in one family tree; ids are global entity indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub id: usize,
    pub sex: Sex,
    pub father: Option<usize>,
    pub mother: Option<usize>,
    pub spouse: Option<usize>,
    pub family: usize,
    pub generation: u8,
}

impl Person {
    pub fn parents(&self) -> impl Iterator<Item = usize> {
        self.father.into_iter().chain(self.mother)
    }
}

/// `r(a, b)` reads "a is the r of b".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kinship {
    Mother,
    Father,
    Husband,
    Wife,
    Son,
    Daughter,
    Brother,
    Sister,
    Uncle,
    Aunt,
    Nephew,
    Niece,
    Cousin,
    Grandfather,
    Grandson,
    Grandmother,
    Granddaughter,
}

impl Kinship {
    pub const ALL: [Kinship; 17] = [
        Kinship::Mother,
        Kinship::Father,
        Kinship::Husband,
        Kinship::Wife,
        Kinship::Son,
        Kinship::Daughter,
        Kinship::Brother,
        Kinship::Sister,
        Kinship::Uncle,
        Kinship::Aunt,
        Kinship::Nephew,
        Kinship::Niece,
        Kinship::Cousin,
        Kinship::Grandfather,
        Kinship::Grandson,
        Kinship::Grandmother,
        Kinship::Granddaughter,
    ];

    /// Relation index in generated datasets.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Kinship> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Kinship::Mother => "mother",
            Kinship::Father => "father",
            Kinship::Husband => "husband",
            Kinship::Wife => "wife",
            Kinship::Son => "son",
            Kinship::Daughter => "daughter",
            Kinship::Brother => "brother",
            Kinship::Sister => "sister",
            Kinship::Uncle => "uncle",
            Kinship::Aunt => "aunt",
            Kinship::Nephew => "nephew",
            Kinship::Niece => "niece",
            Kinship::Cousin => "cousin",
            Kinship::Grandfather => "grandfather",
            Kinship::Grandson => "grandson",
            Kinship::Grandmother => "grandmother",
            Kinship::Granddaughter => "granddaughter",
        }
    }

    /// Mother, father, son and daughter: the relations every other one is
    /// defined from.
    pub fn is_main(self) -> bool {
        matches!(self, Kinship::Mother | Kinship::Father | Kinship::Son | Kinship::Daughter)
    }
}

impl fmt::Display for Kinship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kinship {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kinship::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown kinship relation {s:?}")))
    }
}

/// Three generations grown from one couple.
///
/// Local ids: 0 and 1 are the founders (husband, wife); 2..8 are three
/// in-law couples; 8..11 the founders' children; 11..14 their spouses, the
/// in-laws' only children; 14..23 three grandchildren per middle couple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyTree {
    pub family: usize,
    pub persons: Vec<Person>,
}

impl FamilyTree {
    pub fn generate(family: usize, seed: u64) -> Self {
        let base = family * PERSONS_PER_FAMILY;
        let mut rng = seed::rng(seed);
        let mut random_sex = || if rng.random_bool(0.5) { Sex::Male } else { Sex::Female };
        let mut persons: Vec<Person> = (0..PERSONS_PER_FAMILY)
            .map(|i| Person {
                id: base + i,
                sex: Sex::Male,
                father: None,
                mother: None,
                spouse: None,
                family,
                generation: 1,
            })
            .collect();
        let marry = |ps: &mut Vec<Person>, a: usize, b: usize| {
            ps[a].spouse = Some(base + b);
            ps[b].spouse = Some(base + a);
        };
        let child_of = |ps: &mut Vec<Person>, c: usize, x: usize, y: usize| {
            let (f, m) = if ps[x].sex == Sex::Male { (x, y) } else { (y, x) };
            ps[c].father = Some(base + f);
            ps[c].mother = Some(base + m);
        };
        for couple in 0..4 {
            let (h, w) = (2 * couple, 2 * couple + 1);
            persons[w].sex = Sex::Female;
            marry(&mut persons, h, w);
        }
        for i in 0..3 {
            let (child, spouse) = (8 + i, 11 + i);
            persons[child].sex = random_sex();
            persons[child].generation = 2;
            child_of(&mut persons, child, 0, 1);
            persons[spouse].sex = persons[child].sex.opposite();
            persons[spouse].generation = 2;
            child_of(&mut persons, spouse, 2 + 2 * i, 3 + 2 * i);
            marry(&mut persons, child, spouse);
            for j in 0..3 {
                let g = 14 + 3 * i + j;
                persons[g].sex = random_sex();
                persons[g].generation = 3;
                child_of(&mut persons, g, child, spouse);
            }
        }
        FamilyTree { family, persons }
    }

    fn base(&self) -> usize {
        self.family * PERSONS_PER_FAMILY
    }

    pub fn person(&self, id: usize) -> Option<&Person> {
        id.checked_sub(self.base()).and_then(|i| self.persons.get(i))
    }

    pub fn validate(&self) -> Result<()> {
        if self.persons.len() != PERSONS_PER_FAMILY {
            return Err(Error::invalid(format!(
                "a family has {PERSONS_PER_FAMILY} persons, got {}",
                self.persons.len()
            )));
        }
        let inside = |id: Option<usize>| id.is_none_or(|i| self.person(i).is_some());
        for (i, p) in self.persons.iter().enumerate() {
            if p.id != self.base() + i || p.family != self.family {
                return Err(Error::invalid(format!("person {} is misnumbered", p.id)));
            }
            if !inside(p.father) || !inside(p.mother) || !inside(p.spouse) {
                return Err(Error::invalid(format!("person {} links outside the family", p.id)));
            }
            if let Some(s) = p.spouse.and_then(|s| self.person(s)) {
                if s.spouse != Some(p.id) || s.sex == p.sex {
                    return Err(Error::invalid(format!("marriage of {} is not mutual and mixed-sex", p.id)));
                }
            }
            match (p.father.and_then(|f| self.person(f)), p.mother.and_then(|m| self.person(m))) {
                (None, None) => {}
                (Some(f), Some(m)) if f.sex == Sex::Male && m.sex == Sex::Female && f.spouse == Some(m.id) => {}
                _ => return Err(Error::invalid(format!("parents of {} are not a married couple", p.id))),
            }
        }
        Ok(())
    }

    /// Whether `r(a, b)` holds, for global ids inside this family.
    pub fn holds(&self, r: Kinship, a: usize, b: usize) -> bool {
        let (Some(pa), Some(pb)) = (self.person(a), self.person(b)) else {
            return false;
        };
        let male = pa.sex == Sex::Male;
        let is_parent = |x: &Person, y: &Person| y.parents().any(|q| q == x.id);
        let sibling = |x: &Person, y: &Person| x.id != y.id && x.parents().any(|q| y.parents().any(|w| w == q));
        let parents_of = |x: &Person| x.parents().filter_map(|q| self.person(q)).collect::<Vec<_>>();
        let grandparent = |x: &Person, y: &Person| parents_of(y).iter().any(|q| is_parent(x, q));
        let uncle_like = |x: &Person, y: &Person| parents_of(y).iter().any(|q| sibling(x, q));
        match r {
            Kinship::Mother => !male && is_parent(pa, pb),
            Kinship::Father => male && is_parent(pa, pb),
            Kinship::Husband => male && pa.spouse == Some(b),
            Kinship::Wife => !male && pa.spouse == Some(b),
            Kinship::Son => male && is_parent(pb, pa),
            Kinship::Daughter => !male && is_parent(pb, pa),
            Kinship::Brother => male && sibling(pa, pb),
            Kinship::Sister => !male && sibling(pa, pb),
            Kinship::Uncle => male && uncle_like(pa, pb),
            Kinship::Aunt => !male && uncle_like(pa, pb),
            Kinship::Nephew => male && uncle_like(pb, pa),
            Kinship::Niece => !male && uncle_like(pb, pa),
            Kinship::Cousin => parents_of(pa).iter().any(|x| parents_of(pb).iter().any(|y| sibling(x, y))),
            Kinship::Grandfather => male && grandparent(pa, pb),
            Kinship::Grandson => male && grandparent(pb, pa),
            Kinship::Grandmother => !male && grandparent(pa, pb),
            Kinship::Granddaughter => !male && grandparent(pb, pa),
        }
    }

    /// One line per person: id, sex, father, mother, spouse, generation.
    pub fn dump(&self) -> String {
        let opt = |x: Option<usize>| x.map_or_else(|| "-".to_owned(), |v| v.to_string());
        let mut out = String::from("id\tsex\tfather\tmother\tspouse\tgeneration\n");
        for p in &self.persons {
            let sex = if p.sex == Sex::Male { "M" } else { "F" };
            let _ = writeln!(
                out,
                "{}\t{sex}\t{}\t{}\t{}\t{}",
                p.id,
                opt(p.father),
                opt(p.mother),
                opt(p.spouse),
                p.generation
            );
        }
        out
    }

    /// Graphviz rendering: marriages as undirected edges into a union node,
    /// children hanging off it.
    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph family{} {{\n  rankdir=TB;\n", self.family);
        for p in &self.persons {
            let shape = if p.sex == Sex::Male { "box" } else { "ellipse" };
            let _ = writeln!(out, "  p{} [label=\"{}\", shape={shape}];", p.id, p.id);
        }
        for p in &self.persons {
            if let (Some(s), Sex::Male) = (p.spouse, p.sex) {
                let _ = writeln!(
                    out,
                    "  u{0} [shape=point];\n  p{0} -> u{0} [dir=none];\n  p{1} -> u{0} [dir=none];",
                    p.id, s
                );
            }
        }
        for p in &self.persons {
            if let Some(f) = p.father {
                let _ = writeln!(out, "  u{f} -> p{};", p.id);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// All `17 × 23 × 23` labeled facts of one tree, relation-major.
pub fn label_kinship(tree: &FamilyTree) -> Result<Vec<LabeledFact>> {
    tree.validate()?;
    let ids: Vec<usize> = tree.persons.iter().map(|p| p.id).collect();
    let mut out = Vec::with_capacity(FACTS_PER_FAMILY);
    for r in Kinship::ALL {
        for &a in &ids {
            for &b in &ids {
                out.push(LabeledFact::new(Triple::new(r.index(), a, b), Label::from_bool(tree.holds(r, a, b))));
            }
        }
    }
    Ok(out)
}

/// Family-data split: the kind of hold-out and the training fraction `p` of
/// the held-out pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySplit {
    pub kind: SplitKind,
    pub p: Proportion,
}

/// `(train, valid, test)` set sizes.
type Sizes = (usize, usize, usize);

/// Set sizes published for the experimental grid, as
/// `(kind, p as (num, den), sizes)`.
const PUBLISHED_SIZES: [(SplitKind, (u64, u64), Sizes); 13] = [
    (SplitKind::FamilyRandom, (4, 5), (35973, 4496, 4496)),
    (SplitKind::FamilyRandom, (2, 5), (17987, 4496, 22482)),
    (SplitKind::FamilyRandom, (1, 5), (8994, 4496, 31475)),
    (SplitKind::FamilyRandom, (1, 10), (4496, 4496, 35973)),
    (SplitKind::FamilyEvidence, (4, 5), (38089, 3438, 3438)),
    (SplitKind::FamilyEvidence, (2, 5), (24334, 3438, 17193)),
    (SplitKind::FamilyEvidence, (1, 5), (17457, 3438, 24070)),
    (SplitKind::FamilyEvidence, (1, 10), (14019, 3438, 27508)),
    (SplitKind::FamilyFamily, (4, 5), (43589, 688, 688)),
    (SplitKind::FamilyFamily, (2, 5), (40839, 688, 3438)),
    (SplitKind::FamilyFamily, (1, 5), (39463, 688, 4814)),
    (SplitKind::FamilyFamily, (1, 10), (38776, 688, 5501)),
    (SplitKind::FamilyFamily, (0, 1), (38088, 688, 6189)),
];

impl FamilySplit {
    pub fn new(kind: SplitKind, p: Proportion) -> Result<Self> {
        let s = FamilySplit { kind, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.kind, SplitKind::FamilyRandom | SplitKind::FamilyEvidence | SplitKind::FamilyFamily) {
            return Err(Error::invalid(format!("{} is not a family split", self.kind.name())));
        }
        if self.p.is_zero() && self.kind != SplitKind::FamilyFamily {
            return Err(Error::invalid("p = 0 is only meaningful for the family split"));
        }
        let tenth = Proportion::new(1, 10)?;
        if self.p.checked_add(tenth).is_none_or(|s| s == Proportion::ONE) {
            return Err(Error::invalid(format!("training fraction {} leaves no test facts", self.p)));
        }
        Ok(())
    }

    /// Published `(train, valid, test)` sizes, if `p` is on the grid.
    pub fn published_sizes(&self) -> Option<(usize, usize, usize)> {
        PUBLISHED_SIZES
            .iter()
            .find(|(k, (n, d), _)| *k == self.kind && Proportion::new(*n, *d).is_ok_and(|q| q == self.p))
            .map(|e| e.2)
    }

    /// How many facts of the held-out pool go to train and to valid. Facts
    /// outside the pool are always in train.
    fn pool_sizes(&self, pool: usize, fixed_train: usize) -> (usize, usize) {
        match self.published_sizes() {
            Some((train, valid, _)) => (train - fixed_train, valid),
            None => {
                let n_train = self.p.ceil_of(pool);
                let n_valid = Proportion::new(1, 10).map_or(0, |t| t.ceil_of(pool)).min(pool - n_train);
                (n_train, n_valid)
            }
        }
    }
}

impl fmt::Display for FamilySplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} p={}", self.kind.name(), self.p)
    }
}

/// The five family trees behind every family dataset built from `seed`.
pub fn generate_world(seed: u64) -> Vec<FamilyTree> {
    (0..FAMILY_COUNT).map(|f| FamilyTree::generate(f, seed::derive(seed, f as u64))).collect()
}

pub fn family_vocab() -> Result<Vocab> {
    let entities =
        (0..ENTITY_COUNT).map(|i| format!("f{}p{:02}", i / PERSONS_PER_FAMILY, i % PERSONS_PER_FAMILY)).collect();
    let relations = Kinship::ALL.iter().map(|k| k.name().to_owned()).collect();
    Vocab::with_names(entities, relations)
}

/// Labels the five trees and splits their facts.
///
/// - random: every fact is in the pool.
/// - evidence: mother/father/son/daughter facts are always trained on; the
///   other relations form the pool.
/// - family: the first four families and the last family's
///   mother/father/son/daughter facts are always trained on; the last
///   family's other relations form the pool.
///
/// Grid values of `p` reproduce the published set sizes; other values take
/// `⌈p·|pool|⌉` for train and `⌈|pool|/10⌉` for valid.
pub fn build_family_dataset(split: FamilySplit, seed: u64) -> Result<Dataset> {
    split.validate()?;
    let trees = generate_world(seed::derive(seed, 0));
    build_family_dataset_from(&trees, split, seed::derive(seed, 1))
}

pub fn build_family_dataset_from(trees: &[FamilyTree], split: FamilySplit, seed: u64) -> Result<Dataset> {
    split.validate()?;
    if trees.len() != FAMILY_COUNT || trees.iter().enumerate().any(|(i, t)| t.family != i) {
        return Err(Error::invalid(format!("expected families 0..{FAMILY_COUNT} in order")));
    }
    let mut fixed = Vec::new();
    let mut pool = Vec::new();
    for tree in trees {
        let last = tree.family == FAMILY_COUNT - 1;
        for f in label_kinship(tree)? {
            let main = Kinship::from_index(f.triple.relation).is_some_and(Kinship::is_main);
            let in_pool = match split.kind {
                SplitKind::FamilyRandom => true,
                SplitKind::FamilyEvidence => !main,
                _ => last && !main,
            };
            if in_pool {
                pool.push(f);
            } else {
                fixed.push(f);
            }
        }
    }
    let (n_train, n_valid) = split.pool_sizes(pool.len(), fixed.len());
    if n_train + n_valid > pool.len() {
        return Err(Error::invalid("split sizes exceed the held-out pool"));
    }
    let (sampled, valid, test) = split_by_sizes(&pool, n_train, n_valid, seed);
    let mut train = fixed;
    train.extend(sampled);
    Dataset::new(family_vocab()?, train, valid, test, format!("family {split} seed={seed}"))
}
