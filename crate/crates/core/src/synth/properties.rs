use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{three_way_split, Dataset, Label, LabeledFact, Proportion, Triple, Vocab};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reflexivity {
    Reflexive,
    Irreflexive,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symmetry {
    Symmetric,
    Antisymmetric,
    Neither,
}

/// Declared properties of a synthetic relation. "Neither" components are
/// unconstrained rather than negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropertyCombo {
    pub reflexivity: Reflexivity,
    pub symmetry: Symmetry,
    pub transitive: bool,
}

impl PropertyCombo {
    pub const fn raw(reflexivity: Reflexivity, symmetry: Symmetry, transitive: bool) -> Self {
        PropertyCombo { reflexivity, symmetry, transitive }
    }

    pub fn new(reflexivity: Reflexivity, symmetry: Symmetry, transitive: bool) -> Result<Self> {
        let c = Self::raw(reflexivity, symmetry, transitive);
        if !c.is_valid() {
            return Err(Error::invalid(format!("property combination {c} is excluded")));
        }
        Ok(c)
    }

    pub fn is_valid(self) -> bool {
        use Reflexivity as R;
        use Symmetry as S;
        !matches!(
            (self.reflexivity, self.symmetry, self.transitive),
            (_, S::Neither, false) | (R::Irreflexive, S::Symmetric, true) | (R::Irreflexive, S::Neither, true)
        )
    }
}

impl fmt::Display for PropertyCombo {
    /// `reflexive+antisymmetric+transitive`, leaving out unconstrained parts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.reflexivity {
            Reflexivity::Reflexive => parts.push("reflexive"),
            Reflexivity::Irreflexive => parts.push("irreflexive"),
            Reflexivity::Neither => {}
        }
        match self.symmetry {
            Symmetry::Symmetric => parts.push("symmetric"),
            Symmetry::Antisymmetric => parts.push("antisymmetric"),
            Symmetry::Neither => {}
        }
        if self.transitive {
            parts.push("transitive");
        }
        if parts.is_empty() {
            parts.push("none");
        }
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for PropertyCombo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut c = Self::raw(Reflexivity::Neither, Symmetry::Neither, false);
        for part in s.split('+').map(str::trim).filter(|p| !p.is_empty() && *p != "none") {
            match part {
                "reflexive" => c.reflexivity = Reflexivity::Reflexive,
                "irreflexive" => c.reflexivity = Reflexivity::Irreflexive,
                "symmetric" => c.symmetry = Symmetry::Symmetric,
                "antisymmetric" => c.symmetry = Symmetry::Antisymmetric,
                "transitive" => c.transitive = true,
                other => return Err(Error::invalid(format!("unknown property {other:?}"))),
            }
        }
        Self::new(c.reflexivity, c.symmetry, c.transitive)
    }
}

impl Serialize for PropertyCombo {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PropertyCombo {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// The 13 combinations studied: all 18 minus those with no property, with
/// only a diagonal constraint, and the two irreflexive transitive ones that
/// force either an empty or an antisymmetric relation.
pub fn valid_combos() -> Vec<PropertyCombo> {
    let mut out = Vec::new();
    for r in [Reflexivity::Reflexive, Reflexivity::Irreflexive, Reflexivity::Neither] {
        for s in [Symmetry::Symmetric, Symmetry::Antisymmetric, Symmetry::Neither] {
            for t in [false, true] {
                let c = PropertyCombo::raw(r, s, t);
                if c.is_valid() {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Fully observed `n × n` matrix of ±1 labels, row = subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMatrix {
    n: usize,
    entries: Vec<i8>,
}

impl SignMatrix {
    pub fn filled(n: usize, value: i8) -> Self {
        SignMatrix { n, entries: vec![value; n * n] }
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n || row.iter().any(|v| *v != 1 && *v != -1) {
                return Err(Error::invalid("sign matrix rows must be square and contain only ±1"));
            }
            entries.extend_from_slice(row);
        }
        Ok(SignMatrix { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i8) {
        self.entries[i * self.n + j] = v;
    }

    fn pos(&self, i: usize, j: usize) -> bool {
        self.get(i, j) > 0
    }

    pub fn positives(&self) -> usize {
        self.entries.iter().filter(|v| **v > 0).count()
    }

    pub fn negatives(&self) -> usize {
        self.entries.len() - self.positives()
    }

    /// All `n²` cells as facts of `relation`, row-major.
    pub fn to_facts(&self, relation: usize) -> Vec<LabeledFact> {
        let mut out = Vec::with_capacity(self.entries.len());
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(LabeledFact::new(Triple::new(relation, i, j), Label::from_bool(self.pos(i, j))));
            }
        }
        out
    }

    /// Rebuilds a matrix from facts of one relation covering all `n²` cells.
    pub fn from_facts(facts: &[LabeledFact], relation: usize, n: usize) -> Result<Self> {
        let mut entries = vec![0i8; n * n];
        for f in facts.iter().filter(|f| f.triple.relation == relation) {
            let (s, o) = (f.triple.subject, f.triple.object);
            if s >= n || o >= n {
                return Err(Error::invalid(format!("fact {} outside a {n}×{n} matrix", f.triple)));
            }
            entries[s * n + o] = f.label.as_i8();
        }
        if entries.contains(&0) {
            return Err(Error::invalid("facts do not cover the full matrix"));
        }
        Ok(SignMatrix { n, entries })
    }

    /// `π(M)`: entity `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(perm[i], perm[j], self.get(i, j));
            }
        }
        out
    }

    /// Diagonal fill per the reflexivity constraint; returns whether anything changed.
    pub fn diagonal_pass(&mut self, r: Reflexivity) -> bool {
        let v = match r {
            Reflexivity::Reflexive => 1,
            Reflexivity::Irreflexive => -1,
            Reflexivity::Neither => return false,
        };
        let mut changed = false;
        for i in 0..self.n {
            changed |= self.get(i, i) != v;
            self.set(i, i, v);
        }
        changed
    }

    /// Mirrors the upper triangle: `y_ji ← y_ij` (symmetric) or
    /// `y_ji ← −y_ij` (antisymmetric) for `i < j`.
    pub fn symmetry_pass(&mut self, s: Symmetry) -> bool {
        let sign = match s {
            Symmetry::Symmetric => 1,
            Symmetry::Antisymmetric => -1,
            Symmetry::Neither => return false,
        };
        let mut changed = false;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let v = sign * self.get(i, j);
                changed |= self.get(j, i) != v;
                self.set(j, i, v);
            }
        }
        changed
    }

    /// Sets `y_ij ← 1` whenever some `k` has `y_ik = y_kj = 1`, until closed.
    pub fn transitivity_pass(&mut self) -> bool {
        let mut changed = false;
        for k in 0..self.n {
            for i in 0..self.n {
                if !self.pos(i, k) {
                    continue;
                }
                for j in 0..self.n {
                    if self.pos(k, j) && !self.pos(i, j) {
                        self.set(i, j, 1);
                        changed = true;
                    }
                }
            }
        }
        changed
    }

    /// Whether `|#pos − n²/2| ≤ ⌈tol·n²⌉`.
    pub fn is_balanced(&self, tol: Proportion) -> bool {
        let cells = self.entries.len() as i64;
        let slack = tol.ceil_of(self.entries.len()) as i64;
        (2 * self.positives() as i64 - cells).abs() <= 2 * slack
    }
}

/// Properties of a matrix, established by direct definitional loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub reflexive: bool,
    pub irreflexive: bool,
    pub symmetric: bool,
    pub antisymmetric: bool,
    pub transitive: bool,
}

impl PropertyReport {
    pub fn satisfies(&self, c: PropertyCombo) -> bool {
        let r = match c.reflexivity {
            Reflexivity::Reflexive => self.reflexive,
            Reflexivity::Irreflexive => self.irreflexive,
            Reflexivity::Neither => true,
        };
        let s = match c.symmetry {
            Symmetry::Symmetric => self.symmetric,
            Symmetry::Antisymmetric => self.antisymmetric,
            Symmetry::Neither => true,
        };
        r && s && (!c.transitive || self.transitive)
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let yn = |b: bool| if b { "yes" } else { "no" };
        write!(
            f,
            "reflexive={} irreflexive={} symmetric={} antisymmetric={} transitive={}",
            yn(self.reflexive),
            yn(self.irreflexive),
            yn(self.symmetric),
            yn(self.antisymmetric),
            yn(self.transitive)
        )
    }
}

pub fn check_properties(m: &SignMatrix) -> PropertyReport {
    let n = m.n();
    let y = |i, j| m.get(i, j) > 0;
    let mut rep =
        PropertyReport { reflexive: true, irreflexive: true, symmetric: true, antisymmetric: true, transitive: true };
    for a in 0..n {
        rep.reflexive &= y(a, a);
        rep.irreflexive &= !y(a, a);
        for b in 0..n {
            rep.symmetric &= !y(a, b) || y(b, a);
            rep.antisymmetric &= !(y(a, b) && y(b, a)) || a == b;
            for c in 0..n {
                rep.transitive &= !(y(a, b) && y(b, c)) || y(a, c);
            }
        }
    }
    rep
}

pub const MAX_ATTEMPTS: usize = 10_000;

/// Random relation satisfying `combo`, with positives and negatives balanced
/// to within `⌈tol·n²⌉` of half the cells.
///
/// Each attempt draws cells +1 with density `q`, then alternates diagonal,
/// symmetry and transitivity passes to a fixpoint. Unbalanced results are
/// rejected and `q` is bisected towards balance. Accepted matrices are
/// relabelled by a random permutation so no index order leaks from the
/// passes.
pub fn generate_relation(combo: PropertyCombo, n: usize, tol: Proportion, seed: u64) -> Result<SignMatrix> {
    if n < 2 {
        return Err(Error::invalid("relations need at least 2 entities"));
    }
    if !combo.is_valid() {
        return Err(Error::invalid(format!("property combination {combo} is excluded")));
    }
    let (mut lo, mut hi, mut q) = (0.0f64, 1.0f64, 0.5f64);
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seed::rng(seed::derive(seed, attempt as u64));
        let mut m = SignMatrix::filled(n, -1);
        for v in &mut m.entries {
            if rng.random_bool(q) {
                *v = 1;
            }
        }
        if !close(&mut m, combo) {
            continue;
        }
        if m.is_balanced(tol) {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            return Ok(m.relabel(&perm));
        }
        if 2 * m.positives() > n * n {
            hi = q;
        } else {
            lo = q;
        }
        if hi - lo < 1e-3 {
            lo = (q - 0.02).max(0.0);
            hi = (q + 0.02).min(1.0);
        }
        q = (lo + hi) / 2.0;
    }
    Err(Error::GenerationFailed { attempts: MAX_ATTEMPTS })
}

/// Runs the passes to a fixpoint; `false` if it fails to settle.
fn close(m: &mut SignMatrix, c: PropertyCombo) -> bool {
    for _ in 0..4 * m.n() + 4 {
        let mut changed = m.diagonal_pass(c.reflexivity);
        changed |= m.symmetry_pass(c.symmetry);
        if c.transitive {
            changed |= m.transitivity_pass();
        }
        if !changed {
            return true;
        }
    }
    false
}

pub const FOLDS: usize = 10;

/// One relation over `n` entities, cross-validated: dataset `k` tests on
/// fold `k`, validates on fold `k+1 mod 10` and trains on the other eight.
pub fn build_individual_datasets(combo: PropertyCombo, n: usize, seed: u64) -> Result<Vec<Dataset>> {
    let m = generate_relation(combo, n, Proportion::new(1, 100)?, seed::derive(seed, 0))?;
    let facts = m.to_facts(0);
    let mut order: Vec<usize> = (0..facts.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, 1)));
    let len = facts.len();
    let fold_of: Vec<usize> = {
        let mut f = vec![0; len];
        for k in 0..FOLDS {
            for &i in &order[k * len / FOLDS..(k + 1) * len / FOLDS] {
                f[i] = k;
            }
        }
        f
    };
    let vocab = Vocab::with_names((0..n).map(|i| format!("e{i}")).collect(), vec![combo.to_string()])?;
    (0..FOLDS)
        .map(|k| {
            let valid_fold = (k + 1) % FOLDS;
            let (mut train, mut valid, mut test) = (Vec::new(), Vec::new(), Vec::new());
            for (i, f) in facts.iter().enumerate() {
                match fold_of[i] {
                    x if x == k => test.push(*f),
                    x if x == valid_fold => valid.push(*f),
                    _ => train.push(*f),
                }
            }
            Dataset::new(vocab.clone(), train, valid, test, format!("individual {combo} n={n} fold={k} seed={seed}"))
        })
        .collect()
}

/// Relations learnt together in the joint experiment, in relation order.
pub const JOINT_COMBOS: [PropertyCombo; 5] = [
    PropertyCombo::raw(Reflexivity::Neither, Symmetry::Symmetric, false),
    PropertyCombo::raw(Reflexivity::Neither, Symmetry::Antisymmetric, false),
    PropertyCombo::raw(Reflexivity::Neither, Symmetry::Neither, true),
    PropertyCombo::raw(Reflexivity::Neither, Symmetry::Symmetric, true),
    PropertyCombo::raw(Reflexivity::Neither, Symmetry::Antisymmetric, true),
];

/// Five independent relations over shared entities: `⌈p·N⌉` facts for
/// training, `⌈0.1·N⌉` for validation, the rest for testing.
pub fn build_joint_dataset(p: Proportion, n: usize, seed: u64) -> Result<Dataset> {
    let valid = Proportion::new(1, 10)?;
    if p.is_zero() || p.checked_add(valid).is_none_or(|s| s == Proportion::ONE) {
        return Err(Error::invalid(format!("joint training fraction must lie in (0, 0.9), got {p}")));
    }
    let tol = Proportion::new(1, 100)?;
    let mut facts = Vec::with_capacity(JOINT_COMBOS.len() * n * n);
    for (r, combo) in JOINT_COMBOS.iter().enumerate() {
        let m = generate_relation(*combo, n, tol, seed::derive(seed, r as u64))?;
        facts.extend(m.to_facts(r));
    }
    let (train, valid, test) = three_way_split(&facts, p, valid, seed::derive(seed, 100))?;
    let vocab = Vocab::with_names(
        (0..n).map(|i| format!("e{i}")).collect(),
        JOINT_COMBOS.iter().map(|c| c.to_string()).collect(),
    )?;
    Dataset::new(vocab, train, valid, test, format!("joint p={p} n={n} seed={seed}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirteen_combos() {
        let c = valid_combos();
        assert_eq!(c.len(), 13);
        assert!(!c.contains(&PropertyCombo::raw(Reflexivity::Irreflexive, Symmetry::Symmetric, true)));
        assert!(c.contains(&PropertyCombo::raw(Reflexivity::Neither, Symmetry::Antisymmetric, true)));
        for x in &c {
            assert_eq!(x.to_string().parse::<PropertyCombo>().unwrap(), *x);
        }
        assert!("irreflexive".parse::<PropertyCombo>().is_err());
    }

    #[test]
    fn checker_on_hand_matrices() {
        // Strict order on 3 elements.
        let m = SignMatrix::from_rows(&[vec![-1, 1, 1], vec![-1, -1, 1], vec![-1, -1, -1]]).unwrap();
        let r = check_properties(&m);
        assert!(r.irreflexive && r.antisymmetric && r.transitive && !r.symmetric && !r.reflexive);
        let m = SignMatrix::from_rows(&[vec![-1, 1, -1], vec![-1, -1, 1], vec![-1, -1, -1]]).unwrap();
        assert!(!check_properties(&m).transitive);
    }

    #[test]
    fn balance_uses_half_the_cells() {
        let tol = Proportion::new(1, 100).unwrap();
        let mut m = SignMatrix::filled(50, -1);
        for k in 0..1225 {
            m.entries[k] = 1;
        }
        assert!(m.is_balanced(tol));
        m.entries[1225] = 1;
        assert!(m.is_balanced(tol));
        let mut m = SignMatrix::filled(50, -1);
        for k in 0..1224 {
            m.entries[k] = 1;
        }
        assert!(!m.is_balanced(tol));
    }

    #[test]
    fn generated_relations_hold_their_properties() {
        let tol = Proportion::new(1, 100).unwrap();
        for c in valid_combos() {
            let m = generate_relation(c, 50, tol, 3).unwrap();
            assert!(check_properties(&m).satisfies(c), "{c}");
            assert!(m.is_balanced(tol), "{c}");
            let mut again = m.clone();
            assert!(!again.diagonal_pass(c.reflexivity));
            assert!(!again.symmetry_pass(c.symmetry));
            assert!(!c.transitive || !again.transitivity_pass());
        }
    }

    #[test]
    fn joint_sizes() {
        let d = build_joint_dataset(Proportion::new(4, 5).unwrap(), 50, 1).unwrap();
        assert_eq!(d.sizes(), (10000, 1250, 1250));
        let d = build_joint_dataset(Proportion::new(1, 10).unwrap(), 50, 1).unwrap();
        assert_eq!(d.sizes(), (1250, 1250, 10000));
        assert_eq!(d.vocab().relation_count(), 5);
        assert!(build_joint_dataset(Proportion::new(9, 10).unwrap(), 50, 1).is_err());
    }

    #[test]
    fn individual_folds_partition_the_matrix() {
        let c: PropertyCombo = "symmetric".parse().unwrap();
        let ds = build_individual_datasets(c, 50, 7).unwrap();
        assert_eq!(ds.len(), 10);
        let mut tests: Vec<Triple> = ds.iter().flat_map(|d| d.test().iter().map(|f| f.triple)).collect();
        tests.sort();
        tests.dedup();
        assert_eq!(tests.len(), 2500);
        for d in &ds {
            assert_eq!(d.len(), 2500);
            assert_eq!(d.sizes(), (2000, 250, 250));
        }
    }
}
