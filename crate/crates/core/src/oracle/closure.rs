use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kg::LabeledFact;
use crate::synth::properties::{PropertyCombo, Reflexivity, Symmetry};

/// Sign matrix with unknown cells (`0`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialMatrix {
    n: usize,
    cells: Vec<i8>,
}

impl PartialMatrix {
    pub fn unknown(n: usize) -> Self {
        PartialMatrix { n, cells: vec![0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.cells[i * self.n + j]
    }

    pub fn known(&self) -> usize {
        self.cells.iter().filter(|c| **c != 0).count()
    }

    /// Records `y_ij = v`; conflicting with a known value is an error.
    pub fn set(&mut self, i: usize, j: usize, v: i8) -> Result<bool> {
        let cell = &mut self.cells[i * self.n + j];
        if *cell == v {
            Ok(false)
        } else if *cell == 0 {
            *cell = v;
            Ok(true)
        } else {
            Err(Error::InconsistentInput(format!("cell ({i}, {j}) deduced as {v} but known as {}", -v)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosureOptions {
    /// Negative transitivity deductions: `y_ik = 1 ∧ y_ij = −1 ⇒ y_kj = −1`
    /// and `y_kj = 1 ∧ y_ij = −1 ⇒ y_ik = −1`.
    pub contrapositive: bool,
    /// Antisymmetric relations are generated with exactly one orientation per
    /// off-diagonal pair, so `y_ij = −1` also yields `y_ji = 1`.
    pub tournament: bool,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions { contrapositive: true, tournament: true }
    }
}

/// Everything `combo`'s defining rules deduce from `known`, to a fixpoint.
pub fn property_closure(combo: PropertyCombo, known: &PartialMatrix, opts: ClosureOptions) -> Result<PartialMatrix> {
    let mut m = known.clone();
    let n = m.n;
    loop {
        let mut changed = false;
        let diag = match combo.reflexivity {
            Reflexivity::Reflexive => Some(1),
            Reflexivity::Irreflexive => Some(-1),
            Reflexivity::Neither => None,
        };
        if let Some(v) = diag {
            for i in 0..n {
                changed |= m.set(i, i, v)?;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = m.get(i, j);
                if v == 0 || i == j {
                    continue;
                }
                match combo.symmetry {
                    Symmetry::Symmetric => changed |= m.set(j, i, v)?,
                    Symmetry::Antisymmetric if v > 0 => changed |= m.set(j, i, -1)?,
                    Symmetry::Antisymmetric if opts.tournament => changed |= m.set(j, i, 1)?,
                    _ => {}
                }
            }
        }
        if combo.transitive {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let (ik, kj, ij) = (m.get(i, k), m.get(k, j), m.get(i, j));
                        if ik > 0 && kj > 0 {
                            changed |= m.set(i, j, 1)?;
                        } else if opts.contrapositive && ij < 0 {
                            if ik > 0 {
                                changed |= m.set(k, j, -1)?;
                            } else if kj > 0 {
                                changed |= m.set(i, k, -1)?;
                            }
                        }
                    }
                }
            }
        }
        if !changed {
            return Ok(m);
        }
    }
}

/// Closed matrices, one per relation, built from observed facts.
#[derive(Debug, Clone)]
pub struct PropertyOracle {
    closed: HashMap<usize, PartialMatrix>,
}

impl PropertyOracle {
    /// `combos[r]` declares the properties of relation `r`.
    pub fn new<'a>(
        observed: impl IntoIterator<Item = &'a LabeledFact>,
        entity_count: usize,
        combos: &[PropertyCombo],
        opts: ClosureOptions,
    ) -> Result<Self> {
        let mut known: Vec<PartialMatrix> = combos.iter().map(|_| PartialMatrix::unknown(entity_count)).collect();
        for f in observed {
            let t = f.triple;
            let m = known
                .get_mut(t.relation)
                .ok_or_else(|| Error::invalid(format!("no property declaration for relation {}", t.relation)))?;
            m.set(t.subject, t.object, f.label.as_i8())?;
        }
        let closed = combos
            .iter()
            .zip(known)
            .enumerate()
            .map(|(r, (c, m))| Ok((r, property_closure(*c, &m, opts)?)))
            .collect::<Result<_>>()?;
        Ok(PropertyOracle { closed })
    }

    pub fn matrix(&self, relation: usize) -> Option<&PartialMatrix> {
        self.closed.get(&relation)
    }
}

impl super::Oracle for PropertyOracle {
    fn verdict(&self, t: crate::kg::Triple) -> super::Verdict {
        match self.closed.get(&t.relation).map(|m| m.get(t.subject, t.object)) {
            Some(1) => super::Verdict::True,
            Some(-1) => super::Verdict::False,
            _ => super::Verdict::Unknown,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn combo(s: &str) -> PropertyCombo {
        s.parse().unwrap()
    }

    #[test]
    fn symmetric_copy() {
        let mut k = PartialMatrix::unknown(3);
        k.set(0, 1, 1).unwrap();
        let c = property_closure(combo("symmetric"), &k, ClosureOptions::default()).unwrap();
        assert_eq!(c.get(1, 0), 1);
        assert_eq!(c.known(), 2);
    }

    #[test]
    fn transitive_contrapositive() {
        let mut k = PartialMatrix::unknown(3);
        k.set(0, 2, 1).unwrap();
        k.set(0, 1, -1).unwrap();
        let c = property_closure(combo("transitive"), &k, ClosureOptions::default()).unwrap();
        assert_eq!(c.get(2, 1), -1);
        let plain =
            property_closure(combo("transitive"), &k, ClosureOptions { contrapositive: false, tournament: true })
                .unwrap();
        assert_eq!(plain.get(2, 1), 0);
    }

    #[test]
    fn reflexive_fills_diagonal_and_detects_conflicts() {
        let k = PartialMatrix::unknown(4);
        let c = property_closure(combo("reflexive+symmetric"), &k, ClosureOptions::default()).unwrap();
        assert!((0..4).all(|i| c.get(i, i) == 1));
        let mut bad = PartialMatrix::unknown(2);
        bad.set(0, 1, 1).unwrap();
        bad.set(1, 0, -1).unwrap();
        assert!(matches!(
            property_closure(combo("symmetric"), &bad, ClosureOptions::default()),
            Err(Error::InconsistentInput(_))
        ));
    }
}
