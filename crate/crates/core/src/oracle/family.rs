use std::collections::HashMap;

use super::{Oracle, Verdict};
use crate::error::{Error, Result};
use crate::kg::{Label, LabeledFact, Triple};
use crate::synth::families::Kinship;

/// Kleene truth value; `and` is min and `or` is max under F < U < T.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Tri {
    F,
    U,
    T,
}

impl Tri {
    fn from(b: bool) -> Tri {
        if b {
            Tri::T
        } else {
            Tri::F
        }
    }

    fn and(self, o: Tri) -> Tri {
        self.min(o)
    }
}

fn any(it: impl Iterator<Item = Tri>) -> Tri {
    let mut acc = Tri::F;
    for t in it {
        acc = acc.max(t);
        if acc == Tri::T {
            break;
        }
    }
    acc
}

/// Answers kinship queries by rebuilding parenthood and sex from observed
/// mother/father/son/daughter facts and evaluating the kinship definitions
/// in three-valued logic.
///
/// Entities never linked by an observed fact (directly or through others)
/// are taken to live in different families, which share no kinship.
#[derive(Debug, Clone)]
pub struct FamilyOracle {
    n: usize,
    male: Vec<Tri>,
    parent: Vec<Tri>,
    component: Vec<usize>,
    members: Vec<Vec<usize>>,
    observed: HashMap<Triple, Label>,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

impl FamilyOracle {
    /// Relations are indexed in [`Kinship::ALL`] order.
    pub fn new<'a>(observed: impl IntoIterator<Item = &'a LabeledFact>, entity_count: usize) -> Result<Self> {
        let n = entity_count;
        let mut facts: HashMap<Triple, Label> = HashMap::new();
        let mut uf: Vec<usize> = (0..n).collect();
        for f in observed {
            let t = f.triple;
            if t.subject >= n || t.object >= n || Kinship::from_index(t.relation).is_none() {
                return Err(Error::invalid(format!("fact {t} is not a kinship fact over {n} entities")));
            }
            if facts.insert(t, f.label).is_some_and(|old| old != f.label) {
                return Err(Error::InconsistentInput(format!("fact {t} observed with both labels")));
            }
            let (a, b) = (find(&mut uf, t.subject), find(&mut uf, t.object));
            uf[a] = b;
        }
        let component: Vec<usize> = (0..n).map(|x| find(&mut uf, x)).collect();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (x, &c) in component.iter().enumerate() {
            members[c].push(x);
        }
        let label = |r: Kinship, a: usize, b: usize| facts.get(&Triple::new(r.index(), a, b)).copied();

        let mut male = vec![Tri::U; n];
        let mut set_sex = |x: usize, m: bool| -> Result<()> {
            let v = Tri::from(m);
            if male[x] != Tri::U && male[x] != v {
                return Err(Error::InconsistentInput(format!("entity {x} is observed as both sexes")));
            }
            male[x] = v;
            Ok(())
        };
        for (t, l) in &facts {
            if *l != Label::Positive {
                continue;
            }
            match Kinship::from_index(t.relation).unwrap() {
                Kinship::Father | Kinship::Son => set_sex(t.subject, true)?,
                Kinship::Mother | Kinship::Daughter => set_sex(t.subject, false)?,
                _ => {}
            }
        }

        let mut parent = vec![Tri::U; n * n];
        for a in 0..n {
            for b in 0..n {
                let cell = &mut parent[a * n + b];
                if component[a] != component[b] || a == b {
                    *cell = Tri::F;
                    continue;
                }
                let pos = |l: Option<Label>| l == Some(Label::Positive);
                let neg = |l: Option<Label>| l == Some(Label::Negative);
                let (fa, mo) = (label(Kinship::Father, a, b), label(Kinship::Mother, a, b));
                let (so, da) = (label(Kinship::Son, b, a), label(Kinship::Daughter, b, a));
                let yes = pos(fa) || pos(mo) || pos(so) || pos(da);
                // a is not a parent of b when the relation matching a's sex
                // (or both) is false, or the one matching b's sex (or both) is.
                let no_by_a = (neg(fa) && neg(mo)) || (male[a] == Tri::T && neg(fa)) || (male[a] == Tri::F && neg(mo));
                let no_by_b = (neg(so) && neg(da)) || (male[b] == Tri::T && neg(so)) || (male[b] == Tri::F && neg(da));
                if yes && (no_by_a || no_by_b) {
                    return Err(Error::InconsistentInput(format!("parenthood of ({a}, {b}) is contradictory")));
                }
                if yes {
                    *cell = Tri::T;
                } else if no_by_a || no_by_b {
                    *cell = Tri::F;
                }
            }
        }
        // One father and one mother per person.
        for b in 0..n {
            for sex in [Tri::T, Tri::F] {
                let known: Vec<usize> = (0..n).filter(|&a| parent[a * n + b] == Tri::T && male[a] == sex).collect();
                if known.len() > 1 {
                    return Err(Error::InconsistentInput(format!("entity {b} has several parents of one sex")));
                }
                if let Some(&p) = known.first() {
                    for a in 0..n {
                        if a != p && male[a] == sex && parent[a * n + b] == Tri::U {
                            parent[a * n + b] = Tri::F;
                        }
                    }
                }
            }
        }
        Ok(FamilyOracle { n, male, parent, component, members, observed: facts })
    }

    fn par(&self, a: usize, b: usize) -> Tri {
        self.parent[a * self.n + b]
    }

    fn sibling(&self, a: usize, b: usize) -> Tri {
        if a == b {
            return Tri::F;
        }
        any(self.members[self.component[a]].iter().map(|&x| self.par(x, a).and(self.par(x, b))))
    }

    fn truth(&self, r: Kinship, a: usize, b: usize) -> Tri {
        if self.component[a] != self.component[b] {
            return Tri::F;
        }
        let fam = &self.members[self.component[a]];
        let m = self.male[a];
        let f = match m {
            Tri::T => Tri::F,
            Tri::F => Tri::T,
            Tri::U => Tri::U,
        };
        let uncle_like = |x: usize, y: usize| any(fam.iter().map(|&p| self.par(p, y).and(self.sibling(x, p))));
        let grand = |x: usize, y: usize| any(fam.iter().map(|&p| self.par(x, p).and(self.par(p, y))));
        match r {
            Kinship::Mother => f.and(self.par(a, b)),
            Kinship::Father => m.and(self.par(a, b)),
            Kinship::Son => m.and(self.par(b, a)),
            Kinship::Daughter => f.and(self.par(b, a)),
            Kinship::Husband | Kinship::Wife => {
                let sex = if r == Kinship::Husband { m } else { f };
                let same = if a == b { Tri::F } else { Tri::T };
                sex.and(same).and(any(fam.iter().map(|&c| self.par(a, c).and(self.par(b, c)))))
            }
            Kinship::Brother => m.and(self.sibling(a, b)),
            Kinship::Sister => f.and(self.sibling(a, b)),
            Kinship::Uncle => m.and(uncle_like(a, b)),
            Kinship::Aunt => f.and(uncle_like(a, b)),
            Kinship::Nephew => m.and(uncle_like(b, a)),
            Kinship::Niece => f.and(uncle_like(b, a)),
            Kinship::Cousin => any(fam
                .iter()
                .map(|&x| self.par(x, a).and(any(fam.iter().map(|&y| self.par(y, b).and(self.sibling(x, y))))))),
            Kinship::Grandfather => m.and(grand(a, b)),
            Kinship::Grandmother => f.and(grand(a, b)),
            Kinship::Grandson => m.and(grand(b, a)),
            Kinship::Granddaughter => f.and(grand(b, a)),
        }
    }
}

impl Oracle for FamilyOracle {
    fn verdict(&self, t: Triple) -> Verdict {
        if let Some(l) = self.observed.get(&t) {
            return if l.is_positive() { Verdict::True } else { Verdict::False };
        }
        let Some(r) = Kinship::from_index(t.relation) else {
            return Verdict::Unknown;
        };
        if t.subject >= self.n || t.object >= self.n {
            return Verdict::Unknown;
        }
        match self.truth(r, t.subject, t.object) {
            Tri::T => Verdict::True,
            Tri::F => Verdict::False,
            Tri::U => Verdict::Unknown,
        }
    }
}
