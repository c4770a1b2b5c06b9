use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::kg::Triple;

/// `relation(X, Y)` over rule variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: usize,
    pub args: [usize; 2],
}

/// A Horn clause with a conjunctive body; variables are numbered per rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
    pub variables: Vec<String>,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Atom>, variables: Vec<String>) -> Result<Self> {
        if body.is_empty() {
            return Err(Error::invalid("rule body must not be empty"));
        }
        let bound: HashSet<usize> = body.iter().flat_map(|a| a.args).collect();
        if head.args.iter().any(|v| !bound.contains(v)) {
            return Err(Error::invalid("head variables must occur in the body"));
        }
        Ok(Rule { head, body, variables })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atom = |a: &Atom| format!("r{}({}, {})", a.relation, self.variables[a.args[0]], self.variables[a.args[1]]);
        let body: Vec<String> = self.body.iter().map(atom).collect();
        write!(f, "{} :- {}", atom(&self.head), body.join(", "))
    }
}

/// Parses one rule per line, `head(X, Y) :- a(X, Z), b(Z, Y)`. Blank lines
/// and lines starting with `#` or `%` are skipped; a trailing `.` is allowed.
pub fn parse_rules(text: &str, relation_index: impl Fn(&str) -> Option<usize>) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let err = |message: String| Error::Parse { line: no + 1, message };
        let line = line.strip_suffix('.').unwrap_or(line);
        let (head, body) = line.split_once(":-").ok_or_else(|| err("expected `head :- body`".into()))?;
        let mut vars: Vec<String> = Vec::new();
        let mut parse_atom = |s: &str| -> Result<Atom> {
            let s = s.trim();
            let open = s.find('(').ok_or_else(|| err(format!("malformed atom {s:?}")))?;
            let inner = s[open + 1..].strip_suffix(')').ok_or_else(|| err(format!("malformed atom {s:?}")))?;
            let name = s[..open].trim();
            let relation = relation_index(name).ok_or_else(|| err(format!("unknown relation {name:?}")))?;
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            if parts.len() != 2 || parts.iter().any(|p| p.is_empty()) {
                return Err(err(format!("atom {s:?} must have two arguments")));
            }
            let mut args = [0; 2];
            for (slot, p) in args.iter_mut().zip(&parts) {
                *slot = match vars.iter().position(|v| v == p) {
                    Some(i) => i,
                    None => {
                        vars.push((*p).to_owned());
                        vars.len() - 1
                    }
                };
            }
            Ok(Atom { relation, args })
        };
        let head = parse_atom(head)?;
        let mut atoms = Vec::new();
        let mut depth = 0;
        let mut start = 0;
        for (i, ch) in body.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    atoms.push(parse_atom(&body[start..i])?);
                    start = i + 1;
                }
                _ => {}
            }
        }
        atoms.push(parse_atom(&body[start..])?);
        rules.push(Rule::new(head, atoms, vars).map_err(|e| err(e.to_string()))?);
    }
    Ok(rules)
}

#[derive(Default)]
struct FactIndex {
    by_relation: HashMap<usize, Vec<(usize, usize)>>,
    by_subject: HashMap<(usize, usize), Vec<usize>>,
    by_object: HashMap<(usize, usize), Vec<usize>>,
}

impl FactIndex {
    fn insert(&mut self, t: Triple) {
        self.by_relation.entry(t.relation).or_default().push((t.subject, t.object));
        self.by_subject.entry((t.relation, t.subject)).or_default().push(t.object);
        self.by_object.entry((t.relation, t.object)).or_default().push(t.subject);
    }
}

/// Least fixpoint of `rules` over `positives`, by semi-naive iteration:
/// each round only considers joins that use at least one fact derived in
/// the previous round.
pub fn forward_chain(rules: &[Rule], positives: &HashSet<Triple>) -> HashSet<Triple> {
    let mut all = positives.clone();
    let mut index = FactIndex::default();
    for t in positives {
        index.insert(*t);
    }
    let mut delta: Vec<Triple> = positives.iter().copied().collect();
    while !delta.is_empty() {
        let mut delta_by_rel: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for t in &delta {
            delta_by_rel.entry(t.relation).or_default().push((t.subject, t.object));
        }
        let mut fresh = Vec::new();
        for rule in rules {
            for pivot in 0..rule.body.len() {
                let Some(seeds) = delta_by_rel.get(&rule.body[pivot].relation) else {
                    continue;
                };
                for &(s, o) in seeds {
                    let mut binding = vec![None; rule.variables.len()];
                    if bind(&mut binding, rule.body[pivot].args, (s, o)) {
                        join(rule, pivot, 0, &mut binding, &index, &mut |b| {
                            let t = Triple::new(
                                rule.head.relation,
                                b[rule.head.args[0]].unwrap(),
                                b[rule.head.args[1]].unwrap(),
                            );
                            fresh.push(t);
                        });
                    }
                }
            }
        }
        delta.clear();
        for t in fresh {
            if all.insert(t) {
                index.insert(t);
                delta.push(t);
            }
        }
    }
    all
}

fn bind(binding: &mut [Option<usize>], args: [usize; 2], (s, o): (usize, usize)) -> bool {
    for (v, x) in args.into_iter().zip([s, o]) {
        match binding[v] {
            Some(y) if y != x => return false,
            _ => binding[v] = Some(x),
        }
    }
    true
}

fn join(
    rule: &Rule,
    pivot: usize,
    at: usize,
    binding: &mut Vec<Option<usize>>,
    index: &FactIndex,
    emit: &mut dyn FnMut(&[Option<usize>]),
) {
    if at == rule.body.len() {
        emit(binding);
        return;
    }
    if at == pivot {
        return join(rule, pivot, at + 1, binding, index, emit);
    }
    let atom = rule.body[at];
    let [x, y] = atom.args;
    let candidates: Vec<(usize, usize)> = match (binding[x], binding[y]) {
        (Some(s), _) => {
            index.by_subject.get(&(atom.relation, s)).map_or_else(Vec::new, |os| os.iter().map(|&o| (s, o)).collect())
        }
        (None, Some(o)) => {
            index.by_object.get(&(atom.relation, o)).map_or_else(Vec::new, |ss| ss.iter().map(|&s| (s, o)).collect())
        }
        (None, None) => index.by_relation.get(&atom.relation).cloned().unwrap_or_default(),
    };
    for pair in candidates {
        let saved = binding.clone();
        if bind(binding, atom.args, pair) {
            join(rule, pivot, at + 1, binding, index, emit);
        }
        *binding = saved;
    }
}
