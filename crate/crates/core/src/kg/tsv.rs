//! Tab-separated fact files.
//!
//! One fact per line: `relation<TAB>subject<TAB>object<TAB>label` with the
//! label `1` or `-1`. Identifiers are integer indices, or names resolved
//! through `entities.txt` / `relations.txt` (one name per line, line number
//! = index) living next to the fact files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Dataset, Label, LabeledFact, Triple, Vocab};
use crate::error::{Error, Result};

pub const ENTITIES_FILE: &str = "entities.txt";
pub const RELATIONS_FILE: &str = "relations.txt";

fn name_or_index(names: Option<&[String]>, i: usize) -> String {
    names.and_then(|n| n.get(i)).cloned().unwrap_or_else(|| i.to_string())
}

pub fn write_facts<W: Write>(out: W, facts: &[LabeledFact], vocab: Option<&Vocab>) -> Result<()> {
    let mut w = BufWriter::new(out);
    let ents = vocab.and_then(Vocab::entity_names);
    let rels = vocab.and_then(Vocab::relation_names);
    for f in facts {
        let t = f.triple;
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            name_or_index(rels, t.relation),
            name_or_index(ents, t.subject),
            name_or_index(ents, t.object),
            f.label.as_i8()
        )?;
    }
    w.flush()?;
    Ok(())
}

fn resolve(token: &str, names: Option<&[String]>, line: usize, what: &str) -> Result<usize> {
    if let Some(names) = names {
        if let Some(i) = names.iter().position(|n| n == token) {
            return Ok(i);
        }
    }
    token.parse().map_err(|_| Error::Parse { line, message: format!("unknown {what} {token:?}") })
}

/// Parses a fact file. When `vocab` carries names they take precedence over
/// integer parsing; bounds are checked only when a vocabulary is given.
pub fn read_facts<R: Read>(input: R, vocab: Option<&Vocab>) -> Result<Vec<LabeledFact>> {
    let ents = vocab.and_then(Vocab::entity_names);
    let rels = vocab.and_then(Vocab::relation_names);
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 4 tab-separated columns, got {}", cols.len()),
            });
        }
        let triple = Triple::new(
            resolve(cols[0], rels, lineno, "relation")?,
            resolve(cols[1], ents, lineno, "entity")?,
            resolve(cols[2], ents, lineno, "entity")?,
        );
        let label: i64 = cols[3]
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line: lineno, message: format!("bad label {:?}", cols[3]) })?;
        let label = Label::from_sign(label).map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        if let Some(v) = vocab {
            v.check(triple).map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        }
        out.push(LabeledFact::new(triple, label));
    }
    Ok(out)
}

fn read_names(path: &Path) -> Result<Option<Vec<String>>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)?;
    Ok(Some(text.lines().map(str::to_owned).collect()))
}

/// Loads `entities.txt` / `relations.txt` from `dir`, if present.
pub fn read_vocab(dir: &Path) -> Result<Option<Vocab>> {
    match (read_names(&dir.join(ENTITIES_FILE))?, read_names(&dir.join(RELATIONS_FILE))?) {
        (Some(e), Some(r)) => Ok(Some(Vocab::with_names(e, r)?)),
        _ => Ok(None),
    }
}

pub fn write_vocab(dir: &Path, vocab: &Vocab) -> Result<()> {
    let ents: Vec<String> = (0..vocab.entity_count()).map(|i| name_or_index(vocab.entity_names(), i)).collect();
    let rels: Vec<String> = (0..vocab.relation_count()).map(|i| name_or_index(vocab.relation_names(), i)).collect();
    fs::write(dir.join(ENTITIES_FILE), ents.join("\n") + "\n")?;
    fs::write(dir.join(RELATIONS_FILE), rels.join("\n") + "\n")?;
    Ok(())
}

/// Writes `train.tsv`, `valid.tsv`, `test.tsv`, the vocabulary sidecars and
/// a one-line `provenance.txt`.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_vocab(dir, data.vocab())?;
    for (name, facts) in [("train.tsv", data.train()), ("valid.tsv", data.valid()), ("test.tsv", data.test())] {
        write_facts(fs::File::create(dir.join(name))?, facts, Some(data.vocab()))?;
    }
    fs::write(dir.join("provenance.txt"), format!("{}\n", data.provenance()))?;
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let vocab = read_vocab(dir)?;
    let load = |name: &str| -> Result<Vec<LabeledFact>> {
        let path = dir.join(name);
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_facts(fs::File::open(path)?, vocab.as_ref())
    };
    let (train, valid, test) = (load("train.tsv")?, load("valid.tsv")?, load("test.tsv")?);
    let vocab = match vocab {
        Some(v) => v,
        None => infer_vocab(train.iter().chain(&valid).chain(&test))?,
    };
    let provenance = fs::read_to_string(dir.join("provenance.txt")).unwrap_or_default();
    Dataset::new(vocab, train, valid, test, provenance.trim())
}

/// Smallest index vocabulary covering the given facts.
pub fn infer_vocab<'a>(facts: impl Iterator<Item = &'a LabeledFact>) -> Result<Vocab> {
    let (mut ne, mut nr) = (0, 0);
    for f in facts {
        ne = ne.max(f.triple.subject + 1).max(f.triple.object + 1);
        nr = nr.max(f.triple.relation + 1);
    }
    Vocab::new(ne, nr)
}
