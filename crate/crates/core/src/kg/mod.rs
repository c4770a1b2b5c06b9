//! Vocabularies, labeled facts and datasets shared by every other module.

mod metrics;
mod proportion;
pub(crate) mod sampling;
pub mod tsv;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use metrics::{aggregate_runs, average_precision, ScoredFact};
pub use proportion::Proportion;
pub use sampling::{sample_subset, three_way_split};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    entity_count: usize,
    relation_count: usize,
    entity_names: Option<Vec<String>>,
    relation_names: Option<Vec<String>>,
}

impl Vocab {
    pub fn new(entity_count: usize, relation_count: usize) -> Result<Self> {
        if entity_count == 0 || relation_count == 0 {
            return Err(Error::invalid("vocabulary needs at least one entity and one relation"));
        }
        Ok(Vocab { entity_count, relation_count, entity_names: None, relation_names: None })
    }

    pub fn with_names(entity_names: Vec<String>, relation_names: Vec<String>) -> Result<Self> {
        let mut v = Vocab::new(entity_names.len(), relation_names.len())?;
        v.entity_names = Some(entity_names);
        v.relation_names = Some(relation_names);
        Ok(v)
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    pub fn entity_names(&self) -> Option<&[String]> {
        self.entity_names.as_deref()
    }

    pub fn relation_names(&self) -> Option<&[String]> {
        self.relation_names.as_deref()
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relation_names.as_ref()?.iter().position(|n| n == name)
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.entity_names.as_ref()?.iter().position(|n| n == name)
    }

    pub fn check(&self, t: Triple) -> Result<()> {
        if t.relation >= self.relation_count || t.subject >= self.entity_count || t.object >= self.entity_count {
            return Err(Error::invalid(format!(
                "triple {t} out of range for vocabulary ({} entities, {} relations)",
                self.entity_count, self.relation_count
            )));
        }
        Ok(())
    }
}

/// A `(relation, subject, object)` index triple. The derived ordering is the
/// lexicographic `(r, s, o)` order used for ranking tie-breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub relation: usize,
    pub subject: usize,
    pub object: usize,
}

impl Triple {
    pub const fn new(relation: usize, subject: usize, object: usize) -> Self {
        Triple { relation, subject, object }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.relation, self.subject, self.object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_sign(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(Error::invalid(format!("label must be 1 or -1, got {other}"))),
        }
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledFact {
    pub triple: Triple,
    pub label: Label,
}

impl LabeledFact {
    pub const fn new(triple: Triple, label: Label) -> Self {
        LabeledFact { triple, label }
    }
}

/// Train/validation/test partition of labeled facts over one vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    vocab: Vocab,
    train: Vec<LabeledFact>,
    valid: Vec<LabeledFact>,
    test: Vec<LabeledFact>,
    provenance: String,
}

impl Dataset {
    /// Validates index bounds and that no `(r, s, o)` occurs twice across
    /// (or within) the three sets.
    pub fn new(
        vocab: Vocab,
        train: Vec<LabeledFact>,
        valid: Vec<LabeledFact>,
        test: Vec<LabeledFact>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(train.len() + valid.len() + test.len());
        for (set, name) in [(&train, "train"), (&valid, "valid"), (&test, "test")] {
            for f in set.iter() {
                vocab.check(f.triple)?;
                if !seen.insert(f.triple) {
                    return Err(Error::invalid(format!("triple {} repeated (found again in {name})", f.triple)));
                }
            }
        }
        Ok(Dataset { vocab, train, valid, test, provenance: provenance.into() })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn train(&self) -> &[LabeledFact] {
        &self.train
    }

    pub fn valid(&self) -> &[LabeledFact] {
        &self.valid
    }

    pub fn test(&self) -> &[LabeledFact] {
        &self.test
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Training and validation facts: what an inference procedure may look at.
    pub fn observed(&self) -> impl Iterator<Item = &LabeledFact> {
        self.train.iter().chain(self.valid.iter())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    IndividualTenfold,
    JointFraction,
    FamilyRandom,
    FamilyEvidence,
    FamilyFamily,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::IndividualTenfold => "individual-tenfold",
            SplitKind::JointFraction => "joint-fraction",
            SplitKind::FamilyRandom => "family-random",
            SplitKind::FamilyEvidence => "family-evidence",
            SplitKind::FamilyFamily => "family-family",
        }
    }
}

impl std::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "individual-tenfold" | "individual" => SplitKind::IndividualTenfold,
            "joint-fraction" | "joint" => SplitKind::JointFraction,
            "family-random" | "random" => SplitKind::FamilyRandom,
            "family-evidence" | "evidence" => SplitKind::FamilyEvidence,
            "family-family" | "family" => SplitKind::FamilyFamily,
            other => return Err(Error::invalid(format!("unknown split kind {other:?}"))),
        })
    }
}

impl<'de> Deserialize<'de> for SplitKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Which generator split produced a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub p: Proportion,
    pub index: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(kind: SplitKind, p: Proportion, index: usize, seed: u64) -> Result<Self> {
        let spec = SplitSpec { kind, p, index, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.is_zero() && self.kind != SplitKind::FamilyFamily {
            return Err(Error::invalid(format!(
                "p = 0 is only meaningful for the family split, not {}",
                self.kind.name()
            )));
        }
        if self.kind == SplitKind::IndividualTenfold && self.p != Proportion::from_f64(0.8)? {
            return Err(Error::invalid("individual ten-fold splits use 80% training"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(r: usize, s: usize, o: usize, y: bool) -> LabeledFact {
        LabeledFact::new(Triple::new(r, s, o), Label::from_bool(y))
    }

    #[test]
    fn dataset_rejects_overlap_and_out_of_range() {
        let vocab = Vocab::new(3, 1).unwrap();
        let ok = Dataset::new(vocab.clone(), vec![fact(0, 0, 1, true)], vec![fact(0, 1, 0, false)], vec![], "t");
        assert!(ok.is_ok());
        let overlap = Dataset::new(vocab.clone(), vec![fact(0, 0, 1, true)], vec![fact(0, 0, 1, false)], vec![], "t");
        assert!(matches!(overlap, Err(Error::InvalidArgument(_))));
        let oob = Dataset::new(vocab, vec![fact(0, 0, 3, true)], vec![], vec![], "t");
        assert!(oob.is_err());
    }

    #[test]
    fn triple_order_is_lexicographic() {
        let mut v = vec![Triple::new(1, 0, 0), Triple::new(0, 2, 1), Triple::new(0, 2, 0)];
        v.sort();
        assert_eq!(v, vec![Triple::new(0, 2, 0), Triple::new(0, 2, 1), Triple::new(1, 0, 0)]);
    }

    #[test]
    fn split_spec_rules() {
        let zero = Proportion::ZERO;
        assert!(SplitSpec::new(SplitKind::FamilyFamily, zero, 0, 1).is_ok());
        assert!(SplitSpec::new(SplitKind::FamilyEvidence, zero, 0, 1).is_err());
        let half = Proportion::from_f64(0.5).unwrap();
        assert!(SplitSpec::new(SplitKind::IndividualTenfold, half, 0, 1).is_err());
        assert!(Label::from_sign(0).is_err());
    }
}
