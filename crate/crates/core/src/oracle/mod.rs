//! Logic baselines: score 1 for facts deducible as true from the observed
//! facts, 0 for facts deducible as false, 0.5 otherwise.

mod closure;
mod family;
mod rules;

use crate::error::Result;
use crate::kg::{average_precision, Dataset, LabeledFact, ScoredFact, Triple};
use crate::synth::families::Kinship;

pub use closure::{property_closure, ClosureOptions, PartialMatrix, PropertyOracle};
pub use family::FamilyOracle;
pub use rules::{forward_chain, parse_rules, Atom, Rule};

/// The shipped kinship rule file.
pub const FAMILY_RULES: &str = include_str!("../../rules/family.rules");

pub fn family_rules() -> Result<Vec<Rule>> {
    parse_rules(FAMILY_RULES, |name| name.parse::<Kinship>().ok().map(Kinship::index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl Verdict {
    pub fn score(self) -> f64 {
        match self {
            Verdict::True => 1.0,
            Verdict::False => 0.0,
            Verdict::Unknown => 0.5,
        }
    }
}

pub trait Oracle {
    fn verdict(&self, t: Triple) -> Verdict;
}

/// AP of the oracle's `{1, 0.5, 0}` scores on `facts`.
pub fn oracle_ap(oracle: &impl Oracle, facts: &[LabeledFact]) -> Result<f64> {
    let scored: Vec<ScoredFact> = facts
        .iter()
        .map(|f| ScoredFact { score: oracle.verdict(f.triple).score(), label: f.label, triple: f.triple })
        .collect();
    average_precision(&scored)
}

/// Family oracle built from a dataset's train and valid facts, scored on its test facts.
pub fn family_oracle_ap(data: &Dataset) -> Result<f64> {
    let oracle = FamilyOracle::new(data.observed(), data.vocab().entity_count())?;
    oracle_ap(&oracle, data.test())
}

/// Property oracle for a dataset whose relation `r` satisfies `combos[r]`.
pub fn property_oracle_ap(data: &Dataset, combos: &[crate::synth::PropertyCombo], opts: ClosureOptions) -> Result<f64> {
    let oracle = PropertyOracle::new(data.observed(), data.vocab().entity_count(), combos, opts)?;
    oracle_ap(&oracle, data.test())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_rules_parse() {
        let rules = family_rules().unwrap();
        assert_eq!(rules.len(), 13);
    }
}
