use std::cmp::Ordering;

use super::{Label, Triple};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredFact {
    pub score: f64,
    pub label: Label,
    pub triple: Triple,
}

impl ScoredFact {
    pub fn new(score: f64, label: Label, triple: Triple) -> Self {
        ScoredFact { score, label, triple }
    }
}

fn ranking_order(a: &ScoredFact, b: &ScoredFact) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.triple.cmp(&b.triple))
}

/// Non-interpolated average precision: facts are ranked by descending score,
/// ties broken by ascending `(r, s, o)`, and precision is averaged over the
/// ranks holding positives.
pub fn average_precision(scored: &[ScoredFact]) -> Result<f64> {
    if let Some(bad) = scored.iter().find(|f| f.score.is_nan()) {
        return Err(Error::invalid(format!("NaN score for {}", bad.triple)));
    }
    let positives = scored.iter().filter(|f| f.label.is_positive()).count();
    if positives == 0 {
        return Err(Error::UndefinedMetric("average precision needs at least one positive".into()));
    }
    let mut ranked: Vec<&ScoredFact> = scored.iter().collect();
    ranked.sort_by(|a, b| ranking_order(a, b));

    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, f) in ranked.iter().enumerate() {
        if f.label.is_positive() {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
            if hits == positives {
                break;
            }
        }
    }
    Ok(sum / positives as f64)
}

/// Mean and population standard deviation.
pub fn aggregate_runs(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty list of runs"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn scored(scores: &[f64], labels: &[i64]) -> Vec<ScoredFact> {
        scores
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (&s, &y))| ScoredFact::new(s, Label::from_sign(y).unwrap(), Triple::new(0, i, 0)))
            .collect()
    }

    /// Mean AP over every ordering that respects the scores, i.e. all
    /// permutations inside each tie group.
    fn permutation_averaged_ap(facts: &[ScoredFact]) -> f64 {
        permutation_ap_range(facts).1
    }

    /// (min, mean, max) of AP over every ordering consistent with the scores.
    fn permutation_ap_range(facts: &[ScoredFact]) -> (f64, f64, f64) {
        fn ap_of(order: &[Label]) -> f64 {
            let p = order.iter().filter(|l| l.is_positive()).count() as f64;
            let mut hits = 0.0;
            let mut sum = 0.0;
            for (k, l) in order.iter().enumerate() {
                if l.is_positive() {
                    hits += 1.0;
                    sum += hits / (k + 1) as f64;
                }
            }
            sum / p
        }
        fn permutations(items: &mut Vec<Label>, k: usize, out: &mut Vec<Vec<Label>>) {
            if k == items.len() {
                out.push(items.clone());
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                permutations(items, k + 1, out);
                items.swap(k, i);
            }
        }
        let mut sorted: Vec<&ScoredFact> = facts.iter().collect();
        sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
        let mut groups: Vec<Vec<Vec<Label>>> = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j < sorted.len() && sorted[j].score == sorted[i].score {
                j += 1;
            }
            let mut g: Vec<Label> = sorted[i..j].iter().map(|f| f.label).collect();
            let mut perms = Vec::new();
            permutations(&mut g, 0, &mut perms);
            groups.push(perms);
            i = j;
        }
        let mut total = 0.0;
        let mut count = 0usize;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut idx = vec![0usize; groups.len()];
        loop {
            let order: Vec<Label> = groups.iter().zip(&idx).flat_map(|(g, &k)| g[k].iter().copied()).collect();
            let ap = ap_of(&order);
            lo = lo.min(ap);
            hi = hi.max(ap);
            total += ap;
            count += 1;
            let mut d = 0;
            loop {
                if d == groups.len() {
                    return (lo, total / count as f64, hi);
                }
                idx[d] += 1;
                if idx[d] < groups[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    #[test]
    fn hand_computed_values() {
        assert_eq!(average_precision(&scored(&[3.0, 2.0, 1.0], &[1, 1, -1])).unwrap(), 1.0);
        let ap = average_precision(&scored(&[3.0, 2.0, 1.0], &[-1, 1, 1])).unwrap();
        assert!((ap - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn ties_follow_triple_order() {
        // Tie group ordered by triple: subjects 0..4 → labels [-1, 1, -1, 1]
        // ranks 2 and 4: (1/2 + 2/4) / 2 = 0.5.
        let facts = scored(&[1.0; 4], &[-1, 1, -1, 1]);
        assert!((average_precision(&facts).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tie_broken_value_vs_permutation_average_on_distinct_scores() {
        // Without ties the oracle and the implementation must agree exactly.
        let facts = scored(&[0.3, 0.9, 0.1, 0.5, 0.7], &[1, -1, 1, 1, -1]);
        let a = average_precision(&facts).unwrap();
        assert!((a - permutation_averaged_ap(&facts)).abs() < 1e-12);
    }

    #[test]
    fn tie_broken_value_is_one_of_the_permutation_outcomes() {
        // With ties the deterministic value lies within the range spanned by
        // score-respecting permutations.
        let mut rng = crate::seed::rng(11);
        use rand::Rng;
        for _ in 0..200 {
            let n = rng.random_range(2..7);
            let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..3u8))).collect();
            let mut labels: Vec<i64> = (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
            labels[0] = 1;
            let facts = scored(&scores, &labels);
            let ap = average_precision(&facts).unwrap();
            let (lo, _, hi) = permutation_ap_range(&facts);
            assert!(lo - 1e-12 <= ap && ap <= hi + 1e-12, "ap {ap} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn undefined_without_positives() {
        assert!(matches!(average_precision(&scored(&[1.0, 2.0], &[-1, -1])), Err(Error::UndefinedMetric(_))));
        assert!(average_precision(&scored(&[f64::NAN], &[1])).is_err());
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_runs(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        assert_eq!(aggregate_runs(&[0.0, 1.0]).unwrap(), (0.5, 0.5));
        assert!(aggregate_runs(&[]).is_err());
        let v = [0.61, 0.72, 0.55, 0.93, 0.88, 0.47, 0.66, 0.79, 0.51, 0.98];
        // Direct formula: mean 0.71, population variance 0.02924.
        let (m, s) = aggregate_runs(&v).unwrap();
        assert!((m - 0.71).abs() < 1e-12);
        assert!((s - 0.02924f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transform(raw in prop::collection::vec((-50i32..50, any::<bool>()), 1..60)) {
            let mut facts: Vec<ScoredFact> = raw.iter().enumerate()
                .map(|(i, &(s, y))| ScoredFact::new(f64::from(s), Label::from_bool(y), Triple::new(0, i, 0)))
                .collect();
            facts[0].label = Label::Positive;
            let base = average_precision(&facts).unwrap();
            let mapped: Vec<ScoredFact> = facts.iter().map(|f| ScoredFact { score: (f.score / 7.0).exp() * 3.0 - 1.0, ..*f }).collect();
            prop_assert_eq!(base, average_precision(&mapped).unwrap());
        }

        #[test]
        fn one_iff_positives_first(raw in prop::collection::vec((-20i32..20, any::<bool>()), 1..40)) {
            let mut facts: Vec<ScoredFact> = raw.iter().enumerate()
                .map(|(i, &(s, y))| ScoredFact::new(f64::from(s), Label::from_bool(y), Triple::new(0, i, 0)))
                .collect();
            facts[0].label = Label::Positive;
            let mut ranked = facts.clone();
            ranked.sort_by(ranking_order);
            let first_neg = ranked.iter().position(|f| !f.label.is_positive()).unwrap_or(ranked.len());
            let separated = ranked[first_neg..].iter().all(|f| !f.label.is_positive());
            let ap = average_precision(&facts).unwrap();
            prop_assert_eq!(ap == 1.0, separated);
        }
    }
}
