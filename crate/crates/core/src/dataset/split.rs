//! Stratified train/dev/test splits with community and rule holdouts.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize;
use crate::types::{DatasetRow, SplitName, SAFE_RULE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub test_fraction: f64,
    pub n_holdout_communities: usize,
    pub n_holdout_rules: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            seed: 0,
            train_fraction: 0.8,
            dev_fraction: 0.1,
            test_fraction: 0.1,
            n_holdout_communities: 20,
            n_holdout_rules: 20,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_fraction, self.dev_fraction, self.test_fraction];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::invalid("split fractions must lie in [0, 1]"));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split fractions must sum to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<DatasetRow>,
    pub dev: Vec<DatasetRow>,
    pub test: Vec<DatasetRow>,
    pub communities_holdout: Vec<DatasetRow>,
    pub rules_holdout: Vec<DatasetRow>,
    pub held_out_communities: Vec<String>,
    pub held_out_rules: Vec<(String, String)>,
}

impl Splits {
    pub fn get(&self, name: SplitName) -> &[DatasetRow] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::Test => &self.test,
            SplitName::CommunitiesHoldout => &self.communities_holdout,
            SplitName::RulesHoldout => &self.rules_holdout,
        }
    }

    pub fn total(&self) -> usize {
        SplitName::ALL.iter().map(|n| self.get(*n).len()).sum()
    }
}

/// `(community, normalized gold rule text)` of a removed row.
pub fn rule_key(row: &DatasetRow) -> Option<(String, String)> {
    if row.gold_rule_number == SAFE_RULE {
        return None;
    }
    row.gold_rule_text().map(|t| (row.community.clone(), normalize(t)))
}

/// Holds out `spec.n_holdout_communities` random communities, then
/// `spec.n_holdout_rules` random (rule, community) pairs, then splits the
/// rest by the configured fractions, stratified on the removed flag.
pub fn split_dataset(rows: &[DatasetRow], spec: &SplitSpec) -> Result<Splits> {
    let communities: BTreeSet<&str> = rows.iter().map(|r| r.community.as_str()).collect();
    if communities.len() < spec.n_holdout_communities {
        return Err(Error::invalid(format!(
            "{} distinct communities, cannot hold out {}",
            communities.len(),
            spec.n_holdout_communities
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pool: Vec<&str> = communities.into_iter().collect();
    pool.shuffle(&mut rng);
    let held: Vec<String> = pool.into_iter().take(spec.n_holdout_communities).map(str::to_string).collect();
    split_with_communities(rows, spec, &held, &mut rng)
}

/// Like [`split_dataset`] with the held-out communities fixed by the caller.
pub fn split_dataset_holding_out(rows: &[DatasetRow], spec: &SplitSpec, communities: &[String]) -> Result<Splits> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    split_with_communities(rows, spec, communities, &mut rng)
}

fn split_with_communities(
    rows: &[DatasetRow],
    spec: &SplitSpec,
    held_communities: &[String],
    rng: &mut ChaCha8Rng,
) -> Result<Splits> {
    spec.validate()?;
    let mut sorted: Vec<&DatasetRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let held_set: BTreeSet<&str> = held_communities.iter().map(String::as_str).collect();
    let (communities_holdout, remaining): (Vec<&DatasetRow>, Vec<&DatasetRow>) =
        sorted.into_iter().partition(|r| held_set.contains(r.community.as_str()));

    let pairs: BTreeSet<(String, String)> = remaining.iter().filter_map(|r| rule_key(r)).collect();
    let mut pairs: Vec<(String, String)> = pairs.into_iter().collect();
    if pairs.len() < spec.n_holdout_rules {
        log::warn!("only {} (rule, community) pairs available for {} rule holdouts", pairs.len(), spec.n_holdout_rules);
    }
    pairs.shuffle(rng);
    pairs.truncate(spec.n_holdout_rules);
    pairs.sort();
    let pair_set: BTreeSet<&(String, String)> = pairs.iter().collect();

    let (rules_holdout, rest): (Vec<&DatasetRow>, Vec<&DatasetRow>) =
        remaining.into_iter().partition(|r| rule_key(r).is_some_and(|k| pair_set.contains(&k)));

    let mut strata: BTreeMap<bool, Vec<&DatasetRow>> = BTreeMap::new();
    for r in rest {
        strata.entry(r.removed).or_default().push(r);
    }
    let (mut train, mut dev, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (_, mut stratum) in strata {
        stratum.shuffle(rng);
        let n = stratum.len();
        let n_train = (spec.train_fraction * n as f64).round() as usize;
        let n_dev = ((spec.dev_fraction * n as f64).round() as usize).min(n - n_train);
        for (i, r) in stratum.into_iter().enumerate() {
            if i < n_train {
                train.push(r);
            } else if i < n_train + n_dev {
                dev.push(r);
            } else {
                test.push(r);
            }
        }
    }

    let finish = |rows: Vec<&DatasetRow>, name: SplitName| {
        let mut out: Vec<DatasetRow> = rows
            .into_iter()
            .cloned()
            .map(|mut r| {
                r.split = Some(name);
                r
            })
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    };
    let mut held_out_communities = held_communities.to_vec();
    held_out_communities.sort();
    Ok(Splits {
        train: finish(train, SplitName::Train),
        dev: finish(dev, SplitName::Dev),
        test: finish(test, SplitName::Test),
        communities_holdout: finish(communities_holdout, SplitName::CommunitiesHoldout),
        rules_holdout: finish(rules_holdout, SplitName::RulesHoldout),
        held_out_communities,
        held_out_rules: pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Rule;

    fn row(id: usize, community: &str, gold: u32) -> DatasetRow {
        DatasetRow {
            id: format!("{id:04}"),
            community: community.into(),
            instance: "i".into(),
            comment_text: format!("comment {id}"),
            removed: gold != 0,
            reason: (gold != 0).then(|| format!("Rule {gold}")),
            gold_rule_number: gold,
            rules: vec![Rule::new(1, "No spam"), Rule::new(2, "Be civil")],
            categories: vec![],
            split: None,
            created_at: None,
        }
    }

    #[test]
    fn stratified_counts() {
        let rows: Vec<_> = (0..100).map(|i| row(i, "c", if i < 60 { 1 + (i % 2) as u32 } else { 0 })).collect();
        let spec = SplitSpec { n_holdout_communities: 0, n_holdout_rules: 0, ..SplitSpec::default() };
        let s = split_dataset(&rows, &spec).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (80, 10, 10));
        let removed = |v: &[DatasetRow]| v.iter().filter(|r| r.removed).count();
        assert_eq!(removed(&s.train), 48);
        assert_eq!(removed(&s.dev), 6);
        assert_eq!(removed(&s.test), 6);
    }

    #[test]
    fn community_holdout_is_disjoint() {
        let names = ["a", "b", "c", "d", "e"];
        let rows: Vec<_> = (0..200).map(|i| row(i, names[i % 5], (i % 3) as u32)).collect();
        let spec = SplitSpec { seed: 4, n_holdout_communities: 2, n_holdout_rules: 0, ..SplitSpec::default() };
        let s = split_dataset(&rows, &spec).unwrap();
        assert_eq!(s.held_out_communities.len(), 2);
        for r in s.train.iter().chain(&s.dev).chain(&s.test) {
            assert!(!s.held_out_communities.contains(&r.community));
        }
        assert!(s.communities_holdout.iter().all(|r| s.held_out_communities.contains(&r.community)));
        assert_eq!(s.total(), rows.len());
    }

    #[test]
    fn rule_holdout_keeps_rest_of_community() {
        let names = ["a", "b", "c"];
        let rows: Vec<_> = (0..300).map(|i| row(i, names[i % 3], ((i / 3) % 3) as u32)).collect();
        let spec = SplitSpec { seed: 1, n_holdout_communities: 0, n_holdout_rules: 1, ..SplitSpec::default() };
        let s = split_dataset(&rows, &spec).unwrap();
        let (community, text) = s.held_out_rules[0].clone();
        for r in s.train.iter().chain(&s.dev).chain(&s.test) {
            assert_ne!(rule_key(r), Some((community.clone(), text.clone())));
        }
        assert!(s.rules_holdout.iter().all(|r| rule_key(r) == Some((community.clone(), text.clone()))));
        assert!(s.train.iter().any(|r| r.community == community));
    }

    #[test]
    fn too_few_communities() {
        let rows = vec![row(0, "a", 0)];
        assert!(split_dataset(&rows, &SplitSpec::default()).is_err());
    }

    #[test]
    fn rejects_bad_fractions() {
        let spec = SplitSpec { train_fraction: 0.9, n_holdout_communities: 0, ..SplitSpec::default() };
        assert!(split_dataset(&[row(0, "a", 0)], &spec).is_err());
    }
}
