//! Turning raw modlog entries into moderated records.

use std::collections::{HashMap, HashSet};

use chrono::{DateTime, Utc};
use modq_core::{ModerationRecord, SAFE_RULE};
use serde::{Deserialize, Serialize};

use crate::langid::LanguageIdentifier;
use crate::types::{id_key, ModAction, ModlogEntry};

/// Parameters of the mass-removal heuristic: `burst_count` or more
/// removals by one moderator in one community within
/// `burst_window_seconds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterPolicy {
    pub burst_count: usize,
    pub burst_window_seconds: i64,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy { burst_count: 10, burst_window_seconds: 300 }
    }
}

/// Why entries were dropped. Each entry is counted once, under the first
/// rule that excludes it, in field order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub input: usize,
    pub not_removal: usize,
    pub burst: usize,
    pub restored: usize,
    pub empty_text: usize,
    pub non_english: usize,
    pub no_reason: usize,
    /// Earlier removals of a comment that was removed again later.
    pub duplicate: usize,
    pub kept: usize,
}

const SCRUBBED: [&str; 6] =
    ["[removed]", "[deleted]", "removed", "deleted", "[removed by moderator]", "[removed by admin]"];

/// Empty, whitespace or a placeholder left behind by a scrub.
pub fn is_scrubbed(text: &str) -> bool {
    let t = text.trim().to_lowercase();
    t.is_empty() || SCRUBBED.contains(&t.as_str())
}

/// Indices of removals that fall inside some window of at least
/// `burst_count` removals spanning at most `burst_window_seconds`.
pub fn burst_members(times: &[DateTime<Utc>], policy: &FilterPolicy) -> HashSet<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by_key(|&i| times[i]);
    let mut out = HashSet::new();
    if policy.burst_count == 0 {
        return (0..times.len()).collect();
    }
    let mut lo = 0;
    for hi in 0..order.len() {
        while (times[order[hi]] - times[order[lo]]).num_seconds() > policy.burst_window_seconds {
            lo += 1;
        }
        if hi + 1 - lo >= policy.burst_count {
            out.extend(order[lo..=hi].iter().copied());
        }
    }
    out
}

pub fn filter_records(
    entries: &[ModlogEntry],
    policy: &FilterPolicy,
    lang: &dyn LanguageIdentifier,
) -> (Vec<ModerationRecord>, FilterStats) {
    let mut stats = FilterStats { input: entries.len(), ..Default::default() };
    let mut sorted: Vec<&ModlogEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| (a.instance.as_str(), id_key(&a.entry_id)).cmp(&(b.instance.as_str(), id_key(&b.entry_id))));

    let removals: Vec<usize> = (0..sorted.len()).filter(|&i| sorted[i].action == ModAction::RemoveComment).collect();

    let mut groups: HashMap<(&str, &str, &str), Vec<usize>> = HashMap::new();
    for &i in &removals {
        let e = sorted[i];
        groups.entry((&e.instance, &e.moderator_id, &e.community)).or_default().push(i);
    }
    let mut in_burst = HashSet::new();
    for members in groups.values() {
        let times: Vec<_> = members.iter().map(|&i| sorted[i].acted_at).collect();
        in_burst.extend(burst_members(&times, policy).into_iter().map(|k| members[k]));
    }

    let mut last_restore: HashMap<(&str, &str), DateTime<Utc>> = HashMap::new();
    let mut last_removal: HashMap<(&str, &str), (DateTime<Utc>, usize)> = HashMap::new();
    for (i, e) in sorted.iter().enumerate() {
        let key = (e.instance.as_str(), e.comment_id.as_str());
        let slot = match e.action {
            ModAction::RestoreComment => {
                let t = last_restore.entry(key).or_insert(e.acted_at);
                *t = (*t).max(e.acted_at);
                continue;
            }
            ModAction::RemoveComment => last_removal.entry(key).or_insert((e.acted_at, i)),
            ModAction::Other => continue,
        };
        if (e.acted_at, i) > *slot {
            *slot = (e.acted_at, i);
        }
    }

    let mut out = Vec::new();
    for (i, e) in sorted.iter().enumerate() {
        let key = (e.instance.as_str(), e.comment_id.as_str());
        let reason = e.reason.as_deref().map(str::trim).filter(|r| !r.is_empty());
        if e.action != ModAction::RemoveComment {
            stats.not_removal += 1;
        } else if in_burst.contains(&i) {
            stats.burst += 1;
        } else if last_restore.get(&key).is_some_and(|&t| t >= e.acted_at) {
            stats.restored += 1;
        } else if is_scrubbed(&e.comment_text) {
            stats.empty_text += 1;
        } else if !lang.is_english(&e.comment_text) {
            stats.non_english += 1;
        } else if reason.is_none() {
            stats.no_reason += 1;
        } else if last_removal.get(&key).is_some_and(|&(_, j)| j != i) {
            stats.duplicate += 1;
        } else {
            stats.kept += 1;
            out.push(ModerationRecord {
                id: format!("{}:{}", e.instance, e.comment_id),
                community: e.community.clone(),
                instance: e.instance.clone(),
                comment_text: e.comment_text.clone(),
                removed: true,
                reason: reason.map(str::to_string),
                gold_rule_number: SAFE_RULE,
                created_at: e.acted_at,
                community_description: Some(e.community_description.clone()).filter(|d| !d.trim().is_empty()),
                description_stale: e.description_stale,
            });
        }
    }
    (out, stats)
}
