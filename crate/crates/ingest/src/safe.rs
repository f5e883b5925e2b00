//! Never-removed comments sampled per community as the safe class.

use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, Utc};
use modq_core::text::fnv1a;
use modq_core::{ModerationRecord, SAFE_RULE};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::client::ApiClient;
use crate::error::{IngestError, Result};
use crate::filter::is_scrubbed;
use crate::langid::LanguageIdentifier;
use crate::lemmy;
use crate::types::id_key;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeCandidate {
    pub comment_id: String,
    pub instance: String,
    pub community: String,
    pub text: String,
    pub removed: bool,
    pub deleted: bool,
    pub published: DateTime<Utc>,
}

/// Lists local comments of `community` (qualified) oldest first, up to
/// `max_pages` pages.
pub async fn fetch_candidates(
    client: &ApiClient,
    instance: &str,
    community: &str,
    limit: u32,
    max_pages: u32,
) -> Result<Vec<SafeCandidate>> {
    let name = community.split('@').next().unwrap_or_default();
    let mut out = Vec::new();
    for page in 1..=max_pages {
        let query = [
            ("community_name", name.to_string()),
            ("type_", "Local".to_string()),
            ("sort", "Old".to_string()),
            ("page", page.to_string()),
            ("limit", limit.to_string()),
        ];
        let v = client.get_json(instance, lemmy::COMMENT_LIST, &query).await?;
        let got = lemmy::parse_comment_list(&v, instance, community)
            .map_err(|message| IngestError::Malformed { url: format!("{instance}{}", lemmy::COMMENT_LIST), message })?;
        let full = got.len() as u32 >= limit;
        out.extend(got);
        if !full {
            break;
        }
    }
    Ok(out)
}

/// Candidates grouped by community plus every comment id that appeared in
/// a modlog, which are never eligible.
pub struct SafePool<'a> {
    candidates: BTreeMap<String, Vec<SafeCandidate>>,
    moderated_ids: HashSet<(String, String)>,
    moderated_communities: HashSet<String>,
    lang: &'a dyn LanguageIdentifier,
}

impl<'a> SafePool<'a> {
    pub fn new(
        candidates: impl IntoIterator<Item = SafeCandidate>,
        moderated_ids: HashSet<(String, String)>,
        moderated_communities: HashSet<String>,
        lang: &'a dyn LanguageIdentifier,
    ) -> Self {
        let mut by_community: BTreeMap<String, Vec<SafeCandidate>> = BTreeMap::new();
        for c in candidates {
            by_community.entry(c.community.clone()).or_default().push(c);
        }
        for v in by_community.values_mut() {
            v.sort_by(|a, b| id_key(&a.comment_id).cmp(&id_key(&b.comment_id)));
            v.dedup_by(|a, b| a.comment_id == b.comment_id);
        }
        SafePool { candidates: by_community, moderated_ids, moderated_communities, lang }
    }

    fn eligible(&self, community: &str) -> Vec<&SafeCandidate> {
        self.candidates
            .get(community)
            .map(|v| {
                v.iter()
                    .filter(|c| !c.removed && !c.deleted)
                    .filter(|c| !self.moderated_ids.contains(&(c.instance.clone(), c.comment_id.clone())))
                    .filter(|c| !is_scrubbed(&c.text) && self.lang.is_english(&c.text))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Up to `n` eligible comments of `community`, as safe records. Only
    /// communities that contributed moderated records are sampled.
    pub fn sample_safe(&self, community: &str, n: usize, seed: u64) -> Vec<ModerationRecord> {
        if n == 0 || !self.moderated_communities.contains(community) {
            return Vec::new();
        }
        let mut pool = self.eligible(community);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(community.as_bytes()));
        pool.shuffle(&mut rng);
        pool.truncate(n);
        pool.into_iter()
            .map(|c| ModerationRecord {
                id: format!("{}:{}", c.instance, c.comment_id),
                community: c.community.clone(),
                instance: c.instance.clone(),
                comment_text: c.text.clone(),
                removed: false,
                reason: None,
                gold_rule_number: SAFE_RULE,
                created_at: c.published,
                community_description: None,
                description_stale: false,
            })
            .collect()
    }
}
