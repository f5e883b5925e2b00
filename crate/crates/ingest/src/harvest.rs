//! End-to-end harvest: discovery, modlog paging, filtering and safe
//! sampling, with bounded fan-out across instances.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use futures::stream::{self, StreamExt};
use modq_core::dataset::io::write_jsonl;
use modq_core::ModerationRecord;
use serde::{Deserialize, Serialize};

use crate::client::ApiClient;
use crate::discover::discover_instances;
use crate::error::{IngestError, Result};
use crate::filter::{filter_records, FilterPolicy, FilterStats};
use crate::langid::LanguageIdentifier;
use crate::modlog::{fetch_instance_log, fill_missing_descriptions};
use crate::safe::{fetch_candidates, SafeCandidate, SafePool};
use crate::types::{id_key, EntryParseError, InstanceHost, ModlogEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarvestConfig {
    pub seeds: Vec<String>,
    pub max_depth: usize,
    /// Instances fetched concurrently; each instance is read sequentially.
    pub fan_out: usize,
    pub page_limit: u32,
    pub max_pages: Option<u32>,
    pub safe_pages: u32,
    /// Safe comments sampled per moderated record of the same community.
    pub safe_ratio: f64,
    pub safe_seed: u64,
    pub filter: FilterPolicy,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            seeds: Vec::new(),
            max_depth: 1,
            fan_out: 4,
            page_limit: 50,
            max_pages: None,
            safe_pages: 5,
            safe_ratio: 1.0,
            safe_seed: 0,
            filter: FilterPolicy::default(),
        }
    }
}

impl HarvestConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(IngestError::Config(m.into()));
        if self.seeds.is_empty() {
            return bad("no seed hosts");
        }
        if self.fan_out == 0 || self.page_limit == 0 {
            return bad("fan_out and page_limit must be positive");
        }
        if !(self.safe_ratio >= 0.0 && self.safe_ratio.is_finite()) {
            return bad("safe_ratio must be a non-negative number");
        }
        if self.filter.burst_count == 0 || self.filter.burst_window_seconds < 0 {
            return bad("burst_count must be positive and burst_window_seconds non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HarvestStats {
    pub hosts: usize,
    pub reachable_hosts: usize,
    pub failed_instances: Vec<String>,
    pub pages: u32,
    pub entries: usize,
    pub parse_errors: usize,
    pub non_local: usize,
    pub filter: FilterStats,
    pub moderated: usize,
    pub safe: usize,
    pub stale_descriptions: usize,
}

#[derive(Debug, Clone, Default)]
pub struct HarvestOutput {
    pub hosts: Vec<InstanceHost>,
    /// Raw entries in (instance, entry_id) order.
    pub entries: Vec<ModlogEntry>,
    pub parse_errors: Vec<EntryParseError>,
    /// Moderated records in (instance, entry_id) order, then safe records
    /// by community.
    pub records: Vec<ModerationRecord>,
    pub stats: HarvestStats,
}

struct InstanceResult {
    host: String,
    entries: Vec<ModlogEntry>,
    errors: Vec<EntryParseError>,
    non_local: usize,
    pages: u32,
    candidates: Vec<SafeCandidate>,
}

async fn harvest_instance(client: &ApiClient, host: &str, cfg: &HarvestConfig) -> Result<InstanceResult> {
    let mut log = fetch_instance_log(client, host, cfg.page_limit, cfg.max_pages).await?;
    fill_missing_descriptions(client, host, &mut log.entries).await;
    let communities: HashSet<&str> = log.entries.iter().map(|e| e.community.as_str()).collect();
    let mut communities: Vec<&str> = communities.into_iter().collect();
    communities.sort();
    let mut candidates = Vec::new();
    for c in communities {
        match fetch_candidates(client, host, c, cfg.page_limit, cfg.safe_pages).await {
            Ok(got) => candidates.extend(got),
            Err(e) => log::warn!("{c}: no safe candidates ({e})"),
        }
    }
    Ok(InstanceResult {
        host: host.to_string(),
        entries: log.entries,
        errors: log.errors,
        non_local: log.non_local,
        pages: log.pages,
        candidates,
    })
}

pub async fn harvest(client: &ApiClient, cfg: &HarvestConfig, lang: &dyn LanguageIdentifier) -> Result<HarvestOutput> {
    cfg.validate()?;
    let hosts = discover_instances(client, &cfg.seeds, cfg.max_depth).await?;
    let reachable: Vec<String> = hosts.iter().filter(|h| h.reachable).map(|h| h.host.clone()).collect();

    let mut results: Vec<(String, Result<InstanceResult>)> = stream::iter(reachable.iter())
        .map(|h| async move { (h.clone(), harvest_instance(client, h, cfg).await) })
        .buffer_unordered(cfg.fan_out)
        .collect()
        .await;
    results.sort_by(|a, b| a.0.cmp(&b.0));

    let mut out = HarvestOutput {
        stats: HarvestStats { hosts: hosts.len(), reachable_hosts: reachable.len(), ..Default::default() },
        hosts,
        ..Default::default()
    };
    let mut candidates = Vec::new();
    for (host, r) in results {
        match r {
            Ok(r) => {
                out.stats.pages += r.pages;
                out.stats.non_local += r.non_local;
                out.entries.extend(r.entries);
                out.parse_errors.extend(r.errors);
                candidates.extend(r.candidates);
                debug_assert_eq!(host, r.host);
            }
            Err(e) => {
                log::warn!("{host}: modlog harvest failed: {e}");
                out.stats.failed_instances.push(host);
            }
        }
    }
    out.entries
        .sort_by(|a, b| (a.instance.as_str(), id_key(&a.entry_id)).cmp(&(b.instance.as_str(), id_key(&b.entry_id))));

    let (moderated, fstats) = filter_records(&out.entries, &cfg.filter, lang);
    let mut per_community: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &moderated {
        *per_community.entry(r.community.as_str()).or_default() += 1;
    }
    let moderated_ids = out.entries.iter().map(|e| (e.instance.clone(), e.comment_id.clone())).collect();
    let pool = SafePool::new(candidates, moderated_ids, per_community.keys().map(|c| c.to_string()).collect(), lang);
    let mut safe = Vec::new();
    for (community, &count) in &per_community {
        let n = (count as f64 * cfg.safe_ratio).round() as usize;
        safe.extend(pool.sample_safe(community, n, cfg.safe_seed));
    }

    out.stats.entries = out.entries.len();
    out.stats.parse_errors = out.parse_errors.len();
    out.stats.filter = fstats;
    out.stats.moderated = moderated.len();
    out.stats.safe = safe.len();
    out.stats.stale_descriptions = moderated.iter().filter(|r| r.description_stale).count();
    out.records = moderated;
    out.records.extend(safe);
    Ok(out)
}

/// `hosts.jsonl`, `snapshot.jsonl` (raw entries), `parse_errors.jsonl`,
/// `records.jsonl` and `harvest_stats.json` under `dir`.
pub fn write_outputs(out: &HarvestOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_jsonl(&dir.join("hosts.jsonl"), &out.hosts)?;
    write_jsonl(&dir.join("snapshot.jsonl"), &out.entries)?;
    write_jsonl(&dir.join("parse_errors.jsonl"), &out.parse_errors)?;
    write_jsonl(&dir.join("records.jsonl"), &out.records)?;
    let stats = serde_json::to_string_pretty(&out.stats).expect("stats serialize");
    std::fs::write(dir.join("harvest_stats.json"), stats + "\n")?;
    Ok(())
}
