//! Paging through an instance's public modlog.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::client::ApiClient;
use crate::error::{IngestError, Result};
use crate::lemmy::{self, ParsedItem};
use crate::types::{EntryParseError, ModlogEntry};

/// Opaque position in a modlog; currently a 1-based page number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageCursor(u32);

impl PageCursor {
    pub fn first() -> Self {
        PageCursor(1)
    }

    pub fn page(&self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModlogPage {
    pub entries: Vec<ModlogEntry>,
    pub errors: Vec<EntryParseError>,
    /// Entries about communities hosted elsewhere.
    pub non_local: usize,
    pub next: Option<PageCursor>,
}

/// Fetches one page of comment removals. A page that came back full is
/// assumed to have a successor.
pub async fn fetch_modlog(client: &ApiClient, instance: &str, cursor: PageCursor, limit: u32) -> Result<ModlogPage> {
    let query =
        [("type_", "ModRemoveComment".to_string()), ("page", cursor.0.to_string()), ("limit", limit.to_string())];
    let v = client.get_json(instance, lemmy::MODLOG, &query).await?;
    parse_page(&v, instance, cursor, limit)
}

pub fn parse_page(v: &Value, instance: &str, cursor: PageCursor, limit: u32) -> Result<ModlogPage> {
    let items = v.get("removed_comments").and_then(Value::as_array).ok_or_else(|| IngestError::Malformed {
        url: format!("{instance}{}", lemmy::MODLOG),
        message: "missing removed_comments".into(),
    })?;
    let mut page = ModlogPage::default();
    for (index, item) in items.iter().enumerate() {
        match lemmy::parse_removed_comment(item, instance) {
            Ok(ParsedItem::Entry(e)) => page.entries.push(*e),
            Ok(ParsedItem::NonLocal) => page.non_local += 1,
            Err(message) => {
                log::warn!("{instance} modlog page {} entry {index}: {message}", cursor.0);
                page.errors.push(EntryParseError { instance: instance.to_string(), page: cursor.0, index, message });
            }
        }
    }
    if limit > 0 && items.len() as u32 >= limit {
        page.next = Some(PageCursor(cursor.0 + 1));
    }
    Ok(page)
}

#[derive(Debug, Clone, Default)]
pub struct InstanceLog {
    pub entries: Vec<ModlogEntry>,
    pub errors: Vec<EntryParseError>,
    pub non_local: usize,
    pub pages: u32,
}

/// Reads pages sequentially until exhausted or `max_pages` is reached.
pub async fn fetch_instance_log(
    client: &ApiClient,
    instance: &str,
    limit: u32,
    max_pages: Option<u32>,
) -> Result<InstanceLog> {
    let mut log = InstanceLog::default();
    let mut cursor = Some(PageCursor::first());
    while let Some(c) = cursor {
        if max_pages.is_some_and(|m| log.pages >= m) {
            break;
        }
        let page = fetch_modlog(client, instance, c, limit).await?;
        log.pages += 1;
        log.entries.extend(page.entries);
        log.errors.extend(page.errors);
        log.non_local += page.non_local;
        cursor = page.next;
    }
    Ok(log)
}

/// Entries without a description get the community's current one, one
/// request per community. They stay flagged stale either way.
pub async fn fill_missing_descriptions(client: &ApiClient, instance: &str, entries: &mut [ModlogEntry]) {
    let mut current: HashMap<String, String> = HashMap::new();
    for e in entries.iter_mut().filter(|e| e.description_stale) {
        if !current.contains_key(&e.community) {
            let name = e.community.split('@').next().unwrap_or_default().to_string();
            let desc = match client.get_json(instance, lemmy::COMMUNITY, &[("name", name)]).await {
                Ok(v) => lemmy::parse_community_description(&v).unwrap_or_default(),
                Err(err) => {
                    log::warn!("no current description for {}: {err}", e.community);
                    String::new()
                }
            };
            current.insert(e.community.clone(), desc);
        }
        e.community_description = current[&e.community].clone();
    }
}
