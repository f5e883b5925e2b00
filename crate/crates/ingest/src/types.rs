use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscoveredVia {
    SeedPortal,
    FederationSnowball,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceHost {
    pub host: String,
    pub discovered_via: DiscoveredVia,
    pub reachable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModAction {
    RemoveComment,
    RestoreComment,
    Other,
}

/// One moderator action as read from an instance's public modlog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModlogEntry {
    pub entry_id: String,
    pub instance: String,
    /// Qualified as `name@instance`.
    pub community: String,
    pub action: ModAction,
    pub comment_id: String,
    /// Empty when the text was scrubbed or missing.
    #[serde(default)]
    pub comment_text: String,
    #[serde(default)]
    pub reason: Option<String>,
    /// Truncated SHA-256 of the instance and the moderator's account id.
    pub moderator_id: String,
    #[serde(default)]
    pub community_description: String,
    /// The entry carried no description; `community_description` is the
    /// one current at harvest time.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub description_stale: bool,
    pub acted_at: DateTime<Utc>,
}

/// A per-entry failure that did not stop the rest of the page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryParseError {
    pub instance: String,
    pub page: u32,
    pub index: usize,
    pub message: String,
}

/// Orders numeric ids numerically and everything else after them
/// lexicographically.
pub fn id_key(id: &str) -> (u8, u64, &str) {
    match id.parse::<u64>() {
        Ok(n) => (0, n, ""),
        Err(_) => (1, 0, id),
    }
}

pub fn qualified_community(name: &str, instance: &str) -> String {
    format!("{name}@{instance}")
}
