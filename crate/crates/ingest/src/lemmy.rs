//! Decoding of Lemmy v3 API responses. Parsing works on `serde_json::Value`
//! so one drifting entry does not sink its page.

use chrono::{DateTime, NaiveDateTime, Utc};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::domain::{is_valid_domain, normalize_host};
use crate::safe::SafeCandidate;
use crate::types::{qualified_community, ModAction, ModlogEntry};

pub const FEDERATED_INSTANCES: &str = "/api/v3/federated_instances";
pub const MODLOG: &str = "/api/v3/modlog";
pub const COMMENT_LIST: &str = "/api/v3/comment/list";
pub const COMMUNITY: &str = "/api/v3/community";

/// Linked hosts from a federated-instances response. `Ok(vec![])` when the
/// instance reports federation disabled (`null`); an error when the shape
/// is unrecognizable. Invalid domains are dropped.
pub fn parse_federated(v: &Value) -> Result<Vec<String>, String> {
    let fed = v.get("federated_instances").ok_or("missing federated_instances")?;
    if fed.is_null() {
        return Ok(Vec::new());
    }
    let linked = fed.get("linked").and_then(Value::as_array).ok_or("missing federated_instances.linked")?;
    let mut out = Vec::new();
    for item in linked {
        // older servers list bare strings, newer ones objects
        let raw = item.as_str().or_else(|| item.get("domain").and_then(Value::as_str));
        match raw.map(normalize_host) {
            Some(h) if is_valid_domain(&h) => out.push(h),
            _ => log::debug!("ignoring federation entry {item}"),
        }
    }
    Ok(out)
}

/// Lemmy has emitted both RFC 3339 and zone-less timestamps (UTC).
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f").ok().map(|n| n.and_utc())
}

pub fn moderator_hash(instance: &str, person_id: &str) -> String {
    let digest = Sha256::digest(format!("{instance}\0{person_id}").as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn id_string(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        _ => None,
    }
}

/// Whether a community object belongs to `instance`: the `local` flag
/// when present, otherwise the host of its actor id.
pub fn community_is_local(c: &Value, instance: &str) -> bool {
    if let Some(local) = c.get("local").and_then(Value::as_bool) {
        return local;
    }
    c.get("actor_id")
        .and_then(Value::as_str)
        .and_then(|a| a.split("://").nth(1))
        .and_then(|rest| rest.split('/').next())
        .is_some_and(|h| normalize_host(h) == instance)
}

pub enum ParsedItem {
    Entry(Box<ModlogEntry>),
    NonLocal,
}

/// One element of `removed_comments`. A missing description leaves the
/// entry flagged stale with an empty description for the caller to fill.
pub fn parse_removed_comment(item: &Value, instance: &str) -> Result<ParsedItem, String> {
    let action = item.get("mod_remove_comment").ok_or("missing mod_remove_comment")?;
    let community = item.get("community").ok_or("missing community")?;
    let name = community.get("name").and_then(Value::as_str).ok_or("missing community.name")?;
    if !community_is_local(community, instance) {
        return Ok(ParsedItem::NonLocal);
    }
    let entry_id = id_string(action.get("id")).ok_or("missing action id")?;
    let removed = action.get("removed").and_then(Value::as_bool).ok_or("missing removed flag")?;
    let comment_id = id_string(action.get("comment_id"))
        .or_else(|| id_string(item.get("comment").and_then(|c| c.get("id"))))
        .ok_or("missing comment id")?;
    let when =
        action.get("when_").or_else(|| action.get("published")).and_then(Value::as_str).ok_or("missing timestamp")?;
    let acted_at = parse_timestamp(when).ok_or_else(|| format!("unparseable timestamp {when:?}"))?;
    let person = id_string(action.get("mod_person_id"))
        .or_else(|| id_string(item.get("moderator").and_then(|m| m.get("id"))))
        .unwrap_or_else(|| "hidden".into());
    let text = item.get("comment").and_then(|c| c.get("content")).and_then(Value::as_str).unwrap_or("");
    let reason = action.get("reason").and_then(Value::as_str).map(str::to_string);
    let description = community.get("description").and_then(Value::as_str);
    Ok(ParsedItem::Entry(Box::new(ModlogEntry {
        entry_id,
        instance: instance.to_string(),
        community: qualified_community(name, instance),
        action: if removed { ModAction::RemoveComment } else { ModAction::RestoreComment },
        comment_id,
        comment_text: text.to_string(),
        reason,
        moderator_id: moderator_hash(instance, &person),
        community_description: description.unwrap_or("").to_string(),
        description_stale: description.is_none(),
        acted_at,
    })))
}

/// Comments of a comment-list page; unparseable items are skipped.
pub fn parse_comment_list(v: &Value, instance: &str, community: &str) -> Result<Vec<SafeCandidate>, String> {
    let items = v.get("comments").and_then(Value::as_array).ok_or("missing comments")?;
    let mut out = Vec::new();
    for item in items {
        let Some(c) = item.get("comment") else { continue };
        let (Some(id), Some(published)) =
            (id_string(c.get("id")), c.get("published").and_then(Value::as_str).and_then(parse_timestamp))
        else {
            log::debug!("skipping malformed comment {item}");
            continue;
        };
        out.push(SafeCandidate {
            comment_id: id,
            instance: instance.to_string(),
            community: community.to_string(),
            text: c.get("content").and_then(Value::as_str).unwrap_or("").to_string(),
            removed: c.get("removed").and_then(Value::as_bool).unwrap_or(false),
            deleted: c.get("deleted").and_then(Value::as_bool).unwrap_or(false),
            published,
        });
    }
    Ok(out)
}

pub fn parse_community_description(v: &Value) -> Option<String> {
    v.pointer("/community_view/community/description").and_then(Value::as_str).map(str::to_string)
}
