//! A fake federation served over HTTP from a compact fixture, laid out as
//! `/{host}/api/v3/...` for [`crate::client::PrefixScheme`].

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{DateTime, Duration, Utc};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::lemmy::parse_timestamp;

/// The fixture shipped with the crate.
pub const BUNDLED: &str = include_str!("../fixtures/federation.json");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Federation {
    pub instances: BTreeMap<String, Instance>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Instance {
    pub status: Status,
    pub linked: Vec<String>,
    pub communities: Vec<Community>,
    pub modlog: Vec<Action>,
    pub comments: Vec<Comment>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    #[default]
    Ok,
    /// Every request answers 503.
    Offline,
    /// The federation listing has an unknown shape; other endpoints work.
    MalformedFederation,
    /// The first `n` requests answer 503.
    Flaky(u32),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Community {
    pub name: String,
    #[serde(default = "yes")]
    pub local: bool,
    /// Home of a non-local community.
    #[serde(default)]
    pub home: Option<String>,
    #[serde(default)]
    pub description: String,
    /// When false, modlog entries omit the description.
    #[serde(default = "yes")]
    pub description_in_modlog: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Remove {
        id: u64,
        #[serde(rename = "mod")]
        moderator: u64,
        comment_id: u64,
        community: String,
        #[serde(default)]
        reason: Option<String>,
        when: String,
        /// Absent means the comment object carries no content.
        #[serde(default)]
        text: Option<String>,
    },
    Restore {
        id: u64,
        #[serde(rename = "mod")]
        moderator: u64,
        comment_id: u64,
        community: String,
        when: String,
    },
    /// `count` removals with consecutive ids and comment ids, `step_seconds`
    /// apart; `{k}` in `text` becomes the index.
    Burst {
        first_id: u64,
        #[serde(rename = "mod")]
        moderator: u64,
        first_comment_id: u64,
        community: String,
        count: u64,
        start: String,
        step_seconds: i64,
        reason: String,
        text: String,
    },
    /// Served verbatim.
    Raw { id: u64, value: Value },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comment {
    pub id: u64,
    pub community: String,
    pub content: String,
    #[serde(default)]
    pub removed: bool,
    #[serde(default)]
    pub deleted: bool,
    pub published: String,
}

impl Federation {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled fixture parses")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

fn ts(s: &str) -> DateTime<Utc> {
    parse_timestamp(s).unwrap_or_else(|| panic!("fixture timestamp {s:?}"))
}

impl Instance {
    fn community(&self, name: &str) -> Option<&Community> {
        self.communities.iter().find(|c| c.name == name)
    }

    fn community_json(&self, host: &str, name: &str, in_modlog: bool) -> Value {
        let c = self.community(name);
        let local = c.is_none_or(|c| c.local);
        let home = c.and_then(|c| c.home.clone()).unwrap_or_else(|| host.to_string());
        let mut v = json!({"name": name, "local": local, "actor_id": format!("https://{home}/c/{name}")});
        if let Some(c) = c.filter(|c| !in_modlog || c.description_in_modlog) {
            v["description"] = json!(c.description);
        }
        v
    }

    #[allow(clippy::too_many_arguments)]
    fn remove_json(
        &self,
        host: &str,
        id: u64,
        m: u64,
        cid: u64,
        community: &str,
        reason: Option<&str>,
        removed: bool,
        when: DateTime<Utc>,
        text: Option<&str>,
    ) -> Value {
        let mut comment = json!({"id": cid});
        if let Some(t) = text {
            comment["content"] = json!(t);
        }
        let mut action =
            json!({"id": id, "mod_person_id": m, "comment_id": cid, "removed": removed, "when_": when.to_rfc3339()});
        if let Some(r) = reason {
            action["reason"] = json!(r);
        }
        json!({
            "mod_remove_comment": action,
            "moderator": {"id": m, "name": format!("mod{m}")},
            "comment": comment,
            "community": self.community_json(host, community, true),
        })
    }

    /// Modlog items newest first.
    pub fn modlog_items(&self, host: &str) -> Vec<Value> {
        let mut items: Vec<(u64, Value)> = Vec::new();
        for a in &self.modlog {
            match a {
                Action::Remove { id, moderator, comment_id, community, reason, when, text } => items.push((
                    *id,
                    self.remove_json(
                        host,
                        *id,
                        *moderator,
                        *comment_id,
                        community,
                        reason.as_deref(),
                        true,
                        ts(when),
                        text.as_deref(),
                    ),
                )),
                Action::Restore { id, moderator, comment_id, community, when } => items.push((
                    *id,
                    self.remove_json(host, *id, *moderator, *comment_id, community, None, false, ts(when), Some("")),
                )),
                Action::Burst {
                    first_id,
                    moderator,
                    first_comment_id,
                    community,
                    count,
                    start,
                    step_seconds,
                    reason,
                    text,
                } => {
                    for k in 0..*count {
                        let when = ts(start) + Duration::seconds(step_seconds * k as i64);
                        let body = text.replace("{k}", &k.to_string());
                        items.push((
                            first_id + k,
                            self.remove_json(
                                host,
                                first_id + k,
                                *moderator,
                                first_comment_id + k,
                                community,
                                Some(reason),
                                true,
                                when,
                                Some(&body),
                            ),
                        ));
                    }
                }
                Action::Raw { id, value } => items.push((*id, value.clone())),
            }
        }
        items.sort_by_key(|(id, _)| std::cmp::Reverse(*id));
        items.into_iter().map(|(_, v)| v).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Hit {
    pub host: String,
    pub path: String,
    pub user_agent: String,
    pub at: tokio::time::Instant,
}

struct MockState {
    fed: Federation,
    hits: Mutex<Vec<Hit>>,
    failures: Mutex<HashMap<String, u32>>,
}

pub struct MockServer {
    pub addr: SocketAddr,
    state: Arc<MockState>,
    task: tokio::task::JoinHandle<()>,
}

impl MockServer {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn hits(&self) -> Vec<Hit> {
        self.state.hits.lock().expect("hits poisoned").clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

/// Binds an ephemeral local port and serves `fed` until dropped.
pub async fn serve(fed: Federation) -> std::io::Result<MockServer> {
    let state = Arc::new(MockState { fed, hits: Mutex::new(Vec::new()), failures: Mutex::new(HashMap::new()) });
    let app = Router::new().route("/{host}/{*rest}", get(handle)).with_state(state.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("mock federation stopped: {e}");
        }
    });
    Ok(MockServer { addr, state, task })
}

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str, default: T) -> T {
    q.get(key).and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn page_of(items: Vec<Value>, q: &HashMap<String, String>) -> Vec<Value> {
    let page: usize = param(q, "page", 1usize).max(1);
    let limit: usize = param(q, "limit", 20usize).max(1);
    items.into_iter().skip((page - 1) * limit).take(limit).collect()
}

async fn handle(
    State(state): State<Arc<MockState>>,
    Path((host, rest)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> Response {
    let user_agent = headers.get(header::USER_AGENT).and_then(|v| v.to_str().ok()).unwrap_or("").to_string();
    state.hits.lock().expect("hits poisoned").push(Hit {
        host: host.clone(),
        path: rest.clone(),
        user_agent,
        at: tokio::time::Instant::now(),
    });
    let Some(inst) = state.fed.instances.get(&host) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    match inst.status {
        Status::Offline => return StatusCode::SERVICE_UNAVAILABLE.into_response(),
        Status::Flaky(n) => {
            let mut f = state.failures.lock().expect("failures poisoned");
            let seen = f.entry(host.clone()).or_default();
            if *seen < n {
                *seen += 1;
                return StatusCode::SERVICE_UNAVAILABLE.into_response();
            }
        }
        _ => {}
    }
    let body = match rest.as_str() {
        "api/v3/federated_instances" if inst.status == Status::MalformedFederation => json!({"unexpected": true}),
        "api/v3/federated_instances" => {
            let linked: Vec<Value> = inst.linked.iter().map(|d| json!({"domain": d})).collect();
            json!({"federated_instances": {"linked": linked, "allowed": [], "blocked": []}})
        }
        "api/v3/modlog" => json!({"removed_comments": page_of(inst.modlog_items(&host), &q), "removed_posts": []}),
        "api/v3/comment/list" => {
            let name = q.get("community_name").cloned().unwrap_or_default();
            let mut comments: Vec<&Comment> = inst.comments.iter().filter(|c| c.community == name).collect();
            comments.sort_by_key(|c| (ts(&c.published), c.id));
            let items = comments
                .into_iter()
                .map(|c| {
                    json!({
                        "comment": {"id": c.id, "content": c.content, "removed": c.removed, "deleted": c.deleted, "published": c.published},
                        "community": inst.community_json(&host, &c.community, false),
                    })
                })
                .collect();
            json!({"comments": page_of(items, &q)})
        }
        "api/v3/community" => {
            let name = q.get("name").cloned().unwrap_or_default();
            if inst.community(&name).is_none() {
                return StatusCode::NOT_FOUND.into_response();
            }
            json!({"community_view": {"community": inst.community_json(&host, &name, false)}})
        }
        _ => return StatusCode::NOT_FOUND.into_response(),
    };
    Json(body).into_response()
}
