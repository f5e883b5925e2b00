//! Polite JSON client: per-host rate limit, retries with capped
//! exponential backoff and a fixed user agent.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::time::Instant;

use crate::error::{IngestError, Result};

/// Maps a host and API path to a URL. Production talks HTTPS to the host
/// itself; tests route every host through one local mock.
pub trait UrlScheme: Send + Sync {
    fn url(&self, host: &str, path: &str) -> String;
}

pub struct HttpsScheme;

impl UrlScheme for HttpsScheme {
    fn url(&self, host: &str, path: &str) -> String {
        format!("https://{host}{path}")
    }
}

/// `{base}/{host}{path}`, the layout served by [`crate::mock`].
pub struct PrefixScheme {
    pub base: String,
}

impl UrlScheme for PrefixScheme {
    fn url(&self, host: &str, path: &str) -> String {
        format!("{}/{host}{path}", self.base.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    pub user_agent: String,
    /// Per-host request rate; `f64::INFINITY` disables the limit.
    pub requests_per_second: f64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            user_agent: format!("modq-harvester/{} (research; public modlog only)", env!("CARGO_PKG_VERSION")),
            requests_per_second: 1.0,
            max_retries: 3,
            backoff_base_ms: 500,
            backoff_cap_ms: 8_000,
            timeout_secs: 30,
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<()> {
        if self.requests_per_second.is_nan() || self.requests_per_second <= 0.0 {
            return Err(IngestError::Config("requests_per_second must be positive".into()));
        }
        if self.user_agent.trim().is_empty() {
            return Err(IngestError::Config("user_agent must not be empty".into()));
        }
        if self.backoff_cap_ms < self.backoff_base_ms {
            return Err(IngestError::Config("backoff_cap_ms is below backoff_base_ms".into()));
        }
        Ok(())
    }

    fn min_interval(&self) -> Duration {
        if self.requests_per_second.is_infinite() {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(1.0 / self.requests_per_second)
        }
    }
}

/// Delay before retry number `attempt` (0-based): `base * 2^attempt`,
/// capped.
pub fn backoff_delay(attempt: u32, base_ms: u64, cap_ms: u64) -> Duration {
    let ms = base_ms.saturating_mul(1u64 << attempt.min(32)).min(cap_ms);
    Duration::from_millis(ms)
}

type HostSlot = Arc<tokio::sync::Mutex<Option<Instant>>>;

pub struct ApiClient {
    http: reqwest::Client,
    scheme: Arc<dyn UrlScheme>,
    cfg: ClientConfig,
    hosts: Mutex<HashMap<String, HostSlot>>,
}

impl ApiClient {
    pub fn new(cfg: ClientConfig, scheme: Arc<dyn UrlScheme>) -> Result<Self> {
        cfg.validate()?;
        let http = reqwest::Client::builder()
            .user_agent(cfg.user_agent.clone())
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| IngestError::Config(format!("http client: {e}")))?;
        Ok(ApiClient { http, scheme, cfg, hosts: Mutex::new(HashMap::new()) })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.cfg
    }

    fn slot(&self, host: &str) -> HostSlot {
        let mut hosts = self.hosts.lock().expect("host table poisoned");
        hosts.entry(host.to_string()).or_default().clone()
    }

    /// GETs `path` on `host` and decodes JSON. Requests to one host are
    /// serialized and spaced by the configured rate; connection errors,
    /// 429 and 5xx are retried.
    pub async fn get_json(&self, host: &str, path: &str, query: &[(&str, String)]) -> Result<Value> {
        let url = self.scheme.url(host, path);
        let slot = self.slot(host);
        let mut last = slot.lock().await;
        let mut attempts = 0;
        loop {
            if let Some(t) = *last {
                tokio::time::sleep_until(t + self.cfg.min_interval()).await;
            }
            *last = Some(Instant::now());
            attempts += 1;
            let (retryable, message) = match self.http.get(&url).query(query).send().await {
                Ok(resp) if resp.status().is_success() => {
                    let body = resp.bytes().await.map_err(|e| IngestError::Fetch {
                        url: url.clone(),
                        attempts,
                        message: e.to_string(),
                    })?;
                    return serde_json::from_slice(&body)
                        .map_err(|e| IngestError::Malformed { url: url.clone(), message: e.to_string() });
                }
                Ok(resp) => {
                    let s = resp.status();
                    (s.is_server_error() || s.as_u16() == 429, format!("HTTP {s}"))
                }
                Err(e) => (true, e.to_string()),
            };
            if !retryable || attempts > self.cfg.max_retries {
                return Err(IngestError::Fetch { url, attempts, message });
            }
            let delay = backoff_delay(attempts - 1, self.cfg.backoff_base_ms, self.cfg.backoff_cap_ms);
            log::debug!("{url}: {message}; retrying in {delay:?}");
            tokio::time::sleep(delay).await;
        }
    }
}
