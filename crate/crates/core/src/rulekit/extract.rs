//! Rule extraction from free-text community descriptions.

use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::types::{Rule, RuleSet};

/// Turns a community description into an ordered list of rule statements.
pub trait RuleExtractor: Send + Sync {
    fn name(&self) -> &str;
    fn extract(&self, description: &str) -> Result<Vec<String>>;
}

/// Runs `extractor` and renumbers its output 1..k in document order.
pub fn extract_rules(description: &str, community: &str, extractor: &dyn RuleExtractor) -> Result<RuleSet> {
    if description.trim().is_empty() {
        return Err(Error::invalid("description is empty"));
    }
    let items = extractor
        .extract(description)
        .map_err(|e| Error::Extraction { message: e.to_string(), description: description.to_string() })?;
    let texts: Vec<String> = items.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    Ok(RuleSet::from_texts(community, &texts))
}

static NUMBERED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(?:rule\s*)?#?\d{1,3}\s*[.):]\s*(.+?)\s*$").unwrap());
static BULLET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*[-*+•·▪◦‣–]\s+(.+?)\s*$").unwrap());
const INLINE_BULLETS: [char; 4] = ['•', '·', '▪', '◦'];

/// Offline extractor: numbered or bulleted list items.
#[derive(Debug, Clone)]
pub struct ListRuleExtractor {
    /// Items shorter than this many characters are treated as noise.
    pub min_chars: usize,
}

impl Default for ListRuleExtractor {
    fn default() -> Self {
        ListRuleExtractor { min_chars: 3 }
    }
}

impl ListRuleExtractor {
    fn keep(&self, item: &str) -> bool {
        item.chars().count() >= self.min_chars && item.chars().any(char::is_alphabetic)
    }
}

impl RuleExtractor for ListRuleExtractor {
    fn name(&self) -> &str {
        "list"
    }

    fn extract(&self, description: &str) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for line in description.lines() {
            if let Some(cap) = NUMBERED.captures(line) {
                let item = cap[1].trim();
                if self.keep(item) {
                    out.push(item.to_string());
                }
                continue;
            }
            let inline_count = line.chars().filter(|c| INLINE_BULLETS.contains(c)).count();
            if inline_count >= 1 && !BULLET.is_match(line) || inline_count >= 2 {
                // "• a • b" on one line; text before the first bullet is a heading.
                let mut parts = line.split(&INLINE_BULLETS[..]);
                parts.next();
                out.extend(parts.map(str::trim).filter(|p| self.keep(p)).map(str::to_string));
                continue;
            }
            if let Some(cap) = BULLET.captures(line) {
                let item = cap[1].trim();
                if self.keep(item) {
                    out.push(item.to_string());
                }
            }
        }
        Ok(out)
    }
}

/// Extractor backed by a chat-completion HTTP endpoint that answers with a
/// JSON array of rule strings.
#[derive(Debug, Clone)]
pub struct RemoteRuleExtractor {
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer key.
    pub api_key_env: String,
    pub timeout: Duration,
}

const EXTRACTION_INSTRUCTIONS: &str = "You receive the description of an online community. \
List every behavioural rule it states, one rule per item, in the order they appear, keeping \
the original wording. Answer only with a JSON array of strings. Answer [] if there are none.";

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl RemoteRuleExtractor {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        RemoteRuleExtractor {
            url: url.into(),
            model: model.into(),
            api_key_env: api_key_env.into(),
            timeout: Duration::from_secs(60),
        }
    }

    /// Pulls the first JSON array out of a model answer, tolerating code fences.
    pub fn parse_answer(content: &str) -> Result<Vec<String>> {
        let start = content.find('[').ok_or_else(|| Error::Other("no JSON array in answer".into()))?;
        let end = content.rfind(']').ok_or_else(|| Error::Other("no JSON array in answer".into()))?;
        if end < start {
            return Err(Error::Other("malformed JSON array in answer".into()));
        }
        Ok(serde_json::from_str(&content[start..=end])?)
    }
}

impl RuleExtractor for RemoteRuleExtractor {
    fn name(&self) -> &str {
        "remote"
    }

    fn extract(&self, description: &str) -> Result<Vec<String>> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| Error::Other(e.to_string()))?;
        let body = serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": EXTRACTION_INSTRUCTIONS},
                {"role": "user", "content": description},
            ],
        });
        let mut req = client.post(&self.url).json(&body);
        if let Ok(key) = std::env::var(&self.api_key_env) {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::Other(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Other(format!("extraction endpoint returned {status}")));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| Error::Other(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Other("empty choices".into()))?;
        Self::parse_answer(&content)
    }
}

/// Renumbers a list of rules to 1..k preserving order.
pub fn renumber(rules: &[Rule]) -> Vec<Rule> {
    rules.iter().enumerate().map(|(i, r)| Rule::new(i as u32 + 1, r.text.clone())).collect()
}
