use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use modq_app::config::ServeConfig;
use modq_app::models::ServedModel;
use modq_app::service::{spawn, AppState, ErrorBody, ModelInfo, WhatIfResponse};
use modq_core::{prediction_from_scores, ModelKind, PairScore, Prediction, RulePredictor, RuleSet, Span};
use serde_json::{json, Value};

/// Picks the first rule sharing a lowercase word with the comment.
struct WordOverlap {
    kind: ModelKind,
    delay: Duration,
}

impl RulePredictor for WordOverlap {
    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn predict(&self, comment: &str, _community: &str, rules: &RuleSet) -> modq_core::Result<Prediction> {
        std::thread::sleep(self.delay);
        let words: Vec<String> = comment.to_lowercase().split_whitespace().map(str::to_string).collect();
        let hit =
            rules.rules.iter().find(|r| r.text.to_lowercase().split_whitespace().any(|w| words.iter().any(|c| c == w)));
        let mut scores = vec![PairScore { rule_number: 0, score: 0.5 }];
        scores.extend(rules.rules.iter().map(|r| PairScore {
            rule_number: r.number,
            score: if Some(r.number) == hit.map(|h| h.number) { 0.9 } else { 0.1 },
        }));
        let mut p = prediction_from_scores(scores, rules, self.kind)?;
        if self.kind == ModelKind::Extract {
            p.span = Some(Span::new(0, p.rule_text.chars().count()));
        }
        Ok(p)
    }
}

fn served(kind: ModelKind, delay: Duration) -> ServedModel {
    ServedModel { kind, path: PathBuf::from("stub"), predictor: Arc::new(WordOverlap { kind, delay }) }
}

async fn start(models: BTreeMap<String, ServedModel>, cfg: ServeConfig) -> String {
    let state = Arc::new(AppState::new(models, &cfg));
    let (addr, _task) = spawn(state, "127.0.0.1:0").await.unwrap();
    format!("http://{addr}")
}

async fn default_service() -> String {
    let mut models = BTreeMap::new();
    models.insert("sel".to_string(), served(ModelKind::Select, Duration::ZERO));
    models.insert("ext".to_string(), served(ModelKind::Extract, Duration::ZERO));
    start(models, ServeConfig::default()).await
}

fn rules() -> Value {
    json!([{"n": 1, "text": "No spam"}, {"n": 2, "text": "Be civil to others"}])
}

async fn post(base: &str, path: &str, body: String) -> (u16, Value) {
    let r = reqwest::Client::new()
        .post(format!("{base}{path}"))
        .header("content-type", "application/json")
        .body(body)
        .send()
        .await
        .unwrap();
    let status = r.status().as_u16();
    (status, r.json().await.unwrap())
}

async fn post_json(base: &str, path: &str, body: Value) -> (u16, Value) {
    post(base, path, body.to_string()).await
}

fn error(v: Value) -> ErrorBody {
    serde_json::from_value(v).unwrap()
}

#[tokio::test]
async fn predict_returns_the_matching_rule() {
    let base = default_service().await;
    let (status, body) = post_json(
        &base,
        "/v1/predict",
        json!({"comment": "buy spam now", "community": "c", "rules": rules(), "model_id": "sel"}),
    )
    .await;
    assert_eq!(status, 200, "{body}");
    let p: Prediction = serde_json::from_value(body).unwrap();
    assert_eq!((p.rule_number, p.rule_text.as_str()), (1, "No spam"));
    assert_eq!(p.model_kind, ModelKind::Select);
    assert!(p.span.is_none());
    assert_eq!(p.scores.len(), 3);
}

#[tokio::test]
async fn extract_spans_slice_the_returned_rule_text() {
    let base = default_service().await;
    let (status, body) = post_json(
        &base,
        "/v1/predict",
        json!({"comment": "be nice", "community": "c", "rules": rules(), "model_id": "ext"}),
    )
    .await;
    assert_eq!(status, 200, "{body}");
    let p: Prediction = serde_json::from_value(body).unwrap();
    let span = p.span.expect("extract predictions carry a span");
    let sliced: String = p.rule_text.chars().skip(span.start).take(span.end - span.start).collect();
    assert_eq!(sliced, "Be civil to others");
}

#[tokio::test]
async fn unknown_model_is_404() {
    let base = default_service().await;
    let (status, body) = post_json(
        &base,
        "/v1/predict",
        json!({"comment": "x", "community": "c", "rules": rules(), "model_id": "nope"}),
    )
    .await;
    assert_eq!(status, 404);
    let e = error(body);
    assert_eq!((e.code.as_str(), e.field.as_deref()), ("unknown_model", Some("model_id")));
}

#[tokio::test]
async fn malformed_json_is_400() {
    let base = default_service().await;
    let (status, body) = post(&base, "/v1/predict", "{\"comment\": ".to_string()).await;
    assert_eq!(status, 400);
    assert_eq!(error(body).code, "invalid_json");
}

#[tokio::test]
async fn validation_errors_name_the_field() {
    let base = default_service().await;
    let cases = [
        (json!({"comment": "x", "community": "c", "rules": [], "model_id": "sel"}), "rules"),
        (json!({"comment": "x", "community": "c", "rules": [{"n": 0, "text": "a"}], "model_id": "sel"}), "rules[0].n"),
        (
            json!({"comment": "x", "community": "c", "rules": [{"n": 1, "text": "a"}, {"n": 1, "text": "b"}], "model_id": "sel"}),
            "rules[1].n",
        ),
        (
            json!({"comment": "x", "community": "c", "rules": [{"n": 1, "text": "  "}], "model_id": "sel"}),
            "rules[0].text",
        ),
        (json!({"comment": " ", "community": "c", "rules": rules(), "model_id": "sel"}), "comment"),
        (
            json!({"comment": "x", "community": "c", "rules": [{"n": "one", "text": "a"}], "model_id": "sel"}),
            "rules[0].n",
        ),
    ];
    for (body, field) in cases {
        let (status, resp) = post_json(&base, "/v1/predict", body.clone()).await;
        assert_eq!(status, 422, "{body}");
        let e = error(resp);
        assert_eq!((e.code.as_str(), e.field.as_deref()), ("validation_error", Some(field)), "{body}");
    }
    let (status, _) =
        post_json(&base, "/v1/predict", json!({"comment": "x", "community": "c", "model_id": "sel"})).await;
    assert_eq!(status, 422);
}

#[tokio::test]
async fn unknown_fields_are_rejected() {
    let base = default_service().await;
    let (status, body) = post_json(
        &base,
        "/v1/whatif",
        json!({"comment": "x", "community": "c", "rules_before": rules(), "rules_after": rules(), "model_id": "sel", "extra": 1}),
    )
    .await;
    assert_eq!(status, 422);
    assert_eq!(error(body).code, "validation_error");
}

#[tokio::test]
async fn whatif_reports_unchanged_for_identical_rules() {
    let base = default_service().await;
    let (status, body) = post_json(
        &base,
        "/v1/whatif",
        json!({"comment": "spam spam", "community": "c", "rules_before": rules(), "rules_after": rules(), "model_id": "sel"}),
    )
    .await;
    assert_eq!(status, 200, "{body}");
    let w: WhatIfResponse = serde_json::from_value(body).unwrap();
    assert!(!w.changed);
    assert_eq!(w.before, w.after);
}

#[tokio::test]
async fn whatif_reports_change_when_the_matching_rule_is_removed() {
    let base = default_service().await;
    let (status, body) = post_json(
        &base,
        "/v1/whatif",
        json!({
            "comment": "spam spam",
            "community": "c",
            "rules_before": rules(),
            "rules_after": [{"n": 2, "text": "Be civil to others"}],
            "model_id": "sel"
        }),
    )
    .await;
    assert_eq!(status, 200, "{body}");
    let w: WhatIfResponse = serde_json::from_value(body).unwrap();
    assert!(w.changed);
    assert_eq!(w.before.rule_number, 1);
    assert_eq!(w.after.rule_number, 0);
}

#[tokio::test]
async fn whatif_validates_each_rule_list() {
    let base = default_service().await;
    let (status, body) = post_json(
        &base,
        "/v1/whatif",
        json!({"comment": "x", "community": "c", "rules_before": rules(), "rules_after": [], "model_id": "sel"}),
    )
    .await;
    assert_eq!(status, 422);
    assert_eq!(error(body).field.as_deref(), Some("rules_after"));
}

#[tokio::test]
async fn repeated_requests_give_identical_answers() {
    let base = default_service().await;
    let body = json!({"comment": "be civil", "community": "c", "rules": rules(), "model_id": "ext"});
    let first = post_json(&base, "/v1/predict", body.clone()).await;
    for _ in 0..3 {
        assert_eq!(post_json(&base, "/v1/predict", body.clone()).await, first);
    }
}

#[tokio::test]
async fn models_and_health_list_what_is_loaded() {
    let base = default_service().await;
    let models: Vec<ModelInfo> = reqwest::get(format!("{base}/v1/models")).await.unwrap().json().await.unwrap();
    assert_eq!(
        models,
        vec![
            ModelInfo { id: "ext".into(), kind: ModelKind::Extract },
            ModelInfo { id: "sel".into(), kind: ModelKind::Select },
        ]
    );
    let health: Value = reqwest::get(format!("{base}/health")).await.unwrap().json().await.unwrap();
    assert_eq!(health, json!({"status": "ok", "models": 2}));
    let r = reqwest::get(format!("{base}/v2/nothing")).await.unwrap();
    assert_eq!(r.status().as_u16(), 404);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn overload_is_answered_busy() {
    let mut models = BTreeMap::new();
    models.insert("slow".to_string(), served(ModelKind::Select, Duration::from_millis(400)));
    let base = start(models, ServeConfig { max_concurrent: 1, queue_depth: 1, ..ServeConfig::default() }).await;
    let body = json!({"comment": "spam", "community": "c", "rules": rules(), "model_id": "slow"});
    let tasks: Vec<_> = (0..6)
        .map(|_| {
            let (base, body) = (base.clone(), body.clone());
            tokio::spawn(async move { post_json(&base, "/v1/predict", body).await })
        })
        .collect();
    let mut statuses = Vec::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        if status == 503 {
            assert_eq!(error(body).code, "busy");
        }
        statuses.push(status);
    }
    assert!(statuses.contains(&200), "{statuses:?}");
    assert!(statuses.contains(&503), "{statuses:?}");
    assert!(statuses.iter().all(|s| *s == 200 || *s == 503), "{statuses:?}");
    // The service recovers once the queue drains.
    assert_eq!(post_json(&base, "/v1/predict", body).await.0, 200);
}
