//! JSON routes. Every body carries `"v"` and the mapping revision it was
//! computed under.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use pdtriage_core::ingest::DocumentMeta;
use pdtriage_core::rules::{CategoryMapping, ClassificationRecord, Violation};
use pdtriage_core::Category;
use serde::Serialize;
use serde_json::{json, Value};

use crate::session::{Session, SessionError, Snapshot};

pub const API_VERSION: u32 = 1;
const SNIPPET_CHARS: usize = 600;

pub type Shared = Arc<Session>;

pub fn routes(session: Shared) -> Router {
    Router::new()
        .route("/api/topics", get(topics))
        .route("/api/mapping", get(get_mapping).put(put_mapping))
        .route("/api/documents", get(documents))
        .route("/api/documents/{doc_id}", get(document))
        .route("/api/metrics", get(metrics))
        .route("/api/summary", get(summary))
        .with_state(session)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    revision: u64,
    kind: &'static str,
    message: String,
    violations: Vec<Violation>,
}

impl ApiError {
    fn new(status: StatusCode, revision: u64, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            revision,
            kind,
            message: message.into(),
            violations: Vec::new(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({
            "v": API_VERSION,
            "revision": self.revision,
            "error": self.kind,
            "message": self.message,
        });
        if !self.violations.is_empty() {
            body["violations"] = serde_json::to_value(&self.violations).expect("violations serialize");
        }
        (self.status, Json(body)).into_response()
    }
}

fn ok(snap: &Snapshot, mut body: Value) -> Response {
    body["v"] = json!(API_VERSION);
    body["revision"] = json!(snap.revision);
    Json(body).into_response()
}

#[derive(Serialize)]
struct TopicView<'a> {
    topic_id: usize,
    label: &'a str,
    top_words: Vec<WordView<'a>>,
    ranks: [Category; 3],
}

#[derive(Serialize)]
struct WordView<'a> {
    word: &'a str,
    prob: f64,
}

async fn topics(State(s): State<Shared>) -> Response {
    let snap = s.snapshot();
    let topics: Vec<TopicView<'_>> = s
        .topics()
        .iter()
        .map(|t| {
            let entry = snap.mapping.entry(t.topic_id);
            TopicView {
                topic_id: t.topic_id,
                label: entry.map_or("", |e| e.label.as_str()),
                top_words: t
                    .top_words
                    .iter()
                    .map(|(w, p)| WordView { word: w, prob: *p })
                    .collect(),
                ranks: entry.map_or([Category::Other; 3], |e| e.ranks),
            }
        })
        .collect();
    ok(&snap, json!({ "k": topics.len(), "topics": topics }))
}

async fn get_mapping(State(s): State<Shared>) -> Response {
    let snap = s.snapshot();
    ok(&snap, json!({ "mapping": snap.mapping }))
}

// Raw bytes so that malformed JSON is a 400 with our error body.
async fn put_mapping(State(s): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let before = s.snapshot().revision;
    let mapping: CategoryMapping = serde_json::from_slice::<Value>(&body)
        .and_then(|v| match v.get("mapping") {
            Some(inner) if v.get("entries").is_none() => serde_json::from_value(inner.clone()),
            _ => serde_json::from_value(v),
        })
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, before, "malformed_body", e.to_string()))?;

    let session = s.clone();
    let result = tokio::task::spawn_blocking(move || session.apply_mapping(mapping))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, before, "internal", e.to_string()))?;
    match result {
        Ok(snap) => Ok(ok(
            &snap,
            json!({ "mapping": snap.mapping, "summary": summary_of(&s, &snap) }),
        )),
        Err(SessionError::Invalid(violations)) => {
            let mut err = ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                before,
                "invalid_mapping",
                format!("{} violation(s); mapping unchanged", violations.len()),
            );
            err.violations = violations;
            Err(err)
        }
        Err(e) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            before,
            "internal",
            e.to_string(),
        )),
    }
}

#[derive(Serialize)]
struct DocumentView<'a> {
    doc_id: &'a str,
    administration: String,
    year: u16,
    impacted: bool,
    wc: [f64; 8],
    contains_nuclear: bool,
    other_dominates: bool,
    analyze_document: bool,
    top3: &'a [Category],
    #[serde(skip_serializing_if = "Option::is_none")]
    gold_relevant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gold_categories: Option<Vec<Category>>,
}

fn document_view<'a>(rec: &'a ClassificationRecord, meta: &DocumentMeta) -> DocumentView<'a> {
    DocumentView {
        doc_id: &rec.doc_id,
        administration: meta.administration.to_string(),
        year: meta.year,
        impacted: meta.impacted_override.unwrap_or(false),
        wc: rec.wc,
        contains_nuclear: rec.contains_nuclear,
        other_dominates: rec.other_dominates,
        analyze_document: rec.analyze_document,
        top3: &rec.top3,
        gold_relevant: meta.gold_relevant,
        gold_categories: meta.gold_categories.as_ref().map(|c| c.iter().copied().collect()),
    }
}

async fn documents(
    State(s): State<Shared>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let snap = s.snapshot();
    let filter = params.get("filter").map(String::as_str).unwrap_or("all");
    let needs_gold = matches!(filter, "fp" | "fn");
    if !matches!(filter, "all" | "analyze" | "fp" | "fn") {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            snap.revision,
            "bad_filter",
            format!("unknown filter {filter:?}; expected analyze, all, fp or fn"),
        ));
    }
    if needs_gold && !s.has_gold() {
        return Err(no_gold(snap.revision));
    }
    let docs: Vec<DocumentView<'_>> = snap
        .records
        .iter()
        .zip(s.metas())
        .filter(|(r, m)| match filter {
            "analyze" => r.analyze_document,
            "fp" => r.analyze_document && m.gold_relevant == Some(false),
            "fn" => !r.analyze_document && m.gold_relevant == Some(true),
            _ => true,
        })
        .map(|(r, m)| document_view(r, m))
        .collect();
    Ok(ok(
        &snap,
        json!({ "filter": filter, "count": docs.len(), "documents": docs }),
    ))
}

async fn document(State(s): State<Shared>, Path(doc_id): Path<String>) -> Result<Response, ApiError> {
    let snap = s.snapshot();
    let Some((i, meta)) = s.meta(&doc_id) else {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            snap.revision,
            "not_found",
            format!("no document {doc_id:?}"),
        ));
    };
    let text = &s.corpus().documents[i].raw_text;
    let snippet: String = text.chars().take(SNIPPET_CHARS).collect();
    let truncated = snippet.len() < text.len();
    Ok(ok(
        &snap,
        json!({
            "document": document_view(&snap.records[i], meta),
            "snippet": snippet,
            "truncated": truncated,
            "theta": s.model().theta_for(&doc_id),
        }),
    ))
}

fn no_gold(revision: u64) -> ApiError {
    ApiError::new(
        StatusCode::CONFLICT,
        revision,
        "no_gold_labels",
        "the manifest has no gold relevance labels",
    )
}

async fn metrics(State(s): State<Shared>) -> Result<Response, ApiError> {
    let snap = s.snapshot();
    let report = snap.report.as_ref().ok_or_else(|| no_gold(snap.revision))?;
    let total = report.grouped.total();
    Ok(ok(
        &snap,
        json!({
            "documents": report.documents,
            "matrix": report.matrix,
            "metrics": report.metrics,
            "display": {
                "matrix": report.matrix.render(),
                "metrics": report.metrics.render(),
            },
            "discrepancies": report.discrepancies,
            "categories": {
                "gold": total.gold_categories,
                "machine": total.machine_categories,
            },
            "grouped": report.grouped,
        }),
    ))
}

fn summary_of(s: &Session, snap: &Snapshot) -> Value {
    let mut machine = [0usize; 7];
    for c in snap.records.iter().flat_map(|r| &r.top3).filter(|c| !c.is_other()) {
        machine[c.index()] += 1;
    }
    json!({
        "documents": snap.records.len(),
        "flagged": snap.flagged(),
        "machine_categories": machine,
        "has_gold": s.has_gold(),
        "matrix": snap.report.as_ref().map(|r| r.matrix),
        "metrics": snap.report.as_ref().map(|r| &r.metrics),
    })
}

async fn summary(State(s): State<Shared>) -> Response {
    let snap = s.snapshot();
    ok(&snap, summary_of(&s, &snap))
}
