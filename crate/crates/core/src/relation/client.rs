//! Classifier client contract and implementations.
//!
//! The wire format is plain text both ways: the request is the rendered
//! prompt, the response is any text containing one JSON object
//! `{"label", "evidence_span_A", "evidence_span_B"}`. The pair and fiscal
//! year ride along as routing metadata for caching and test doubles; a live
//! HTTP client sends only the prompt.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use super::{RelationError, RelationLabel};
use crate::StockId;

/// One classification request.
#[derive(Debug, Clone)]
pub struct ClassificationRequest {
    /// Canonical pair (smaller stock id first).
    pub pair: (StockId, StockId),
    pub fiscal_year: i32,
    pub prompt: String,
}

/// A pure request/response classifier. Implementations must be safe to call
/// from multiple worker threads.
pub trait ClassifierClient: Send + Sync {
    fn classify(&self, request: &ClassificationRequest) -> Result<String, RelationError>;
}

/// Label and evidence spans parsed out of a classifier response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedClassification {
    pub label: RelationLabel,
    pub evidence_a: String,
    pub evidence_b: String,
}

/// Extract the first well-formed JSON object from a response and validate it
/// against the taxonomy. The raw text is preserved inside every error for
/// auditing.
pub fn parse_classification(raw: &str) -> Result<ParsedClassification, RelationError> {
    let mut object = None;
    for (pos, _) in raw.char_indices().filter(|&(_, c)| c == '{') {
        let mut stream =
            serde_json::Deserializer::from_str(&raw[pos..]).into_iter::<serde_json::Value>();
        if let Some(Ok(serde_json::Value::Object(map))) = stream.next() {
            object = Some(map);
            break;
        }
    }
    let object = object.ok_or_else(|| RelationError::NoJsonObject {
        raw: raw.to_string(),
    })?;
    let label_raw = object
        .get("label")
        .and_then(|v| v.as_str())
        .ok_or_else(|| RelationError::MissingLabel {
            raw: raw.to_string(),
        })?;
    let label: RelationLabel =
        label_raw
            .parse()
            .map_err(|_| RelationError::UnknownLabel {
                label: label_raw.to_string(),
                raw: raw.to_string(),
            })?;
    let span = |key: &str| {
        object
            .get(key)
            .and_then(|v| v.as_str())
            .unwrap_or("")
            .to_string()
    };
    Ok(ParsedClassification {
        label,
        evidence_a: span("evidence_span_A"),
        evidence_b: span("evidence_span_B"),
    })
}

/// Deterministic test double: a fixture map from canonical pair to label.
/// Pairs absent from the map answer `unrelated` with empty evidence. Every
/// call is counted.
pub struct MockClient {
    map: HashMap<(StockId, StockId), RelationLabel>,
    calls: AtomicUsize,
}

impl MockClient {
    pub fn new(map: HashMap<(StockId, StockId), RelationLabel>) -> Self {
        Self {
            map,
            calls: AtomicUsize::new(0),
        }
    }

    /// Load a fixture from `truth.csv` (header `stock_i,stock_j,label`).
    pub fn from_truth_csv(path: &Path) -> Result<Self, RelationError> {
        let path_str = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| RelationError::Io {
            path: path_str.clone(),
            source,
        })?;
        let mut map = HashMap::new();
        for (line_no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let (Some(a), Some(b), Some(label)) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(RelationError::BadTruthFile {
                    path: path_str,
                    line: line_no + 1,
                    reason: "expected stock_i,stock_j,label".into(),
                });
            };
            let label: RelationLabel =
                label
                    .trim()
                    .parse()
                    .map_err(|reason| RelationError::BadTruthFile {
                        path: path_str.clone(),
                        line: line_no + 1,
                        reason,
                    })?;
            let (a, b) = (a.trim().to_string(), b.trim().to_string());
            let pair = if a <= b { (a, b) } else { (b, a) };
            map.insert(pair, label);
        }
        Ok(Self::new(map))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Response body for a label, in the required schema.
    pub fn response_for(label: RelationLabel) -> String {
        if label == RelationLabel::Unrelated {
            format!(
                "{{\"label\": \"{label}\", \"evidence_span_A\": \"\", \"evidence_span_B\": \"\"}}"
            )
        } else {
            format!(
                "{{\"label\": \"{label}\", \"evidence_span_A\": \"disclosure A mentions this relationship\", \
                 \"evidence_span_B\": \"disclosure B mentions this relationship\"}}"
            )
        }
    }
}

impl ClassifierClient for MockClient {
    fn classify(&self, request: &ClassificationRequest) -> Result<String, RelationError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let label = self
            .map
            .get(&request.pair)
            .copied()
            .unwrap_or(RelationLabel::Unrelated);
        Ok(Self::response_for(label))
    }
}

/// Always fails; exercises the retry and fail-closed paths.
#[cfg(test)]
pub(crate) struct FailingClient {
    pub calls: AtomicUsize,
}

#[cfg(test)]

impl ClassifierClient for FailingClient {
    fn classify(&self, _request: &ClassificationRequest) -> Result<String, RelationError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(RelationError::ClientFailure {
            message: "simulated outage".into(),
        })
    }
}

/// Live HTTP client: POSTs the prompt as `text/plain` and returns the
/// response body. The bearer credential comes from the environment, never
/// from files.
pub struct HttpClient {
    url: String,
    api_key: Option<String>,
    inner: reqwest::blocking::Client,
}

impl HttpClient {
    pub fn new(url: String, api_key: Option<String>, timeout: Duration) -> Result<Self, RelationError> {
        let inner = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| RelationError::ClientFailure {
                message: e.to_string(),
            })?;
        Ok(Self {
            url,
            api_key,
            inner,
        })
    }
}

impl ClassifierClient for HttpClient {
    fn classify(&self, request: &ClassificationRequest) -> Result<String, RelationError> {
        let mut req = self
            .inner
            .post(&self.url)
            .header("content-type", "text/plain")
            .body(request.prompt.clone());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| RelationError::ClientFailure {
            message: e.to_string(),
        })?;
        if !resp.status().is_success() {
            return Err(RelationError::ClientFailure {
                message: format!("http status {}", resp.status()),
            });
        }
        resp.text().map_err(|e| RelationError::ClientFailure {
            message: e.to_string(),
        })
    }
}
