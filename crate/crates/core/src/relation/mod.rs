//! Edge classification into an economic relation taxonomy, and filtering.
//!
//! Candidate edges link textually similar firms, but textual similarity does
//! not imply an exploitable economic link. Each edge is classified into one
//! of six relation labels by a pluggable classifier client; edges whose
//! relation weight is zero (competitors and unrelated pairs by default) are
//! removed and the rest carry their weight into signal aggregation.
//!
//! Classification results are cached in an append-only JSONL file keyed by
//! (pair, vintage year, prompt template version), so reruns and overlapping
//! rolling windows never re-query the classifier.

mod cache;
mod classify;
mod client;
mod prompt;
mod snippets;

pub use cache::{cache_key, CacheRecord, ClassificationCache};
pub use classify::{classify_edges, CallBudget, ClassifyOptions, ClassifyStats};
pub use client::{
    parse_classification, ClassificationRequest, ClassifierClient, HttpClient, MockClient,
    ParsedClassification,
};
pub use prompt::{build_prompt, TEMPLATE_VERSION};
pub use snippets::{
    extract_snippets, FirmSnippets, MapSnippets, SectionBudgets, SnippetSections, SnippetSource,
    SnippetStore, DEFAULT_COMPETE_PATTERNS, DEFAULT_SEGMENT_KEYWORDS,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::CandidateGraph;
use crate::StockId;

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("empty filing text")]
    EmptyFilingText,
    #[error("snippet section contains firm name `{name}`: anonymization failed")]
    AnonymizationLeak { name: String },
    #[error("no JSON object in classifier response: {raw}")]
    NoJsonObject { raw: String },
    #[error("classifier response lacks a `label` field: {raw}")]
    MissingLabel { raw: String },
    #[error("unknown label `{label}` in classifier response: {raw}")]
    UnknownLabel { label: String, raw: String },
    #[error("classifier call failed: {message}")]
    ClientFailure { message: String },
    #[error("classification call budget of {limit} exhausted")]
    CallBudgetExceeded { limit: usize },
    #[error("relation weight for `{label}` is negative: {value}")]
    NegativeWeight { label: RelationLabel, value: f64 },
    #[error("relation weight table lacks an entry for `{label}`")]
    MissingWeight { label: RelationLabel },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad cache line {line}: {source}")]
    BadCacheLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("bad truth file {path} at line {line}: {reason}")]
    BadTruthFile {
        path: String,
        line: usize,
        reason: String,
    },
}

/// The six-label relation taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationLabel {
    Competitor,
    SupplyChain,
    Complementary,
    Substitute,
    Peer,
    Unrelated,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 6] = [
        RelationLabel::Competitor,
        RelationLabel::SupplyChain,
        RelationLabel::Complementary,
        RelationLabel::Substitute,
        RelationLabel::Peer,
        RelationLabel::Unrelated,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RelationLabel::Competitor => "competitor",
            RelationLabel::SupplyChain => "supply_chain",
            RelationLabel::Complementary => "complementary",
            RelationLabel::Substitute => "substitute",
            RelationLabel::Peer => "peer",
            RelationLabel::Unrelated => "unrelated",
        }
    }
}

impl std::fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RelationLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationLabel::ALL
            .iter()
            .find(|l| l.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown relation label `{s}`"))
    }
}

/// Where a classification came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassificationSource {
    Live,
    Cache,
    Oracle,
}

/// Relation weight table ω_r. Zero removes an edge, values in (0, 1)
/// down-weight it. Defaults: competitor and unrelated edges are removed,
/// substitutes are halved, the rest pass through unweighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<RelationLabel, f64>", into = "BTreeMap<RelationLabel, f64>")]
pub struct RelationWeights {
    table: BTreeMap<RelationLabel, f64>,
}

impl Default for RelationWeights {
    fn default() -> Self {
        let table = BTreeMap::from([
            (RelationLabel::Competitor, 0.0),
            (RelationLabel::SupplyChain, 1.0),
            (RelationLabel::Complementary, 1.0),
            (RelationLabel::Substitute, 0.5),
            (RelationLabel::Peer, 1.0),
            (RelationLabel::Unrelated, 0.0),
        ]);
        Self { table }
    }
}

impl RelationWeights {
    pub fn new(table: BTreeMap<RelationLabel, f64>) -> Result<Self, RelationError> {
        for label in RelationLabel::ALL {
            match table.get(&label) {
                None => return Err(RelationError::MissingWeight { label }),
                Some(&v) if v < 0.0 => {
                    return Err(RelationError::NegativeWeight { label, value: v })
                }
                _ => {}
            }
        }
        Ok(Self { table })
    }

    pub fn omega(&self, label: RelationLabel) -> f64 {
        self.table[&label]
    }

    /// A table that keeps every edge at full weight (classification off).
    pub fn pass_through() -> Self {
        let table = RelationLabel::ALL.iter().map(|&l| (l, 1.0)).collect();
        Self { table }
    }
}

impl TryFrom<BTreeMap<RelationLabel, f64>> for RelationWeights {
    type Error = RelationError;
    fn try_from(table: BTreeMap<RelationLabel, f64>) -> Result<Self, Self::Error> {
        RelationWeights::new(table)
    }
}

impl From<RelationWeights> for BTreeMap<RelationLabel, f64> {
    fn from(w: RelationWeights) -> Self {
        w.table
    }
}

/// A candidate edge with its classification attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEdge {
    pub i: StockId,
    pub j: StockId,
    pub similarity: f64,
    pub label: RelationLabel,
    pub evidence_a: String,
    pub evidence_b: String,
    pub source: ClassificationSource,
}

/// Candidate graph with every edge classified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledGraph {
    pub nodes: Vec<StockId>,
    pub edges: Vec<LabeledEdge>,
    pub vintage_year: i32,
    pub template_version: String,
}

impl LabeledGraph {
    pub fn label_histogram(&self) -> BTreeMap<String, usize> {
        let mut hist = BTreeMap::new();
        for e in &self.edges {
            *hist.entry(e.label.as_str().to_string()).or_insert(0) += 1;
        }
        hist
    }
}

/// Edge retained after filtering, carrying its relation weight ω_r > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedEdge {
    pub i: StockId,
    pub j: StockId,
    pub similarity: f64,
    pub label: RelationLabel,
    pub omega: f64,
}

/// The filtered graph used for signal construction. Its edge set is always
/// a subset of the candidate edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedGraph {
    pub nodes: Vec<StockId>,
    pub edges: Vec<RefinedEdge>,
}

impl RefinedGraph {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

/// Drop edges whose relation weight is zero and attach ω_r to the rest.
pub fn apply_relation_filter(labeled: &LabeledGraph, weights: &RelationWeights) -> RefinedGraph {
    let edges = labeled
        .edges
        .iter()
        .filter_map(|e| {
            let omega = weights.omega(e.label);
            (omega > 0.0).then(|| RefinedEdge {
                i: e.i.clone(),
                j: e.j.clone(),
                similarity: e.similarity,
                label: e.label,
                omega,
            })
        })
        .collect();
    RefinedGraph {
        nodes: labeled.nodes.clone(),
        edges,
    }
}

/// Treat every candidate edge as fully weighted (the filtering-off path).
pub fn refine_without_filter(graph: &CandidateGraph) -> RefinedGraph {
    RefinedGraph {
        nodes: graph.nodes.clone(),
        edges: graph
            .edges
            .iter()
            .map(|e| RefinedEdge {
                i: e.i.clone(),
                j: e.j.clone(),
                similarity: e.similarity,
                label: RelationLabel::Peer,
                omega: 1.0,
            })
            .collect(),
    }
}
