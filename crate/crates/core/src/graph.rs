//! Candidate stock graphs: top-K cosine similarity, random, and industry.
//!
//! The semantic graph links each stock to its K most similar peers by
//! embedding cosine similarity and is then made undirected: an edge {i, j}
//! exists when j is in i's top-K or i is in j's top-K. The random and
//! industry graphs are the ablation baselines — same container, different
//! construction rule.
//!
//! Edges are stored with a canonical orientation (lexicographically smaller
//! stock id first), which downstream fixes the sign of the pair spread.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::EmbeddingVintage;
use crate::StockId;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("neighbor count K={k} must be smaller than universe size N={n}")]
    KTooLarge { k: usize, n: usize },
    #[error("no embedding for eligible stock {stock}")]
    MissingEmbedding { stock: StockId },
    #[error("zero-norm vector in cosine similarity")]
    ZeroNorm,
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("missing industry code for stock {stock}")]
    MissingIndustryCode { stock: StockId },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("bad edge record in {path} at line {line}: {reason}")]
    BadEdgeRecord {
        path: String,
        line: usize,
        reason: String,
    },
}

/// How a graph's edges were constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Semantic,
    Random,
    Industry,
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphKind::Semantic => write!(f, "semantic"),
            GraphKind::Random => write!(f, "random"),
            GraphKind::Industry => write!(f, "industry"),
        }
    }
}

impl std::str::FromStr for GraphKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "semantic" => Ok(GraphKind::Semantic),
            "random" => Ok(GraphKind::Random),
            "industry" => Ok(GraphKind::Industry),
            other => Err(format!("unknown graph kind `{other}`")),
        }
    }
}

/// Undirected edge with canonical orientation: `i < j` by stock id.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub i: StockId,
    pub j: StockId,
    pub similarity: f64,
}

/// Candidate graph over an eligible universe.
#[derive(Debug, Clone)]
pub struct CandidateGraph {
    /// Sorted stock ids.
    pub nodes: Vec<StockId>,
    /// Canonical edges sorted by (i, j).
    pub edges: Vec<Edge>,
    pub kind: GraphKind,
    /// Neighbor count used during construction (0 for industry graphs).
    pub k: usize,
}

impl CandidateGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, stock: &str) -> usize {
        self.edges
            .iter()
            .filter(|e| e.i == stock || e.j == stock)
            .count()
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        self.edges.iter().any(|e| e.i == x && e.j == y)
    }
}

/// Cosine similarity of two nonzero vectors, in [−1, 1].
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, GraphError> {
    if u.len() != v.len() {
        return Err(GraphError::DimMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(GraphError::ZeroNorm);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

fn sorted_unique(eligible: &[StockId]) -> Vec<StockId> {
    let mut nodes: Vec<StockId> = eligible.to_vec();
    nodes.sort();
    nodes.dedup();
    nodes
}

fn edges_from_pairs(
    nodes: &[StockId],
    pairs: BTreeSet<(usize, usize)>,
    sim: impl Fn(usize, usize) -> f64,
) -> Vec<Edge> {
    pairs
        .into_iter()
        .map(|(a, b)| Edge {
            i: nodes[a].clone(),
            j: nodes[b].clone(),
            similarity: sim(a, b),
        })
        .collect()
}

/// Build the top-K cosine-similarity graph over the eligible universe.
/// Similarity ties are broken by ascending stock id, so the result is
/// deterministic and invariant to input ordering.
pub fn build_candidate_graph(
    vintage: &EmbeddingVintage,
    eligible: &[StockId],
    k: usize,
) -> Result<CandidateGraph, GraphError> {
    let nodes = sorted_unique(eligible);
    let n = nodes.len();
    if k >= n {
        return Err(GraphError::KTooLarge { k, n });
    }
    let vectors: Vec<&[f64]> = nodes
        .iter()
        .map(|s| {
            vintage.get(s).ok_or_else(|| GraphError::MissingEmbedding {
                stock: s.clone(),
            })
        })
        .collect::<Result<_, _>>()?;

    // Full N×N similarities in double precision; rows are independent.
    let sims: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        cosine_similarity(vectors[i], vectors[j]).expect("nonzero by load")
                    }
                })
                .collect()
        })
        .collect();

    let top_k: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                sims[i][b]
                    .partial_cmp(&sims[i][a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            order.truncate(k);
            order
        })
        .collect();

    let mut pairs = BTreeSet::new();
    for (i, neighbors) in top_k.iter().enumerate() {
        for &j in neighbors {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let edges = edges_from_pairs(&nodes, pairs, |a, b| sims[a][b]);
    Ok(CandidateGraph {
        nodes,
        edges,
        kind: GraphKind::Semantic,
        k,
    })
}

/// Random baseline: each node draws K distinct neighbors uniformly without
/// replacement, then the directed draws are symmetrized. Reproducible from
/// the seed.
pub fn build_random_graph(
    eligible: &[StockId],
    k: usize,
    seed: u64,
) -> Result<CandidateGraph, GraphError> {
    let nodes = sorted_unique(eligible);
    let n = nodes.len();
    if k >= n {
        return Err(GraphError::KTooLarge { k, n });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = BTreeSet::new();
    for i in 0..n {
        for pick in rand::seq::index::sample(&mut rng, n - 1, k) {
            let j = if pick >= i { pick + 1 } else { pick };
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let edges = edges_from_pairs(&nodes, pairs, |_, _| 0.0);
    Ok(CandidateGraph {
        nodes,
        edges,
        kind: GraphKind::Random,
        k,
    })
}

/// Industry baseline: a clique per industry code value.
pub fn build_industry_graph(
    eligible: &[StockId],
    codes: &HashMap<StockId, String>,
) -> Result<CandidateGraph, GraphError> {
    let nodes = sorted_unique(eligible);
    let mut by_code: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (idx, stock) in nodes.iter().enumerate() {
        let code = codes
            .get(stock)
            .ok_or_else(|| GraphError::MissingIndustryCode {
                stock: stock.clone(),
            })?;
        by_code.entry(code.as_str()).or_default().push(idx);
    }
    let mut pairs = BTreeSet::new();
    for members in by_code.values() {
        for (a_pos, &a) in members.iter().enumerate() {
            for &b in &members[a_pos + 1..] {
                pairs.insert((a, b));
            }
        }
    }
    let edges = edges_from_pairs(&nodes, pairs, |_, _| 0.0);
    Ok(CandidateGraph {
        nodes,
        edges,
        kind: GraphKind::Industry,
        k: 0,
    })
}

/// Load `sic.csv` (header `stock,code`), truncating codes to the 2-digit
/// industry prefix.
pub fn load_industry_codes(path: &Path) -> Result<HashMap<StockId, String>, GraphError> {
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|source| GraphError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let mut codes = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| GraphError::Csv {
            path: path_str.clone(),
            source,
        })?;
        let stock = rec.get(0).unwrap_or("").trim().to_string();
        let code = rec.get(1).unwrap_or("").trim();
        let prefix: String = code.chars().take(2).collect();
        codes.insert(stock, prefix);
    }
    Ok(codes)
}

/// Write `edges.csv` (header `stock_i,stock_j,similarity,tag`).
pub fn write_edges_csv(graph: &CandidateGraph, path: &Path) -> Result<(), GraphError> {
    let path_str = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|source| GraphError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let map_err = |source| GraphError::Csv {
        path: path_str.clone(),
        source,
    };
    writer
        .write_record(["stock_i", "stock_j", "similarity", "tag"])
        .map_err(map_err)?;
    for e in &graph.edges {
        writer
            .write_record([
                e.i.as_str(),
                e.j.as_str(),
                &format!("{}", e.similarity),
                &graph.kind.to_string(),
            ])
            .map_err(|source| GraphError::Csv {
                path: path_str.clone(),
                source,
            })?;
    }
    writer.flush().map_err(|source| GraphError::Io {
        path: path_str,
        source,
    })?;
    Ok(())
}

/// Load a graph previously written by [`write_edges_csv`]. The neighbor
/// count is not stored in the file and is reported as 0.
pub fn load_edges_csv(path: &Path) -> Result<CandidateGraph, GraphError> {
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|source| GraphError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let mut edges = Vec::new();
    let mut node_set = BTreeSet::new();
    let mut kind = GraphKind::Semantic;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|source| GraphError::Csv {
            path: path_str.clone(),
            source,
        })?;
        let bad = |reason: &str| GraphError::BadEdgeRecord {
            path: path_str.clone(),
            line: line + 2,
            reason: reason.to_string(),
        };
        let a = rec.get(0).ok_or_else(|| bad("missing stock_i"))?.trim();
        let b = rec.get(1).ok_or_else(|| bad("missing stock_j"))?.trim();
        let sim: f64 = rec
            .get(2)
            .ok_or_else(|| bad("missing similarity"))?
            .trim()
            .parse()
            .map_err(|_| bad("unparseable similarity"))?;
        kind = rec
            .get(3)
            .ok_or_else(|| bad("missing tag"))?
            .trim()
            .parse()
            .map_err(|_| bad("unknown tag"))?;
        if a == b {
            return Err(bad("self-loop"));
        }
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        node_set.insert(i.to_string());
        node_set.insert(j.to_string());
        edges.push(Edge {
            i: i.to_string(),
            j: j.to_string(),
            similarity: sim,
        });
    }
    edges.sort_by(|a, b| (&a.i, &a.j).cmp(&(&b.i, &b.j)));
    Ok(CandidateGraph {
        nodes: node_set.into_iter().collect(),
        edges,
        kind,
        k: 0,
    })
}
