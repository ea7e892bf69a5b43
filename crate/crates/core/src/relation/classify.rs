//! Edge classification over a candidate graph: cache first, then live calls
//! with bounded retries, then a fail-closed `unrelated` fallback.
//!
//! Live calls may run concurrently up to a configured parallelism; cache
//! appends and result merging always happen in canonical edge order, so the
//! resulting graph (and the cache file) are deterministic for a
//! deterministic client regardless of worker count.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rayon::prelude::*;

use super::cache::{cache_key, CacheRecord, ClassificationCache};
use super::client::{parse_classification, ClassificationRequest, ClassifierClient};
use super::prompt::{build_prompt, TEMPLATE_VERSION};
use super::snippets::SnippetSource;
use super::{
    ClassificationSource, LabeledEdge, LabeledGraph, RelationError, RelationLabel,
};
use crate::graph::CandidateGraph;

/// Knobs for the classification pass.
#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    /// Concurrent in-flight requests (1 = sequential).
    pub parallelism: usize,
    /// Retries after the first attempt, with exponential backoff.
    pub max_retries: u32,
    /// Backoff before retry k is `retry_backoff * 2^k`.
    pub retry_backoff: Duration,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            parallelism: 1,
            max_retries: 3,
            retry_backoff: Duration::from_millis(250),
        }
    }
}

/// Hard per-run budget on classifier call attempts, shared across windows.
#[derive(Debug)]
pub struct CallBudget {
    limit: Option<usize>,
    used: AtomicUsize,
}

impl CallBudget {
    pub fn unlimited() -> Self {
        Self {
            limit: None,
            used: AtomicUsize::new(0),
        }
    }

    pub fn limited(limit: usize) -> Self {
        Self {
            limit: Some(limit),
            used: AtomicUsize::new(0),
        }
    }

    /// Reserve one call attempt; false when the budget is spent.
    pub fn try_acquire(&self) -> bool {
        match self.limit {
            None => {
                self.used.fetch_add(1, Ordering::SeqCst);
                true
            }
            Some(limit) => {
                let mut current = self.used.load(Ordering::SeqCst);
                loop {
                    if current >= limit {
                        return false;
                    }
                    match self.used.compare_exchange(
                        current,
                        current + 1,
                        Ordering::SeqCst,
                        Ordering::SeqCst,
                    ) {
                        Ok(_) => return true,
                        Err(now) => current = now,
                    }
                }
            }
        }
    }

    pub fn used(&self) -> usize {
        self.used.load(Ordering::SeqCst)
    }

    pub fn limit(&self) -> Option<usize> {
        self.limit
    }
}

/// Tally of one classification pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct ClassifyStats {
    pub edges: usize,
    pub cache_hits: usize,
    /// Client call attempts issued (retries included).
    pub live_calls: usize,
    /// Edges labeled `unrelated` because of missing snippets or exhausted
    /// retries.
    pub fallbacks: usize,
    pub label_histogram: BTreeMap<String, usize>,
}

enum JobOutcome {
    Classified {
        label: RelationLabel,
        evidence_a: String,
        evidence_b: String,
        attempts: usize,
    },
    Failed {
        attempts: usize,
    },
    BudgetExhausted {
        attempts: usize,
    },
}

struct Job {
    edge_idx: usize,
    key: String,
    request: ClassificationRequest,
}

fn run_job(
    job: &Job,
    client: &dyn ClassifierClient,
    opts: &ClassifyOptions,
    budget: &CallBudget,
) -> JobOutcome {
    let mut attempts = 0;
    for attempt in 0..=opts.max_retries {
        if attempt > 0 {
            let backoff = opts.retry_backoff * 2u32.pow(attempt - 1);
            if !backoff.is_zero() {
                std::thread::sleep(backoff);
            }
        }
        if !budget.try_acquire() {
            return JobOutcome::BudgetExhausted { attempts };
        }
        attempts += 1;
        match client
            .classify(&job.request)
            .and_then(|raw| parse_classification(&raw))
        {
            Ok(parsed) => {
                return JobOutcome::Classified {
                    label: parsed.label,
                    evidence_a: parsed.evidence_a,
                    evidence_b: parsed.evidence_b,
                    attempts,
                }
            }
            Err(_) => continue,
        }
    }
    JobOutcome::Failed { attempts }
}

/// Classify every edge of a candidate graph.
///
/// Cache hits are used as-is. Misses with snippets for both endpoints go to
/// the client; successful classifications are persisted to the cache in
/// canonical edge order. Edges lacking snippets, or whose calls fail after
/// all retries, are labeled `unrelated` (fail-closed) and are not cached.
/// When the call budget runs out the error carries away nothing: results
/// already obtained are persisted first, so the partial cache stays intact.
pub fn classify_edges(
    graph: &CandidateGraph,
    snippets: &mut dyn SnippetSource,
    vintage_year: i32,
    client: &dyn ClassifierClient,
    cache: &mut ClassificationCache,
    opts: &ClassifyOptions,
    budget: &CallBudget,
) -> Result<(LabeledGraph, ClassifyStats), RelationError> {
    let mut stats = ClassifyStats {
        edges: graph.edges.len(),
        ..Default::default()
    };
    // Slot per edge, merged in canonical order at the end.
    let mut slots: Vec<Option<LabeledEdge>> = vec![None; graph.edges.len()];
    let mut jobs: Vec<Job> = Vec::new();

    for (edge_idx, edge) in graph.edges.iter().enumerate() {
        let key = cache_key(&edge.i, &edge.j, vintage_year, TEMPLATE_VERSION);
        if let Some(hit) = cache.get(&key) {
            stats.cache_hits += 1;
            slots[edge_idx] = Some(LabeledEdge {
                i: edge.i.clone(),
                j: edge.j.clone(),
                similarity: edge.similarity,
                label: hit.label,
                evidence_a: hit.evidence_a.clone(),
                evidence_b: hit.evidence_b.clone(),
                source: ClassificationSource::Cache,
            });
            continue;
        }
        let snip_a = snippets.get(&edge.i, vintage_year)?;
        let snip_b = snippets.get(&edge.j, vintage_year)?;
        let (Some(a), Some(b)) = (snip_a, snip_b) else {
            stats.fallbacks += 1;
            slots[edge_idx] = Some(fallback_edge(graph, edge_idx));
            continue;
        };
        let prompt = build_prompt(&a, &b, vintage_year)?;
        jobs.push(Job {
            edge_idx,
            key,
            request: ClassificationRequest {
                pair: (edge.i.clone(), edge.j.clone()),
                fiscal_year: vintage_year,
                prompt,
            },
        });
    }

    let outcomes: Vec<JobOutcome> = if opts.parallelism <= 1 || jobs.len() <= 1 {
        jobs.iter()
            .map(|job| run_job(job, client, opts, budget))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallelism)
            .build()
            .expect("thread pool");
        pool.install(|| {
            jobs.par_iter()
                .map(|job| run_job(job, client, opts, budget))
                .collect()
        })
    };

    // Persist successes in canonical order before reporting any budget error.
    let mut budget_hit = false;
    for (job, outcome) in jobs.iter().zip(&outcomes) {
        match outcome {
            JobOutcome::Classified {
                label,
                evidence_a,
                evidence_b,
                attempts,
            } => {
                stats.live_calls += attempts;
                let edge = &graph.edges[job.edge_idx];
                cache.put(CacheRecord {
                    key: job.key.clone(),
                    pair: (edge.i.clone(), edge.j.clone()),
                    year: vintage_year,
                    template_version: TEMPLATE_VERSION.to_string(),
                    label: *label,
                    evidence_a: evidence_a.clone(),
                    evidence_b: evidence_b.clone(),
                    timestamp: chrono::Utc::now().to_rfc3339(),
                })?;
                slots[job.edge_idx] = Some(LabeledEdge {
                    i: edge.i.clone(),
                    j: edge.j.clone(),
                    similarity: edge.similarity,
                    label: *label,
                    evidence_a: evidence_a.clone(),
                    evidence_b: evidence_b.clone(),
                    source: ClassificationSource::Live,
                });
            }
            JobOutcome::Failed { attempts } => {
                stats.live_calls += attempts;
                stats.fallbacks += 1;
                slots[job.edge_idx] = Some(fallback_edge(graph, job.edge_idx));
            }
            JobOutcome::BudgetExhausted { attempts } => {
                stats.live_calls += attempts;
                budget_hit = true;
            }
        }
    }
    if budget_hit {
        return Err(RelationError::CallBudgetExceeded {
            limit: budget.limit().unwrap_or(0),
        });
    }

    let edges: Vec<LabeledEdge> = slots.into_iter().map(|s| s.expect("slot filled")).collect();
    let labeled = LabeledGraph {
        nodes: graph.nodes.clone(),
        edges,
        vintage_year,
        template_version: TEMPLATE_VERSION.to_string(),
    };
    stats.label_histogram = labeled.label_histogram();
    Ok((labeled, stats))
}

fn fallback_edge(graph: &CandidateGraph, edge_idx: usize) -> LabeledEdge {
    let edge = &graph.edges[edge_idx];
    LabeledEdge {
        i: edge.i.clone(),
        j: edge.j.clone(),
        similarity: edge.similarity,
        label: RelationLabel::Unrelated,
        evidence_a: String::new(),
        evidence_b: String::new(),
        source: ClassificationSource::Live,
    }
}
