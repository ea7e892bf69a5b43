//! Synthetic markets with planted economics, for end-to-end verification.
//!
//! Stocks live in embedding clusters. Returns are a market factor plus a
//! cluster factor plus idiosyncratic noise; a chosen fraction of
//! intra-cluster pairs additionally carries an antisymmetric spread process
//!
//! ```text
//! s_{t+1} = (1 − κ) s_t + η ε_t     (mean-reverting links)
//! s_{t+1} = s_t ± drift + η ε_t     (competitor pairs: divergent walk)
//! ```
//!
//! applied as +Δ/2 to one stock and −Δ/2 to the other, so linked pairs have
//! genuinely mean-reverting normalized-price spreads while competitor pairs
//! drift apart. Every planted pair has a ground-truth relation label, which
//! the oracle classifier serves through the ordinary client contract.

use std::collections::{BTreeMap, HashMap};

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{
    EmbeddingSet, MembershipEntry, MembershipTable, PanelError, ReturnPanel,
};
use crate::relation::{
    extract_snippets, MapSnippets, MockClient, RelationLabel, SectionBudgets,
};
use crate::StockId;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {reason}")]
    InvalidSpec { reason: String },
    #[error("infeasible plan: {reason}")]
    InfeasiblePlan { reason: String },
    #[error(transparent)]
    Panel(#[from] PanelError),
}

fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 1, 4).unwrap()
}

fn default_label_plan() -> BTreeMap<RelationLabel, f64> {
    BTreeMap::from([
        (RelationLabel::SupplyChain, 0.35),
        (RelationLabel::Complementary, 0.25),
        (RelationLabel::Peer, 0.30),
        (RelationLabel::Substitute, 0.10),
    ])
}

/// Parameters of a synthetic market.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_stocks: usize,
    pub n_days: usize,
    pub n_clusters: usize,
    pub embed_dim: usize,
    /// Noise scale around each cluster's embedding center.
    pub embed_noise: f64,
    pub market_vol: f64,
    pub cluster_vol: f64,
    pub idio_vol: f64,
    /// Mean-reversion speed κ of planted spreads, in [0, 1).
    pub kappa: f64,
    /// Spread innovation volatility η.
    pub eta: f64,
    /// Starting spread level of planted mean-reverting pairs.
    pub initial_spread: f64,
    /// Daily drift magnitude of competitor spreads (sign alternates).
    pub competitor_drift: f64,
    /// Fraction of intra-cluster pairs that are planted links.
    pub linked_fraction: f64,
    /// Fractions per relation label over the planted pairs; must sum to 1.
    pub label_plan: BTreeMap<RelationLabel, f64>,
    /// Fraction of stocks whose embedding is a near-duplicate of a stock in
    /// another cluster (textual lookalikes with no economic link).
    pub spurious_fraction: f64,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_stocks: 50,
            n_days: 1500,
            n_clusters: 5,
            embed_dim: 16,
            embed_noise: 0.08,
            market_vol: 0.008,
            cluster_vol: 0.004,
            idio_vol: 0.006,
            kappa: 0.1,
            eta: 0.01,
            initial_spread: 0.0,
            competitor_drift: 0.002,
            linked_fraction: 0.4,
            label_plan: default_label_plan(),
            spurious_fraction: 0.0,
            start_date: default_start_date(),
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |reason: String| Err(SynthError::InvalidSpec { reason });
        if self.n_stocks < 2 || self.n_clusters == 0 || self.n_days < 2 {
            return fail("need at least 2 stocks, 1 cluster, 2 days".into());
        }
        if self.n_clusters > self.n_stocks {
            return fail("more clusters than stocks".into());
        }
        if self.embed_dim < 2 {
            return fail("embed_dim must be >= 2".into());
        }
        for (name, v) in [
            ("embed_noise", self.embed_noise),
            ("market_vol", self.market_vol),
            ("cluster_vol", self.cluster_vol),
            ("idio_vol", self.idio_vol),
            ("eta", self.eta),
            ("competitor_drift", self.competitor_drift),
        ] {
            if v < 0.0 || !v.is_finite() {
                return fail(format!("{name} must be >= 0"));
            }
        }
        if !(0.0..1.0).contains(&self.kappa) {
            return fail("kappa must be in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.spurious_fraction) {
            return fail("spurious_fraction must be in [0, 1]".into());
        }
        if self.linked_fraction < 0.0 {
            return fail("linked_fraction must be >= 0".into());
        }
        if self.linked_fraction > 1.0 {
            return Err(SynthError::InfeasiblePlan {
                reason: format!(
                    "linked_fraction {} exceeds intra-cluster pair capacity",
                    self.linked_fraction
                ),
            });
        }
        let total: f64 = self.label_plan.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return fail(format!("label plan fractions sum to {total}, expected 1"));
        }
        if self.label_plan.values().any(|&f| f < 0.0) {
            return fail("label plan fractions must be >= 0".into());
        }
        Ok(())
    }
}

/// A fully-labeled synthetic market in the pipeline's ingestion types.
pub struct SyntheticDataset {
    pub panel: ReturnPanel,
    pub membership: MembershipTable,
    pub embeddings: EmbeddingSet,
    pub snippets: MapSnippets,
    /// Raw filing text per stock, for writing `filings/<year>/<stock>.txt`.
    pub filing_texts: HashMap<StockId, String>,
    /// Ground-truth label per planted (canonical) pair.
    pub truth: HashMap<(StockId, StockId), RelationLabel>,
    /// Cluster index as a 2-digit industry code.
    pub industry: HashMap<StockId, String>,
    pub cluster_of: HashMap<StockId, usize>,
    /// Embedding vintage years replicated in `embeddings`.
    pub vintages: Vec<i32>,
}

const SECTORS: &[&str] = &[
    "semiconductor",
    "pharmaceutical",
    "aerospace",
    "retail",
    "energy",
    "software",
    "banking",
    "telecom",
    "transportation",
    "agriculture",
    "chemicals",
    "hospitality",
];

fn substream(seed: u64, tag: u64, idx: u64) -> ChaCha8Rng {
    let mixed = seed
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ idx.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    ChaCha8Rng::seed_from_u64(mixed)
}

fn gauss_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn weekday_calendar(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(n);
    let mut d = start;
    while dates.len() < n {
        if d.weekday().num_days_from_monday() < 5 {
            dates.push(d);
        }
        d += chrono::Duration::days(1);
    }
    dates
}

fn filing_text(sector: &str, cluster: usize) -> String {
    format!(
        "The company designs, manufactures and distributes {sector} products and related \
         services for customers worldwide. Operations are organized in a single {sector} \
         segment serving both original equipment makers and aftermarket demand. The company \
         maintains long-term supply agreements with upstream component producers and \
         complementary distribution partnerships within the {sector} industry (group {cluster}). \
         We compete with other {sector} providers on price, quality and delivery terms."
    )
}

/// Allocate `total` planted pairs across the plan's labels by largest
/// remainder, so counts match the fractions as closely as integers allow.
fn allocate_labels(
    plan: &BTreeMap<RelationLabel, f64>,
    total: usize,
) -> Vec<(RelationLabel, usize)> {
    let mut counts: Vec<(RelationLabel, usize, f64)> = plan
        .iter()
        .filter(|(_, &f)| f > 0.0)
        .map(|(&label, &f)| {
            let exact = f * total as f64;
            (label, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = counts.iter().map(|(_, c, _)| c).sum();
    let mut remainder = total - assigned;
    counts.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    for entry in counts.iter_mut() {
        if remainder == 0 {
            break;
        }
        entry.1 += 1;
        remainder -= 1;
    }
    counts.sort_by_key(|(label, _, _)| *label);
    counts
        .into_iter()
        .map(|(label, count, _)| (label, count))
        .collect()
}

/// Generate a synthetic market with default `S###` stock ids.
pub fn generate_universe(spec: &SynthSpec) -> Result<SyntheticDataset, SynthError> {
    let ids: Vec<StockId> = (0..spec.n_stocks).map(|i| format!("S{i:03}")).collect();
    generate_universe_named(spec, &ids)
}

/// Generate with caller-provided stock ids. All randomness attaches to stock
/// positions, not names, so renaming stocks relabels the dataset without
/// changing any generated numbers.
pub fn generate_universe_named(
    spec: &SynthSpec,
    ids: &[StockId],
) -> Result<SyntheticDataset, SynthError> {
    spec.validate()?;
    assert_eq!(ids.len(), spec.n_stocks);
    let n = spec.n_stocks;
    let t = spec.n_days;
    let c = spec.n_clusters;
    let dates = weekday_calendar(spec.start_date, t);

    // Contiguous cluster blocks.
    let cluster_of_idx: Vec<usize> = (0..n).map(|i| i * c / n).collect();

    // Embeddings: cluster center + noise, possibly replaced by a
    // near-duplicate of another cluster's member (spurious lookalikes).
    let centers: Vec<Vec<f64>> = (0..c)
        .map(|cl| {
            let mut rng = substream(spec.seed, 5, cl as u64);
            let v = gauss_vec(&mut rng, spec.embed_dim);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let mut vectors: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut rng = substream(spec.seed, 6, i as u64);
            let noise = gauss_vec(&mut rng, spec.embed_dim);
            centers[cluster_of_idx[i]]
                .iter()
                .zip(noise)
                .map(|(cv, nv)| cv + spec.embed_noise * nv)
                .collect()
        })
        .collect();
    let mut structure_rng = substream(spec.seed, 7, 0);
    if spec.spurious_fraction > 0.0 && c > 1 {
        let n_spurious = (spec.spurious_fraction * n as f64).floor() as usize;
        let mut candidates: Vec<usize> = (0..n).collect();
        candidates.shuffle(&mut structure_rng);
        for &i in candidates.iter().take(n_spurious) {
            let donor = loop {
                let d = structure_rng.gen_range(0..n);
                if cluster_of_idx[d] != cluster_of_idx[i] {
                    break d;
                }
            };
            let mut rng = substream(spec.seed, 8, i as u64);
            let jitter = gauss_vec(&mut rng, spec.embed_dim);
            vectors[i] = vectors[donor]
                .iter()
                .zip(jitter)
                .map(|(v, j)| v + 0.01 * j)
                .collect();
        }
    }

    // Planted pairs: a fraction of intra-cluster pairs, labels per plan.
    let mut intra_pairs: Vec<(usize, usize)> = Vec::new();
    for cl in 0..c {
        let members: Vec<usize> = (0..n).filter(|&i| cluster_of_idx[i] == cl).collect();
        for (a_pos, &a) in members.iter().enumerate() {
            for &b in &members[a_pos + 1..] {
                intra_pairs.push((a, b));
            }
        }
    }
    intra_pairs.shuffle(&mut structure_rng);
    let n_planted = (spec.linked_fraction * intra_pairs.len() as f64).floor() as usize;
    let planted: Vec<(usize, usize)> = intra_pairs.into_iter().take(n_planted).collect();
    let mut truth_idx: Vec<((usize, usize), RelationLabel)> = Vec::new();
    {
        let mut cursor = 0usize;
        for (label, count) in allocate_labels(&spec.label_plan, planted.len()) {
            for &pair in planted.iter().skip(cursor).take(count) {
                truth_idx.push((pair, label));
            }
            cursor += count;
        }
    }

    // Returns: market + cluster + idio, then antisymmetric pair spreads.
    let mut market_rng = substream(spec.seed, 1, 0);
    let market: Vec<f64> = (0..t)
        .map(|_| spec.market_vol * market_rng.sample::<f64, _>(StandardNormal))
        .collect();
    let cluster_factors: Vec<Vec<f64>> = (0..c)
        .map(|cl| {
            let mut rng = substream(spec.seed, 2, cl as u64);
            (0..t)
                .map(|_| spec.cluster_vol * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut returns: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut rng = substream(spec.seed, 3, i as u64);
            (0..t)
                .map(|d| {
                    market[d]
                        + cluster_factors[cluster_of_idx[i]][d]
                        + spec.idio_vol * rng.sample::<f64, _>(StandardNormal)
                })
                .collect()
        })
        .collect();
    for (pair_idx, &((a, b), label)) in truth_idx.iter().enumerate() {
        if label == RelationLabel::Unrelated {
            continue;
        }
        let mut rng = substream(spec.seed, 4, pair_idx as u64);
        let competitor = label == RelationLabel::Competitor;
        let drift = if competitor {
            if pair_idx % 2 == 0 {
                spec.competitor_drift
            } else {
                -spec.competitor_drift
            }
        } else {
            0.0
        };
        let kappa = if competitor { 0.0 } else { spec.kappa };
        let mut s = if competitor { 0.0 } else { spec.initial_spread };
        for day in 0..t {
            let next = (1.0 - kappa) * s + drift + spec.eta * rng.sample::<f64, _>(StandardNormal);
            let delta = next - s;
            returns[a][day] += delta / 2.0;
            returns[b][day] -= delta / 2.0;
            s = next;
        }
    }

    // Assemble ingestion types.
    let mut values = Vec::with_capacity(t * n);
    for day in 0..t {
        for stock in 0..n {
            values.push(returns[stock][day]);
        }
    }
    let panel = ReturnPanel::new(dates.clone(), ids.to_vec(), values, vec![false; t * n])?;
    let membership = MembershipTable::new(
        ids.iter()
            .map(|s| MembershipEntry {
                stock: s.clone(),
                start: dates[0],
                end: *dates.last().unwrap(),
            })
            .collect(),
    )?;

    let first_year = dates[0].year();
    let last_year = dates.last().unwrap().year();
    let vintages: Vec<i32> = (first_year - 1..=last_year - 1).collect();
    let mut embeddings = EmbeddingSet::default();
    for &year in &vintages {
        embeddings.insert_vintage(
            year,
            ids.iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), vectors[i].clone()))
                .collect(),
        )?;
    }

    let mut snippets = MapSnippets::default();
    let mut filing_texts = HashMap::new();
    for (i, id) in ids.iter().enumerate() {
        let cl = cluster_of_idx[i];
        let text = filing_text(SECTORS[cl % SECTORS.len()], cl);
        let sections =
            extract_snippets(&text, &SectionBudgets::default()).expect("template text nonempty");
        snippets.insert(id.clone(), sections);
        filing_texts.insert(id.clone(), text);
    }

    let truth: HashMap<(StockId, StockId), RelationLabel> = truth_idx
        .iter()
        .map(|&((a, b), label)| {
            let (x, y) = (ids[a].clone(), ids[b].clone());
            let pair = if x <= y { (x, y) } else { (y, x) };
            (pair, label)
        })
        .collect();
    let industry: HashMap<StockId, String> = ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), format!("{:02}", cluster_of_idx[i] % 100)))
        .collect();
    let cluster_of: HashMap<StockId, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), cluster_of_idx[i]))
        .collect();

    Ok(SyntheticDataset {
        panel,
        membership,
        embeddings,
        snippets,
        filing_texts,
        truth,
        industry,
        cluster_of,
        vintages,
    })
}

/// A classifier client that answers every pair with its ground-truth label
/// (pairs without truth entries are `unrelated`), wrapped in the required
/// JSON schema.
pub fn oracle_classifier(dataset: &SyntheticDataset) -> MockClient {
    MockClient::new(dataset.truth.clone())
}
