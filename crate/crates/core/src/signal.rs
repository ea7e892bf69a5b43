//! Pair spread statistics and relation-aware signal aggregation.
//!
//! For an edge (i, j) with canonical orientation (i before j), the
//! normalized-price spread is `s_t = P_i,t − P_j,t`. Training-window spread
//! moments (mean, standard deviation, and the summed squared spread used as
//! the pair distance) standardize the test-window spread into a z-score. A
//! positive z means stock i is rich relative to stock j, so i receives a
//! negative (sell) signal contribution and j a positive (buy) one:
//!
//! ```text
//! S_i,t += −z_ij,t · w_ij^(i)        S_j,t += +z_ij,t · w_ij^(j)
//! w_ij^(i) = ω_r · n_i · exp(−d_ij) / Σ_k exp(−d_ik)
//! ```
//!
//! The per-stock softmax over negative distances favors pairs with tighter
//! historical co-movement; the degree factor `n_i` keeps aggregate signal
//! magnitude comparable across stocks of different connectivity. The softmax
//! is computed with a min-distance shift so large distances cannot underflow.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Spread volatility floor below which a pair is dropped for the window;
/// the z-score is undefined for (near-)constant training spreads.
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("return <= -1 at offset {offset}: {value}")]
    InvalidReturn { offset: usize, value: f64 },
    #[error("price paths have mismatched lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("training window too short ({len} observations, need >= 2)")]
    TooShort { len: usize },
    #[error("degenerate training spread (sigma {sigma:e} below floor {floor:e})")]
    DegenerateSpread { sigma: f64, floor: f64 },
    #[error("no incident edges for weighting")]
    EmptyIncidence,
    #[error("relation weight must be positive in weighting, got {omega}")]
    NonPositiveOmega { omega: f64 },
}

/// One rolling window: training `[t0, t1]`, test `(t1, t2]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub t0: NaiveDate,
    pub t1: NaiveDate,
    pub t2: NaiveDate,
    pub train_len: usize,
    pub test_len: usize,
}

/// Training statistics for one pair: spread mean and standard deviation for
/// z-scoring, and the summed squared spread (`dist`) used as the pair
/// distance in softmax weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub mu: f64,
    pub sigma: f64,
    pub dist: f64,
}

impl PairModel {
    /// Standardize a spread against the training moments.
    pub fn zscore(&self, spread: f64) -> Result<f64, SignalError> {
        if self.sigma < SIGMA_FLOOR {
            return Err(SignalError::DegenerateSpread {
                sigma: self.sigma,
                floor: SIGMA_FLOOR,
            });
        }
        Ok((spread - self.mu) / self.sigma)
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma < SIGMA_FLOOR
    }
}

/// Cumulative product of gross returns from the first element:
/// `P_0 = 1 + r_0`, `P_t = P_{t-1} · (1 + r_t)`.
pub fn normalized_prices(returns: &[f64]) -> Result<Vec<f64>, SignalError> {
    let mut path = Vec::with_capacity(returns.len());
    let mut level = 1.0;
    for (offset, &r) in returns.iter().enumerate() {
        if !r.is_finite() || r <= -1.0 {
            return Err(SignalError::InvalidReturn { offset, value: r });
        }
        level *= 1.0 + r;
        path.push(level);
    }
    Ok(path)
}

/// Fit spread statistics over a training window. `p_i` is the path of the
/// canonically-first stock, so the spread sign convention is fixed here.
/// Standard deviation uses the n−1 denominator.
pub fn pair_stats(p_i: &[f64], p_j: &[f64]) -> Result<PairModel, SignalError> {
    if p_i.len() != p_j.len() {
        return Err(SignalError::LengthMismatch {
            left: p_i.len(),
            right: p_j.len(),
        });
    }
    let n = p_i.len();
    if n < 2 {
        return Err(SignalError::TooShort { len: n });
    }
    let spreads: Vec<f64> = p_i.iter().zip(p_j).map(|(a, b)| a - b).collect();
    let mu = spreads.iter().sum::<f64>() / n as f64;
    let var = spreads.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / (n - 1) as f64;
    let dist = spreads.iter().map(|s| s * s).sum::<f64>();
    Ok(PairModel {
        mu,
        sigma: var.sqrt(),
        dist,
    })
}

/// How pair distances enter edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Per-stock softmax over negative distances, scaled by degree.
    Softmax,
    /// Ignore distances; each edge weighs its relation weight only.
    Equal,
}

/// Weights of one stock's incident edges. Each element of `incident` is
/// `(dist, omega)` for one edge. In softmax mode the weights satisfy
/// `Σ_k softmax_k = 1` and each weight is `omega · n · softmax_k`.
pub fn edge_weights(incident: &[(f64, f64)], mode: WeightMode) -> Result<Vec<f64>, SignalError> {
    if incident.is_empty() {
        return Err(SignalError::EmptyIncidence);
    }
    for &(_, omega) in incident {
        if omega <= 0.0 {
            return Err(SignalError::NonPositiveOmega { omega });
        }
    }
    match mode {
        WeightMode::Equal => Ok(incident.iter().map(|&(_, omega)| omega).collect()),
        WeightMode::Softmax => {
            let n = incident.len() as f64;
            let d_min = incident
                .iter()
                .map(|&(d, _)| d)
                .fold(f64::INFINITY, f64::min);
            let exps: Vec<f64> = incident.iter().map(|&(d, _)| (-(d - d_min)).exp()).collect();
            let total: f64 = exps.iter().sum();
            Ok(incident
                .iter()
                .zip(&exps)
                .map(|(&(_, omega), &e)| omega * n * e / total)
                .collect())
        }
    }
}

/// One edge ready for aggregation: endpoint indices into the stock list
/// (canonical order `i < j`), relation weight, and fitted pair model.
#[derive(Debug, Clone)]
pub struct SignalEdge {
    pub i: usize,
    pub j: usize,
    pub omega: f64,
    pub model: PairModel,
}

/// Per-stock aggregated signals over the window's decision dates.
#[derive(Debug, Clone)]
pub struct SignalMatrix {
    /// Dates at which signals are evaluated (positions are formed at the
    /// close of each and earn the following trading day's return).
    pub dates: Vec<NaiveDate>,
    /// Row-major dates × stocks.
    pub scores: Vec<f64>,
    pub n_stocks: usize,
    /// Surviving-edge degree per stock.
    pub degrees: Vec<usize>,
    /// Stocks with no incident edges: score fixed at 0.
    pub isolated: Vec<bool>,
}

impl SignalMatrix {
    pub fn score(&self, date_row: usize, stock: usize) -> f64 {
        self.scores[date_row * self.n_stocks + stock]
    }

    pub fn row(&self, date_row: usize) -> &[f64] {
        &self.scores[date_row * self.n_stocks..(date_row + 1) * self.n_stocks]
    }
}

/// Aggregate pair z-scores into stock-level signals.
///
/// `paths[k]` is stock k's normalized price path and `offsets` selects the
/// path positions to evaluate (the decision dates, paired with `dates`).
/// Every edge must carry a non-degenerate model; degenerate pairs are the
/// caller's responsibility to drop beforehand.
pub fn aggregate_signals(
    n_stocks: usize,
    edges: &[SignalEdge],
    paths: &[Vec<f64>],
    offsets: &[usize],
    dates: Vec<NaiveDate>,
    mode: WeightMode,
) -> Result<SignalMatrix, SignalError> {
    assert_eq!(dates.len(), offsets.len());
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n_stocks];
    for (e_idx, e) in edges.iter().enumerate() {
        incident[e.i].push(e_idx);
        incident[e.j].push(e_idx);
    }
    // Weights are time-invariant within a window: one softmax per stock.
    let mut weight_for: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_stocks];
    for (s, edge_idxs) in incident.iter().enumerate() {
        if edge_idxs.is_empty() {
            continue;
        }
        let pairs: Vec<(f64, f64)> = edge_idxs
            .iter()
            .map(|&e| (edges[e].model.dist, edges[e].omega))
            .collect();
        let ws = edge_weights(&pairs, mode)?;
        weight_for[s] = edge_idxs.iter().copied().zip(ws).collect();
    }
    let mut scores = vec![0.0; offsets.len() * n_stocks];
    for (row, &t) in offsets.iter().enumerate() {
        for (s, ws) in weight_for.iter().enumerate() {
            let mut acc = 0.0;
            for &(e_idx, w) in ws {
                let e = &edges[e_idx];
                let spread = paths[e.i][t] - paths[e.j][t];
                let z = e.model.zscore(spread)?;
                acc += if s == e.i { -z * w } else { z * w };
            }
            scores[row * n_stocks + s] = acc;
        }
    }
    let degrees: Vec<usize> = incident.iter().map(|v| v.len()).collect();
    let isolated: Vec<bool> = degrees.iter().map(|&d| d == 0).collect();
    Ok(SignalMatrix {
        dates,
        scores,
        n_stocks,
        degrees,
        isolated,
    })
}
