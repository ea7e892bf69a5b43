//! Stock-network construction, relation-aware pair signals, and long-short backtesting.
//!
//! The pipeline has four stages:
//!
//! 1. **Ingest** ([`panel`]): daily return panels, index membership, and
//!    per-vintage text embeddings, sliced into per-window eligible universes.
//! 2. **Graph** ([`graph`]): a top-K cosine-similarity candidate graph over
//!    firm embeddings, plus random and industry-code baselines.
//! 3. **Relations** ([`relation`]): each candidate edge is classified into an
//!    economic relation taxonomy by a pluggable classifier client (live HTTP,
//!    cached, or a deterministic test double), then filtered and weighted.
//! 4. **Signals & portfolio** ([`signal`], [`backtest`], [`metrics`]): pair
//!    spread z-scores are aggregated into stock-level scores with
//!    distance-softmax weights, stocks are sorted into groups, and the
//!    long-short spread is evaluated with HAC-robust statistics.
//!
//! [`synth`] generates fully-labeled synthetic markets with planted
//! mean-reverting pairs so the whole pipeline can be verified end to end
//! without proprietary data.

pub mod backtest;
pub mod graph;
pub mod metrics;
pub mod panel;
pub mod relation;
pub mod signal;
pub mod synth;

/// Stock identifier as it appears in input files (ticker, PERMNO, etc.).
pub type StockId = String;

/// Trading days per year used for all annualization.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
