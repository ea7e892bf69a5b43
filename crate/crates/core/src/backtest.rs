//! Rolling-window backtest: universe slicing, graph construction, relation
//! filtering, signal aggregation, group sorting, and return accrual.
//!
//! Signals are evaluated at the close of each decision date — the last
//! training day through the next-to-last test day — and the positions formed
//! there earn the following trading day's returns. Each window therefore
//! realizes exactly `test_len` long-short returns covering its test period,
//! windows tile the evaluation span without overlap, and no computation for
//! a window touches returns dated after its end.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    build_candidate_graph, build_industry_graph, build_random_graph, CandidateGraph, GraphError,
    GraphKind,
};
use crate::panel::{
    slice_universe, EmbeddingSet, MembershipTable, PanelError, ReturnPanel, UniverseSlice,
};
use crate::relation::{
    apply_relation_filter, classify_edges, refine_without_filter, CallBudget, ClassifierClient,
    ClassificationCache, ClassifyOptions, ClassifyStats, RefinedGraph, RelationError,
    RelationWeights, SnippetSource,
};
use crate::signal::{
    aggregate_signals, normalized_prices, pair_stats, SignalEdge, SignalError, SignalMatrix,
    WeightMode, WindowSpec,
};
use crate::{StockId, TRADING_DAYS_PER_YEAR};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("window {index}: {source}")]
    InWindow {
        index: usize,
        #[source]
        source: Box<BacktestError>,
    },
    #[error("calendar too short: {calendar} dates cannot fit train {train} + test {test}")]
    CalendarTooShort {
        calendar: usize,
        train: usize,
        test: usize,
    },
    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },
    #[error("fewer scored stocks ({scored}) than groups ({groups})")]
    TooFewScored { scored: usize, groups: usize },
    #[error("group {group} is empty on {date}")]
    EmptyGroup { group: usize, date: NaiveDate },
    #[error("no trading day after assignment date {date}")]
    NoNextDay { date: NaiveDate },
    #[error("turnover needs at least 2 dated weight vectors, got {got}")]
    TooFewWeightDates { got: usize },
    #[error("no embeddings for vintage year {year}")]
    MissingVintage { year: i32 },
    #[error("industry graph mode requires industry codes")]
    MissingIndustryCodes,
}

/// When group membership is re-formed from fresh signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rebalance {
    Daily,
    /// Re-form every `m` trading days within each window.
    Every(usize),
}

/// Full parameterization of one backtest run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    /// Neighbors per stock in the candidate graph.
    pub k: usize,
    /// Training days per window.
    pub train_len: usize,
    /// Test days per window; windows advance by this amount.
    pub test_len: usize,
    /// Number of signal-sorted groups.
    pub groups: usize,
    pub rebalance: Rebalance,
    pub graph: GraphKind,
    pub weighting: WeightMode,
    /// Classify and filter candidate edges before signal construction.
    pub filtering: bool,
    pub relation_weights: RelationWeights,
    pub seed: u64,
    /// Keep per-window signal matrices for the diagnostic dump.
    pub dump_signals: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            k: 5,
            train_len: 180,
            test_len: 42,
            groups: 5,
            rebalance: Rebalance::Daily,
            graph: GraphKind::Semantic,
            weighting: WeightMode::Softmax,
            filtering: true,
            relation_weights: RelationWeights::default(),
            seed: 0,
            dump_signals: false,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        let fail = |reason: &str| {
            Err(BacktestError::InvalidConfig {
                reason: reason.to_string(),
            })
        };
        if self.groups < 2 {
            return fail("groups must be >= 2");
        }
        if self.train_len < 2 {
            return fail("train_len must be >= 2");
        }
        if self.test_len < 1 {
            return fail("test_len must be >= 1");
        }
        if self.k == 0 {
            return fail("k must be >= 1");
        }
        if let Rebalance::Every(m) = self.rebalance {
            if m == 0 {
                return fail("rebalance interval must be >= 1");
            }
        }
        Ok(())
    }
}

/// Consecutive windows advancing by `test_len`; the last partial window is
/// dropped, so test periods tile the evaluation span without overlap.
pub fn make_windows(
    calendar: &[NaiveDate],
    train_len: usize,
    test_len: usize,
) -> Result<Vec<WindowSpec>, BacktestError> {
    let mut windows = Vec::new();
    let mut start = 0usize;
    while start + train_len + test_len <= calendar.len() {
        windows.push(WindowSpec {
            t0: calendar[start],
            t1: calendar[start + train_len - 1],
            t2: calendar[start + train_len + test_len - 1],
            train_len,
            test_len,
        });
        start += test_len;
    }
    if windows.is_empty() {
        return Err(BacktestError::CalendarTooShort {
            calendar: calendar.len(),
            train: train_len,
            test: test_len,
        });
    }
    Ok(windows)
}

/// Group membership at one rebalance date. Group indices are 1-based:
/// group 1 holds the lowest signals (short side), group G the highest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAssignment {
    /// Member positions (into the scored stock list) per group.
    pub members: Vec<Vec<usize>>,
}

impl GroupAssignment {
    pub fn n_groups(&self) -> usize {
        self.members.len()
    }
}

/// Ascending sort by signal with ties broken by stock id; the stock of rank
/// k (0-based) lands in group `floor(k·G/N) + 1`, so group sizes differ by
/// at most one.
pub fn sort_quintiles(
    scores: &[f64],
    ids: &[StockId],
    groups: usize,
) -> Result<GroupAssignment, BacktestError> {
    assert_eq!(scores.len(), ids.len());
    let n = scores.len();
    if n < groups {
        return Err(BacktestError::TooFewScored {
            scored: n,
            groups,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap()
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    let mut members = vec![Vec::new(); groups];
    for (rank, &stock) in order.iter().enumerate() {
        let g = rank * groups / n;
        members[g].push(stock);
    }
    Ok(GroupAssignment { members })
}

/// An assignment tagged with the date its signals were observed.
#[derive(Debug, Clone)]
pub struct DatedAssignment {
    pub date: NaiveDate,
    pub assignment: GroupAssignment,
}

/// Per-group and long-short daily returns realized from an assignment
/// series: each assignment governs the trading days after its date up to and
/// including the next assignment's date (or `through` for the last one), and
/// groups are equal-weighted means of member returns each day.
pub fn compute_group_returns(
    series: &[DatedAssignment],
    panel: &ReturnPanel,
    stocks: &[StockId],
    through: NaiveDate,
) -> Result<GroupReturns, BacktestError> {
    let columns: Vec<usize> = stocks
        .iter()
        .map(|s| {
            panel
                .stock_pos(s)
                .ok_or_else(|| PanelError::DateNotInCalendar {
                    date: NaiveDate::MIN,
                })
        })
        .collect::<Result<_, _>>()
        .map_err(|_| BacktestError::InvalidConfig {
            reason: "assignment stock not in panel".into(),
        })?;
    let through_idx = panel
        .date_pos(through)
        .ok_or(PanelError::DateNotInCalendar { date: through })?;
    let mut dates = Vec::new();
    let mut per_group: Vec<Vec<f64>> = Vec::new();
    let mut ls = Vec::new();
    for (idx, dated) in series.iter().enumerate() {
        let formed = panel
            .date_pos(dated.date)
            .ok_or(PanelError::DateNotInCalendar { date: dated.date })?;
        let until = match series.get(idx + 1) {
            Some(next) => panel
                .date_pos(next.date)
                .ok_or(PanelError::DateNotInCalendar { date: next.date })?,
            None => through_idx,
        };
        if formed + 1 > until {
            return Err(BacktestError::NoNextDay { date: dated.date });
        }
        for day in formed + 1..=until {
            let mut row = Vec::with_capacity(dated.assignment.n_groups());
            for (g, members) in dated.assignment.members.iter().enumerate() {
                if members.is_empty() {
                    return Err(BacktestError::EmptyGroup {
                        group: g + 1,
                        date: dated.date,
                    });
                }
                let sum: f64 = members
                    .iter()
                    .map(|&k| panel.value(day, columns[k]).unwrap_or(0.0))
                    .sum();
                row.push(sum / members.len() as f64);
            }
            ls.push(row[row.len() - 1] - row[0]);
            per_group.push(row);
            dates.push(panel.dates()[day]);
        }
    }
    Ok(GroupReturns {
        dates,
        per_group,
        ls,
    })
}

/// Daily realized group returns and the long-short spread.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReturns {
    pub dates: Vec<NaiveDate>,
    /// One row per date, one column per group (group 1 first).
    pub per_group: Vec<Vec<f64>>,
    pub ls: Vec<f64>,
}

/// Daily turnover series and its annualization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnoverStats {
    /// `TO_t = ½ Σ_i |w_{i,t} − w_{i,t−1}|`, one per consecutive pair.
    pub daily: Vec<f64>,
    /// `mean(TO_t) × 252`, reported as a multiple.
    pub annualized: f64,
}

/// One-sided turnover of a dated weight series.
pub fn compute_turnover(
    weights: &[(NaiveDate, BTreeMap<StockId, f64>)],
) -> Result<TurnoverStats, BacktestError> {
    if weights.len() < 2 {
        return Err(BacktestError::TooFewWeightDates {
            got: weights.len(),
        });
    }
    let mut daily = Vec::with_capacity(weights.len() - 1);
    for pair in weights.windows(2) {
        let (_, prev) = &pair[0];
        let (_, next) = &pair[1];
        let mut l1 = 0.0;
        for (stock, w) in next {
            l1 += (w - prev.get(stock).unwrap_or(&0.0)).abs();
        }
        for (stock, w) in prev {
            if !next.contains_key(stock) {
                l1 += w.abs();
            }
        }
        daily.push(0.5 * l1);
    }
    let annualized = daily.iter().sum::<f64>() / daily.len() as f64 * TRADING_DAYS_PER_YEAR;
    Ok(TurnoverStats { daily, annualized })
}

/// The three loaded datasets plus optional industry codes.
pub struct MarketData {
    pub panel: ReturnPanel,
    pub membership: MembershipTable,
    pub embeddings: EmbeddingSet,
    pub industry: Option<std::collections::HashMap<StockId, String>>,
}

/// Aggregate diagnostics across all windows.
#[derive(Debug, Clone, Default, Serialize)]
pub struct BacktestDiagnostics {
    pub zero_filled_returns: usize,
    pub degenerate_edges_skipped: usize,
    pub isolated_stock_windows: usize,
    pub candidate_edges: usize,
    pub refined_edges: usize,
    pub classify: ClassifyStats,
}

/// One window's signal matrix, retained only when `dump_signals` is set.
#[derive(Debug, Clone)]
pub struct WindowSignals {
    pub window_index: usize,
    pub dates: Vec<NaiveDate>,
    pub stocks: Vec<StockId>,
    /// Row-major dates × stocks.
    pub scores: Vec<f64>,
    pub degrees: Vec<usize>,
}

/// Everything a run produces: concatenated daily series, the weight book,
/// turnover, window boundaries, and diagnostics.
#[derive(Debug)]
pub struct BacktestResult {
    pub dates: Vec<NaiveDate>,
    pub ls_returns: Vec<f64>,
    /// One row per date, one column per group.
    pub group_returns: Vec<Vec<f64>>,
    pub weights: Vec<(NaiveDate, BTreeMap<StockId, f64>)>,
    pub turnover: TurnoverStats,
    pub windows: Vec<WindowSpec>,
    pub diagnostics: BacktestDiagnostics,
    /// Per-window signal dumps; empty unless `dump_signals` was set.
    pub signal_dumps: Vec<WindowSignals>,
}

fn window_seed(seed: u64, window_index: usize) -> u64 {
    seed ^ (window_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn build_graph_for(
    config: &BacktestConfig,
    data: &MarketData,
    slice: &UniverseSlice,
    window_index: usize,
) -> Result<CandidateGraph, BacktestError> {
    match config.graph {
        GraphKind::Semantic => {
            let vintage = data
                .embeddings
                .vintage(slice.vintage_year)
                .ok_or(BacktestError::MissingVintage {
                    year: slice.vintage_year,
                })?;
            Ok(build_candidate_graph(vintage, &slice.eligible, config.k)?)
        }
        GraphKind::Random => Ok(build_random_graph(
            &slice.eligible,
            config.k,
            window_seed(config.seed, window_index),
        )?),
        GraphKind::Industry => {
            let codes = data
                .industry
                .as_ref()
                .ok_or(BacktestError::MissingIndustryCodes)?;
            Ok(build_industry_graph(&slice.eligible, codes)?)
        }
    }
}

struct WindowOutcome {
    dates: Vec<NaiveDate>,
    ls: Vec<f64>,
    group_returns: Vec<Vec<f64>>,
    weights: Vec<(NaiveDate, BTreeMap<StockId, f64>)>,
    degenerate_edges: usize,
    isolated: usize,
    candidate_edges: usize,
    refined_edges: usize,
    classify: Option<ClassifyStats>,
    zero_filled: usize,
    signals: Option<WindowSignals>,
}

#[allow(clippy::too_many_arguments)]
fn run_window(
    config: &BacktestConfig,
    data: &MarketData,
    window: &WindowSpec,
    window_index: usize,
    snippets: &mut dyn SnippetSource,
    client: &dyn ClassifierClient,
    cache: &mut ClassificationCache,
    classify_opts: &ClassifyOptions,
    budget: &CallBudget,
) -> Result<WindowOutcome, BacktestError> {
    let slice = slice_universe(
        &data.panel,
        &data.membership,
        &data.embeddings,
        window,
        config.groups,
    )?;
    let graph = build_graph_for(config, data, &slice, window_index)?;
    let candidate_edges = graph.n_edges();

    let (refined, classify_stats): (RefinedGraph, Option<ClassifyStats>) = if config.filtering {
        let (labeled, stats) = classify_edges(
            &graph,
            snippets,
            slice.vintage_year,
            client,
            cache,
            classify_opts,
            budget,
        )?;
        (
            apply_relation_filter(&labeled, &config.relation_weights),
            Some(stats),
        )
    } else {
        (refine_without_filter(&graph), None)
    };

    let n = slice.eligible.len();
    let paths: Vec<Vec<f64>> = (0..n)
        .map(|k| normalized_prices(&slice.series(&data.panel, k)))
        .collect::<Result<_, _>>()?;
    let train_days = slice.train_days();
    let total_days = slice.t2_idx - slice.t0_idx + 1;

    let pos_of = |id: &StockId| slice.eligible.binary_search(id).expect("eligible sorted");
    let mut degenerate = 0usize;
    let mut sig_edges = Vec::with_capacity(refined.edges.len());
    for e in &refined.edges {
        let ki = pos_of(&e.i);
        let kj = pos_of(&e.j);
        debug_assert!(ki < kj);
        let model = pair_stats(&paths[ki][..train_days], &paths[kj][..train_days])?;
        if model.is_degenerate() {
            degenerate += 1;
            continue;
        }
        sig_edges.push(SignalEdge {
            i: ki,
            j: kj,
            omega: e.omega,
            model,
        });
    }

    // Decision dates: last training day through next-to-last test day.
    let offsets: Vec<usize> = (train_days - 1..total_days - 1).collect();
    let decision_dates: Vec<NaiveDate> = offsets
        .iter()
        .map(|&o| data.panel.dates()[slice.t0_idx + o])
        .collect();
    let matrix: SignalMatrix = aggregate_signals(
        n,
        &sig_edges,
        &paths,
        &offsets,
        decision_dates.clone(),
        config.weighting,
    )?;
    let isolated = matrix.isolated.iter().filter(|&&b| b).count();

    let stride = match config.rebalance {
        Rebalance::Daily => 1,
        Rebalance::Every(m) => m,
    };
    let mut assignments: Vec<(usize, GroupAssignment)> = Vec::new();
    for row in (0..offsets.len()).step_by(stride) {
        let assignment = sort_quintiles(matrix.row(row), &slice.eligible, config.groups)?;
        assignments.push((row, assignment));
    }

    // Accrue returns: the assignment in force on day d is the latest one
    // formed strictly before d.
    let mut dates = Vec::with_capacity(window.test_len);
    let mut ls = Vec::with_capacity(window.test_len);
    let mut group_returns = Vec::with_capacity(window.test_len);
    for row in 0..offsets.len() {
        // Latest assignment formed at or before this decision row.
        let governing = &assignments[row / stride].1;
        let day = slice.t0_idx + offsets[row] + 1;
        let mut row_returns = Vec::with_capacity(config.groups);
        for (g, members) in governing.members.iter().enumerate() {
            if members.is_empty() {
                return Err(BacktestError::EmptyGroup {
                    group: g + 1,
                    date: data.panel.dates()[day],
                });
            }
            let sum: f64 = members
                .iter()
                .map(|&k| slice.return_at(&data.panel, k, day))
                .sum();
            row_returns.push(sum / members.len() as f64);
        }
        ls.push(row_returns[config.groups - 1] - row_returns[0]);
        group_returns.push(row_returns);
        dates.push(data.panel.dates()[day]);
    }

    // Weight book per decision date: fresh targets at rebalances, return
    // drift in between (turnover accounting only).
    let mut weights: Vec<(NaiveDate, BTreeMap<StockId, f64>)> = Vec::new();
    let mut book: BTreeMap<StockId, f64> = BTreeMap::new();
    for row in 0..offsets.len() {
        if row % stride == 0 {
            let assignment = &assignments[row / stride].1;
            book = target_weights(assignment, &slice.eligible, config.groups);
        } else {
            let day = slice.t0_idx + offsets[row];
            for (stock, w) in book.iter_mut() {
                let k = pos_of(stock);
                *w *= 1.0 + slice.return_at(&data.panel, k, day);
            }
        }
        weights.push((decision_dates[row], book.clone()));
    }

    let signals = config.dump_signals.then(|| WindowSignals {
        window_index,
        dates: matrix.dates.clone(),
        stocks: slice.eligible.clone(),
        scores: matrix.scores.clone(),
        degrees: matrix.degrees.clone(),
    });

    Ok(WindowOutcome {
        dates,
        ls,
        group_returns,
        weights,
        degenerate_edges: degenerate,
        isolated,
        candidate_edges,
        refined_edges: refined.n_edges(),
        classify: classify_stats,
        zero_filled: slice.zero_filled,
        signals,
    })
}

fn target_weights(
    assignment: &GroupAssignment,
    ids: &[StockId],
    groups: usize,
) -> BTreeMap<StockId, f64> {
    let mut book = BTreeMap::new();
    let long = &assignment.members[groups - 1];
    let short = &assignment.members[0];
    for &k in long {
        book.insert(ids[k].clone(), 1.0 / long.len() as f64);
    }
    for &k in short {
        book.insert(ids[k].clone(), -1.0 / short.len() as f64);
    }
    book
}

/// Run the full rolling backtest over every window the calendar admits.
#[allow(clippy::too_many_arguments)]
pub fn run_backtest(
    config: &BacktestConfig,
    data: &MarketData,
    snippets: &mut dyn SnippetSource,
    client: &dyn ClassifierClient,
    cache: &mut ClassificationCache,
    classify_opts: &ClassifyOptions,
    budget: &CallBudget,
) -> Result<BacktestResult, BacktestError> {
    config.validate()?;
    let windows = make_windows(data.panel.dates(), config.train_len, config.test_len)?;

    let mut dates = Vec::new();
    let mut ls_returns = Vec::new();
    let mut group_returns = Vec::new();
    let mut weights = Vec::new();
    let mut diagnostics = BacktestDiagnostics::default();
    let mut signal_dumps = Vec::new();
    for (index, window) in windows.iter().enumerate() {
        let outcome = run_window(
            config,
            data,
            window,
            index,
            snippets,
            client,
            cache,
            classify_opts,
            budget,
        )
        .map_err(|e| BacktestError::InWindow {
            index,
            source: Box::new(e),
        })?;
        dates.extend(outcome.dates);
        ls_returns.extend(outcome.ls);
        group_returns.extend(outcome.group_returns);
        weights.extend(outcome.weights);
        diagnostics.zero_filled_returns += outcome.zero_filled;
        diagnostics.degenerate_edges_skipped += outcome.degenerate_edges;
        diagnostics.isolated_stock_windows += outcome.isolated;
        diagnostics.candidate_edges += outcome.candidate_edges;
        diagnostics.refined_edges += outcome.refined_edges;
        if let Some(stats) = outcome.classify {
            diagnostics.classify.edges += stats.edges;
            diagnostics.classify.cache_hits += stats.cache_hits;
            diagnostics.classify.live_calls += stats.live_calls;
            diagnostics.classify.fallbacks += stats.fallbacks;
            for (label, count) in stats.label_histogram {
                *diagnostics
                    .classify
                    .label_histogram
                    .entry(label)
                    .or_insert(0) += count;
            }
        }
        if let Some(signals) = outcome.signals {
            signal_dumps.push(signals);
        }
    }
    let turnover = compute_turnover(&weights)?;
    Ok(BacktestResult {
        dates,
        ls_returns,
        group_returns,
        weights,
        turnover,
        windows,
        diagnostics,
        signal_dumps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calendar(n: usize) -> Vec<NaiveDate> {
        let mut dates = Vec::with_capacity(n);
        let mut d = NaiveDate::from_ymd_opt(2015, 1, 5).unwrap();
        while dates.len() < n {
            if chrono::Datelike::weekday(&d).num_days_from_monday() < 5 {
                dates.push(d);
            }
            d += chrono::Duration::days(1);
        }
        dates
    }

    #[test]
    fn windows_tile_the_calendar() {
        let cal = calendar(300);
        let windows = make_windows(&cal, 180, 60).unwrap();
        assert_eq!(windows.len(), 2);
        assert_eq!(windows[0].t0, cal[0]);
        assert_eq!(windows[0].t1, cal[179]);
        assert_eq!(windows[0].t2, cal[239]);
        assert_eq!(windows[1].t0, cal[60]);
        assert_eq!(windows[1].t1, cal[239]);
        assert_eq!(windows[1].t2, cal[299]);
    }

    #[test]
    fn exact_fit_gives_one_window() {
        let cal = calendar(240);
        let windows = make_windows(&cal, 180, 60).unwrap();
        assert_eq!(windows.len(), 1);
    }

    #[test]
    fn short_calendar_is_an_error() {
        let cal = calendar(239);
        assert!(matches!(
            make_windows(&cal, 180, 60),
            Err(BacktestError::CalendarTooShort { .. })
        ));
    }

    fn ids(n: usize) -> Vec<StockId> {
        (0..n).map(|i| format!("S{i:02}")).collect()
    }

    #[test]
    fn divisible_sort_puts_two_per_group() {
        let scores: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let a = sort_quintiles(&scores, &ids(10), 5).unwrap();
        for g in 0..5 {
            assert_eq!(a.members[g].len(), 2);
        }
        // Lowest two scores land in group 1.
        assert_eq!(a.members[0], vec![0, 1]);
        assert_eq!(a.members[4], vec![8, 9]);
    }

    #[test]
    fn ties_resolve_by_stock_id() {
        let scores = vec![0.0; 6];
        let a = sort_quintiles(&scores, &ids(6), 3).unwrap();
        assert_eq!(a.members[0], vec![0, 1]);
        assert_eq!(a.members[1], vec![2, 3]);
        assert_eq!(a.members[2], vec![4, 5]);
    }

    #[test]
    fn remainder_goes_to_lowest_groups_by_floor_rule() {
        let scores: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let a = sort_quintiles(&scores, &ids(11), 5).unwrap();
        let sizes: Vec<usize> = a.members.iter().map(|m| m.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn too_few_scored_is_an_error() {
        assert!(matches!(
            sort_quintiles(&[1.0, 2.0], &ids(2), 3),
            Err(BacktestError::TooFewScored { .. })
        ));
    }

    fn two_stock_panel() -> ReturnPanel {
        let cal = calendar(3);
        ReturnPanel::new(
            cal,
            vec!["AAA".into(), "BBB".into()],
            vec![0.0, 0.0, 0.02, -0.01, 0.05, 0.03],
            vec![false; 6],
        )
        .unwrap()
    }

    #[test]
    fn group_returns_direct_difference() {
        let panel = two_stock_panel();
        let stocks = vec!["AAA".to_string(), "BBB".to_string()];
        // AAA has the higher signal → group 2 (long); BBB → group 1 (short).
        let series = vec![DatedAssignment {
            date: panel.dates()[0],
            assignment: GroupAssignment {
                members: vec![vec![1], vec![0]],
            },
        }];
        let out = compute_group_returns(&series, &panel, &stocks, panel.dates()[1]).unwrap();
        assert_eq!(out.ls.len(), 1);
        assert!((out.ls[0] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn all_zero_returns_give_zero_groups() {
        let cal = calendar(3);
        let panel = ReturnPanel::new(
            cal,
            vec!["AAA".into(), "BBB".into()],
            vec![0.0; 6],
            vec![false; 6],
        )
        .unwrap();
        let stocks = vec!["AAA".to_string(), "BBB".to_string()];
        let series = vec![DatedAssignment {
            date: panel.dates()[0],
            assignment: GroupAssignment {
                members: vec![vec![0], vec![1]],
            },
        }];
        let out = compute_group_returns(&series, &panel, &stocks, panel.dates()[2]).unwrap();
        assert!(out.ls.iter().all(|&r| r == 0.0));
        assert!(out.per_group.iter().flatten().all(|&r| r == 0.0));
    }

    #[test]
    fn frozen_membership_spans_until_next_assignment() {
        // 4 stocks over 3 days, G=2, one assignment governing both days.
        let cal = calendar(3);
        let stocks: Vec<StockId> = ids(4);
        #[rustfmt::skip]
        let values = vec![
            0.00, 0.00, 0.00, 0.00,
            0.01, 0.02, 0.03, 0.04,
            -0.01, 0.01, 0.02, 0.05,
        ];
        let panel = ReturnPanel::new(cal, stocks.clone(), values, vec![false; 12]).unwrap();
        let series = vec![DatedAssignment {
            date: panel.dates()[0],
            assignment: GroupAssignment {
                members: vec![vec![0, 1], vec![2, 3]],
            },
        }];
        let out = compute_group_returns(&series, &panel, &stocks, panel.dates()[2]).unwrap();
        // Day 1: long (0.03+0.04)/2 − short (0.01+0.02)/2 = 0.035 − 0.015
        assert!((out.ls[0] - 0.02).abs() < 1e-15);
        // Day 2: (0.02+0.05)/2 − (−0.01+0.01)/2 = 0.035 − 0.0
        assert!((out.ls[1] - 0.035).abs() < 1e-15);
    }

    fn book(entries: &[(&str, f64)]) -> BTreeMap<StockId, f64> {
        entries
            .iter()
            .map(|(s, w)| (s.to_string(), *w))
            .collect()
    }

    #[test]
    fn static_book_has_zero_turnover() {
        let cal = calendar(3);
        let w = book(&[("A", 0.5), ("B", -0.5)]);
        let series = vec![(cal[0], w.clone()), (cal[1], w.clone()), (cal[2], w)];
        let stats = compute_turnover(&series).unwrap();
        assert_eq!(stats.daily, vec![0.0, 0.0]);
        assert_eq!(stats.annualized, 0.0);
    }

    #[test]
    fn full_flip_is_turnover_two() {
        let cal = calendar(2);
        let series = vec![
            (cal[0], book(&[("A", 1.0), ("B", -1.0)])),
            (cal[1], book(&[("A", -1.0), ("B", 1.0)])),
        ];
        let stats = compute_turnover(&series).unwrap();
        assert_eq!(stats.daily, vec![2.0]);
    }

    #[test]
    fn alternating_disjoint_books_annualize_to_504() {
        let cal = calendar(11);
        let a = book(&[("A", 1.0), ("B", -1.0)]);
        let b = book(&[("C", 1.0), ("D", -1.0)]);
        let series: Vec<_> = (0..11)
            .map(|i| (cal[i], if i % 2 == 0 { a.clone() } else { b.clone() }))
            .collect();
        let stats = compute_turnover(&series).unwrap();
        assert!(stats.daily.iter().all(|&t| (t - 2.0).abs() < 1e-15));
        assert!((stats.annualized - 2.0 * 252.0).abs() < 1e-12);
    }

    #[test]
    fn turnover_needs_two_books() {
        let cal = calendar(1);
        let series = vec![(cal[0], book(&[("A", 1.0)]))];
        assert!(matches!(
            compute_turnover(&series),
            Err(BacktestError::TooFewWeightDates { got: 1 })
        ));
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut config = BacktestConfig::default();
        config.groups = 1;
        assert!(config.validate().is_err());
        let mut config = BacktestConfig::default();
        config.train_len = 1;
        assert!(config.validate().is_err());
        let mut config = BacktestConfig::default();
        config.rebalance = Rebalance::Every(0);
        assert!(config.validate().is_err());
        assert!(BacktestConfig::default().validate().is_ok());
    }
}
