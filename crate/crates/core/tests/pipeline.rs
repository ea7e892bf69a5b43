//! End-to-end library tests over generated markets.

use std::collections::BTreeMap;

use netrev::backtest::{run_backtest, BacktestConfig, MarketData, Rebalance};
use netrev::graph::{build_candidate_graph, GraphKind};
use netrev::panel::ReturnPanel;
use netrev::relation::{
    classify_edges, CallBudget, ClassificationCache, ClassifyOptions, RelationLabel,
    RelationWeights,
};
use netrev::signal::WeightMode;
use netrev::synth::{generate_universe, oracle_classifier, SynthSpec, SyntheticDataset};

fn market_of(data: &SyntheticDataset) -> MarketData {
    MarketData {
        panel: data.panel.clone(),
        membership: data.membership.clone(),
        embeddings: data.embeddings.clone(),
        industry: Some(data.industry.clone()),
    }
}

fn quick_config() -> BacktestConfig {
    BacktestConfig {
        k: 2,
        train_len: 40,
        test_len: 20,
        groups: 2,
        rebalance: Rebalance::Daily,
        graph: GraphKind::Semantic,
        weighting: WeightMode::Softmax,
        filtering: true,
        relation_weights: RelationWeights::default(),
        seed: 5,
    }
}

fn quick_spec() -> SynthSpec {
    SynthSpec {
        n_stocks: 20,
        n_days: 80,
        n_clusters: 4,
        seed: 17,
        ..Default::default()
    }
}

fn run(
    config: &BacktestConfig,
    data: &SyntheticDataset,
    market: &MarketData,
) -> netrev::backtest::BacktestResult {
    let client = oracle_classifier(data);
    let mut snippets = data.snippets.clone();
    let mut cache = ClassificationCache::in_memory();
    let budget = CallBudget::unlimited();
    run_backtest(
        config,
        market,
        &mut snippets,
        &client,
        &mut cache,
        &ClassifyOptions::default(),
        &budget,
    )
    .unwrap()
}

#[test]
fn rerun_is_bitwise_identical() {
    let data = generate_universe(&quick_spec()).unwrap();
    let market = market_of(&data);
    let config = quick_config();
    let a = run(&config, &data, &market);
    let b = run(&config, &data, &market);
    assert_eq!(a.dates, b.dates);
    assert_eq!(a.ls_returns.len(), 40); // two windows of 20 test days
    for (x, y) in a.ls_returns.iter().zip(&b.ls_returns) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    assert_eq!(a.turnover.daily, b.turnover.daily);
    assert_eq!(a.weights, b.weights);
}

#[test]
fn realized_dates_tile_the_test_spans() {
    let data = generate_universe(&quick_spec()).unwrap();
    let market = market_of(&data);
    let result = run(&quick_config(), &data, &market);
    // Realized return dates are exactly the panel dates after the first
    // training window, with no gaps or repeats.
    let expected: Vec<_> = data.panel.dates()[40..80].to_vec();
    assert_eq!(result.dates, expected);
    // Long-short is built from zero-net groups: r_ls = rG − r1 each day.
    for (row, ls) in result.group_returns.iter().zip(&result.ls_returns) {
        assert!((row[row.len() - 1] - row[0] - ls).abs() < 1e-15);
    }
}

#[test]
fn filtering_is_a_noop_when_every_edge_is_fully_weighted() {
    // Clusters of two with K=1: the candidate graph is exactly the planted
    // pairs, every one labeled peer (weight 1), so filtering changes nothing.
    let spec = SynthSpec {
        n_stocks: 10,
        n_days: 80,
        n_clusters: 5,
        linked_fraction: 1.0,
        label_plan: BTreeMap::from([(RelationLabel::Peer, 1.0)]),
        seed: 23,
        ..Default::default()
    };
    let data = generate_universe(&spec).unwrap();
    let market = market_of(&data);
    let mut config = quick_config();
    config.k = 1;
    let filtered = run(&config, &data, &market);
    config.filtering = false;
    let unfiltered = run(&config, &data, &market);
    assert_eq!(filtered.ls_returns, unfiltered.ls_returns);
    assert_eq!(filtered.weights, unfiltered.weights);
    assert_eq!(
        filtered.diagnostics.refined_edges,
        filtered.diagnostics.candidate_edges
    );
}

#[test]
fn windows_splice_like_independent_runs() {
    // A two-window run equals the two single-window runs spliced, and in
    // particular no window reads data beyond its own end.
    let data = generate_universe(&quick_spec()).unwrap();
    let market = market_of(&data);
    let mut config = quick_config();
    config.filtering = false;

    let full = run(&config, &data, &market);

    let sub_panel = |from: usize, to: usize| -> ReturnPanel {
        let dates = data.panel.dates()[from..to].to_vec();
        let stocks = data.panel.stocks().to_vec();
        let mut values = Vec::new();
        let mut missing = Vec::new();
        for d in from..to {
            for s in 0..stocks.len() {
                match data.panel.value(d, s) {
                    Some(v) => {
                        values.push(v);
                        missing.push(false);
                    }
                    None => {
                        values.push(f64::NAN);
                        missing.push(true);
                    }
                }
            }
        }
        ReturnPanel::new(dates, stocks, values, missing).unwrap()
    };

    let mut spliced = Vec::new();
    for window_start in [0usize, 20] {
        let market_w = MarketData {
            panel: sub_panel(window_start, window_start + 60),
            membership: data.membership.clone(),
            embeddings: data.embeddings.clone(),
            industry: None,
        };
        let part = run(&config, &data, &market_w);
        assert_eq!(part.ls_returns.len(), 20);
        spliced.extend(part.ls_returns);
    }
    assert_eq!(full.ls_returns.len(), spliced.len());
    for (a, b) in full.ls_returns.iter().zip(&spliced) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn oracle_classification_recovers_planted_truth() {
    let data = generate_universe(&quick_spec()).unwrap();
    let vintage_year = data.vintages[0];
    let vintage = data.embeddings.vintage(vintage_year).unwrap();
    let eligible: Vec<String> = data.panel.stocks().to_vec();
    let graph = build_candidate_graph(vintage, &eligible, 3).unwrap();

    let client = oracle_classifier(&data);
    let mut snippets = data.snippets.clone();
    let mut cache = ClassificationCache::in_memory();
    let budget = CallBudget::unlimited();
    let (labeled, stats) = classify_edges(
        &graph,
        &mut snippets,
        vintage_year,
        &client,
        &mut cache,
        &ClassifyOptions::default(),
        &budget,
    )
    .unwrap();

    assert_eq!(stats.edges, graph.n_edges());
    assert_eq!(stats.fallbacks, 0);
    let mut in_truth = 0;
    for edge in &labeled.edges {
        let pair = (edge.i.clone(), edge.j.clone());
        match data.truth.get(&pair) {
            Some(correct) => {
                assert_eq!(edge.label, *correct, "edge {pair:?}");
                in_truth += 1;
            }
            None => assert_eq!(edge.label, RelationLabel::Unrelated, "edge {pair:?}"),
        }
    }
    assert!(in_truth > 0, "candidate graph missed every planted pair");
}

#[test]
fn monthly_rebalance_trades_less_than_daily() {
    let spec = SynthSpec {
        n_stocks: 20,
        n_days: 130,
        n_clusters: 4,
        seed: 29,
        ..Default::default()
    };
    let data = generate_universe(&spec).unwrap();
    let market = market_of(&data);
    let mut config = quick_config();
    config.train_len = 60;
    config.test_len = 40;
    let daily = run(&config, &data, &market);
    config.rebalance = Rebalance::Every(21);
    let monthly = run(&config, &data, &market);
    assert!(
        monthly.turnover.annualized < daily.turnover.annualized,
        "monthly {} vs daily {}",
        monthly.turnover.annualized,
        daily.turnover.annualized
    );
    assert_eq!(daily.ls_returns.len(), monthly.ls_returns.len());
}
