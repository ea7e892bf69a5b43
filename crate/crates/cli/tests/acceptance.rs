//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured quantity. Run with
//! `cargo test -p netrev-cli --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use netrev::backtest::{run_backtest, BacktestConfig, BacktestResult, MarketData, Rebalance};
use netrev::graph::GraphKind;
use netrev::metrics::{factor_regression, max_drawdown, newey_west_tstat, newey_west_tstat_with_lag};
use netrev::relation::{
    build_prompt, CallBudget, ClassificationCache, ClassificationSource, ClassifyOptions,
    FirmSnippets, MockClient, RelationLabel, SnippetSections,
};
use netrev::signal::{
    aggregate_signals, edge_weights, normalized_prices, pair_stats, SignalEdge, WeightMode,
};
use netrev::synth::{generate_universe, oracle_classifier, SynthSpec, SyntheticDataset};

fn market_of(data: &SyntheticDataset) -> MarketData {
    MarketData {
        panel: data.panel.clone(),
        membership: data.membership.clone(),
        embeddings: data.embeddings.clone(),
        industry: Some(data.industry.clone()),
    }
}

fn run_lib_backtest(config: &BacktestConfig, data: &SyntheticDataset) -> BacktestResult {
    let market = market_of(data);
    let client = oracle_classifier(data);
    let mut snippets = data.snippets.clone();
    let mut cache = ClassificationCache::in_memory();
    let budget = CallBudget::unlimited();
    run_backtest(
        config,
        &market,
        &mut snippets,
        &client,
        &mut cache,
        &ClassifyOptions::default(),
        &budget,
    )
    .expect("backtest runs")
}

fn desk_config() -> BacktestConfig {
    BacktestConfig {
        k: 5,
        train_len: 180,
        test_len: 126,
        groups: 5,
        rebalance: Rebalance::Daily,
        graph: GraphKind::Semantic,
        weighting: WeightMode::Softmax,
        filtering: true,
        ..Default::default()
    }
}

#[test]
fn criterion_01_weight_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..200 {
        let n = rng.gen_range(1..=20);
        let incident: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(0.0..30.0), 1.0))
            .collect();
        let ws = edge_weights(&incident, WeightMode::Softmax).unwrap();
        let softmax_sum: f64 = ws.iter().sum::<f64>() / n as f64;
        assert!(
            (softmax_sum - 1.0).abs() < 1e-12,
            "trial {trial}: softmax terms sum {softmax_sum}"
        );
        assert!(
            (ws.iter().sum::<f64>() - n as f64).abs() < 1e-10,
            "trial {trial}: weights sum {} != degree {n}",
            ws.iter().sum::<f64>()
        );
    }
    assert!(start.elapsed().as_secs_f64() < 1.0, "took {:?}", start.elapsed());
    println!(
        "PASS criterion 1: softmax terms sum to 1 (1e-12) and weights sum to degree (1e-10) \
         on 200 random fixtures in {:?}",
        start.elapsed()
    );
}

#[test]
fn criterion_02_zscore_standardization() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_mean = 0.0f64;
    let mut worst_sd = 0.0f64;
    for _ in 0..100 {
        let r_i: Vec<f64> = (0..120).map(|_| rng.gen_range(-0.03..0.03)).collect();
        let r_j: Vec<f64> = (0..120).map(|_| rng.gen_range(-0.03..0.03)).collect();
        let p_i = normalized_prices(&r_i).unwrap();
        let p_j = normalized_prices(&r_j).unwrap();
        let model = pair_stats(&p_i, &p_j).unwrap();
        let zs: Vec<f64> = p_i
            .iter()
            .zip(&p_j)
            .map(|(a, b)| model.zscore(a - b).unwrap())
            .collect();
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        let sd = (zs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>()
            / (zs.len() - 1) as f64)
            .sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_sd = worst_sd.max((sd - 1.0).abs());
    }
    assert!(worst_mean < 1e-10, "worst |mean| {worst_mean}");
    assert!(worst_sd < 1e-10, "worst |sd-1| {worst_sd}");
    assert!(start.elapsed().as_secs_f64() < 1.0);
    println!(
        "PASS criterion 2: 100 random pairs, training z-scores have |mean| <= {worst_mean:.2e} \
         and |sd-1| <= {worst_sd:.2e}"
    );
}

#[test]
fn criterion_03_sign_convention() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..50 {
        let r_i: Vec<f64> = (0..80).map(|_| rng.gen_range(-0.03..0.03)).collect();
        let r_j: Vec<f64> = (0..80).map(|_| rng.gen_range(-0.03..0.03)).collect();
        let p_i = normalized_prices(&r_i).unwrap();
        let p_j = normalized_prices(&r_j).unwrap();
        let model = pair_stats(&p_i[..60], &p_j[..60]).unwrap();
        if model.is_degenerate() {
            continue;
        }
        let edges = vec![SignalEdge {
            i: 0,
            j: 1,
            omega: 1.0,
            model,
        }];
        let paths = vec![p_i, p_j];
        let offsets: Vec<usize> = (59..79).collect();
        let dates: Vec<chrono::NaiveDate> = (0..offsets.len())
            .map(|k| chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
                + chrono::Duration::days(k as i64))
            .collect();
        let m = aggregate_signals(2, &edges, &paths, &offsets, dates, WeightMode::Softmax)
            .unwrap();
        for row in 0..offsets.len() {
            let (a, b) = (m.score(row, 0), m.score(row, 1));
            assert_eq!(a.to_bits(), (-b).to_bits(), "S_i != -S_j exactly");
        }
    }
    println!("PASS criterion 3: two-stock universe has S_i = -S_j exactly on every test day");
}

#[test]
fn criterion_04_newey_west_correctness() {
    let start = Instant::now();

    // (i) L = 0 equals the classic t-statistic to 1e-12.
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let xs: Vec<f64> = (0..500)
            .map(|_| 0.0003 + 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (xs.len() - 1) as f64)
            .sqrt();
        let classic = mean / (sd / (xs.len() as f64).sqrt());
        let nw0 = newey_west_tstat_with_lag(&xs, 0).unwrap();
        worst = worst.max((nw0 - classic).abs());
    }
    assert!(worst < 1e-12, "worst |t_nw(0) - t_classic| = {worst:.2e}");

    // (ii) iid noise, T = 2000: NW/iid standard-error ratio in [0.8, 1.2].
    let xs: Vec<f64> = (0..2000)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let sd = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 1999.0).sqrt();
    let t_iid = mean / (sd / (2000.0f64).sqrt());
    let t_nw = newey_west_tstat(&xs).unwrap();
    let se_ratio = (t_iid / t_nw).abs();
    assert!(
        (0.8..=1.2).contains(&se_ratio),
        "NW/iid SE ratio {se_ratio}"
    );

    // (iii) AR(1) with phi = 0.9 shrinks |t| versus the iid statistic.
    let mut shrunk = 0;
    for seed in 0..100u64 {
        let mut r = ChaCha8Rng::seed_from_u64(40_000 + seed);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..1000)
            .map(|_| {
                x = 0.9 * x + r.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 999.0).sqrt();
        let t_iid = mean / (sd / (1000.0f64).sqrt());
        if newey_west_tstat(&xs).unwrap().abs() < t_iid.abs() {
            shrunk += 1;
        }
    }
    assert!(shrunk >= 95, "only {shrunk}/100 AR(1) trials shrank |t|");
    assert!(start.elapsed().as_secs() < 30);
    println!(
        "PASS criterion 4: t_nw(L=0) == classic ({worst:.1e}); iid SE ratio {se_ratio:.3}; \
         AR(1) shrank |t| in {shrunk}/100 trials ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_05_null_market_manufactures_no_predictability() {
    let start = Instant::now();
    let mut spurious = 0;
    for seed in 0..20u64 {
        let spec = SynthSpec {
            n_stocks: 50,
            n_days: 1500,
            n_clusters: 50, // one stock per cluster: no planted structure
            market_vol: 0.0,
            cluster_vol: 0.0,
            idio_vol: 0.01,
            linked_fraction: 0.0,
            seed: 500 + seed,
            ..Default::default()
        };
        let data = generate_universe(&spec).unwrap();
        let mut config = desk_config();
        config.filtering = false; // nothing to classify on a null market
        config.seed = seed;
        let result = run_lib_backtest(&config, &data);
        let t = newey_west_tstat(&result.ls_returns).unwrap();
        if t.abs() > 1.96 {
            spurious += 1;
        }
    }
    assert!(
        spurious <= 4,
        "{spurious}/20 null-market runs were spuriously significant"
    );
    assert!(start.elapsed().as_secs() < 120, "took {:?}", start.elapsed());
    println!(
        "PASS criterion 5: null market significant in {spurious}/20 runs (<= 4 allowed) \
         in {:?}",
        start.elapsed()
    );
}

fn planted_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n_stocks: 50,
        n_days: 1500,
        n_clusters: 10,
        kappa: 0.1,
        eta: 0.01,
        idio_vol: 0.006,
        market_vol: 0.008,
        cluster_vol: 0.004,
        linked_fraction: 0.4,
        label_plan: BTreeMap::from([
            (RelationLabel::SupplyChain, 0.4),
            (RelationLabel::Peer, 0.3),
            (RelationLabel::Complementary, 0.3),
        ]),
        seed,
        ..Default::default()
    }
}

#[test]
fn criterion_06_planted_signal_recovery_beats_random_graph() {
    let start = Instant::now();
    let mut wins = 0;
    for seed in 0..20u64 {
        let data = generate_universe(&planted_spec(600 + seed)).unwrap();
        let mut semantic = desk_config();
        semantic.seed = seed;
        let sem_result = run_lib_backtest(&semantic, &data);
        let sem_sharpe = sharpe_of(&sem_result);

        let mut random = desk_config();
        random.graph = GraphKind::Random;
        random.filtering = false;
        random.seed = seed;
        let rand_result = run_lib_backtest(&random, &data);
        let rand_sharpe = sharpe_of(&rand_result);

        if sem_sharpe > rand_sharpe {
            wins += 1;
        }
    }
    assert!(wins >= 18, "semantic beat random in only {wins}/20 seeds");
    assert!(start.elapsed().as_secs() < 300, "took {:?}", start.elapsed());
    println!(
        "PASS criterion 6: filtered semantic graph beat the random baseline in {wins}/20 seeds \
         ({:?})",
        start.elapsed()
    );
}

fn sharpe_of(result: &BacktestResult) -> f64 {
    let (_, _, sharpe) = netrev::metrics::annualized_stats(&result.ls_returns).unwrap();
    sharpe
}

#[test]
fn criterion_07_competitor_filtering_benefit() {
    let start = Instant::now();
    let mut wins = 0;
    for seed in 0..20u64 {
        let spec = SynthSpec {
            n_stocks: 48,
            n_clusters: 8,
            n_days: 1500,
            linked_fraction: 0.8,
            competitor_drift: 0.002,
            label_plan: BTreeMap::from([
                (RelationLabel::Competitor, 0.4),
                (RelationLabel::SupplyChain, 0.3),
                (RelationLabel::Peer, 0.3),
            ]),
            seed: 700 + seed,
            ..Default::default()
        };
        let data = generate_universe(&spec).unwrap();
        let mut filtered = desk_config();
        filtered.seed = seed;
        let f_sharpe = sharpe_of(&run_lib_backtest(&filtered, &data));

        let mut unfiltered = desk_config();
        unfiltered.filtering = false;
        unfiltered.seed = seed;
        let u_sharpe = sharpe_of(&run_lib_backtest(&unfiltered, &data));
        if f_sharpe >= u_sharpe {
            wins += 1;
        }
    }
    assert!(wins >= 16, "filtering helped in only {wins}/20 seeds");
    assert!(start.elapsed().as_secs() < 300, "took {:?}", start.elapsed());
    println!(
        "PASS criterion 7: filtering out planted competitors kept or improved Sharpe in \
         {wins}/20 seeds ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_08_prompt_bit_exactness() {
    let a = FirmSnippets::new(
        "AAA".to_string(),
        2014,
        SnippetSections {
            description: "Maker of industrial widgets for manufacturers.".into(),
            segments: "The widgets segment serves original equipment makers.".into(),
            competitors: "We compete with other widget makers.".into(),
        },
    );
    let b = FirmSnippets::new(
        "BBB".to_string(),
        2014,
        SnippetSections {
            description: "Distributor of specialty widgets.".into(),
            segments: "Distribution is organized in one segment.".into(),
            competitors: String::new(),
        },
    );
    let prompt = build_prompt(&a, &b, 2014).unwrap();
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/golden/prompt_v1.txt");
    let golden = std::fs::read_to_string(&golden_path).expect("golden file");
    assert_eq!(prompt.as_bytes(), golden.as_bytes(), "prompt != golden");
    println!("PASS criterion 8: build_prompt matches the committed golden file byte-for-byte");
}

#[test]
fn criterion_09_cache_idempotence() {
    let data = generate_universe(&SynthSpec {
        n_stocks: 24,
        n_days: 90,
        n_clusters: 6,
        seed: 909,
        ..Default::default()
    })
    .unwrap();
    let vintage_year = data.vintages[0];
    let vintage = data.embeddings.vintage(vintage_year).unwrap();
    let eligible: Vec<String> = data.panel.stocks().to_vec();
    let graph = netrev::graph::build_candidate_graph(vintage, &eligible, 4).unwrap();

    let dir = tempfile::TempDir::new().unwrap();
    let cache_path = dir.path().join("classifications.jsonl");
    let opts = ClassifyOptions::default();
    let budget = CallBudget::unlimited();

    let run = |client: &MockClient| {
        let mut cache = ClassificationCache::open(&cache_path).unwrap();
        let mut snippets = data.snippets.clone();
        netrev::relation::classify_edges(
            &graph,
            &mut snippets,
            vintage_year,
            client,
            &mut cache,
            &opts,
            &budget,
        )
        .unwrap()
    };

    let client = oracle_classifier(&data);
    let (first, stats1) = run(&client);
    assert_eq!(stats1.live_calls, graph.n_edges());
    let calls_after_first = client.calls();

    let (second, stats2) = run(&client);
    assert_eq!(client.calls(), calls_after_first, "rerun issued live calls");
    assert_eq!(stats2.live_calls, 0);
    assert_eq!(stats2.cache_hits, graph.n_edges());

    // Identical labels and evidence; provenance flips live -> cache.
    let normalize = |mut g: netrev::relation::LabeledGraph| {
        for e in &mut g.edges {
            e.source = ClassificationSource::Cache;
        }
        serde_json::to_string(&g).unwrap()
    };
    assert_eq!(normalize(first), normalize(second.clone()));

    // A third pass is bit-identical to the second, provenance included.
    let (third, _) = run(&client);
    assert_eq!(
        serde_json::to_string(&second).unwrap(),
        serde_json::to_string(&third).unwrap()
    );
    println!(
        "PASS criterion 9: warm-cache rerun issued 0 live calls and reproduced the labeled \
         graph exactly"
    );
}

#[test]
fn criterion_10_metrics_unit_oracles() {
    // Hand drawdown curve [1, 1.1, 0.99, 1.2].
    let mdd = max_drawdown(&[0.1, -0.1, 1.2 / 0.99 - 1.0]).unwrap();
    assert!((mdd - (-0.10)).abs() < 1e-12, "mdd {mdd}");

    // Noise-free affine fit.
    let x: Vec<f64> = (0..120).map(|i| (i as f64 * 0.13).sin()).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
    let fit = factor_regression(&y, &[x]).unwrap();
    assert!((fit.alpha - 0.5).abs() < 1e-10, "alpha {}", fit.alpha);
    assert!((fit.betas[0] - 2.0).abs() < 1e-10, "beta {}", fit.betas[0]);

    // Static book trades nothing.
    let date = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let book: std::collections::BTreeMap<String, f64> =
        [("A".to_string(), 1.0), ("B".to_string(), -1.0)].into();
    let series = vec![
        (date, book.clone()),
        (date + chrono::Duration::days(1), book.clone()),
        (date + chrono::Duration::days(2), book),
    ];
    let turnover = netrev::backtest::compute_turnover(&series).unwrap();
    assert_eq!(turnover.annualized, 0.0);

    println!(
        "PASS criterion 10: mdd = {mdd:.12}, regression alpha {:.12} beta {:.12}, \
         static turnover 0",
        fit.alpha, fit.betas[0]
    );
}

#[test]
fn criterion_11_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_netrev");
    let dir = tempfile::TempDir::new().unwrap();
    let spec_path = dir.path().join("spec.toml");
    std::fs::write(
        &spec_path,
        "n_stocks = 30\nn_days = 420\nn_clusters = 6\nseed = 77\n",
    )
    .unwrap();
    let market_dir = dir.path().join("market");
    let status = Command::new(bin)
        .args(["synth", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(&market_dir)
        .status()
        .unwrap();
    assert!(status.success());

    let config = market_dir.join("run.toml");
    let text = std::fs::read_to_string(&config).unwrap();
    std::fs::write(
        &config,
        text.replace("train_len = 180", "train_len = 120")
            .replace("test_len = 126", "test_len = 60"),
    )
    .unwrap();

    let run = || {
        let status = Command::new(bin)
            .args(["backtest", "--config"])
            .arg(&config)
            .status()
            .unwrap();
        assert!(status.success(), "backtest failed");
        let results = market_dir.join("results");
        (
            std::fs::read(results.join("summary.json")).unwrap(),
            std::fs::read(results.join("ls_returns.csv")).unwrap(),
        )
    };
    let (summary1, ls1) = run();
    let (summary2, ls2) = run();
    assert_eq!(summary1, summary2, "summary.json differs between reruns");
    assert_eq!(ls1, ls2, "ls_returns.csv differs between reruns");
    println!("PASS criterion 11: repeated cmd_backtest produced byte-identical summary.json and ls_returns.csv");
}

#[test]
fn criterion_12_desk_scale_performance() {
    let start = Instant::now();
    let data = generate_universe(&planted_spec(1200)).unwrap();
    let config = desk_config();
    let result = run_lib_backtest(&config, &data);
    assert_eq!(result.windows.len(), 10);
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "full synthetic backtest took {elapsed:?}"
    );
    println!(
        "PASS criterion 12: N=50, T=1500, K=5, G=5, {} windows ran in {elapsed:?} (< 60s)",
        result.windows.len()
    );
}
