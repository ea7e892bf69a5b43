//! `netrev backtest`: run the rolling backtest (or the five-row ablation
//! sweep) and emit `ls_returns.csv`, `cumcurves.csv`, and `summary.json`.

use std::fmt::Write as _;
use std::path::Path;

use netrev::backtest::{run_backtest, BacktestResult, MarketData};
use netrev::graph::GraphKind;
use netrev::metrics::{
    annualized_stats, factor_regression, load_factors, max_drawdown, newey_west_tstat,
    FactorRegressionResult, PerfReport,
};
use netrev::relation::{CallBudget, ClassificationCache};
use netrev::signal::{WeightMode, WindowSpec};
use serde::Serialize;

use crate::commands::{load_market, snippet_source};
use crate::config::RunConfig;
use crate::output::{stage_and_swap, write_json, write_text};
use crate::CliError;

/// Summary block kept free of cache-state-dependent counters so identical
/// configurations reproduce identical bytes regardless of cache warmth.
#[derive(Serialize)]
struct SummaryDiagnostics {
    zero_filled_returns: usize,
    degenerate_edges_skipped: usize,
    isolated_stock_windows: usize,
    candidate_edges: usize,
    refined_edges: usize,
    classification_fallbacks: usize,
    label_histogram: std::collections::BTreeMap<String, usize>,
}

#[derive(Serialize)]
struct Conventions {
    turnover: &'static str,
    annualization: &'static str,
    nw_bandwidth: &'static str,
    signal_timing: &'static str,
}

const CONVENTIONS: Conventions = Conventions {
    turnover: "one-sided: mean over days of 0.5 * L1 weight change, times 252",
    annualization: "arithmetic: mean*252, stdev(n-1)*sqrt(252), zero risk-free rate",
    nw_bandwidth: "Bartlett kernel, automatic lag floor(4*(T/100)^(2/9))",
    signal_timing: "positions form at each decision close and earn the next day's return",
};

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a RunConfig,
    variant: Option<&'a str>,
    perf: &'a PerfReport,
    factor_regression: &'a Option<FactorRegressionResult>,
    n_windows: usize,
    windows: &'a [WindowSpec],
    diagnostics: SummaryDiagnostics,
    conventions: Conventions,
}

struct RunOutcome {
    result: BacktestResult,
    perf: PerfReport,
    regression: Option<FactorRegressionResult>,
}

fn execute(
    config: &RunConfig,
    market: &MarketData,
    budget: &CallBudget,
) -> Result<RunOutcome, CliError> {
    let mut snippets = snippet_source(config, market);
    let client = if config.backtest.filtering {
        config.build_client()?
    } else {
        RunConfig::null_client()
    };
    let mut cache = ClassificationCache::open(&config.output.cache)?;
    let result = run_backtest(
        &config.backtest,
        market,
        snippets.as_mut(),
        client.as_ref(),
        &mut cache,
        &config.classify_options(),
        budget,
    )?;
    let (r_ann, sigma_ann, sharpe) = annualized_stats(&result.ls_returns)?;
    let perf = PerfReport {
        r_ann,
        sigma_ann,
        sharpe,
        mdd: max_drawdown(&result.ls_returns)?,
        to_ann: result.turnover.annualized,
        t_nw: newey_west_tstat(&result.ls_returns)?,
        n_days: result.ls_returns.len(),
    };
    let regression = match &config.data.factors {
        Some(path) => {
            let table = load_factors(path)?;
            let columns = table.aligned_to(&result.dates)?;
            Some(factor_regression(&result.ls_returns, &columns)?)
        }
        None => None,
    };
    Ok(RunOutcome {
        result,
        perf,
        regression,
    })
}

fn csv_float(v: f64) -> String {
    format!("{v}")
}

fn write_run(
    dir: &Path,
    config: &RunConfig,
    variant: Option<&str>,
    outcome: &RunOutcome,
) -> Result<(), CliError> {
    let result = &outcome.result;
    let groups = config.backtest.groups;

    let mut ls = String::from("date,r_ls");
    for g in 1..=groups {
        write!(ls, ",g{g}").unwrap();
    }
    ls.push('\n');
    for (row, date) in result.dates.iter().enumerate() {
        write!(ls, "{date},{}", csv_float(result.ls_returns[row])).unwrap();
        for g in 0..groups {
            write!(ls, ",{}", csv_float(result.group_returns[row][g])).unwrap();
        }
        ls.push('\n');
    }
    write_text(&dir.join("ls_returns.csv"), &ls)?;

    let mut cum = String::from("date,cum_ls");
    for g in 1..=groups {
        write!(cum, ",cum_g{g}").unwrap();
    }
    cum.push('\n');
    let mut level_ls = 1.0f64;
    let mut level_g = vec![1.0f64; groups];
    for (row, date) in result.dates.iter().enumerate() {
        level_ls *= 1.0 + result.ls_returns[row];
        write!(cum, "{date},{}", csv_float(level_ls)).unwrap();
        for g in 0..groups {
            level_g[g] *= 1.0 + result.group_returns[row][g];
            write!(cum, ",{}", csv_float(level_g[g])).unwrap();
        }
        cum.push('\n');
    }
    write_text(&dir.join("cumcurves.csv"), &cum)?;

    let diag = &result.diagnostics;
    write_json(
        &dir.join("summary.json"),
        &Summary {
            config,
            variant,
            perf: &outcome.perf,
            factor_regression: &outcome.regression,
            n_windows: result.windows.len(),
            windows: &result.windows,
            diagnostics: SummaryDiagnostics {
                zero_filled_returns: diag.zero_filled_returns,
                degenerate_edges_skipped: diag.degenerate_edges_skipped,
                isolated_stock_windows: diag.isolated_stock_windows,
                candidate_edges: diag.candidate_edges,
                refined_edges: diag.refined_edges,
                classification_fallbacks: diag.classify.fallbacks,
                label_histogram: diag.classify.label_histogram.clone(),
            },
            conventions: CONVENTIONS,
        },
    )?;
    Ok(())
}

fn print_headline(name: &str, outcome: &RunOutcome) {
    let perf = &outcome.perf;
    println!(
        "{name}: sharpe {:.3}, r_ann {:.2}%, vol {:.2}%, mdd {:.2}%, to {:.1}x, t_nw {:.2}, {} days",
        perf.sharpe,
        100.0 * perf.r_ann,
        100.0 * perf.sigma_ann,
        100.0 * perf.mdd,
        perf.to_ann,
        perf.t_nw,
        perf.n_days
    );
    let classify = &outcome.result.diagnostics.classify;
    if classify.edges > 0 {
        println!(
            "  classification: {} edges, {} cache hits, {} live calls, {} fallbacks",
            classify.edges, classify.cache_hits, classify.live_calls, classify.fallbacks
        );
    }
}

pub fn run_single(config: &RunConfig) -> Result<(), CliError> {
    let market = load_market(config)?;
    let budget = match config.classifier.call_budget {
        Some(limit) => CallBudget::limited(limit),
        None => CallBudget::unlimited(),
    };
    let outcome = execute(config, &market, &budget)?;
    stage_and_swap(&config.output.dir, |dir| {
        write_run(dir, config, None, &outcome)
    })?;
    print_headline("backtest", &outcome);
    println!("results: {}", config.output.dir.display());
    Ok(())
}

/// The five ablation rows, in presentation order: the unfiltered semantic
/// baseline, the filtered model, the filtered model without distance
/// weighting, and the random / industry graph replacements.
fn sweep_variants(base: &RunConfig) -> Vec<(String, RunConfig)> {
    let rows: [(&str, GraphKind, bool, WeightMode); 5] = [
        ("01_semantic_baseline", GraphKind::Semantic, false, WeightMode::Softmax),
        ("02_llm_filtering", GraphKind::Semantic, true, WeightMode::Softmax),
        ("03_no_distance_weighting", GraphKind::Semantic, true, WeightMode::Equal),
        ("04_random_network", GraphKind::Random, false, WeightMode::Softmax),
        ("05_sic_industry_network", GraphKind::Industry, false, WeightMode::Softmax),
    ];
    rows.iter()
        .map(|(name, graph, filtering, weighting)| {
            let mut config = base.clone();
            config.backtest.graph = *graph;
            config.backtest.filtering = *filtering;
            config.backtest.weighting = *weighting;
            (name.to_string(), config)
        })
        .collect()
}

#[derive(Serialize)]
struct SweepRow {
    variant: String,
    perf: PerfReport,
}

pub fn run_sweep(config: &RunConfig) -> Result<(), CliError> {
    let market = load_market(config)?;
    if market.industry.is_none() {
        return Err(CliError::Config(
            "sweep includes the industry variant; data.sic is required".into(),
        ));
    }
    let budget = match config.classifier.call_budget {
        Some(limit) => CallBudget::limited(limit),
        None => CallBudget::unlimited(),
    };
    let variants = sweep_variants(config);
    let mut outcomes = Vec::with_capacity(variants.len());
    for (name, variant_config) in &variants {
        let outcome = execute(variant_config, &market, &budget)?;
        print_headline(name, &outcome);
        outcomes.push(outcome);
    }
    let sweep_dir = config.output.dir.join("sweep");
    stage_and_swap(&sweep_dir, |dir| {
        let mut index = Vec::with_capacity(variants.len());
        for ((name, variant_config), outcome) in variants.iter().zip(&outcomes) {
            write_run(&dir.join(name), variant_config, Some(name), outcome)?;
            index.push(SweepRow {
                variant: name.clone(),
                perf: outcome.perf.clone(),
            });
        }
        write_json(&dir.join("index.json"), &index)
    })?;
    println!("sweep results: {}", sweep_dir.display());
    Ok(())
}
