//! `netrev classify`: classify candidate edges for every window, warming the
//! shared cache, and print hit/call statistics.

use netrev::backtest::make_windows;
use netrev::graph::{build_candidate_graph, build_industry_graph, build_random_graph, GraphKind};
use netrev::panel::slice_universe;
use netrev::relation::{classify_edges, CallBudget, ClassificationCache, ClassifyStats};

use crate::commands::{load_market, snippet_source};
use crate::config::RunConfig;
use crate::CliError;

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let market = load_market(config)?;
    let mut snippets = snippet_source(config, &market);
    let client = config.build_client()?;
    let mut cache = ClassificationCache::open(&config.output.cache)?;
    let budget = match config.classifier.call_budget {
        Some(limit) => CallBudget::limited(limit),
        None => CallBudget::unlimited(),
    };
    let opts = config.classify_options();
    let windows = make_windows(
        market.panel.dates(),
        config.backtest.train_len,
        config.backtest.test_len,
    )?;

    let mut totals = ClassifyStats::default();
    let result: Result<(), CliError> = (|| {
        for (idx, window) in windows.iter().enumerate() {
            let slice = slice_universe(
                &market.panel,
                &market.membership,
                &market.embeddings,
                window,
                config.backtest.groups,
            )?;
            let graph = match config.backtest.graph {
                GraphKind::Semantic => {
                    let vintage =
                        market
                            .embeddings
                            .vintage(slice.vintage_year)
                            .ok_or_else(|| {
                                CliError::Config(format!(
                                    "no embeddings for vintage {}",
                                    slice.vintage_year
                                ))
                            })?;
                    build_candidate_graph(vintage, &slice.eligible, config.backtest.k)?
                }
                GraphKind::Random => build_random_graph(
                    &slice.eligible,
                    config.backtest.k,
                    config.backtest.seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                )?,
                GraphKind::Industry => {
                    let codes = market.industry.as_ref().ok_or_else(|| {
                        CliError::Config("industry graph requires data.sic".into())
                    })?;
                    build_industry_graph(&slice.eligible, codes)?
                }
            };
            let (_, stats) = classify_edges(
                &graph,
                snippets.as_mut(),
                slice.vintage_year,
                client.as_ref(),
                &mut cache,
                &opts,
                &budget,
            )?;
            totals.edges += stats.edges;
            totals.cache_hits += stats.cache_hits;
            totals.live_calls += stats.live_calls;
            totals.fallbacks += stats.fallbacks;
            for (label, count) in stats.label_histogram {
                *totals.label_histogram.entry(label).or_insert(0) += count;
            }
        }
        Ok(())
    })();

    println!("windows: {}", windows.len());
    println!("edges: {}", totals.edges);
    println!("cache hits: {}", totals.cache_hits);
    println!("live calls: {}", totals.live_calls);
    println!("fallbacks: {}", totals.fallbacks);
    println!("labels:");
    for (label, count) in &totals.label_histogram {
        println!("  {label}: {count}");
    }
    if totals.fallbacks > 0 {
        eprintln!(
            "warning: {} edges fell back to `unrelated` (missing snippets or exhausted retries)",
            totals.fallbacks
        );
    }
    result?;
    println!("cache: {} ({} records)", config.output.cache.display(), cache.len());
    Ok(())
}
