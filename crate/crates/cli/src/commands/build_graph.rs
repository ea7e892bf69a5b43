//! `netrev build-graph`: export the candidate graph of one window.

use std::path::Path;

use netrev::backtest::make_windows;
use netrev::graph::{
    build_candidate_graph, build_industry_graph, build_random_graph, write_edges_csv, GraphKind,
};
use netrev::panel::slice_universe;

use crate::commands::load_market;
use crate::config::RunConfig;
use crate::CliError;

pub fn run(config: &RunConfig, window_idx: usize, out: Option<&Path>) -> Result<(), CliError> {
    let market = load_market(config)?;
    let windows = make_windows(
        market.panel.dates(),
        config.backtest.train_len,
        config.backtest.test_len,
    )?;
    let window = windows.get(window_idx).ok_or_else(|| {
        CliError::Config(format!(
            "window {window_idx} out of range (calendar admits {})",
            windows.len()
        ))
    })?;
    let slice = slice_universe(
        &market.panel,
        &market.membership,
        &market.embeddings,
        window,
        config.backtest.groups,
    )?;
    let graph = match config.backtest.graph {
        GraphKind::Semantic => {
            let vintage = market
                .embeddings
                .vintage(slice.vintage_year)
                .ok_or_else(|| {
                    CliError::Config(format!("no embeddings for vintage {}", slice.vintage_year))
                })?;
            build_candidate_graph(vintage, &slice.eligible, config.backtest.k)?
        }
        GraphKind::Random => {
            build_random_graph(&slice.eligible, config.backtest.k, config.backtest.seed)?
        }
        GraphKind::Industry => {
            let codes = market
                .industry
                .as_ref()
                .ok_or_else(|| CliError::Config("industry graph requires data.sic".into()))?;
            build_industry_graph(&slice.eligible, codes)?
        }
    };
    let default_out = config
        .output
        .dir
        .join(format!("edges_w{window_idx}.csv"));
    let out = out.unwrap_or(&default_out);
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Unwritable {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    write_edges_csv(&graph, out)?;
    println!(
        "window {window_idx}: {} nodes, {} edges ({}) -> {}",
        graph.n_nodes(),
        graph.n_edges(),
        graph.kind,
        out.display()
    );
    Ok(())
}
