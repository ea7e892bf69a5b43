//! Subcommand implementations and shared data loading.

pub mod backtest;
pub mod build_graph;
pub mod classify;
pub mod ingest;
pub mod report;
pub mod synth;

use netrev::backtest::MarketData;
use netrev::panel::{load_embeddings, load_membership, load_returns};
use netrev::relation::{SnippetSource, SnippetStore};

use crate::config::RunConfig;
use crate::CliError;

pub fn load_market(config: &RunConfig) -> Result<MarketData, CliError> {
    let panel = load_returns(&config.data.returns)?;
    let membership = load_membership(&config.data.membership)?;
    let embeddings = load_embeddings(&config.data.embeddings)?;
    let industry = config
        .data
        .sic
        .as_ref()
        .map(|p| netrev::graph::load_industry_codes(p))
        .transpose()?;
    Ok(MarketData {
        panel,
        membership,
        embeddings,
        industry,
    })
}

/// Filesystem snippet source over `data.filings`. When no filings root is
/// configured, an empty source is returned and classification falls back to
/// `unrelated` for every uncached edge.
pub fn snippet_source(config: &RunConfig, market: &MarketData) -> Box<dyn SnippetSource> {
    match &config.data.filings {
        Some(root) => Box::new(SnippetStore::new(
            root.clone(),
            config.snippets.clone(),
            market.panel.stocks().to_vec(),
        )),
        None => Box::new(netrev::relation::MapSnippets::default()),
    }
}
