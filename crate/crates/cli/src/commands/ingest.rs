//! `netrev ingest-check`: load every configured input and print a summary.

use netrev::backtest::make_windows;
use netrev::metrics::load_factors;

use crate::config::RunConfig;
use crate::commands::load_market;
use crate::CliError;

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let market = load_market(config)?;
    let panel = &market.panel;
    println!(
        "returns: {} dates x {} stocks ({} missing cells)",
        panel.dates().len(),
        panel.stocks().len(),
        panel.n_missing()
    );
    println!(
        "dates: {} .. {}",
        panel.dates().first().unwrap(),
        panel.dates().last().unwrap()
    );
    println!(
        "membership: {} entries",
        market.membership.entries().len()
    );
    let years: Vec<String> = market
        .embeddings
        .years()
        .map(|y| y.to_string())
        .collect();
    println!(
        "embeddings: {} vintages [{}], zero-norm rows dropped: {}",
        market.embeddings.n_vintages(),
        years.join(", "),
        market.embeddings.zero_norm_dropped
    );
    if let Some(codes) = &market.industry {
        println!("sic: {} codes", codes.len());
    }
    if let Some(filings) = &config.data.filings {
        println!(
            "filings: {} ({})",
            filings.display(),
            if filings.is_dir() { "present" } else { "MISSING" }
        );
    }
    if let Some(path) = &config.data.factors {
        let table = load_factors(path)?;
        println!(
            "factors: {} rows x {} columns",
            table.dates.len(),
            table.names.len()
        );
    }
    if let Some(path) = &config.data.truth {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        println!("truth: {} pairs", text.lines().skip(1).count());
    }
    let windows = make_windows(
        panel.dates(),
        config.backtest.train_len,
        config.backtest.test_len,
    )?;
    println!(
        "windows: {} (train {}, test {})",
        windows.len(),
        config.backtest.train_len,
        config.backtest.test_len
    );
    println!("ok");
    Ok(())
}
