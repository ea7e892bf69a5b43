//! `netrev report`: recompute performance statistics from a results
//! directory, optionally with a factor regression.

use std::path::Path;

use chrono::NaiveDate;
use netrev::metrics::{
    annualized_stats, factor_regression, load_factors, max_drawdown, newey_west_tstat, PerfReport,
};
use serde::Serialize;

use crate::CliError;

#[derive(Serialize)]
struct Report {
    perf: PerfReport,
    factor_regression: Option<netrev::metrics::FactorRegressionResult>,
    factor_days_used: Option<usize>,
}

pub fn run(results: &Path, factors: Option<&Path>) -> Result<(), CliError> {
    let ls_path = results.join("ls_returns.csv");
    let mut reader = csv::Reader::from_path(&ls_path).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", ls_path.display()))
    })?;
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut ls: Vec<f64> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", ls_path.display())))?;
        let date = NaiveDate::parse_from_str(rec.get(0).unwrap_or("").trim(), "%Y-%m-%d")
            .map_err(|e| CliError::Config(format!("bad date in ls_returns.csv: {e}")))?;
        let value: f64 = rec
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("bad r_ls in ls_returns.csv: {e}")))?;
        dates.push(date);
        ls.push(value);
    }

    // Turnover cannot be recomputed from returns alone; reuse the stored
    // summary when present.
    let to_ann = std::fs::read_to_string(results.join("summary.json"))
        .ok()
        .and_then(|text| serde_json::from_str::<serde_json::Value>(&text).ok())
        .and_then(|v| v["perf"]["to_ann"].as_f64())
        .unwrap_or(f64::NAN);

    let (r_ann, sigma_ann, sharpe) = annualized_stats(&ls)?;
    let perf = PerfReport {
        r_ann,
        sigma_ann,
        sharpe,
        mdd: max_drawdown(&ls)?,
        to_ann,
        t_nw: newey_west_tstat(&ls)?,
        n_days: ls.len(),
    };

    let (regression, used) = match factors {
        Some(path) => {
            let table = load_factors(path)?;
            let index: std::collections::HashMap<NaiveDate, usize> = table
                .dates
                .iter()
                .enumerate()
                .map(|(i, d)| (*d, i))
                .collect();
            // Inner join: regress only on days the factor file covers.
            let mut y = Vec::new();
            let mut columns: Vec<Vec<f64>> = vec![Vec::new(); table.columns.len()];
            for (row, date) in dates.iter().enumerate() {
                if let Some(&fi) = index.get(date) {
                    y.push(ls[row]);
                    for (c, col) in table.columns.iter().enumerate() {
                        columns[c].push(col[fi]);
                    }
                }
            }
            let n = y.len();
            (Some(factor_regression(&y, &columns)?), Some(n))
        }
        None => (None, None),
    };

    let report = Report {
        perf,
        factor_regression: regression,
        factor_days_used: used,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("serializable")
    );
    Ok(())
}
