//! `netrev synth`: write a generated market in the exact ingestion formats,
//! plus the ground-truth fixture and a ready-to-run config.

use std::fmt::Write as _;
use std::path::Path;

use netrev::synth::{generate_universe, SynthSpec, SyntheticDataset};
use serde::Serialize;

use crate::output::{stage_and_swap, write_json, write_text};
use crate::CliError;

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    n_stocks: usize,
    n_days: usize,
    vintages: &'a [i32],
    planted_pairs: usize,
    spec: &'a SynthSpec,
}

pub fn run(spec_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| {
        CliError::Config(format!("cannot read spec {}: {e}", spec_path.display()))
    })?;
    let spec: SynthSpec = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", spec_path.display())))?;
    let dataset = generate_universe(&spec)?;

    stage_and_swap(out, |dir| write_dataset(&spec, &dataset, dir))?;
    println!(
        "synthetic market written to {} ({} stocks, {} days, {} planted pairs)",
        out.display(),
        spec.n_stocks,
        spec.n_days,
        dataset.truth.len()
    );
    Ok(())
}

fn write_dataset(spec: &SynthSpec, dataset: &SyntheticDataset, dir: &Path) -> Result<(), CliError> {
    dataset
        .panel
        .write_csv(&dir.join("returns.csv"))
        .map_err(CliError::from)?;

    let mut membership = String::from("stock,start,end\n");
    for e in dataset.membership.entries() {
        writeln!(membership, "{},{},{}", e.stock, e.start, e.end).unwrap();
    }
    write_text(&dir.join("membership.csv"), &membership)?;

    for &year in &dataset.vintages {
        let vintage = dataset.embeddings.vintage(year).expect("vintage present");
        let mut stocks: Vec<_> = vintage.stocks().cloned().collect();
        stocks.sort();
        let mut csv = String::from("stock");
        for d in 1..=vintage.dim {
            write!(csv, ",v{d}").unwrap();
        }
        csv.push('\n');
        for stock in &stocks {
            csv.push_str(stock);
            for v in vintage.get(stock).unwrap() {
                write!(csv, ",{v}").unwrap();
            }
            csv.push('\n');
        }
        write_text(&dir.join("embeddings").join(format!("{year}.csv")), &csv)?;

        for (stock, filing) in sorted(&dataset.filing_texts) {
            write_text(
                &dir.join("filings")
                    .join(year.to_string())
                    .join(format!("{stock}.txt")),
                filing,
            )?;
        }
    }

    let mut sic = String::from("stock,code\n");
    for (stock, code) in sorted(&dataset.industry) {
        writeln!(sic, "{stock},{code}").unwrap();
    }
    write_text(&dir.join("sic.csv"), &sic)?;

    let mut truth = String::from("stock_i,stock_j,label\n");
    let mut pairs: Vec<_> = dataset.truth.iter().collect();
    pairs.sort();
    for ((a, b), label) in pairs {
        writeln!(truth, "{a},{b},{label}").unwrap();
    }
    write_text(&dir.join("truth.csv"), &truth)?;

    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            seed: spec.seed,
            n_stocks: spec.n_stocks,
            n_days: spec.n_days,
            vintages: &dataset.vintages,
            planted_pairs: dataset.truth.len(),
            spec,
        },
    )?;

    write_text(&dir.join("run.toml"), RUN_TOML_TEMPLATE)?;
    Ok(())
}

fn sorted<V>(map: &std::collections::HashMap<String, V>) -> Vec<(&String, &V)> {
    let mut entries: Vec<_> = map.iter().collect();
    entries.sort_by_key(|(k, _)| (*k).clone());
    entries
}

const RUN_TOML_TEMPLATE: &str = "\
# Generated alongside the synthetic dataset; paths are relative to this file.

[data]
returns = \"returns.csv\"
membership = \"membership.csv\"
embeddings = \"embeddings\"
filings = \"filings\"
sic = \"sic.csv\"
truth = \"truth.csv\"

[backtest]
k = 5
train_len = 180
test_len = 126
groups = 5
rebalance = \"daily\"
graph = \"semantic\"
weighting = \"softmax\"
filtering = true
seed = 7

[classifier]
kind = \"fixture\"

[output]
dir = \"results\"
cache = \"cache/classifications.jsonl\"
";
