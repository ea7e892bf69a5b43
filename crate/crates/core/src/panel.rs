//! Input datasets: daily return panels, index membership, and embedding vintages.
//!
//! All three types are immutable after loading and safe to share across
//! threads. File formats are plain UTF-8 CSV with dot decimal separators:
//!
//! - `returns.csv` — header `date,<stock>,<stock>,...`; one row per trading
//!   date (ISO `YYYY-MM-DD`); blank cells mark missing returns.
//! - `membership.csv` — header `stock,start,end`; one interval per row.
//! - `embeddings/<year>.csv` — header `stock,v1,...,vD`; one vector per row.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::signal::WindowSpec;
use crate::StockId;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: missing or empty header row")]
    MissingHeader { path: String },
    #[error("{path}: row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        path: String,
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("unparseable date `{raw}` (expected YYYY-MM-DD)")]
    BadDate { raw: String },
    #[error("duplicate date {date}")]
    DuplicateDate { date: NaiveDate },
    #[error("non-numeric cell `{raw}` at ({date},{stock})")]
    NonNumericCell {
        date: NaiveDate,
        stock: StockId,
        raw: String,
    },
    #[error("return <= -1 at ({date},{stock}): {value}")]
    InvalidReturn {
        date: NaiveDate,
        stock: StockId,
        value: f64,
    },
    #[error("membership interval for {stock} has start {start} after end {end}")]
    InvertedInterval {
        stock: StockId,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("overlapping membership intervals for {stock} around {date}")]
    OverlappingIntervals { stock: StockId, date: NaiveDate },
    #[error("embedding vintage {year}: {stock} has dimension {found}, expected {expected}")]
    InconsistentDim {
        year: i32,
        stock: StockId,
        found: usize,
        expected: usize,
    },
    #[error("embedding vintage {year}: duplicate stock {stock}")]
    DuplicateEmbedding { year: i32, stock: StockId },
    #[error("embedding file {path}: cannot parse vintage year from file name")]
    BadVintageName { path: String },
    #[error("window date {date} not in panel calendar")]
    DateNotInCalendar { date: NaiveDate },
    #[error("universe too small for {groups} groups: {eligible} eligible stocks, need {needed}")]
    UniverseTooSmall {
        eligible: usize,
        groups: usize,
        needed: usize,
    },
}

/// Dates × stocks matrix of daily simple returns with an explicit missing mask.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    stocks: Vec<StockId>,
    /// Row-major dates × stocks; missing cells hold NaN and are masked.
    values: Vec<f64>,
    missing: Vec<bool>,
    date_index: HashMap<NaiveDate, usize>,
    stock_index: HashMap<StockId, usize>,
}

impl PartialEq for ReturnPanel {
    /// Bitwise equality of non-missing cells; masked cells compare by mask.
    fn eq(&self, other: &Self) -> bool {
        self.dates == other.dates
            && self.stocks == other.stocks
            && self.missing == other.missing
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.missing)
                .all(|((a, b), &m)| m || a.to_bits() == b.to_bits())
    }
}

impl ReturnPanel {
    /// Assemble a panel from parts. `values[d * stocks.len() + s]` is the
    /// return of stock `s` on date `d`; masked cells are ignored.
    pub fn new(
        dates: Vec<NaiveDate>,
        stocks: Vec<StockId>,
        values: Vec<f64>,
        missing: Vec<bool>,
    ) -> Result<Self, PanelError> {
        assert_eq!(values.len(), dates.len() * stocks.len());
        assert_eq!(missing.len(), values.len());
        for pair in dates.windows(2) {
            if pair[1] <= pair[0] {
                return Err(PanelError::DuplicateDate { date: pair[1] });
            }
        }
        for (idx, &v) in values.iter().enumerate() {
            if missing[idx] {
                continue;
            }
            if !v.is_finite() || v <= -1.0 {
                return Err(PanelError::InvalidReturn {
                    date: dates[idx / stocks.len()],
                    stock: stocks[idx % stocks.len()].clone(),
                    value: v,
                });
            }
        }
        let date_index = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let stock_index = stocks
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Self {
            dates,
            stocks,
            values,
            missing,
            date_index,
            stock_index,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn stocks(&self) -> &[StockId] {
        &self.stocks
    }

    pub fn date_pos(&self, date: NaiveDate) -> Option<usize> {
        self.date_index.get(&date).copied()
    }

    pub fn stock_pos(&self, stock: &str) -> Option<usize> {
        self.stock_index.get(stock).copied()
    }

    /// Return of stock column `s` on date row `d`, or `None` when masked.
    pub fn value(&self, d: usize, s: usize) -> Option<f64> {
        let idx = d * self.stocks.len() + s;
        if self.missing[idx] {
            None
        } else {
            Some(self.values[idx])
        }
    }

    pub fn is_missing(&self, d: usize, s: usize) -> bool {
        self.missing[d * self.stocks.len() + s]
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Write the panel back out in the `returns.csv` format. Values are
    /// printed with Rust's shortest round-trip float formatting, so a
    /// write/reload cycle reproduces the panel bit for bit.
    pub fn write_csv(&self, path: &Path) -> Result<(), PanelError> {
        let io_err = |source| PanelError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        let io_err = |source| PanelError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut line = String::from("date");
        for s in &self.stocks {
            line.push(',');
            line.push_str(s);
        }
        writeln!(out, "{line}").map_err(io_err)?;
        for (d, date) in self.dates.iter().enumerate() {
            line.clear();
            line.push_str(&date.format("%Y-%m-%d").to_string());
            for s in 0..self.stocks.len() {
                line.push(',');
                if let Some(v) = self.value(d, s) {
                    line.push_str(&format!("{v}"));
                }
            }
            writeln!(out, "{line}").map_err(io_err)?;
        }
        Ok(())
    }
}

/// Load `returns.csv`. Rows are sorted by date after parsing; duplicate
/// dates, non-numeric cells, and returns ≤ −1 are load errors that name the
/// offending (date, stock) cell.
pub fn load_returns(path: &Path) -> Result<ReturnPanel, PanelError> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|source| PanelError::Csv {
            path: path_str.clone(),
            source,
        })?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|source| PanelError::Csv {
            path: path_str.clone(),
            source,
        })?,
        None => return Err(PanelError::MissingHeader { path: path_str }),
    };
    if header.len() < 2 {
        return Err(PanelError::MissingHeader { path: path_str });
    }
    let stocks: Vec<StockId> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();

    let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    let mut seen = HashSet::new();
    for (row_no, rec) in records.enumerate() {
        let rec = rec.map_err(|source| PanelError::Csv {
            path: path_str.clone(),
            source,
        })?;
        if rec.len() != stocks.len() + 1 {
            return Err(PanelError::RaggedRow {
                path: path_str.clone(),
                row: row_no + 2,
                found: rec.len(),
                expected: stocks.len() + 1,
            });
        }
        let raw_date = rec.get(0).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            PanelError::BadDate {
                raw: raw_date.to_string(),
            }
        })?;
        if !seen.insert(date) {
            return Err(PanelError::DuplicateDate { date });
        }
        let mut cells = Vec::with_capacity(stocks.len());
        for (s, raw) in rec.iter().skip(1).enumerate() {
            let raw = raw.trim();
            if raw.is_empty() {
                cells.push(None);
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| PanelError::NonNumericCell {
                date,
                stock: stocks[s].clone(),
                raw: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(PanelError::NonNumericCell {
                    date,
                    stock: stocks[s].clone(),
                    raw: raw.to_string(),
                });
            }
            if v <= -1.0 {
                return Err(PanelError::InvalidReturn {
                    date,
                    stock: stocks[s].clone(),
                    value: v,
                });
            }
            cells.push(Some(v));
        }
        rows.push((date, cells));
    }
    rows.sort_by_key(|(d, _)| *d);

    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
    let mut values = Vec::with_capacity(dates.len() * stocks.len());
    let mut missing = Vec::with_capacity(dates.len() * stocks.len());
    for (_, cells) in &rows {
        for cell in cells {
            match cell {
                Some(v) => {
                    values.push(*v);
                    missing.push(false);
                }
                None => {
                    values.push(f64::NAN);
                    missing.push(true);
                }
            }
        }
    }
    ReturnPanel::new(dates, stocks, values, missing)
}

/// (stock, start, end) intervals of index membership.
#[derive(Debug, Clone, Default)]
pub struct MembershipTable {
    entries: Vec<MembershipEntry>,
    by_stock: HashMap<StockId, Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct MembershipEntry {
    pub stock: StockId,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl MembershipTable {
    pub fn new(mut entries: Vec<MembershipEntry>) -> Result<Self, PanelError> {
        for e in &entries {
            if e.start > e.end {
                return Err(PanelError::InvertedInterval {
                    stock: e.stock.clone(),
                    start: e.start,
                    end: e.end,
                });
            }
        }
        entries.sort_by(|a, b| (&a.stock, a.start).cmp(&(&b.stock, b.start)));
        for pair in entries.windows(2) {
            if pair[0].stock == pair[1].stock && pair[1].start <= pair[0].end {
                return Err(PanelError::OverlappingIntervals {
                    stock: pair[1].stock.clone(),
                    date: pair[1].start,
                });
            }
        }
        let mut by_stock: HashMap<StockId, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_stock.entry(e.stock.clone()).or_default().push(i);
        }
        Ok(Self { entries, by_stock })
    }

    pub fn entries(&self) -> &[MembershipEntry] {
        &self.entries
    }

    pub fn is_member_at(&self, stock: &str, date: NaiveDate) -> bool {
        self.by_stock.get(stock).is_some_and(|idxs| {
            idxs.iter()
                .any(|&i| self.entries[i].start <= date && date <= self.entries[i].end)
        })
    }
}

/// Load `membership.csv` (header `stock,start,end`).
pub fn load_membership(path: &Path) -> Result<MembershipTable, PanelError> {
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|source| PanelError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let mut entries = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| PanelError::Csv {
            path: path_str.clone(),
            source,
        })?;
        let parse_date = |raw: &str| {
            NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|_| PanelError::BadDate {
                raw: raw.to_string(),
            })
        };
        entries.push(MembershipEntry {
            stock: rec.get(0).unwrap_or("").trim().to_string(),
            start: parse_date(rec.get(1).unwrap_or(""))?,
            end: parse_date(rec.get(2).unwrap_or(""))?,
        });
    }
    MembershipTable::new(entries)
}

/// One vintage year of embeddings; all vectors share dimension `dim`.
#[derive(Debug, Clone)]
pub struct EmbeddingVintage {
    pub dim: usize,
    vectors: HashMap<StockId, Vec<f64>>,
}

impl EmbeddingVintage {
    pub fn get(&self, stock: &str) -> Option<&[f64]> {
        self.vectors.get(stock).map(|v| v.as_slice())
    }

    pub fn contains(&self, stock: &str) -> bool {
        self.vectors.contains_key(stock)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn stocks(&self) -> impl Iterator<Item = &StockId> {
        self.vectors.keys()
    }
}

/// Vintage year → (stock → embedding vector). Dimensions may differ across
/// vintages but not within one.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingSet {
    vintages: BTreeMap<i32, EmbeddingVintage>,
    /// Rows dropped at load time because their vector had zero norm.
    pub zero_norm_dropped: usize,
}

impl EmbeddingSet {
    pub fn vintage(&self, year: i32) -> Option<&EmbeddingVintage> {
        self.vintages.get(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.vintages.keys().copied()
    }

    pub fn n_vintages(&self) -> usize {
        self.vintages.len()
    }

    /// Insert a vintage built in memory. Zero-norm vectors are dropped and
    /// counted, mirroring the file loader.
    pub fn insert_vintage(
        &mut self,
        year: i32,
        vectors: Vec<(StockId, Vec<f64>)>,
    ) -> Result<(), PanelError> {
        let mut dim = None;
        let mut map = HashMap::new();
        for (stock, vec) in vectors {
            let d = *dim.get_or_insert(vec.len());
            if vec.len() != d {
                return Err(PanelError::InconsistentDim {
                    year,
                    stock,
                    found: vec.len(),
                    expected: d,
                });
            }
            if vec.iter().map(|x| x * x).sum::<f64>() == 0.0 {
                self.zero_norm_dropped += 1;
                continue;
            }
            if map.insert(stock.clone(), vec).is_some() {
                return Err(PanelError::DuplicateEmbedding { year, stock });
            }
        }
        self.vintages.insert(
            year,
            EmbeddingVintage {
                dim: dim.unwrap_or(0),
                vectors: map,
            },
        );
        Ok(())
    }
}

/// Load a directory of `<year>.csv` embedding files (header `stock,v1..vD`).
pub fn load_embeddings(dir: &Path) -> Result<EmbeddingSet, PanelError> {
    let io_err = |source| PanelError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut set = EmbeddingSet::default();
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    for file in files {
        let year: i32 = file
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PanelError::BadVintageName {
                path: file.display().to_string(),
            })?;
        let path_str = file.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .from_path(&file)
            .map_err(|source| PanelError::Csv {
                path: path_str.clone(),
                source,
            })?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|source| PanelError::Csv {
                path: path_str.clone(),
                source,
            })?;
            let stock = rec.get(0).unwrap_or("").trim().to_string();
            let mut vec = Vec::with_capacity(rec.len().saturating_sub(1));
            for raw in rec.iter().skip(1) {
                let v: f64 = raw.trim().parse().map_err(|_| PanelError::NonNumericCell {
                    date: NaiveDate::from_ymd_opt(year, 1, 1).unwrap(),
                    stock: stock.clone(),
                    raw: raw.to_string(),
                })?;
                vec.push(v);
            }
            rows.push((stock, vec));
        }
        set.insert_vintage(year, rows)?;
    }
    Ok(set)
}

/// The per-window investable universe: stocks that are index members at the
/// window start, carry an embedding of the required vintage, and have
/// complete training-period returns. Missing test-period returns are filled
/// with zero and counted.
#[derive(Debug, Clone)]
pub struct UniverseSlice {
    pub window: WindowSpec,
    pub eligible: Vec<StockId>,
    /// Panel column index per eligible stock.
    pub columns: Vec<usize>,
    /// Panel row indices of t0, t1, t2.
    pub t0_idx: usize,
    pub t1_idx: usize,
    pub t2_idx: usize,
    /// Embedding vintage year used for this window (training start year − 1).
    pub vintage_year: i32,
    /// Missing test-period cells zero-filled for eligible stocks.
    pub zero_filled: usize,
}

impl UniverseSlice {
    /// Return series for eligible stock `k` over `[t0, t2]`, with missing
    /// test-period cells as 0.0. Training cells are complete by construction.
    pub fn series(&self, panel: &ReturnPanel, k: usize) -> Vec<f64> {
        let col = self.columns[k];
        (self.t0_idx..=self.t2_idx)
            .map(|d| panel.value(d, col).unwrap_or(0.0))
            .collect()
    }

    /// Return of eligible stock `k` on panel row `d` (zero-filled if masked).
    pub fn return_at(&self, panel: &ReturnPanel, k: usize, d: usize) -> f64 {
        panel.value(d, self.columns[k]).unwrap_or(0.0)
    }

    /// Number of training days (length of `[t0, t1]`).
    pub fn train_days(&self) -> usize {
        self.t1_idx - self.t0_idx + 1
    }
}

/// Embedding vintage rule: windows whose training period starts in calendar
/// year `y` use embeddings of vintage `y − 1`, so graph construction never
/// sees text published during or after the window.
pub fn vintage_for_window(window: &WindowSpec) -> i32 {
    window.t0.year() - 1
}

/// Select the eligible universe for one window. `groups` is the portfolio
/// group count; fewer than `2 * groups` eligible stocks is an error.
pub fn slice_universe(
    panel: &ReturnPanel,
    members: &MembershipTable,
    embeddings: &EmbeddingSet,
    window: &WindowSpec,
    groups: usize,
) -> Result<UniverseSlice, PanelError> {
    let t0_idx = panel
        .date_pos(window.t0)
        .ok_or(PanelError::DateNotInCalendar { date: window.t0 })?;
    let t1_idx = panel
        .date_pos(window.t1)
        .ok_or(PanelError::DateNotInCalendar { date: window.t1 })?;
    let t2_idx = panel
        .date_pos(window.t2)
        .ok_or(PanelError::DateNotInCalendar { date: window.t2 })?;
    let vintage_year = vintage_for_window(window);
    let vintage = embeddings.vintage(vintage_year);

    let mut selected: Vec<(StockId, usize)> = Vec::new();
    for (col, stock) in panel.stocks().iter().enumerate() {
        if !members.is_member_at(stock, window.t0) {
            continue;
        }
        if !vintage.is_some_and(|v| v.contains(stock)) {
            continue;
        }
        let complete = (t0_idx..=t1_idx).all(|d| !panel.is_missing(d, col));
        if !complete {
            continue;
        }
        selected.push((stock.clone(), col));
    }
    // Sorted ids fix the canonical edge orientation downstream.
    selected.sort();
    let (eligible, columns): (Vec<StockId>, Vec<usize>) = selected.into_iter().unzip();
    let needed = 2 * groups;
    if eligible.len() < needed {
        return Err(PanelError::UniverseTooSmall {
            eligible: eligible.len(),
            groups,
            needed,
        });
    }
    let zero_filled = columns
        .iter()
        .map(|&col| {
            ((t1_idx + 1)..=t2_idx)
                .filter(|&d| panel.is_missing(d, col))
                .count()
        })
        .sum();
    Ok(UniverseSlice {
        window: window.clone(),
        eligible,
        columns,
        t0_idx,
        t1_idx,
        t2_idx,
        vintage_year,
        zero_filled,
    })
}
