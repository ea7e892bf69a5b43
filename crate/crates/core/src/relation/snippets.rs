//! Filing text → prompt sections: truncated business description,
//! segment-related sentences, and competitor-related sentences.
//!
//! Token budgets use whitespace tokenization. Firm names are scrubbed from
//! every section before prompting so the classifier reasons from disclosure
//! content rather than memorized knowledge of specific tickers.

use std::collections::HashMap;
use std::path::PathBuf;

use regex::Regex;

use super::RelationError;
use crate::StockId;

/// Sentence patterns that mark competitor-related disclosure. Matching is
/// case-insensitive on whole sentences.
pub const DEFAULT_COMPETE_PATTERNS: &[&str] = &[
    "compete with",
    "competes with",
    "compete against",
    "compete directly",
    "competition from",
    "competitors include",
    "our competitors",
    "principal competitors",
    "primary competitors",
    "highly competitive",
];

/// Keywords that mark product/segment disclosure sentences.
pub const DEFAULT_SEGMENT_KEYWORDS: &[&str] = &[
    "segment",
    "segments",
    "product line",
    "product lines",
    "products include",
    "division",
    "divisions",
    "operating unit",
];

/// Whitespace-token budgets per prompt section.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SectionBudgets {
    pub description: usize,
    pub segments: usize,
    pub competitors: usize,
}

impl Default for SectionBudgets {
    fn default() -> Self {
        Self {
            description: 500,
            segments: 200,
            competitors: 200,
        }
    }
}

/// The three extracted and budget-truncated text sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnippetSections {
    pub description: String,
    pub segments: String,
    pub competitors: String,
}

/// Prompt-ready disclosure snippets for one firm and fiscal year.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirmSnippets {
    pub stock: StockId,
    pub fiscal_year: i32,
    pub business_description: String,
    pub segments: String,
    pub competitor_sentences: String,
}

impl FirmSnippets {
    pub fn new(stock: StockId, fiscal_year: i32, sections: SnippetSections) -> Self {
        Self {
            stock,
            fiscal_year,
            business_description: sections.description,
            segments: sections.segments,
            competitor_sentences: sections.competitors,
        }
    }

    pub fn sections(&self) -> [&str; 3] {
        [
            &self.business_description,
            &self.segments,
            &self.competitor_sentences,
        ]
    }
}

fn truncate_tokens(text: &str, budget: usize) -> String {
    text.split_whitespace()
        .take(budget)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Split plain text into sentences on `.`, `!`, `?` boundaries.
fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut start = 0;
    for (idx, &b) in bytes.iter().enumerate() {
        if b == b'.' || b == b'!' || b == b'?' {
            let next = bytes.get(idx + 1);
            if next.is_none() || next.is_some_and(|c| c.is_ascii_whitespace()) {
                let sentence = text[start..=idx].trim();
                if !sentence.is_empty() {
                    out.push(sentence);
                }
                start = idx + 1;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Extract the three prompt sections from raw filing text.
///
/// The description is the first `budgets.description` whitespace tokens of
/// the whole text; the other two sections collect sentences matching the
/// default keyword/pattern lists, each truncated to its own budget.
pub fn extract_snippets(
    filing_text: &str,
    budgets: &SectionBudgets,
) -> Result<SnippetSections, RelationError> {
    if filing_text.trim().is_empty() {
        return Err(RelationError::EmptyFilingText);
    }
    let description = truncate_tokens(filing_text, budgets.description);

    let sentences = split_sentences(filing_text);
    let mut segment_sentences = Vec::new();
    let mut compete_sentences = Vec::new();
    for sentence in &sentences {
        let lower = sentence.to_lowercase();
        if DEFAULT_SEGMENT_KEYWORDS.iter().any(|k| lower.contains(k)) {
            segment_sentences.push(*sentence);
        }
        if DEFAULT_COMPETE_PATTERNS.iter().any(|p| lower.contains(p)) {
            compete_sentences.push(*sentence);
        }
    }
    Ok(SnippetSections {
        description,
        segments: truncate_tokens(&segment_sentences.join(" "), budgets.segments),
        competitors: truncate_tokens(&compete_sentences.join(" "), budgets.competitors),
    })
}

/// Case-insensitive whole-word replacement of every listed firm name.
pub fn anonymize_sections(sections: SnippetSections, names: &[String]) -> SnippetSections {
    let non_empty: Vec<&String> = names.iter().filter(|n| !n.trim().is_empty()).collect();
    if non_empty.is_empty() {
        return sections;
    }
    let alternation = non_empty
        .iter()
        .map(|n| regex::escape(n))
        .collect::<Vec<_>>()
        .join("|");
    let pattern = Regex::new(&format!(r"(?i)\b(?:{alternation})\b")).expect("escaped names");
    let scrub = |s: String| pattern.replace_all(&s, "the firm").into_owned();
    SnippetSections {
        description: scrub(sections.description),
        segments: scrub(sections.segments),
        competitors: scrub(sections.competitors),
    }
}

/// Supplies prompt snippets for (stock, fiscal year) pairs. `None` means no
/// filing is available, in which case incident edges fall back to
/// `unrelated`.
pub trait SnippetSource {
    fn get(&mut self, stock: &str, year: i32) -> Result<Option<FirmSnippets>, RelationError>;
}

/// Filesystem snippet store over `filings/<year>/<stock>.txt`, processed on
/// demand and memoized. All names in `names` are scrubbed from every
/// section at load time.
pub struct SnippetStore {
    root: PathBuf,
    budgets: SectionBudgets,
    names: Vec<String>,
    memo: HashMap<(i32, StockId), Option<FirmSnippets>>,
}

impl SnippetStore {
    pub fn new(root: PathBuf, budgets: SectionBudgets, names: Vec<String>) -> Self {
        Self {
            root,
            budgets,
            names,
            memo: HashMap::new(),
        }
    }
}

impl SnippetSource for SnippetStore {
    fn get(&mut self, stock: &str, year: i32) -> Result<Option<FirmSnippets>, RelationError> {
        let key = (year, stock.to_string());
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let path = self.root.join(year.to_string()).join(format!("{stock}.txt"));
        let result = if path.is_file() {
            let text = std::fs::read_to_string(&path).map_err(|source| RelationError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let sections = extract_snippets(&text, &self.budgets)?;
            let sections = anonymize_sections(sections, &self.names);
            Some(FirmSnippets::new(stock.to_string(), year, sections))
        } else {
            None
        };
        self.memo.insert(key, result.clone());
        Ok(result)
    }
}

/// In-memory snippet source keyed by stock id; the same sections are served
/// for every requested year. Used with generated datasets and in tests.
#[derive(Debug, Clone, Default)]
pub struct MapSnippets {
    map: HashMap<StockId, SnippetSections>,
}

impl MapSnippets {
    pub fn new(map: HashMap<StockId, SnippetSections>) -> Self {
        Self { map }
    }

    pub fn insert(&mut self, stock: StockId, sections: SnippetSections) {
        self.map.insert(stock, sections);
    }
}

impl SnippetSource for MapSnippets {
    fn get(&mut self, stock: &str, year: i32) -> Result<Option<FirmSnippets>, RelationError> {
        Ok(self
            .map
            .get(stock)
            .map(|sections| FirmSnippets::new(stock.to_string(), year, sections.clone())))
    }
}
