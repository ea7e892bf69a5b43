//! The edge-classification prompt template.
//!
//! The rendered prompt is the classifier wire request. Its shape is frozen:
//! tests compare the output byte-for-byte against a committed golden file,
//! and the template version participates in cache keys, so any change here
//! must bump [`TEMPLATE_VERSION`].

use super::snippets::FirmSnippets;
use super::RelationError;

/// Version string of the prompt template. Part of every cache key.
pub const TEMPLATE_VERSION: &str = "v1";

fn section(text: &str) -> &str {
    if text.is_empty() {
        "(none)"
    } else {
        text
    }
}

/// Render the classification prompt for an anonymized firm pair.
///
/// `fiscal_year` is the disclosure year (the embedding vintage, one year
/// before the window's training start). As a final anonymization gate, the
/// stock identifiers of both firms must not appear in any section.
pub fn build_prompt(
    a: &FirmSnippets,
    b: &FirmSnippets,
    fiscal_year: i32,
) -> Result<String, RelationError> {
    for name in [&a.stock, &b.stock] {
        let pattern = regex::Regex::new(&format!(r"(?i)\b{}\b", regex::escape(name)))
            .expect("escaped stock id");
        for snip in [a, b] {
            for text in snip.sections() {
                if pattern.is_match(text) {
                    return Err(RelationError::AnonymizationLeak { name: name.clone() });
                }
            }
        }
    }
    Ok(format!(
        "[prompt {version}]\n\
         You are an industry analyst. Based ONLY on the two company disclosures below\n\
         (both filed before end of year {year}), classify their economic relationship.\n\
         \n\
         === Firm A (Fiscal Year {year}) ===\n\
         Business description:\n\
         {a_desc}\n\
         \n\
         Key products/segments:\n\
         {a_seg}\n\
         \n\
         Competitors mentioned:\n\
         {a_comp}\n\
         \n\
         === Firm B (Fiscal Year {year}) ===\n\
         Business description:\n\
         {b_desc}\n\
         \n\
         Key products/segments:\n\
         {b_seg}\n\
         \n\
         Competitors mentioned:\n\
         {b_comp}\n\
         \n\
         Choose exactly one label from:\n\
         [competitor, supply_chain, complementary, substitute, peer, unrelated]\n\
         \n\
         Return JSON:\n\
         {{\"label\": \"...\", \"evidence_span_A\": \"...\", \"evidence_span_B\": \"...\"}}\n",
        version = TEMPLATE_VERSION,
        year = fiscal_year,
        a_desc = section(&a.business_description),
        a_seg = section(&a.segments),
        a_comp = section(&a.competitor_sentences),
        b_desc = section(&b.business_description),
        b_seg = section(&b.segments),
        b_comp = section(&b.competitor_sentences),
    ))
}
