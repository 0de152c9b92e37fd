//! Evidence-span extraction from citation-bearing sentences.
//!
//! A sentence arrives with one token per citation marker. Adjacent markers
//! are first merged into REFGROUPs ([`group_refs`]); spans are then pulled
//! out by three rules:
//!
//! * dependency traversal: from each REFGROUP, follow compound/adjectival
//!   edges to the token immediately on the left, repeatedly;
//! * token split: the text between the previous REFGROUP and this one;
//! * full sentence: the whole sentence, when the REFGROUP is sentence-final
//!   or is the only one.
//!
//! [`extract_all`] applies them in order: the token-split span is a fallback
//! used only when traversal found nothing for that REFGROUP, and full-sentence
//! spans are added on top.

mod extract;
mod group;
mod sentence;

pub use extract::{
    extract_all, extract_dep_spans, extract_full_sentence_spans, extract_token_split_spans, span_records, ExtractConfig,
    ExtractedSpan, Rule,
};
pub use group::group_refs;
pub use sentence::{read_parsed_sentences, ParsedSentence, Provenance, RefGroup, SpanRecord, Token};
