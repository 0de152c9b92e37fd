use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::group::group_refs;
use super::sentence::{ParsedSentence, Provenance, RefGroup, SpanRecord};
use crate::error::SentenceError;
use crate::text::{detokenize, normalize_key, trim_span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rule {
    DepTraversal,
    TokenSplit,
    FullSentence,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExtractedSpan {
    pub text: String,
    pub source_refgroup: RefGroup,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractConfig {
    /// Edge labels the traversal may follow, compared case-insensitively.
    pub dep_labels: Vec<String>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { dep_labels: vec!["compound".into(), "amod".into()] }
    }
}

impl ExtractConfig {
    fn follows(&self, label: &str) -> bool {
        self.dep_labels.iter().any(|l| l.eq_ignore_ascii_case(label))
    }
}

fn span_text(s: &ParsedSentence, positions: impl IntoIterator<Item = usize>) -> String {
    let text = detokenize(positions.into_iter().map(|i| s.tokens[i].text.as_str()));
    trim_span(&text).to_string()
}

fn is_punct(text: &str) -> bool {
    trim_span(text).is_empty()
}

/// Spans found by walking the dependency tree leftwards from each REFGROUP.
///
/// The walk moves from `curr` to `child` only when `child` sits directly to
/// the left of `curr` and hangs off it by a configured label. REFGROUP nodes
/// are never entered.
pub fn extract_dep_spans(s: &ParsedSentence, cfg: &ExtractConfig) -> Result<Vec<ExtractedSpan>, SentenceError> {
    s.validate()?;
    let n = s.tokens.len();
    let is_ref = s.ref_mask();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, t) in s.tokens.iter().enumerate() {
        if let Some(h) = t.head {
            children[h].push(i);
        }
    }

    let mut out = Vec::new();
    for group in &s.refs {
        let mut visited = vec![false; n];
        visited[group.position] = true;
        let mut stack = vec![group.position];
        let mut span = Vec::new();
        while let Some(curr) = stack.pop() {
            for &child in &children[curr] {
                if visited[child] || is_ref[child] || child + 1 != curr || !cfg.follows(&s.tokens[child].label) {
                    continue;
                }
                visited[child] = true;
                span.push(child);
                stack.push(child);
            }
        }
        span.sort_unstable();
        let text = span_text(s, span);
        if !text.is_empty() {
            out.push(ExtractedSpan { text, source_refgroup: group.clone(), rule: Rule::DepTraversal });
        }
    }
    Ok(out)
}

/// Cuts the sentence at every REFGROUP; each segment maps to the REFGROUP
/// that closes it. Text after the last REFGROUP maps to nothing.
pub fn extract_token_split_spans(s: &ParsedSentence) -> Vec<ExtractedSpan> {
    let mut groups: Vec<&RefGroup> = s.refs.iter().filter(|g| g.position < s.tokens.len()).collect();
    groups.sort_by_key(|g| g.position);
    let mut start = 0;
    let mut out = Vec::new();
    for group in groups {
        let text = span_text(s, start..group.position);
        if !text.is_empty() {
            out.push(ExtractedSpan { text, source_refgroup: group.clone(), rule: Rule::TokenSplit });
        }
        start = group.position + 1;
    }
    out
}

/// The whole sentence, for a REFGROUP that ends it (terminal punctuation
/// aside) or that is the only one.
pub fn extract_full_sentence_spans(s: &ParsedSentence) -> Vec<ExtractedSpan> {
    let is_ref = s.ref_mask();
    let text = span_text(s, (0..s.tokens.len()).filter(|&i| !is_ref[i]));
    if text.is_empty() {
        return Vec::new();
    }
    let only_one = s.refs.len() == 1;
    s.refs
        .iter()
        .filter(|g| g.position < s.tokens.len())
        .filter(|g| only_one || s.tokens[g.position + 1..].iter().all(|t| is_punct(&t.text)))
        .map(|g| ExtractedSpan { text: text.clone(), source_refgroup: g.clone(), rule: Rule::FullSentence })
        .collect()
}

/// Groups the sentence's markers and applies the three rules in order.
///
/// Per REFGROUP: the traversal span if there is one, otherwise the
/// token-split span; then the full-sentence span where it applies. Spans
/// with the same normalized text for the same REFGROUP are emitted once.
pub fn extract_all(s: &ParsedSentence, cfg: &ExtractConfig) -> Result<Vec<ExtractedSpan>, SentenceError> {
    s.validate()?;
    let grouped = group_refs(s);
    let dep = extract_dep_spans(&grouped, cfg)?;
    let split = extract_token_split_spans(&grouped);
    let full = extract_full_sentence_spans(&grouped);

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for group in &grouped.refs {
        let of_group = |spans: &[ExtractedSpan]| -> Vec<ExtractedSpan> {
            spans.iter().filter(|e| e.source_refgroup.position == group.position).cloned().collect()
        };
        let mut picked = of_group(&dep);
        if picked.is_empty() {
            picked = of_group(&split);
        }
        picked.extend(of_group(&full));
        for span in picked {
            if seen.insert((normalize_key(&span.text), group.position)) {
                out.push(span);
            }
        }
    }
    Ok(out)
}

/// Extracts every span of `s` as a database input record carrying the
/// sentence's provenance.
pub fn span_records(s: &ParsedSentence, cfg: &ExtractConfig) -> Result<Vec<SpanRecord>, SentenceError> {
    let provenance = Provenance { paper_id: s.paper_id.clone(), sentence_index: s.sentence_index };
    Ok(extract_all(s, cfg)?
        .into_iter()
        .map(|e| SpanRecord {
            span_text: e.text,
            cited_paper_ids: e.source_refgroup.cited_paper_ids,
            rule: Some(e.rule),
            provenance: Some(provenance.clone()),
        })
        .collect())
}
