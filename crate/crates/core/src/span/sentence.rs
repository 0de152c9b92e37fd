use std::collections::BTreeSet;
use std::io::BufRead;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::SentenceError;

/// Placeholder text for a merged citation token.
pub const REFGROUP_TEXT: &str = "REFGROUP";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Index of the syntactic head; `None` for the root. On input, `null`,
    /// a negative value, or the token's own index all mean root.
    #[serde(deserialize_with = "de_head")]
    pub head: Option<usize>,
    pub label: String,
}

impl Token {
    pub fn new(text: impl Into<String>, head: Option<usize>, label: impl Into<String>) -> Self {
        Token { text: text.into(), head, label: label.into() }
    }
}

fn de_head<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
    let raw: Option<i64> = Option::deserialize(d)?;
    Ok(raw.and_then(|h| usize::try_from(h).ok()))
}

/// A citation unit anchored at one token. Before grouping each marker is its
/// own group; after [`group_refs`](super::group_refs) runs of adjacent markers
/// share one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RefGroup {
    #[serde(rename = "token_position")]
    pub position: usize,
    pub cited_paper_ids: BTreeSet<String>,
}

impl RefGroup {
    pub fn new<I, S>(position: usize, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        RefGroup { position, cited_paper_ids: ids.into_iter().map(Into::into).collect() }
    }
}

/// One line of the parsed-sentence file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    #[serde(default)]
    pub paper_id: String,
    #[serde(default)]
    pub sentence_index: usize,
    pub tokens: Vec<Token>,
    pub refs: Vec<RefGroup>,
}

impl ParsedSentence {
    pub fn new(tokens: Vec<Token>, refs: Vec<RefGroup>) -> Self {
        let mut s = ParsedSentence { paper_id: String::new(), sentence_index: 0, tokens, refs };
        s.normalize_heads();
        s
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Self-headed tokens are roots.
    pub(crate) fn normalize_heads(&mut self) {
        for (i, t) in self.tokens.iter_mut().enumerate() {
            if t.head == Some(i) {
                t.head = None;
            }
        }
    }

    pub fn ref_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.tokens.len()];
        for r in &self.refs {
            if let Some(m) = mask.get_mut(r.position) {
                *m = true;
            }
        }
        mask
    }

    /// Checks head ranges, acyclicity and reference positions.
    pub fn validate(&self) -> Result<(), SentenceError> {
        let n = self.tokens.len();
        if self.refs.is_empty() {
            return Err(SentenceError::NoRefs);
        }
        for r in &self.refs {
            if r.position >= n {
                return Err(SentenceError::RefOutOfRange { position: r.position, len: n });
            }
            if r.cited_paper_ids.is_empty() {
                return Err(SentenceError::EmptyRef(r.position));
            }
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if let Some(h) = t.head {
                if h >= n {
                    return Err(SentenceError::HeadOutOfRange { token: i, head: h, len: n });
                }
            }
        }
        // 0 = unseen, 1 = on current path, 2 = reaches root
        let mut state = vec![0u8; n];
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = Some(start);
            while let Some(c) = cur {
                match state[c] {
                    2 => break,
                    1 => return Err(SentenceError::Cycle(c)),
                    _ => {
                        state[c] = 1;
                        path.push(c);
                        cur = self.tokens[c].head.filter(|&h| h != c);
                    }
                }
            }
            for p in path {
                state[p] = 2;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub paper_id: String,
    pub sentence_index: usize,
}

/// One line of the extracted-span file, and the unit the database is built
/// from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub span_text: String,
    pub cited_paper_ids: BTreeSet<String>,
    #[serde(default)]
    pub rule: Option<super::Rule>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

/// Reads line-delimited parsed sentences. Blank lines are skipped; a line
/// that fails to decode is reported with its 1-based line number.
pub fn read_parsed_sentences<R: BufRead>(reader: R) -> Vec<Result<ParsedSentence, (usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err((i + 1, e.to_string()))),
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(
                serde_json::from_str::<ParsedSentence>(&l)
                    .map(|mut s| {
                        s.normalize_heads();
                        s
                    })
                    .map_err(|e| (i + 1, e.to_string())),
            ),
        })
        .collect()
}
