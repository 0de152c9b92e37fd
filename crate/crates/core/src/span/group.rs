use std::collections::BTreeSet;

use super::sentence::{ParsedSentence, RefGroup, Token, REFGROUP_TEXT};

/// Tokens allowed between two markers of the same group.
fn is_separator(text: &str) -> bool {
    matches!(text, "," | ";" | "[" | "]" | "(" | ")")
}

fn is_open(text: &str) -> bool {
    matches!(text, "[" | "(")
}

fn is_close(text: &str) -> bool {
    matches!(text, "]" | ")")
}

/// Depth of each token below the root. Out-of-range heads count as roots and
/// cycles are cut at `n` steps.
fn depths(tokens: &[Token]) -> Vec<usize> {
    let n = tokens.len();
    (0..n)
        .map(|i| {
            let mut d = 0;
            let mut cur = i;
            while let Some(h) = tokens[cur].head.filter(|&h| h < n && h != cur) {
                d += 1;
                cur = h;
                if d > n {
                    break;
                }
            }
            d
        })
        .collect()
}

/// Merges maximal runs of co-occurring citation markers into single REFGROUP
/// tokens.
///
/// Markers belong to one run when only `,` `;` or bracket tokens lie between
/// them; brackets directly enclosing the run are absorbed too. The merged
/// token cites the union of its members, takes the attachment of its
/// shallowest member, and any token that hung off a member now hangs off the
/// group. Positions are re-indexed.
pub fn group_refs(sentence: &ParsedSentence) -> ParsedSentence {
    let n = sentence.tokens.len();
    let mut cites: Vec<Option<BTreeSet<String>>> = vec![None; n];
    for r in &sentence.refs {
        if r.position < n {
            cites[r.position].get_or_insert_with(BTreeSet::new).extend(r.cited_paper_ids.iter().cloned());
        }
    }
    let text = |i: usize| sentence.tokens[i].text.as_str();

    // inclusive ranges of merged tokens
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if cites[i].is_none() {
            i += 1;
            continue;
        }
        let mut start = i;
        let mut end = i;
        let mut j = i + 1;
        loop {
            let mut k = j;
            while k < n && cites[k].is_none() && is_separator(text(k)) {
                k += 1;
            }
            if k < n && cites[k].is_some() {
                end = k;
                j = k + 1;
            } else {
                break;
            }
        }
        let floor = ranges.last().map_or(0, |&(_, e)| e + 1);
        if start > floor && is_open(text(start - 1)) {
            start -= 1;
        }
        if end + 1 < n && is_close(text(end + 1)) {
            end += 1;
        }
        ranges.push((start, end));
        i = end + 1;
    }

    // old index -> new index; group members all map to the group slot
    let mut new_index = vec![0usize; n];
    let mut next = 0;
    let mut cursor = 0;
    for &(s, e) in &ranges {
        for slot in &mut new_index[cursor..s] {
            *slot = next;
            next += 1;
        }
        new_index[s..=e].fill(next);
        next += 1;
        cursor = e + 1;
    }
    for slot in &mut new_index[cursor..n] {
        *slot = next;
        next += 1;
    }

    let depth = depths(&sentence.tokens);
    let remap = |h: Option<usize>| h.filter(|&h| h < n).map(|h| new_index[h]);

    let mut tokens = Vec::with_capacity(next);
    let mut refs = Vec::with_capacity(ranges.len());
    let mut cursor = 0;
    let push_plain = |tokens: &mut Vec<Token>, k: usize| {
        let t = &sentence.tokens[k];
        tokens.push(Token { text: t.text.clone(), head: remap(t.head), label: t.label.clone() });
    };
    for &(s, e) in &ranges {
        for k in cursor..s {
            push_plain(&mut tokens, k);
        }
        let anchor = (s..=e).min_by_key(|&k| (depth[k], k)).expect("non-empty range");
        let pos = tokens.len();
        let head = remap(sentence.tokens[anchor].head).filter(|&h| h != pos);
        tokens.push(Token { text: REFGROUP_TEXT.to_string(), head, label: sentence.tokens[anchor].label.clone() });
        let ids: BTreeSet<String> = (s..=e).filter_map(|k| cites[k].clone()).flatten().collect();
        refs.push(RefGroup { position: pos, cited_paper_ids: ids });
        cursor = e + 1;
    }
    for k in cursor..n {
        push_plain(&mut tokens, k);
    }

    ParsedSentence {
        paper_id: sentence.paper_id.clone(),
        sentence_index: sentence.sentence_index,
        tokens,
        refs,
    }
}
