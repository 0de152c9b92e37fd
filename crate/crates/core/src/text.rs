//! Text normalization shared by the evidence database, the lexical scorers
//! and the embedding cache.

/// Lookup key for a span: lowercased, whitespace collapsed, ends stripped.
///
/// Two surface forms with the same key are the same evidence span.
pub fn normalize_key(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lowercased tokens split on whitespace and punctuation.
///
/// Every maximal run of alphanumeric characters is one token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub(crate) fn is_trim_char(c: char) -> bool {
    c.is_whitespace() || c.is_ascii_punctuation() || is_unicode_punct(c)
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{00A1}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}'
    )
}

/// Strips leading and trailing punctuation and whitespace, keeping the
/// interior verbatim.
pub fn trim_span(text: &str) -> &str {
    text.trim_matches(is_trim_char)
}

fn no_space_before(tok: &str) -> bool {
    matches!(
        tok,
        "," | "." | ";" | ":" | "!" | "?" | ")" | "]" | "}" | "%" | "'s" | "n't" | "'" | "'re" | "'ve" | "'ll" | "'d" | "'m"
    )
}

fn no_space_after(tok: &str) -> bool {
    matches!(tok, "(" | "[" | "{")
}

/// Joins tokens back into running text: single spaces, except none before
/// closing punctuation and none after opening brackets.
pub fn detokenize<'a, I>(tokens: I) -> String
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for tok in tokens {
        if let Some(p) = prev {
            if !no_space_before(tok) && !no_space_after(p) {
                out.push(' ');
            }
        }
        out.push_str(tok);
        prev = Some(tok);
    }
    out
}
