//! Fixtures, stub providers and brute-force reference implementations shared
//! by the integration tests. Nothing here calls the scoring, fusion or
//! aggregation code under test.
#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};

use evidencite::embed::EMBEDDING_DIM;
use evidencite::span::group_refs;
use evidencite::text::{detokenize, normalize_key, trim_span};
use evidencite::{EmbedError, EmbeddingProvider, EvidenceDatabase, PaperMetadata, ParsedSentence, RefGroup, Rule, SpanRecord, Token};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

/// Hashed bag-of-words vectors; counts every text it is asked to embed.
#[derive(Default)]
pub struct CountingProvider {
    pub texts: AtomicUsize,
    pub calls: AtomicUsize,
    pub fail: bool,
}

impl CountingProvider {
    pub fn failing() -> Self {
        CountingProvider { fail: true, ..Default::default() }
    }

    pub fn texts(&self) -> usize {
        self.texts.load(Ordering::SeqCst)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

pub fn bag_vector(text: &str) -> Vec<f32> {
    let mut v = vec![0.0f32; EMBEDDING_DIM];
    for tok in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        let mut h = DefaultHasher::new();
        tok.to_lowercase().hash(&mut h);
        v[(h.finish() % EMBEDDING_DIM as u64) as usize] += 1.0;
    }
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    v
}

impl EmbeddingProvider for CountingProvider {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.texts.fetch_add(texts.len(), Ordering::SeqCst);
        if self.fail {
            return Err(EmbedError::Unavailable("stub offline".into()));
        }
        Ok(texts.iter().map(|t| bag_vector(t)).collect())
    }
}

// ---------------------------------------------------------------- sentences

/// `(text, head, label)`; tokens whose text is `[REF]` become citation
/// markers, cycling through `ids`.
pub fn sentence(rows: &[(&str, Option<usize>, &str)], ids: &[&str]) -> ParsedSentence {
    let tokens: Vec<Token> = rows.iter().map(|&(t, h, l)| Token::new(t, h, l)).collect();
    let refs = rows
        .iter()
        .enumerate()
        .filter(|(_, (t, _, _))| *t == "[REF]")
        .zip(ids.iter().cycle())
        .map(|((i, _), id)| RefGroup::new(i, [*id]))
        .collect();
    ParsedSentence::new(tokens, refs)
}

pub fn s1() -> ParsedSentence {
    sentence(
        &[
            ("They", Some(1), "nsubj"),
            ("used", None, "ROOT"),
            ("an", Some(4), "det"),
            ("IEX", Some(4), "compound"),
            ("parser", Some(5), "compound"),
            ("[REF]", Some(1), "dobj"),
            ("to", Some(7), "aux"),
            ("encode", Some(1), "advcl"),
            ("the", Some(9), "det"),
            ("input", Some(7), "dobj"),
            (".", Some(1), "punct"),
        ],
        &["iex"],
    )
}

pub fn s2() -> ParsedSentence {
    sentence(
        &[
            ("Most", Some(1), "amod"),
            ("work", Some(9), "nsubjpass"),
            ("in", Some(1), "prep"),
            ("the", Some(6), "det"),
            ("past", Some(6), "amod"),
            ("few", Some(6), "amod"),
            ("years", Some(2), "pobj"),
            ("has", Some(9), "aux"),
            ("been", Some(9), "auxpass"),
            ("focused", None, "ROOT"),
            ("on", Some(9), "prep"),
            ("extractive", Some(12), "amod"),
            ("summarization", Some(13), "compound"),
            ("[REF]", Some(10), "pobj"),
            (".", Some(9), "punct"),
        ],
        &["summ"],
    )
}

pub fn s3() -> ParsedSentence {
    sentence(
        &[
            ("Context", Some(1), "compound"),
            ("embeddings", Some(3), "nsubjpass"),
            ("were", Some(3), "auxpass"),
            ("generated", None, "ROOT"),
            ("using", Some(3), "xcomp"),
            ("Sentence", Some(6), "compound"),
            ("Transformers", Some(7), "compound"),
            ("[REF]", Some(4), "dobj"),
        ],
        &["sbert"],
    )
}

pub fn s4() -> ParsedSentence {
    sentence(
        &[
            ("They", Some(1), "nsubj"),
            ("used", None, "ROOT"),
            ("ROUGE", Some(5), "nmod"),
            ("and", Some(2), "cc"),
            ("METEOR", Some(2), "conj"),
            ("metrics", Some(1), "dobj"),
            ("[REF]", Some(5), "appos"),
            ("for", Some(1), "prep"),
            ("evaluating", Some(7), "pcomp"),
            ("their", Some(10), "poss"),
            ("models", Some(8), "dobj"),
        ],
        &["rouge"],
    )
}

pub fn s5() -> ParsedSentence {
    sentence(
        &[
            ("They", Some(1), "nsubj"),
            ("used", None, "ROOT"),
            ("BERT", Some(3), "compound"),
            ("[REF]", Some(1), "dobj"),
            (",", Some(3), "punct"),
            ("a", Some(10), "det"),
            ("popular", Some(9), "amod"),
            ("Large", Some(8), "amod"),
            ("Language", Some(9), "compound"),
            ("Model", Some(10), "compound"),
            ("[REF]", Some(3), "appos"),
            (",", Some(3), "punct"),
            ("to", Some(13), "aux"),
            ("generate", Some(1), "advcl"),
            ("text", Some(15), "compound"),
            ("embeddings", Some(13), "dobj"),
            ("[REF]", Some(13), "npadvmod"),
        ],
        &["bert", "llm", "emb"],
    )
}

/// The extractive/abstractive sentence, one marker per cited paper.
pub fn grouping_example() -> ParsedSentence {
    let words = "There are two broad types of text summarization approaches , namely , extractive [ [REF] , [REF] , [REF] ] and abstractive [ [REF] ] .";
    let rows: Vec<(&str, Option<usize>, &str)> =
        words.split(' ').enumerate().map(|(i, w)| (w, if i == 1 { None } else { Some(1) }, "dep")).collect();
    sentence(&rows, &["REF1", "REF2", "REF3", "REF4"])
}

/// `(normalized text, refgroup position, rule)` triples.
pub fn triples(spans: &[evidencite::ExtractedSpan]) -> BTreeSet<(String, usize, Rule)> {
    spans.iter().map(|e| (normalize_key(&e.text), e.source_refgroup.position, e.rule)).collect()
}

/// Random sentence with a random valid dependency tree.
pub fn random_sentence(rng: &mut StdRng) -> ParsedSentence {
    const WORDS: &[&str] = &["neural", "model", "parser", "BERT", "data", "we", "use", "the", "large", "corpus", ",", ".", "(", ")"];
    const LABELS: &[&str] = &["compound", "amod", "nsubj", "dobj", "det", "punct", "COMPOUND", "prep"];
    let n = rng.gen_range(2..=14);
    let mut tokens: Vec<Token> = (0..n)
        .map(|_| {
            let w = if rng.gen_bool(0.25) { "[REF]" } else { WORDS.choose(rng).unwrap() };
            Token::new(w, None, *LABELS.choose(rng).unwrap())
        })
        .collect();
    if !tokens.iter().any(|t| t.text == "[REF]") {
        let i = rng.gen_range(0..n);
        tokens[i].text = "[REF]".into();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for k in 1..n {
        // prefer left-adjacent attachment so traversals are not always empty
        let child = order[k];
        let placed = &order[..k];
        let head = if rng.gen_bool(0.5) && placed.contains(&(child + 1)) {
            child + 1
        } else {
            *placed.choose(rng).unwrap()
        };
        tokens[child].head = Some(head);
    }
    tokens[order[0]].label = "ROOT".into();
    let refs = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.text == "[REF]")
        .map(|(i, _)| RefGroup::new(i, [format!("P{}", rng.gen_range(0..5))]))
        .collect();
    ParsedSentence::new(tokens, refs)
}

// ---------------------------------------------------------------- extraction oracle

fn render(s: &ParsedSentence, idx: &[usize]) -> String {
    trim_span(&detokenize(idx.iter().map(|&i| s.tokens[i].text.as_str()))).to_string()
}

/// Applies the three rules literally on the grouped sentence: the leftward
/// chain `g-1, g-2, ...` while each token hangs off its right neighbour by a
/// compound/amod edge; else the segment back to the previous group; plus the
/// full sentence when `g` is last (only punctuation after) or alone.
pub fn reference_extract(raw: &ParsedSentence) -> BTreeSet<(String, usize, Rule)> {
    let s = group_refs(raw);
    let n = s.tokens.len();
    let refs: Vec<usize> = s.refs.iter().map(|r| r.position).collect();
    let is_ref = |i: usize| refs.contains(&i);
    let qualifies = |l: &str| l.eq_ignore_ascii_case("compound") || l.eq_ignore_ascii_case("amod");
    let mut out = BTreeSet::new();
    let mut prev_end = 0;
    for &g in &refs {
        let mut chain = Vec::new();
        let mut cur = g;
        while cur > 0 {
            let c = cur - 1;
            if is_ref(c) || s.tokens[c].head != Some(cur) || !qualifies(&s.tokens[c].label) {
                break;
            }
            chain.push(c);
            cur = c;
        }
        chain.reverse();
        let dep = render(&s, &chain);
        let seg: Vec<usize> = (prev_end..g).collect();
        let split = render(&s, &seg);
        if !dep.is_empty() {
            out.insert((normalize_key(&dep), g, Rule::DepTraversal));
        } else if !split.is_empty() {
            out.insert((normalize_key(&split), g, Rule::TokenSplit));
        }
        prev_end = g + 1;

        let all: Vec<usize> = (0..n).filter(|&i| !is_ref(i)).collect();
        let full = render(&s, &all);
        let last = (g + 1..n).all(|i| !is_ref(i) && trim_span(&s.tokens[i].text).is_empty());
        if !full.is_empty() && (refs.len() == 1 || last) {
            let key = normalize_key(&full);
            let dup = out.iter().any(|(k, p, _)| *k == key && *p == g);
            if !dup {
                out.insert((key, g, Rule::FullSentence));
            }
        }
    }
    out
}

// ---------------------------------------------------------------- BM25 oracle

pub fn oracle_tokens(text: &str) -> Vec<String> {
    text.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(String::from).collect()
}

pub struct Bm25Oracle {
    pub spans: Vec<Vec<String>>,
    pub k1: f64,
    pub b: f64,
    pub delta: f64,
}

impl Bm25Oracle {
    pub fn new(db: &EvidenceDatabase) -> Self {
        Bm25Oracle { spans: db.records().iter().map(|r| oracle_tokens(&r.text)).collect(), k1: 1.5, b: 0.75, delta: 1.0 }
    }

    pub fn idf(&self, t: &str) -> f64 {
        let big_d = self.spans.len() as f64;
        let n = self.spans.iter().filter(|s| s.iter().any(|x| x == t)).count() as f64;
        ((big_d - n + 0.5) / (n + 0.5) + 1.0).ln()
    }

    fn avg(&self) -> f64 {
        self.spans.iter().map(Vec::len).sum::<usize>() as f64 / self.spans.len() as f64
    }

    fn term(&self, q: &str, span: &[String]) -> f64 {
        let f = span.iter().filter(|x| *x == q).count() as f64;
        f * (self.k1 + 1.0) / (f + self.k1 * (1.0 - self.b + self.b * span.len() as f64 / self.avg()))
    }

    pub fn okapi(&self, q: &[String], id: usize) -> f64 {
        let mut total = 0.0;
        for t in q {
            total += self.idf(t) * self.term(t, &self.spans[id]);
        }
        total
    }

    pub fn plus(&self, q: &[String], id: usize) -> f64 {
        let mut total = 0.0;
        for t in q {
            total += self.idf(t) * (self.term(t, &self.spans[id]) + self.delta);
        }
        total
    }
}

// ---------------------------------------------------------------- pipeline oracle

fn top(scores: &[(usize, f64)], cutoff: usize) -> Vec<usize> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    v.into_iter().take(cutoff).map(|x| x.0).collect()
}

/// Brute-force end-to-end ranking on the lexical route: score every span,
/// union the top lists, rank-sum fuse, aggregate min/sum/year and sort.
/// Returns `(paper_id, best span id)` best first.
pub fn brute_force_recommend(db: &EvidenceDatabase, query: &str, cutoff: usize) -> Vec<(String, usize)> {
    let oracle = Bm25Oracle::new(db);
    let q = oracle_tokens(query);
    if q.is_empty() || db.is_empty() {
        return Vec::new();
    }
    let ids: Vec<usize> = (0..db.len()).collect();
    let okapi: Vec<(usize, f64)> = ids.iter().map(|&i| (i, oracle.okapi(&q, i))).collect();
    let plus: Vec<(usize, f64)> = ids.iter().map(|&i| (i, oracle.plus(&q, i))).collect();
    let cands: BTreeSet<usize> = top(&okapi, cutoff).into_iter().chain(top(&plus, cutoff)).collect();

    let sub = |all: &[(usize, f64)]| -> Vec<(usize, f64)> { all.iter().filter(|x| cands.contains(&x.0)).copied().collect() };
    let rank_of = |list: Vec<usize>| -> BTreeMap<usize, usize> { list.into_iter().enumerate().map(|(i, id)| (id, i + 1)).collect() };
    let r_o = rank_of(top(&sub(&okapi), usize::MAX));
    let r_p = rank_of(top(&sub(&plus), usize::MAX));
    let mut fused: Vec<usize> = cands.iter().copied().collect();
    fused.sort_by(|&a, &b| {
        (r_o[&a] + r_p[&a])
            .cmp(&(r_o[&b] + r_p[&b]))
            .then(plus[b].1.partial_cmp(&plus[a].1).unwrap())
            .then(a.cmp(&b))
    });

    // paper -> (best rank, support, year, best span)
    let mut papers: BTreeMap<String, (usize, u64, u32, usize)> = BTreeMap::new();
    for (i, &sid) in fused.iter().enumerate() {
        let rank = i + 1;
        for c in &db.records()[sid].citations {
            let year = db.paper(&c.paper_id).map_or(0, |p| p.year);
            let e = papers.entry(c.paper_id.clone()).or_insert((usize::MAX, 0, year, sid));
            if rank < e.0 {
                e.0 = rank;
                e.3 = sid;
            }
            e.1 += c.support;
        }
    }
    let mut list: Vec<(String, (usize, u64, u32, usize))> = papers.into_iter().collect();
    list.sort_by(|a, b| {
        let ka = (a.1 .0, std::cmp::Reverse(a.1 .1), std::cmp::Reverse(a.1 .2), &a.0);
        let kb = (b.1 .0, std::cmp::Reverse(b.1 .1), std::cmp::Reverse(b.1 .2), &b.0);
        ka.cmp(&kb)
    });
    list.into_iter().map(|(id, v)| (id, v.3)).collect()
}

// ---------------------------------------------------------------- databases

pub fn span(text: &str, ids: &[&str]) -> SpanRecord {
    SpanRecord { span_text: text.into(), cited_paper_ids: ids.iter().map(|s| s.to_string()).collect(), rule: None, provenance: None }
}

/// Five spans citing four papers.
pub fn toy_db() -> EvidenceDatabase {
    let spans = vec![
        span("FastAlign", &["dyer2013"]),
        span("FastAlign", &["dyer2013"]),
        span("word alignment with IBM models", &["brown1993", "och2003"]),
        span("GIZA word aligner", &["och2003"]),
        span("neural machine translation with attention", &["bahdanau2015"]),
        span("alignment models for neural machine translation", &["bahdanau2015", "brown1993"]),
        span("alignment models for neural machine translation", &["brown1993"]),
    ];
    let papers = vec![
        PaperMetadata::new("dyer2013", "A Simple, Fast, and Effective Reparameterization of IBM Model 2", 2013),
        PaperMetadata::new("brown1993", "The Mathematics of Statistical Machine Translation", 1993),
        PaperMetadata::new("och2003", "A Systematic Comparison of Various Statistical Alignment Models", 2003),
        PaperMetadata::new("bahdanau2015", "Neural Machine Translation by Jointly Learning to Align and Translate", 2015),
    ];
    EvidenceDatabase::build(spans, papers).0
}

pub const TOY_VOCAB: &[&str] = &[
    "fastalign", "word", "alignment", "ibm", "models", "giza", "aligner", "neural", "machine", "translation", "attention",
    "for", "with", "unseen", "model",
];

/// Random corpus of `n` spans over a small vocabulary, citing `papers`
/// papers with random years (some unknown).
pub fn random_db(rng: &mut StdRng, n: usize, papers: usize) -> EvidenceDatabase {
    let words: Vec<String> = (0..12).map(|i| format!("t{i}")).collect();
    let mut seen = BTreeSet::new();
    let mut spans = Vec::new();
    while seen.len() < n {
        let len = rng.gen_range(1..=8);
        let text = (0..len).map(|_| words.choose(rng).unwrap().as_str()).collect::<Vec<_>>().join(" ");
        if !seen.insert(text.clone()) {
            continue;
        }
        let k = rng.gen_range(1..=2);
        let ids: Vec<String> = (0..k).map(|_| format!("p{}", rng.gen_range(0..papers))).collect();
        let reps = rng.gen_range(1..=3);
        for _ in 0..reps {
            spans.push(SpanRecord { span_text: text.clone(), cited_paper_ids: ids.iter().cloned().collect(), rule: None, provenance: None });
        }
    }
    let meta = (0..papers).map(|i| PaperMetadata::new(format!("p{i}"), format!("Paper {i}"), if i % 4 == 0 { 0 } else { 1990 + (i as u32 * 7) % 30 }));
    EvidenceDatabase::build(spans, meta).0
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}
