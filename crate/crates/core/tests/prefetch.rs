mod common;

use std::collections::BTreeSet;

use common::*;
use evidencite::prefetch::{idf, okapi_score, plus_score, prefetch_naive};
use evidencite::text::tokenize;
use evidencite::{Bm25Params, EvidenceDatabase, LexicalIndex, PaperMetadata};
use proptest::prelude::*;

fn db_from_lines(lines: &[&str]) -> EvidenceDatabase {
    EvidenceDatabase::build(lines.iter().map(|l| span(l, &["p"])), vec![PaperMetadata::new("p", "", 2000)]).0
}

fn three_span() -> EvidenceDatabase {
    db_from_lines(&["fastalign", "fastalign word aligner", "giza word alignment tool"])
}

fn toks(s: &str) -> Vec<String> {
    tokenize(s)
}

// Frozen from an independent Python evaluation of the formulas.
#[test]
fn three_span_corpus_hand_values() {
    let db = three_span();
    let s = db.stats();
    let p = Bm25Params::default();
    let id = |t: &str| toks(&db.lookup(t).unwrap().text);
    let cases = [
        ("fastalign", "fastalign", 0.6539180928636321, 1.1239217221093678),
        ("fastalign", "fastalign word aligner", 0.4449738501734775, 0.9149774794192131),
        ("fastalign", "giza word alignment tool", 0.0, 0.47000362924573563),
        ("word alignment", "fastalign", 0.0, 1.4508328822574619),
        ("word alignment", "fastalign word aligner", 0.4449738501734775, 1.8958067324309393),
        ("word alignment", "giza word alignment tool", 1.1843533732713976, 2.6351862555288594),
    ];
    for (q, span, okapi, plus) in cases {
        assert!((okapi_score(s, &p, &toks(q), &id(span)) - okapi).abs() < 1e-9, "{q} / {span}");
        assert!((plus_score(s, &p, &toks(q), &id(span)) - plus).abs() < 1e-9, "{q} / {span}");
    }
    assert!((idf(s, "fastalign") - 1.6f64.ln()).abs() < 1e-12);
}

#[test]
fn idf_of_unseen_token_uses_zero_frequency() {
    let db = three_span();
    assert!((idf(db.stats(), "zzz") - (3.5f64 / 0.5 + 1.0).ln()).abs() < 1e-12);
}

#[test]
fn identical_top_lists_give_cutoff_candidates() {
    let lines: Vec<String> = (0..60).map(|i| format!("shared token{i}")).collect();
    let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
    let db = db_from_lines(&refs);
    let got = LexicalIndex::build(&db).prefetch(&Bm25Params::default(), "shared", 50);
    assert_eq!(got.len(), 50);
}

/// BM25+ is Okapi plus a per-query constant, so the two lists can only part
/// ways through rounding. This corpus has one such split at the cutoff.
#[test]
fn lists_differing_by_one_span_give_51() {
    let text = include_str!("fixtures/rounding_corpus.txt");
    let lines: Vec<&str> = text.lines().collect();
    let db = db_from_lines(&lines);
    assert_eq!(db.len(), 60);
    let params = Bm25Params::default();

    let oracle = Bm25Oracle::new(&db);
    let q = oracle_tokens("x y z");
    let top = |score: &dyn Fn(usize) -> f64| -> BTreeSet<usize> {
        let mut ids: Vec<usize> = (0..db.len()).collect();
        ids.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap().then(a.cmp(&b)));
        ids.into_iter().take(50).collect()
    };
    let okapi_top = top(&|i| oracle.okapi(&q, i));
    let plus_top = top(&|i| oracle.plus(&q, i));
    assert_eq!(okapi_top.symmetric_difference(&plus_top).count(), 2);
    let expected: BTreeSet<usize> = okapi_top.union(&plus_top).copied().collect();

    let got = LexicalIndex::build(&db).prefetch(&params, "x y z", 50);
    assert_eq!(got.len(), 51);
    assert_eq!(got.entries.iter().map(|c| c.span_id).collect::<BTreeSet<_>>(), expected);
    assert_eq!(prefetch_naive(&db, &params, "x y z", 50), got);
}

#[test]
fn okapi_grows_with_term_frequency() {
    // same length, one more occurrence of the query token
    let db = db_from_lines(&["a b c d", "a a c d", "a a a d", "e f g h"]);
    let p = Bm25Params::default();
    let q = toks("a");
    let scores: Vec<f64> = ["a b c d", "a a c d", "a a a d"].iter().map(|s| okapi_score(db.stats(), &p, &q, &toks(s))).collect();
    assert!(scores[0] < scores[1] && scores[1] < scores[2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_matches_full_scan_bit_for_bit(seed in any::<u64>(), n in 1usize..120, cutoff in 1usize..60, qlen in 1usize..6) {
        let mut r = rng(seed);
        let db = random_db(&mut r, n, 7);
        let query: Vec<String> = (0..qlen).map(|i| format!("t{}", (seed as usize + i * 5) % 14)).collect();
        let query = query.join(" ");
        let params = Bm25Params::default();
        let fast = LexicalIndex::build(&db).prefetch(&params, &query, cutoff);
        let slow = prefetch_naive(&db, &params, &query, cutoff);
        prop_assert_eq!(&fast, &slow);
        prop_assert!(fast.len() <= 2 * cutoff);
        for c in &fast.entries {
            prop_assert!(c.okapi_score >= 0.0 && c.plus_score >= 0.0);
            prop_assert_eq!(c.okapi_score.to_bits(), slow.entries.iter().find(|x| x.span_id == c.span_id).unwrap().okapi_score.to_bits());
        }
    }

    #[test]
    fn every_candidate_is_in_some_top_list(seed in any::<u64>(), cutoff in 1usize..20) {
        let mut r = rng(seed);
        let db = random_db(&mut r, 40, 5);
        let oracle = Bm25Oracle::new(&db);
        let query = "t1 t3 t5";
        let q = oracle_tokens(query);
        let got = LexicalIndex::build(&db).prefetch(&Bm25Params::default(), query, cutoff);
        let top = |score: &dyn Fn(usize) -> f64| -> BTreeSet<usize> {
            let mut ids: Vec<usize> = (0..db.len()).collect();
            ids.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap().then(a.cmp(&b)));
            ids.into_iter().take(cutoff).collect()
        };
        let okapi_top = top(&|i| oracle.okapi(&q, i));
        let plus_top = top(&|i| oracle.plus(&q, i));
        for c in &got.entries {
            prop_assert!(okapi_top.contains(&c.span_id) || plus_top.contains(&c.span_id));
        }
    }

    #[test]
    fn insertion_order_does_not_matter(seed in any::<u64>()) {
        let mut r = rng(seed);
        let db = random_db(&mut r, 30, 6);
        let mut recs: Vec<_> = db.records().iter().flat_map(|rec| {
            rec.citations.iter().flat_map(move |c| std::iter::repeat_n(span(&rec.text, &[c.paper_id.as_str()]), c.support as usize))
        }).collect();
        recs.reverse();
        let shuffled = EvidenceDatabase::build(recs, db.papers().values().cloned()).0;
        prop_assert_eq!(&shuffled, &db);
        let p = Bm25Params::default();
        prop_assert_eq!(
            LexicalIndex::build(&shuffled).prefetch(&p, "t2 t4", 10),
            LexicalIndex::build(&db).prefetch(&p, "t2 t4", 10)
        );
    }
}
