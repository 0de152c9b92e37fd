//! Synthetic evidence databases for benchmarking.

use evidencite::{EvidenceDatabase, PaperMetadata, SpanRecord};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const VOCAB: usize = 5_000;

fn word(rng: &mut StdRng) -> String {
    // Zipf-ish: small ids are far more common
    let r: f64 = rng.gen();
    format!("w{}", (r * r * r * VOCAB as f64) as usize)
}

/// `spans` random spans of 1..=40 tokens, each citing one of `papers`
/// papers.
pub fn synthetic_db(spans: usize, papers: usize, seed: u64) -> EvidenceDatabase {
    let mut rng = StdRng::seed_from_u64(seed);
    let records: Vec<SpanRecord> = (0..spans)
        .map(|_| {
            let len = rng.gen_range(1..=40);
            let text = (0..len).map(|_| word(&mut rng)).collect::<Vec<_>>().join(" ");
            SpanRecord {
                span_text: text,
                cited_paper_ids: [format!("p{}", rng.gen_range(0..papers))].into(),
                rule: None,
                provenance: None,
            }
        })
        .collect();
    let meta = (0..papers).map(|i| PaperMetadata::new(format!("p{i}"), format!("Paper {i}"), 2000 + (i % 24) as u32));
    EvidenceDatabase::build(records, meta).0
}

pub fn synthetic_query(tokens: usize, seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..tokens).map(|_| word(&mut rng)).collect::<Vec<_>>().join(" ")
}
