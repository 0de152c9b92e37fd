//! Text embeddings for the semantic route: the provider abstraction, the
//! on-disk cache formats, and an HTTP client for a remote encoder.
//!
//! Cache files come in two forms:
//!
//! * line-delimited JSON, `{"key": "<hex sha256>", "vector": [f32; 768]}`;
//! * binary: little-endian `u64` entry count, then per entry a 32-byte key
//!   followed by 768 little-endian `f32`.
//!
//! The key is the SHA-256 of the span's normalized text.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::EmbedError;
use crate::text::normalize_key;

pub const EMBEDDING_DIM: usize = 768;

pub type CacheKey = [u8; 32];

pub trait EmbeddingProvider: Send + Sync {
    /// One vector per input text, in input order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        (**self).embed(texts)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<P> {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        (**self).embed(texts)
    }
}

pub fn cache_key(text: &str) -> CacheKey {
    Sha256::digest(normalize_key(text).as_bytes()).into()
}

/// Cosine similarity, accumulated in `f64`. Zero vectors score 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Cosine similarity between the embeddings of `query` and `span`.
pub fn semantic_score(provider: &dyn EmbeddingProvider, query: &str, span: &str) -> Result<f64, EmbedError> {
    let v = provider.embed(&[query, span])?;
    if v.len() != 2 {
        return Err(EmbedError::CountMismatch { expected: 2, got: v.len() });
    }
    Ok(cosine(&v[0], &v[1]))
}

fn check_vector(v: &[f32], dim: usize) -> Result<(), EmbedError> {
    if v.len() != dim {
        return Err(EmbedError::Dimension { expected: dim, got: v.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    Ok(())
}

/// Always fails; used when semantic scoring is switched off.
#[derive(Debug, Clone, Copy, Default)]
pub struct DisabledProvider;

impl EmbeddingProvider for DisabledProvider {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        Err(EmbedError::Unavailable("embedding provider disabled".into()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    vector: Vec<f32>,
}

/// Precomputed embeddings keyed by normalized text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingCache {
    dim: usize,
    entries: HashMap<CacheKey, Vec<f32>>,
}

impl EmbeddingCache {
    pub fn new(dim: usize) -> Self {
        EmbeddingCache { dim, entries: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, text: &str, vector: Vec<f32>) -> Result<(), EmbedError> {
        check_vector(&vector, self.dim)?;
        self.entries.insert(cache_key(text), vector);
        Ok(())
    }

    pub fn get(&self, text: &str) -> Option<&[f32]> {
        self.entries.get(&cache_key(text)).map(Vec::as_slice)
    }

    fn sorted(&self) -> Vec<(&CacheKey, &Vec<f32>)> {
        let mut all: Vec<_> = self.entries.iter().collect();
        all.sort_by_key(|(k, _)| **k);
        all
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (k, v) in self.sorted() {
            serde_json::to_writer(&mut w, &CacheLine { key: hex::encode(k), vector: v.clone() })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R, dim: usize) -> Result<Self, EmbedError> {
        let mut cache = EmbeddingCache::new(dim);
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| EmbedError::Unavailable(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: String| EmbedError::Unavailable(format!("cache line {}: {m}", i + 1));
            let rec: CacheLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let key: CacheKey = hex::decode(&rec.key)
                .ok()
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| bad("key is not a 32-byte hex digest".into()))?;
            check_vector(&rec.vector, dim)?;
            cache.entries.insert(key, rec.vector);
        }
        Ok(cache)
    }

    /// Binary form; the dimension is fixed at [`EMBEDDING_DIM`].
    pub fn to_binary(&self) -> Vec<u8> {
        assert_eq!(self.dim, EMBEDDING_DIM, "binary cache entries are 768-dimensional");
        let mut out = Vec::with_capacity(8 + self.entries.len() * (32 + 4 * EMBEDDING_DIM));
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (k, v) in self.sorted() {
            out.extend_from_slice(k);
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, EmbedError> {
        let bad = |m: &str| EmbedError::Unavailable(format!("binary cache: {m}"));
        let count = u64::from_le_bytes(bytes.get(..8).ok_or_else(|| bad("truncated count"))?.try_into().unwrap());
        let stride = 32 + 4 * EMBEDDING_DIM;
        let body = &bytes[8..];
        if (body.len() as u64) != count.saturating_mul(stride as u64) {
            return Err(bad("length does not match entry count"));
        }
        let mut cache = EmbeddingCache::new(EMBEDDING_DIM);
        for chunk in body.chunks_exact(stride) {
            let key: CacheKey = chunk[..32].try_into().unwrap();
            let vector: Vec<f32> =
                chunk[32..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
            check_vector(&vector, EMBEDDING_DIM)?;
            cache.entries.insert(key, vector);
        }
        Ok(cache)
    }

    /// Reads either form. A file is binary when its length is exactly what
    /// its leading count implies; anything else is read as JSONL.
    pub fn load(path: impl AsRef<Path>, dim: usize) -> Result<Self, EmbedError> {
        let bytes = fs::read(path.as_ref()).map_err(|e| EmbedError::Unavailable(e.to_string()))?;
        if dim == EMBEDDING_DIM && is_binary(&bytes) {
            Self::from_binary(&bytes)
        } else {
            Self::read_jsonl(BufReader::new(bytes.as_slice()), dim)
        }
    }
}

fn is_binary(bytes: &[u8]) -> bool {
    let Some(head) = bytes.get(..8) else { return false };
    let count = u64::from_le_bytes(head.try_into().unwrap());
    let stride = (32 + 4 * EMBEDDING_DIM) as u64;
    count.checked_mul(stride).and_then(|n| n.checked_add(8)) == Some(bytes.len() as u64)
}

impl EmbeddingProvider for EmbeddingCache {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        texts
            .iter()
            .map(|t| self.get(t).map(<[f32]>::to_vec).ok_or_else(|| EmbedError::Missing(t.to_string())))
            .collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

/// Client for a remote `POST /embed` encoder service.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    endpoint: String,
    dim: usize,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(base_url: &str, dim: usize, timeout: Duration) -> Result<Self, EmbedError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Unavailable(e.to_string()))?;
        let endpoint = format!("{}/embed", base_url.trim_end_matches('/'));
        Ok(HttpProvider { endpoint, dim, client })
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest { texts })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| EmbedError::Unavailable(e.to_string()))?;
        let body: EmbedResponse = resp.json().map_err(|e| EmbedError::Unavailable(e.to_string()))?;
        if body.vectors.len() != texts.len() {
            return Err(EmbedError::CountMismatch { expected: texts.len(), got: body.vectors.len() });
        }
        for v in &body.vectors {
            check_vector(v, self.dim)?;
        }
        Ok(body.vectors)
    }
}
