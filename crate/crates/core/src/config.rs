//! Application configuration: a `key = value` text file plus overrides.
//!
//! ```text
//! # comments start with '#'
//! db_path = demo.ilcdb
//! bm25.k1 = 1.5
//! router.threshold = 50
//! strategy = conditional
//! embed.mode = cache
//! embed.cache = embeddings.jsonl
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::embed::{DisabledProvider, EmbeddingCache, EmbeddingProvider, HttpProvider, EMBEDDING_DIM};
use crate::error::{ConfigError, EmbedError};
use crate::recommend::{PipelineConfig, DEFAULT_K};

/// Environment variable naming the config file.
pub const CONFIG_ENV: &str = "ILCDB_CONFIG";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ProviderMode {
    Disabled,
    Http { url: String },
    Cache { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppConfig {
    pub db_path: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    pub provider: ProviderMode,
    pub embedding_dim: usize,
    pub embed_timeout_secs: u64,
    /// Upper bound on concurrent pipeline runs in the service.
    pub max_in_flight: usize,
    pub default_k: usize,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            db_path: None,
            pipeline: PipelineConfig::default(),
            provider: ProviderMode::Disabled,
            embedding_dim: EMBEDDING_DIM,
            embed_timeout_secs: 30,
            max_in_flight: 8,
            default_k: DEFAULT_K,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Invalid { key: key.into(), reason: e.to_string() })
}

impl AppConfig {
    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = AppConfig::default();
        // provider pieces may arrive in any order
        let mut mode = None;
        let mut url = None;
        let mut cache = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, reason: "expected key = value".into() })?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "embed.mode" => mode = Some(v.to_string()),
                "embed.url" => url = Some(v.to_string()),
                "embed.cache" => cache = Some(v.to_string()),
                _ => cfg.set(k, v)?,
            }
        }
        if mode.is_some() || url.is_some() || cache.is_some() {
            cfg.provider = provider_mode(mode.as_deref(), url, cache)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    /// Reads the file named by `ILCDB_CONFIG`, or returns defaults.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) => Self::from_file(p),
            None => Ok(Self::default()),
        }
    }

    /// Applies one setting. Provider settings go through [`set_provider`](Self::set_provider).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let p = &mut self.pipeline;
        match key {
            "db_path" => self.db_path = Some(PathBuf::from(value)),
            "bm25.k1" => p.bm25.k1 = parse(key, value)?,
            "bm25.b" => p.bm25.b = parse(key, value)?,
            "bm25.delta" => p.bm25.delta = parse(key, value)?,
            "prefetch.cutoff" => p.per_scorer_cutoff = parse(key, value)?,
            "router.threshold" => p.rerank.router.length_threshold_tokens = parse(key, value)?,
            "fusion" => p.rerank.fusion = parse(key, value)?,
            "strategy" => p.rerank.strategy = parse(key, value)?,
            "embed.fallback" => p.rerank.fallback_to_lexical = parse(key, value)?,
            "embed.dim" => self.embedding_dim = parse(key, value)?,
            "embed.timeout_secs" => self.embed_timeout_secs = parse(key, value)?,
            "max_in_flight" => self.max_in_flight = parse(key, value)?,
            "default_k" => self.default_k = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn set_provider(&mut self, mode: &str, url: Option<String>, cache: Option<String>) -> Result<(), ConfigError> {
        self.provider = provider_mode(Some(mode), url, cache)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, reason: &str| Err(ConfigError::Invalid { key: key.into(), reason: reason.into() });
        let p = &self.pipeline;
        if !p.bm25.is_valid() {
            return invalid("bm25", "need k1 > 0, 0 <= b <= 1, delta >= 0");
        }
        if p.per_scorer_cutoff == 0 {
            return invalid("prefetch.cutoff", "must be positive");
        }
        if p.rerank.router.length_threshold_tokens == 0 {
            return invalid("router.threshold", "must be positive");
        }
        if self.embedding_dim == 0 {
            return invalid("embed.dim", "must be positive");
        }
        if self.max_in_flight == 0 {
            return invalid("max_in_flight", "must be positive");
        }
        Ok(())
    }

    pub fn to_kv_string(&self) -> String {
        let p = &self.pipeline;
        let mut s = String::new();
        if let Some(db) = &self.db_path {
            let _ = writeln!(s, "db_path = {}", db.display());
        }
        let _ = writeln!(s, "bm25.k1 = {}", p.bm25.k1);
        let _ = writeln!(s, "bm25.b = {}", p.bm25.b);
        let _ = writeln!(s, "bm25.delta = {}", p.bm25.delta);
        let _ = writeln!(s, "prefetch.cutoff = {}", p.per_scorer_cutoff);
        let _ = writeln!(s, "router.threshold = {}", p.rerank.router.length_threshold_tokens);
        let _ = writeln!(s, "fusion = {}", p.rerank.fusion);
        let _ = writeln!(s, "strategy = {}", p.rerank.strategy);
        match &self.provider {
            ProviderMode::Disabled => s.push_str("embed.mode = disabled\n"),
            ProviderMode::Http { url } => {
                let _ = writeln!(s, "embed.mode = http\nembed.url = {url}");
            }
            ProviderMode::Cache { path } => {
                let _ = writeln!(s, "embed.mode = cache\nembed.cache = {}", path.display());
            }
        }
        let _ = writeln!(s, "embed.fallback = {}", p.rerank.fallback_to_lexical);
        let _ = writeln!(s, "embed.dim = {}", self.embedding_dim);
        let _ = writeln!(s, "embed.timeout_secs = {}", self.embed_timeout_secs);
        let _ = writeln!(s, "max_in_flight = {}", self.max_in_flight);
        let _ = writeln!(s, "default_k = {}", self.default_k);
        s
    }

    pub fn build_provider(&self) -> Result<Box<dyn EmbeddingProvider>, EmbedError> {
        Ok(match &self.provider {
            ProviderMode::Disabled => Box::new(DisabledProvider),
            ProviderMode::Http { url } => {
                Box::new(HttpProvider::new(url, self.embedding_dim, Duration::from_secs(self.embed_timeout_secs))?)
            }
            ProviderMode::Cache { path } => Box::new(EmbeddingCache::load(path, self.embedding_dim)?),
        })
    }
}

fn provider_mode(mode: Option<&str>, url: Option<String>, cache: Option<String>) -> Result<ProviderMode, ConfigError> {
    let missing = |k: &str| ConfigError::Invalid { key: k.into(), reason: "required by embed.mode".into() };
    match mode.unwrap_or("disabled") {
        "disabled" => Ok(ProviderMode::Disabled),
        "http" => Ok(ProviderMode::Http { url: url.ok_or_else(|| missing("embed.url"))? }),
        "cache" => Ok(ProviderMode::Cache { path: PathBuf::from(cache.ok_or_else(|| missing("embed.cache"))?) }),
        other => Err(ConfigError::Invalid { key: "embed.mode".into(), reason: format!("unknown mode {other:?}") }),
    }
}
