//! Evidence-grounded local citation recommendation.
//!
//! Citation-bearing sentences from a corpus are mined for evidence spans
//! ([`span`]), conflated into an evidence database ([`db`]), and queried by
//! lexical pre-fetching ([`prefetch`]), conditional rank ensembling
//! ([`rerank`]) and paper aggregation ([`recommend`]). Every recommended
//! paper comes paired with a span from the literature that cites it.

pub mod config;
pub mod db;
pub mod embed;
pub mod error;
pub mod eval;
pub mod prefetch;
pub mod recommend;
pub mod rerank;
pub mod span;
pub mod text;

pub use config::AppConfig;
pub use db::{BuildReport, Citation, EvidenceDatabase, EvidenceRecord, IndexStats, PaperMetadata};
pub use embed::{EmbeddingCache, EmbeddingProvider};
pub use error::{ConfigError, DbError, EmbedError, PipelineError, SentenceError};
pub use eval::{EvalDatapoint, MetricsReport};
pub use prefetch::{Bm25Params, CandidateSet, LexicalIndex};
pub use recommend::{PaperAggregate, PipelineConfig, Recommendation, RecommendationPayload, Recommender};
pub use rerank::{FusionRule, RankedEvidence, RerankConfig, Route, RouterConfig, Strategy};
pub use span::{ExtractConfig, ExtractedSpan, ParsedSentence, RefGroup, Rule, SpanRecord, Token};
