//! Re-ranking of pre-fetched evidence spans.
//!
//! Short queries are ranked by fusing the Okapi and BM25+ ranks. Queries
//! longer than the router threshold fuse a semantic rank (cosine similarity
//! of query and span embeddings) with the BM25+ rank instead. The other
//! strategies exist for ablations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::db::EvidenceDatabase;
use crate::embed::{cosine, EmbeddingProvider};
use crate::error::PipelineError;
use crate::prefetch::{by_score_desc, CandidateSet};

pub const DEFAULT_LENGTH_THRESHOLD: usize = 50;

pub type RankMap = BTreeMap<usize, usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterConfig {
    /// Queries with more tokens than this take the semantic route.
    pub length_threshold_tokens: usize,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig { length_threshold_tokens: DEFAULT_LENGTH_THRESHOLD }
    }
}

impl RouterConfig {
    pub fn is_long(&self, query_tokens: usize) -> bool {
        query_tokens > self.length_threshold_tokens
    }
}

/// How component ranks combine into one order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum FusionRule {
    /// Ascending sum of ranks.
    #[default]
    RankSum,
    /// Descending sum of `1 / (k + rank)`.
    ReciprocalRank { k: f64 },
}


impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionRule::RankSum => write!(f, "rank-sum"),
            FusionRule::ReciprocalRank { k } => write!(f, "rrf:{k}"),
        }
    }
}

impl FromStr for FusionRule {
    type Err = String;

    /// `rank-sum`, `rrf` (k = 60) or `rrf:<k>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rank-sum" => Ok(FusionRule::RankSum),
            "rrf" => Ok(FusionRule::ReciprocalRank { k: 60.0 }),
            other => match other.strip_prefix("rrf:").map(str::parse::<f64>) {
                Some(Ok(k)) if k >= 0.0 && k.is_finite() => Ok(FusionRule::ReciprocalRank { k }),
                _ => Err(format!("unknown fusion rule {other:?}")),
            },
        }
    }
}

/// Which ranking each query gets. `Conditional` is the default; the rest
/// reproduce the single-scorer and always-ensemble baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Conditional,
    Okapi,
    Plus,
    Semantic,
    NaiveEnsemble,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Conditional, Strategy::Okapi, Strategy::Plus, Strategy::Semantic, Strategy::NaiveEnsemble];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Conditional => "conditional",
            Strategy::Okapi => "okapi",
            Strategy::Plus => "plus",
            Strategy::Semantic => "semantic",
            Strategy::NaiveEnsemble => "naive-ensemble",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| format!("unknown strategy {s:?} (expected one of conditional, okapi, plus, semantic, naive-ensemble)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Lexical,
    Semantic,
    /// Semantic ranking was wanted but embeddings were unavailable.
    LexicalFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankConfig {
    pub router: RouterConfig,
    pub strategy: Strategy,
    pub fusion: FusionRule,
    /// Fall back to lexical ranking when embeddings fail; otherwise the
    /// failure is returned.
    pub fallback_to_lexical: bool,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            router: RouterConfig::default(),
            strategy: Strategy::default(),
            fusion: FusionRule::default(),
            fallback_to_lexical: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSpan {
    pub span_id: usize,
    pub rank: usize,
    pub component_ranks: BTreeMap<String, usize>,
    pub component_scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEvidence {
    pub route: Route,
    /// In rank order; ranks are 1..=m.
    pub entries: Vec<RankedSpan>,
}

/// Ranks 1..=n by descending score, ties by ascending span id.
pub fn ranks_by_score(scores: &[(usize, f64)]) -> RankMap {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| by_score_desc(*a, *b));
    sorted.into_iter().enumerate().map(|(i, (id, _))| (id, i + 1)).collect()
}

/// Orders spans by fused rank under `rule`. Ties go to the higher tiebreak
/// score, then the lower span id. Every rank map must cover the same spans.
pub fn fuse(rule: FusionRule, ranks: &[&RankMap], tiebreak: &BTreeMap<usize, f64>) -> Result<Vec<usize>, PipelineError> {
    let Some(first) = ranks.first() else {
        return Ok(Vec::new());
    };
    let ids: BTreeSet<usize> = first.keys().copied().collect();
    if ranks.iter().any(|r| r.len() != ids.len() || !r.keys().all(|k| ids.contains(k))) {
        return Err(PipelineError::RankKeyMismatch);
    }
    let tb = |id: usize| tiebreak.get(&id).copied().unwrap_or(f64::NEG_INFINITY);
    let mut order: Vec<usize> = ids.into_iter().collect();
    match rule {
        FusionRule::RankSum => {
            let sum = |id: usize| ranks.iter().map(|r| r[&id]).sum::<usize>();
            order.sort_by(|&a, &b| sum(a).cmp(&sum(b)).then(tb(b).total_cmp(&tb(a))).then(a.cmp(&b)));
        }
        FusionRule::ReciprocalRank { k } => {
            let score = |id: usize| ranks.iter().map(|r| 1.0 / (k + r[&id] as f64)).fold(0.0, |a, x| a + x);
            order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(tb(b).total_cmp(&tb(a))).then(a.cmp(&b)));
        }
    }
    Ok(order)
}

/// Two-list rank-sum fusion.
pub fn fuse_ranks(rank_a: &RankMap, rank_b: &RankMap, tiebreak: &BTreeMap<usize, f64>) -> Result<Vec<usize>, PipelineError> {
    fuse(FusionRule::RankSum, &[rank_a, rank_b], tiebreak)
}

fn semantic_scores(
    db: &EvidenceDatabase,
    candidates: &CandidateSet,
    query: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<(usize, f64)>, PipelineError> {
    let mut texts: Vec<&str> = Vec::with_capacity(candidates.len() + 1);
    texts.push(query);
    for c in &candidates.entries {
        texts.push(db.record(c.span_id).map_or("", |r| r.text.as_str()));
    }
    let vectors = provider.embed(&texts)?;
    if vectors.len() != texts.len() {
        return Err(crate::error::EmbedError::CountMismatch { expected: texts.len(), got: vectors.len() }.into());
    }
    Ok(candidates.entries.iter().zip(&vectors[1..]).map(|(c, v)| (c.span_id, cosine(&vectors[0], v))).collect())
}

/// Re-ranks `candidates` according to `cfg`.
///
/// The provider is called at most once per query, with the query followed
/// by every candidate text, and only when the strategy needs embeddings.
pub fn rerank(
    db: &EvidenceDatabase,
    candidates: &CandidateSet,
    query: &str,
    cfg: &RerankConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<RankedEvidence, PipelineError> {
    let okapi: Vec<(usize, f64)> = candidates.entries.iter().map(|c| (c.span_id, c.okapi_score)).collect();
    let plus: Vec<(usize, f64)> = candidates.entries.iter().map(|c| (c.span_id, c.plus_score)).collect();
    let okapi_ranks = ranks_by_score(&okapi);
    let plus_ranks = ranks_by_score(&plus);
    let tiebreak: BTreeMap<usize, f64> = plus.iter().copied().collect();

    let wants_semantic = match cfg.strategy {
        Strategy::Conditional => cfg.router.is_long(candidates.query_tokens.len()),
        Strategy::Semantic | Strategy::NaiveEnsemble => true,
        Strategy::Okapi | Strategy::Plus => false,
    };

    let mut route = Route::Lexical;
    let mut semantic = None;
    if wants_semantic && !candidates.is_empty() {
        match semantic_scores(db, candidates, query, provider) {
            Ok(s) => {
                route = Route::Semantic;
                semantic = Some(s);
            }
            Err(e) if cfg.fallback_to_lexical => {
                warn!("semantic ranking unavailable, using lexical ranks: {e}");
                route = Route::LexicalFallback;
            }
            Err(e) => return Err(e),
        }
    }
    let semantic_ranks = semantic.as_deref().map(ranks_by_score);

    let order = match (&semantic_ranks, cfg.strategy) {
        (Some(sem), Strategy::Semantic) => fuse(cfg.fusion, &[sem], &tiebreak)?,
        (Some(sem), Strategy::NaiveEnsemble) => fuse(cfg.fusion, &[sem, &okapi_ranks, &plus_ranks], &tiebreak)?,
        (Some(sem), _) => fuse(cfg.fusion, &[sem, &plus_ranks], &tiebreak)?,
        (None, Strategy::Okapi) => fuse(cfg.fusion, &[&okapi_ranks], &tiebreak)?,
        (None, Strategy::Plus) => fuse(cfg.fusion, &[&plus_ranks], &tiebreak)?,
        (None, _) => fuse(cfg.fusion, &[&okapi_ranks, &plus_ranks], &tiebreak)?,
    };

    let okapi_by_id: BTreeMap<usize, f64> = okapi.into_iter().collect();
    let sem_by_id: Option<BTreeMap<usize, f64>> = semantic.map(|s| s.into_iter().collect());
    let entries = order
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let mut component_ranks = BTreeMap::new();
            let mut component_scores = BTreeMap::new();
            component_ranks.insert("okapi".to_string(), okapi_ranks[&id]);
            component_ranks.insert("plus".to_string(), plus_ranks[&id]);
            component_scores.insert("okapi".to_string(), okapi_by_id[&id]);
            component_scores.insert("plus".to_string(), tiebreak[&id]);
            if let (Some(r), Some(s)) = (&semantic_ranks, &sem_by_id) {
                component_ranks.insert("semantic".to_string(), r[&id]);
                component_scores.insert("semantic".to_string(), s[&id]);
            }
            RankedSpan { span_id: id, rank: i + 1, component_ranks, component_scores }
        })
        .collect();
    Ok(RankedEvidence { route, entries })
}
