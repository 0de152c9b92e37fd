//! MRR and Recall@N over a file of queries with ground-truth papers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::db::EvidenceDatabase;
use crate::error::PipelineError;
use crate::recommend::Recommender;
use crate::rerank::Route;

pub const DEFAULT_CUTOFFS: [usize; 4] = [1, 3, 5, 10];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalDatapoint {
    pub query: String,
    pub ground_truth_paper_ids: BTreeSet<String>,
}

pub fn read_eval_set<R: BufRead>(reader: R) -> Result<Vec<EvalDatapoint>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| (i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let d: EvalDatapoint = serde_json::from_str(&line).map_err(|e| (i + 1, e.to_string()))?;
        if d.ground_truth_paper_ids.is_empty() {
            return Err((i + 1, "empty ground truth".into()));
        }
        out.push(d);
    }
    Ok(out)
}

/// Keeps datapoints with at least one ground-truth paper cited somewhere in
/// the database.
pub fn filter_eval_candidates(candidates: Vec<EvalDatapoint>, db: &EvidenceDatabase) -> Vec<EvalDatapoint> {
    let cited = db.cited_papers();
    candidates
        .into_iter()
        .filter(|d| d.ground_truth_paper_ids.iter().any(|p| cited.contains(p.as_str())))
        .collect()
}

/// 1-based rank of the first ground-truth paper, if any.
pub fn first_hit<S: AsRef<str>>(ranked_paper_ids: &[S], ground_truth: &BTreeSet<String>) -> Option<usize> {
    ranked_paper_ids.iter().position(|p| ground_truth.contains(p.as_ref())).map(|i| i + 1)
}

pub fn reciprocal_rank<S: AsRef<str>>(ranked_paper_ids: &[S], ground_truth: &BTreeSet<String>) -> f64 {
    first_hit(ranked_paper_ids, ground_truth).map_or(0.0, |r| 1.0 / r as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query: String,
    pub route: Route,
    pub first_hit_rank: Option<usize>,
    pub reciprocal_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: String,
    pub mrr: f64,
    pub recall_at: BTreeMap<usize, f64>,
    pub n_queries: usize,
    pub per_query: Vec<QueryOutcome>,
}

impl MetricsReport {
    /// Aggregates per-query first-hit ranks.
    pub fn from_outcomes(strategy: &str, per_query: Vec<QueryOutcome>, cutoffs: &[usize]) -> Result<Self, PipelineError> {
        if per_query.is_empty() {
            return Err(PipelineError::EmptyEvalSet);
        }
        let n = per_query.len() as f64;
        let mrr = per_query.iter().map(|q| q.reciprocal_rank).sum::<f64>() / n;
        let recall_at = cutoffs
            .iter()
            .map(|&c| {
                let hits = per_query.iter().filter(|q| q.first_hit_rank.is_some_and(|r| r <= c)).count();
                (c, hits as f64 / n)
            })
            .collect();
        Ok(MetricsReport { strategy: strategy.to_string(), mrr, recall_at, n_queries: per_query.len(), per_query })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<16} {:>8}", "method", "MRR")?;
        for c in self.recall_at.keys() {
            write!(f, " {:>7}", format!("R@{c}"))?;
        }
        writeln!(f, " {:>6}", "n")?;
        write!(f, "{:<16} {:>8.5}", self.strategy, self.mrr)?;
        for v in self.recall_at.values() {
            write!(f, " {v:>7.3}")?;
        }
        writeln!(f, " {:>6}", self.n_queries)
    }
}

/// Runs every query through `recommender` and scores the full ranked paper
/// list against its ground truth.
pub fn evaluate(recommender: &Recommender, eval_set: &[EvalDatapoint], cutoffs: &[usize]) -> Result<MetricsReport, PipelineError> {
    if eval_set.is_empty() {
        return Err(PipelineError::EmptyEvalSet);
    }
    let mut outcomes = Vec::with_capacity(eval_set.len());
    for d in eval_set {
        let (ranked, papers) = recommender.rank_all_papers(&d.query)?;
        let ids: Vec<&str> = papers.iter().map(|p| p.paper_id.as_str()).collect();
        let hit = first_hit(&ids, &d.ground_truth_paper_ids);
        outcomes.push(QueryOutcome {
            query: d.query.clone(),
            route: ranked.route,
            first_hit_rank: hit,
            reciprocal_rank: hit.map_or(0.0, |r| 1.0 / r as f64),
        });
    }
    MetricsReport::from_outcomes(recommender.config().rerank.strategy.name(), outcomes, cutoffs)
}
