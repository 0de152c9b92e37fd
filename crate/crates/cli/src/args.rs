use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use evidencite::config::CONFIG_ENV;

#[derive(Debug, Parser)]
#[command(name = "evidencite", version, about = "Evidence-grounded local citation recommendation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract evidence spans from parsed sentences (JSONL in, JSONL out).
    Extract {
        /// Parsed-sentence file.
        #[arg(long)]
        sentences: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an evidence database.
    Build {
        /// Parsed-sentence file(s) to extract spans from.
        #[arg(long)]
        sentences: Vec<PathBuf>,
        /// Already extracted span file(s).
        #[arg(long)]
        spans: Vec<PathBuf>,
        /// Paper metadata, one JSON object per line.
        #[arg(long)]
        papers: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Print the build report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Recommend papers for a query.
    Recommend {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, short)]
        query: String,
        /// Number of papers to return.
        #[arg(long, short)]
        k: Option<usize>,
        /// Emit the recommendation payload as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Score a method against an evaluation set.
    Evaluate {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Evaluation set: {query, ground_truth_paper_ids} per line.
        #[arg(long)]
        eval: PathBuf,
        /// Method to score; `all` runs every method.
        #[arg(long, value_name = "METHOD")]
        ablate: Option<String>,
        /// Recall cutoffs.
        #[arg(long, value_delimiter = ',', default_values_t = evidencite::eval::DEFAULT_CUTOFFS)]
        cutoffs: Vec<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Print the effective configuration.
    Config {
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

/// Settings shared by every command that runs the pipeline. Flags override
/// the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Config file; defaults to the file named by the environment variable.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Evidence database file.
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// conditional, okapi, plus, semantic or naive-ensemble.
    #[arg(long)]
    pub strategy: Option<String>,
    /// rank-sum, rrf or rrf:<k>.
    #[arg(long)]
    pub fusion: Option<String>,
    /// Queries with more tokens than this take the semantic route.
    #[arg(long)]
    pub threshold: Option<usize>,
    /// Candidates kept per lexical scorer.
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Embedding service base URL.
    #[arg(long, conflicts_with = "embed_cache")]
    pub embed_url: Option<String>,
    /// Embedding cache file (JSONL or binary).
    #[arg(long)]
    pub embed_cache: Option<PathBuf>,
    /// Fail instead of falling back to lexical ranking when embedding fails.
    #[arg(long)]
    pub no_fallback: bool,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}
