use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use evidencite::eval::{evaluate, filter_eval_candidates, read_eval_set};
use evidencite::span::{read_parsed_sentences, span_records};
use evidencite::{
    AppConfig, EvidenceDatabase, ExtractConfig, MetricsReport, PaperMetadata, Recommender, SpanRecord, Strategy,
};
use log::{info, warn};

use crate::args::{Cli, Command, PipelineArgs};
use crate::{service, CliError, CliResult};

pub fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Extract { sentences, out: path } => extract(&sentences, path.as_deref(), out),
        Command::Build { sentences, spans, papers, out: path, json } => build(&sentences, &spans, &papers, &path, json, out),
        Command::Recommend { pipeline, query, k, json } => recommend(&pipeline, &query, k, json, out),
        Command::Evaluate { pipeline, eval, ablate, cutoffs, json } => {
            evaluate_cmd(&pipeline, &eval, ablate.as_deref(), &cutoffs, json, out)
        }
        Command::Serve { pipeline, addr } => {
            let config = load_config(&pipeline)?;
            let recommender = load_recommender(&config)?;
            service::serve_blocking(&addr, recommender, config).map_err(CliError::data)
        }
        Command::Config { pipeline } => {
            let config = load_config(&pipeline)?;
            write!(out, "{}", config.to_kv_string()).map_err(CliError::data)
        }
    }
}

/// Config file (flag or environment), then flag overrides.
pub fn load_config(args: &PipelineArgs) -> CliResult<AppConfig> {
    let mut cfg = match &args.config {
        Some(path) => AppConfig::from_file(path).with_context(|| format!("reading config {}", path.display())).map_err(CliError::usage)?,
        None => AppConfig::default(),
    };
    let mut set = |key: &str, value: Option<String>| -> CliResult<()> {
        match value {
            Some(v) => cfg.set(key, &v).map_err(CliError::usage),
            None => Ok(()),
        }
    };
    set("db_path", args.db.as_ref().map(|p| p.display().to_string()))?;
    set("strategy", args.strategy.clone())?;
    set("fusion", args.fusion.clone())?;
    set("router.threshold", args.threshold.map(|v| v.to_string()))?;
    set("prefetch.cutoff", args.cutoff.map(|v| v.to_string()))?;
    set("bm25.k1", args.k1.map(|v| v.to_string()))?;
    set("bm25.b", args.b.map(|v| v.to_string()))?;
    set("bm25.delta", args.delta.map(|v| v.to_string()))?;
    set("max_in_flight", args.max_in_flight.map(|v| v.to_string()))?;
    if args.no_fallback {
        set("embed.fallback", Some("false".into()))?;
    }
    if let Some(url) = &args.embed_url {
        cfg.set_provider("http", Some(url.clone()), None).map_err(CliError::usage)?;
    }
    if let Some(path) = &args.embed_cache {
        cfg.set_provider("cache", None, Some(path.display().to_string())).map_err(CliError::usage)?;
    }
    cfg.validate().map_err(CliError::usage)?;
    Ok(cfg)
}

pub fn load_recommender(cfg: &AppConfig) -> CliResult<Recommender> {
    let path = cfg.db_path.as_ref().ok_or_else(|| CliError::usage(anyhow!("no database given (--db or db_path)")))?;
    let db = EvidenceDatabase::load(path).with_context(|| format!("loading {}", path.display())).map_err(CliError::data)?;
    let provider = cfg.build_provider().context("setting up the embedding provider").map_err(CliError::data)?;
    info!("loaded {} spans, {} papers from {}", db.len(), db.papers().len(), path.display());
    Ok(Recommender::new(db, cfg.pipeline.clone(), provider))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).with_context(|| format!("opening {}", path.display())).map_err(CliError::data)
}

fn io(e: std::io::Error) -> CliError {
    CliError::data(e)
}

/// Extracts span records from a parsed-sentence file. Undecodable lines and
/// invalid sentences are skipped with a warning.
fn spans_from_sentences(path: &Path) -> CliResult<Vec<SpanRecord>> {
    let cfg = ExtractConfig::default();
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for item in read_parsed_sentences(open(path)?) {
        match item {
            Ok(sentence) => match span_records(&sentence, &cfg) {
                Ok(spans) => records.extend(spans),
                Err(e) => {
                    skipped += 1;
                    warn!("{}: sentence {}/{} skipped: {e}", path.display(), sentence.paper_id, sentence.sentence_index);
                }
            },
            Err((line, reason)) => {
                skipped += 1;
                warn!("{}:{line}: {reason}", path.display());
            }
        }
    }
    if skipped > 0 {
        eprintln!("warning: {skipped} sentence(s) in {} skipped", path.display());
    }
    Ok(records)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let mut items = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1)).map_err(CliError::data)?;
        items.push(item);
    }
    Ok(items)
}

fn extract(sentences: &Path, path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let records = spans_from_sentences(sentences)?;
    let mut sink: Box<dyn Write + '_> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display())).map_err(CliError::data)?)),
        None => Box::new(out),
    };
    for r in &records {
        serde_json::to_writer(&mut sink, r).map_err(CliError::data)?;
        sink.write_all(b"\n").map_err(io)?;
    }
    sink.flush().map_err(io)?;
    if path.is_some() {
        eprintln!("{} spans extracted", records.len());
    }
    Ok(())
}

fn build(
    sentences: &[std::path::PathBuf],
    spans: &[std::path::PathBuf],
    papers: &Path,
    path: &Path,
    json: bool,
    out: &mut dyn Write,
) -> CliResult<()> {
    if sentences.is_empty() && spans.is_empty() {
        return Err(CliError::usage(anyhow!("give --sentences and/or --spans")));
    }
    let mut records = Vec::new();
    for p in sentences {
        records.extend(spans_from_sentences(p)?);
    }
    for p in spans {
        records.extend(read_jsonl::<SpanRecord>(p)?);
    }
    let papers: Vec<PaperMetadata> = read_jsonl(papers)?;
    let (db, report) = EvidenceDatabase::build(records, papers);
    if db.is_empty() {
        eprintln!("warning: no evidence spans; writing an empty database");
    }
    if report.dropped_citations > 0 {
        eprintln!(
            "warning: {} citation(s) to {} paper(s) missing from the paper table were dropped",
            report.dropped_citations,
            report.dropped_paper_ids.len()
        );
    }
    db.save(path).with_context(|| format!("writing {}", path.display())).map_err(CliError::data)?;
    if json {
        let summary = serde_json::json!({
            "spans": db.len(),
            "papers": db.cited_papers().len(),
            "avg_span_tokens": db.stats().avg_span_tokens,
            "report": report,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&summary).map_err(CliError::data)?).map_err(io)?;
    } else {
        writeln!(out, "spans            {}", db.len()).map_err(io)?;
        writeln!(out, "papers           {}", db.cited_papers().len()).map_err(io)?;
        writeln!(out, "avg span tokens  {:.2}", db.stats().avg_span_tokens).map_err(io)?;
        writeln!(out, "input spans      {}", report.input_spans).map_err(io)?;
        writeln!(out, "skipped spans    {}", report.skipped_spans).map_err(io)?;
        writeln!(out, "dropped cites    {}", report.dropped_citations).map_err(io)?;
    }
    Ok(())
}

fn recommend(args: &PipelineArgs, query: &str, k: Option<usize>, json: bool, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(args)?;
    let rec = load_recommender(&cfg)?;
    let payload = rec.recommend(query, k.unwrap_or(cfg.default_k)).map_err(CliError::data)?;
    if json {
        writeln!(out, "{}", payload.to_json()).map_err(io)?;
        return Ok(());
    }
    writeln!(out, "route: {}", serde_json::to_value(payload.route).map_err(CliError::data)?.as_str().unwrap_or("")).map_err(io)?;
    if payload.results.is_empty() {
        writeln!(out, "no recommendations").map_err(io)?;
    }
    for r in &payload.results {
        let year = r.paper.year.map_or_else(|| "n.d.".to_string(), |y| y.to_string());
        writeln!(out, "{:>3}. {} ({year}) {}", r.rank, r.paper.id, r.paper.title).map_err(io)?;
        writeln!(out, "     evidence: \"{}\"  [p_r={} p_s={}]", r.evidence, r.p_r, r.p_s).map_err(io)?;
    }
    Ok(())
}

fn evaluate_cmd(
    args: &PipelineArgs,
    eval: &Path,
    ablate: Option<&str>,
    cutoffs: &[usize],
    json: bool,
    out: &mut dyn Write,
) -> CliResult<()> {
    let cfg = load_config(args)?;
    let strategies: Vec<Strategy> = match ablate {
        None => vec![cfg.pipeline.rerank.strategy],
        Some("all") => Strategy::ALL.to_vec(),
        Some(s) => vec![s.parse().map_err(|e: String| CliError::usage(anyhow!(e)))?],
    };
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(CliError::usage(anyhow!("cutoffs must be positive")));
    }
    let base = load_recommender(&cfg)?;
    let set = read_eval_set(open(eval)?).map_err(|(line, reason)| CliError::data(anyhow!("{}:{line}: {reason}", eval.display())))?;
    let total = set.len();
    let set = filter_eval_candidates(set, base.db());
    if set.len() < total {
        eprintln!("{} of {total} datapoints kept (others cite no paper in the database)", set.len());
    }

    let mut reports: Vec<MetricsReport> = Vec::new();
    for strategy in strategies {
        let mut pipeline = cfg.pipeline.clone();
        pipeline.rerank.strategy = strategy;
        let rec = Recommender::new(base.db().clone(), pipeline, cfg.build_provider().map_err(CliError::data)?);
        reports.push(evaluate(&rec, &set, cutoffs).map_err(CliError::data)?);
    }
    if json {
        let body = if reports.len() == 1 {
            serde_json::to_string_pretty(&reports[0])
        } else {
            serde_json::to_string_pretty(&reports)
        };
        writeln!(out, "{}", body.map_err(CliError::data)?).map_err(io)?;
    } else {
        for (i, r) in reports.iter().enumerate() {
            let table = r.to_string();
            // header once
            let text = if i == 0 { table } else { table.lines().skip(1).map(|l| format!("{l}\n")).collect() };
            write!(out, "{text}").map_err(io)?;
        }
    }
    Ok(())
}
