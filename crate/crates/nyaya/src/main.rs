use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nyaya::app::{self, ingest_log};
use nyaya::config::{Assets, Config, EmbedderConfig};
use nyaya::engine::{EngineParams, KnowledgeBase};
use nyaya::{evalrun, service, store};
use nyaya_core::compliance::RuleKind;
use nyaya_core::evals::parse_dataset;
use nyaya_core::{Classifier, Corpus, LocalEmbedder, RuleSet, VectorIndex};

#[derive(Parser)]
#[command(name = "nyaya", version, about = "Retrieval-augmented multi-agent assistant for Indian law")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the /v1 HTTP API on NYAYA_PORT.
    Serve,
    /// Validate a corpus file and add its documents to the data directory.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Reject the whole file if any line is invalid.
        #[arg(long)]
        strict: bool,
    },
    #[command(subcommand)]
    Index(IndexCommand),
    /// Classify a query and print the label and per-domain scores.
    Classify {
        #[arg(long)]
        text: String,
        /// Ignore corpus centroids.
        #[arg(long)]
        lexicon_only: bool,
    },
    #[command(subcommand)]
    Eval(EvalCommand),
    #[command(subcommand)]
    Rules(RulesCommand),
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Chunk and embed a corpus file with the local embedder and write an index.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = nyaya_core::embedding::DEFAULT_DIMENSION)]
        dim: usize,
    },
    /// Search an index file.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(short, default_value_t = 5)]
        k: usize,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Run a line-delimited eval dataset through the pipeline.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Print the JSON report instead of tables.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum RulesCommand {
    /// Validate a rules file (NYAYA_RULES_PATH or the built-in rules by default).
    Lint {
        #[arg(long)]
        path: Option<PathBuf>,
    },
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

async fn run(cli: Cli) -> Result<ExitCode> {
    let config = Config::from_env()?;
    match cli.command {
        Command::Serve => serve(config).await?,
        Command::Ingest { input, strict } => return ingest(&config, input, strict),
        Command::Index(IndexCommand::Build { corpus, out, dim }) => {
            let corpus = store::read_corpus_strict(&corpus, store::now_millis())?;
            let embedder = LocalEmbedder::new(dim)?;
            let chunks = corpus.chunk_all(Default::default())?;
            let mut index = VectorIndex::new(dim)?;
            for s in chunks.iter() {
                index.add(s.chunk.chunk_id.clone(), &embedder.embed(&s.chunk.text)?)?;
            }
            store::save_index(&out, &index)?;
            println!("indexed {} chunks from {} documents into {}", index.len(), corpus.len(), out.display());
        }
        Command::Index(IndexCommand::Query { index, text, k }) => {
            let index = store::load_index(&index)?;
            let q = LocalEmbedder::new(index.dimension())?.embed(&text)?;
            for (rank, hit) in index.search(&q, k)?.iter().enumerate() {
                println!("{:>3}  {:.6}  {}", rank + 1, hit.score, hit.chunk_id);
            }
        }
        Command::Classify { text, lexicon_only } => classify(&config, &text, lexicon_only).await?,
        Command::Eval(EvalCommand::Run { dataset, k, json }) => {
            let src = std::fs::read_to_string(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            let records = parse_dataset(&src)?;
            let engine = app::build_engine(&config).await?;
            let report = evalrun::run(&engine, &records, k).await?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render_text());
            }
        }
        Command::Rules(RulesCommand::Lint { path }) => {
            let path = path.or(config.rules_path.clone());
            let rules = match &path {
                Some(p) => {
                    let src = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    RuleSet::from_jsonl(&src)?
                }
                None => Assets::builtin().rules,
            };
            let mut by_kind: BTreeMap<RuleKind, usize> = BTreeMap::new();
            for r in rules.rules() {
                *by_kind.entry(r.kind).or_default() += 1;
            }
            let where_ = path.map_or("built-in rules".to_string(), |p| p.display().to_string());
            println!("{where_}: {} rules OK", rules.len());
            for (kind, n) in by_kind {
                println!("  {:<20} {n}", serde_json::to_value(kind)?.as_str().unwrap_or_default());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

async fn serve(config: Config) -> Result<()> {
    let engine = Arc::new(app::build_engine(&config).await?);
    let h = engine.health();
    tracing::info!("knowledge base ready: {} documents, {} chunks", h.corpus_docs, h.index_size);
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", config.port))
        .await
        .with_context(|| format!("binding port {}", config.port))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, service::router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn ingest(config: &Config, input: PathBuf, strict: bool) -> Result<ExitCode> {
    let existing = app::load_corpus(config)?;
    let src = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
    let mut next = existing.clone();
    let now = store::now_millis();
    let errors = if strict {
        next.ingest_lines_strict(src.lines(), now)?;
        Vec::new()
    } else {
        next.ingest_lines(src.lines(), now).errors
    };
    let mut added = Corpus::new();
    for doc in &next.documents()[existing.len()..] {
        added.insert(doc.clone());
    }
    std::fs::create_dir_all(&config.data_dir)?;
    let log = ingest_log(&config.data_dir);
    store::append_lines(&log, &added.to_jsonl()).with_context(|| format!("writing {}", log.display()))?;
    println!("ingested {} documents into {}", added.len(), log.display());
    for e in &errors {
        println!("  {e}");
    }
    Ok(if errors.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

async fn classify(config: &Config, text: &str, lexicon_only: bool) -> Result<()> {
    let assets = Assets::load(config.config_dir.as_deref(), config.rules_path.as_deref())?;
    let dim = match config.embedder {
        EmbedderConfig::Local { dimension } => dimension,
        EmbedderConfig::Remote { .. } => bail!("classify uses the local embedder; unset NYAYA_EMBEDDER"),
    };
    let embedder = LocalEmbedder::new(dim)?;
    let params = EngineParams::default();
    let classifier = if lexicon_only {
        Classifier::lexicon_only(assets.lexicon.clone(), params.classifier)
    } else {
        KnowledgeBase::build(0, app::load_corpus(config)?, &embedder, &assets, &params).await?.classifier
    };
    let c = classifier.classify(text, Some(&embedder.embed(text)?))?;
    println!("{} (confidence {:.3})", c.label.as_str(), c.confidence);
    for (d, s) in &c.scores {
        println!("  {:<15} {s:.4}", d.as_str());
    }
    Ok(())
}
