// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use chunklab::chunking::{Chunk, ChunkMethod, ChunkParams, ChunkRecord};
use chunklab::context::{assemble_context, FillPolicy};
use chunklab::corpus::{Corpus, QaSet};
use chunklab::retrieval::{
    build_index, ExternalVectors, Index, IndexMode, RetrievalMode, SparseVector,
};
use chunklab::runner::{
    self, defaults_markdown, export_report, ExperimentConfig, ExportFormat, RunOptions, RunReport,
    REPORT_JSON,
};

#[derive(Parser)]
#[command(
    name = "chunklab",
    version,
    about = "Chunking evaluation for retrieval-augmented QA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a documents or QA JSONL file and print its record count.
    Ingest(IngestArgs),
    /// Chunk a corpus and write chunks.jsonl.
    Chunk(ChunkArgs),
    /// Build a sparse index from a chunk dump.
    Index(IndexArgs),
    /// Query an index, optionally assembling a context window.
    Retrieve(RetrieveArgs),
    /// Run the experiment grid from a config file.
    Run(RunArgs),
    /// Re-export report files from a finished run directory.
    Report(ReportArgs),
    /// Write the synthetic toy corpus and a matching config.
    Toy(ToyArgs),
    /// Print the config JSON schema.
    Schema,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, conflicts_with = "qa", required_unless_present = "qa")]
    docs: Option<PathBuf>,
    #[arg(long)]
    qa: Option<PathBuf>,
}

#[derive(Args)]
struct Shared {
    /// Experiment config supplying tokenizer, segmenter and embedding settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Documents JSONL; defaults to the config's corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

impl Shared {
    fn settings(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::new("", ""),
        };
        if let Some(c) = &self.corpus {
            cfg.corpus = c.clone();
        }
        Ok(cfg)
    }

    fn corpus(&self, cfg: &ExperimentConfig) -> Result<Corpus> {
        if cfg.corpus.as_os_str().is_empty() {
            bail!("no corpus given; pass --corpus or --config");
        }
        Ok(Corpus::load(&cfg.corpus)?)
    }
}

#[derive(Args)]
struct ChunkArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    method: ChunkMethod,
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0.0)]
    overlap: f64,
    /// Store chunk text in the dump instead of only spans.
    #[arg(long)]
    inline_text: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IndexArgs {
    #[command(flatten)]
    shared: Shared,
    /// Chunk dump written by `chunk`.
    #[arg(long)]
    chunks: PathBuf,
    #[arg(long, default_value = "bm25")]
    mode: String,
    /// Chunk vectors JSONL for external mode.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RetrieveArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    index: PathBuf,
    /// Query text, vectorized with the index's tokenizer (BM25 mode).
    #[arg(
        long,
        conflicts_with = "query_vector",
        required_unless_present = "query_vector"
    )]
    query: Option<String>,
    /// Query as JSON `[[term_id, weight], ...]` (external mode).
    #[arg(long)]
    query_vector: Option<String>,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
    /// Assemble a context window of this many tokens (needs --chunks).
    #[arg(long, requires = "chunks")]
    budget: Option<usize>,
    #[arg(long, default_value = "stop")]
    policy: FillPolicy,
    #[arg(long)]
    chunks: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    stub_generator: bool,
    #[arg(long)]
    policy: Option<FillPolicy>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory containing report.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "csv,jsonl,plotdata")]
    format: Vec<ExportFormat>,
    /// Print the recommended defaults table and exit.
    #[arg(long)]
    defaults: bool,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    docs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn load_chunks(dump: &Path, corpus: &Corpus) -> Result<Vec<Chunk>> {
    let raw =
        std::fs::read_to_string(dump).with_context(|| format!("reading {}", dump.display()))?;
    let mut out = Vec::new();
    for (n, line) in raw
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let r: ChunkRecord =
            serde_json::from_str(line).with_context(|| format!("{}:{}", dump.display(), n + 1))?;
        let text = match r.text {
            Some(t) => t,
            None => {
                let doc = corpus.get(&r.doc_id).with_context(|| {
                    format!("chunk {} names unknown document {}", r.chunk_id, r.doc_id)
                })?;
                doc.text
                    .get(r.start..r.end)
                    .with_context(|| format!("chunk {} span out of range", r.chunk_id))?
                    .to_string()
            }
        };
        out.push(Chunk {
            chunk_id: r.chunk_id,
            doc_id: r.doc_id,
            start: r.start,
            end: r.end,
            text,
            token_count: r.token_count,
            method: r.method,
            oversized: r.oversized,
            params_fingerprint: String::new(),
        });
    }
    Ok(out)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let (kind, n) = match (&a.docs, &a.qa) {
        (Some(p), _) => ("documents", Corpus::load(p)?.len()),
        (None, Some(p)) => ("qa", QaSet::load(p)?.len()),
        (None, None) => bail!("pass --docs or --qa"),
    };
    print_json(&serde_json::json!({ "kind": kind, "count": n }))
}

fn cmd_chunk(a: ChunkArgs) -> Result<()> {
    let cfg = a.shared.settings()?;
    let corpus = a.shared.corpus(&cfg)?;
    let params = ChunkParams::new(a.method, a.size, a.overlap)?
        .with_semantic(cfg.semantic.threshold, cfg.semantic.anchor)?;
    let chunker = runner::chunker_from_config(&cfg)?;
    let embedder = match a.method {
        ChunkMethod::Semantic => Some(runner::embedder_from_config(&cfg)?),
        _ => None,
    };
    let chunks = chunker.chunk_all(corpus.as_slice(), &params, embedder.as_deref())?;
    std::fs::create_dir_all(&a.out)?;
    let path = a.out.join("chunks.jsonl");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    for c in &chunks {
        serde_json::to_writer(&mut w, &ChunkRecord::from_chunk(c, a.inline_text))?;
        writeln!(w)?;
    }
    w.flush()?;
    print_json(&serde_json::json!({
        "chunks": chunks.len(),
        "oversized": chunks.iter().filter(|c| c.oversized).count(),
        "params_fingerprint": params.fingerprint(),
        "path": path,
    }))
}

fn cmd_index(a: IndexArgs) -> Result<()> {
    let cfg = a.shared.settings()?;
    let corpus = a.shared.corpus(&cfg)?;
    let chunks = load_chunks(&a.chunks, &corpus)?;
    let tokenizer = runner::tokenizer_from_config(&cfg)?;
    let external;
    let mode = match a.mode.as_str() {
        "bm25" => IndexMode::Bm25 {
            tokenizer: tokenizer.as_ref(),
            params: cfg.retrieval.bm25(),
        },
        "external" => {
            let path = a
                .vectors
                .as_ref()
                .context("external mode needs --vectors")?;
            external = ExternalVectors::load(path)?;
            IndexMode::External(&external)
        }
        other => bail!("unknown retrieval mode {other:?}"),
    };
    let index = build_index(&chunks, mode)?;
    std::fs::create_dir_all(&a.out)?;
    let path = a.out.join("index.clix");
    index.save(&path)?;
    print_json(&serde_json::json!({
        "chunks": index.num_chunks(),
        "terms": index.num_terms(),
        "postings": index.total_postings(),
        "bytes": index.encoded_len(),
        "path": path,
    }))
}

fn cmd_retrieve(a: RetrieveArgs) -> Result<()> {
    let cfg = a.shared.settings()?;
    let index = Index::load(&a.index)?;
    let tokenizer = runner::tokenizer_from_config(&cfg)?;
    let query = match (&a.query, &a.query_vector) {
        (Some(q), _) => {
            if index.mode() != RetrievalMode::Bm25 {
                bail!("external-mode index needs --query-vector");
            }
            index.vectorize_query(q, tokenizer.as_ref())?
        }
        (None, Some(v)) => {
            let pairs: Vec<(i64, f64)> =
                serde_json::from_str(v).context("parsing --query-vector")?;
            let mut out = Vec::with_capacity(pairs.len());
            for (t, w) in pairs {
                out.push((
                    u32::try_from(t).context("term ids must be non-negative")?,
                    w,
                ));
            }
            SparseVector::from_pairs(out)?
        }
        (None, None) => bail!("pass --query or --query-vector"),
    };
    let ranked = index.search(&query, a.k);
    match (a.budget, &a.chunks) {
        (Some(budget), Some(dump)) => {
            let corpus = a.shared.corpus(&cfg)?;
            let chunks = load_chunks(dump, &corpus)?;
            let window = assemble_context(
                &ranked,
                chunks.as_slice(),
                budget,
                a.policy,
                tokenizer.as_ref(),
            )?;
            print_json(&serde_json::json!({ "hits": ranked.hits, "context": window }))
        }
        _ => print_json(&serde_json::json!({ "hits": ranked.hits })),
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let opts = RunOptions {
        resume: a.resume,
        policy: a.policy,
        stub_generator: a.stub_generator,
        ..RunOptions::default()
    };
    let report = runner::run_grid(&a.config, &a.out, &opts)?;
    let failed = report.failed_cells();
    eprintln!(
        "{} cells ({} resumed, {} failed) in {} ms; results in {}",
        report.cells.len(),
        report.resumed_cells,
        failed,
        report.wall_ms,
        a.out.display()
    );
    if failed > 0 {
        bail!("{failed} cells failed; see run.log");
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    if a.defaults {
        print!("{}", defaults_markdown());
        return Ok(());
    }
    let report = RunReport::load(&a.out.join(REPORT_JSON))?;
    for p in export_report(&report, &a.out, &a.format)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_toy(a: ToyArgs) -> Result<()> {
    let spec = runner::toy::ToySpec {
        n_docs: a.docs,
        seed: a.seed,
        ..Default::default()
    };
    let data = runner::toy::toy_corpus(&spec)?;
    data.write(&a.out)?;
    let mut cfg = ExperimentConfig::new("docs.jsonl", "qa.jsonl");
    cfg.grid.methods = vec![ChunkMethod::Sentence, ChunkMethod::Token];
    cfg.grid.sizes = vec![50, 100];
    cfg.grid.overlaps = vec![0.0];
    cfg.grid.budgets = vec![100, 400];
    cfg.seed = a.seed;
    let path = a.out.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg)? + "\n")?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Chunk(a) => cmd_chunk(a),
        Command::Index(a) => cmd_index(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Run(a) => cmd_run(a),
        Command::Report(a) => cmd_report(a),
        Command::Toy(a) => cmd_toy(a),
        Command::Schema => {
            print!("{}", runner::CONFIG_SCHEMA);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
