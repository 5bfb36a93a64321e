// SPDX-License-Identifier: Apache-2.0

//! Grid sweeps over chunking method, chunk size, overlap and context budget.
//!
//! [`run_grid`] loads a JSON [`ExperimentConfig`], evaluates every cell and
//! writes `summary.csv`, `queries.jsonl`, `plotdata.json`, `report.json`,
//! `defaults.md` and `run.log` into the output directory. Completed cells are
//! appended to `cells.jsonl` as they finish; `resume` skips every cell whose
//! fingerprint is already there.

mod cell;
pub mod config;
mod report;
pub mod seeds;
pub mod toy;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub use cell::{Artifacts, CellResult, CellStats, Pipeline, QueryRecord};
pub use config::{
    canonical_json, fingerprint, EmbeddingKind, EmbeddingSettings, ExperimentConfig,
    FixtureSettings, GeneratorKind, GeneratorSettings, GridSpec, MetricSettings, RetrievalSettings,
    RunConfig, SemanticSettings, TokenizerKind, TokenizerSettings, CONFIG_SCHEMA,
};
pub use report::{
    defaults_markdown, export_report, overlap_deltas, plot_data, write_queries_jsonl,
    write_summary_csv, ExportFormat, OverlapDelta, PlotData, PlotPoint, PlotSeries, RunReport,
    ScoringNotes, CELLS_JSONL, DEFAULTS_MD, DEFAULTS_TABLE, METRICS, PLOTDATA_JSON, QUERIES_JSONL,
    REPORT_JSON, RUN_LOG, SUMMARY_CSV,
};

use crate::chunking::Chunker;
use crate::context::FillPolicy;
use crate::corpus::{
    Corpus, DefaultTokenizer, QaSet, SentenceSegmenter, Tokenizer, VocabTokenizer,
};
use crate::embedding::{CachedEmbedder, DeterministicEmbedder, EmbeddingProvider, RemoteEmbedder};
use crate::error::{Error, Result};
use crate::generation::{FixtureMode, Generator, RemoteGenerator, ReplayGenerator, StubGenerator};
use crate::retrieval::{ExternalVectors, RetrievalMode};

/// Maps `f` over `items` on at most `workers` threads; output keeps input order.
pub(crate) fn bounded_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub resume: bool,
    /// Overrides the config's fill policy.
    pub policy: Option<FillPolicy>,
    /// Forces the offline stub generator.
    pub stub_generator: bool,
    /// Executes cells in a seeded random order; results must not change.
    pub shuffle_seed: Option<u64>,
    /// Stops after this many newly executed cells (for interruption tests).
    pub max_new_cells: Option<usize>,
}

pub fn tokenizer_from_config(cfg: &ExperimentConfig) -> Result<Arc<dyn Tokenizer>> {
    Ok(match cfg.tokenizer.kind {
        TokenizerKind::Default => Arc::new(DefaultTokenizer),
        TokenizerKind::Vocab => {
            let path = cfg
                .tokenizer
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("vocab tokenizer needs a path".into()))?;
            Arc::new(VocabTokenizer::from_file(path, cfg.tokenizer.lowercase)?)
        }
    })
}

pub fn embedder_from_config(cfg: &ExperimentConfig) -> Result<Arc<dyn EmbeddingProvider>> {
    let e = &cfg.embedding;
    match e.kind {
        EmbeddingKind::Deterministic => {
            let inner =
                DeterministicEmbedder::new(e.dim, seeds::derive_seed(cfg.seed, seeds::EMBEDDING))?
                    .with_batch_size(e.batch_size);
            Ok(match &e.cache_dir {
                Some(dir) => Arc::new(CachedEmbedder::open(inner, dir)?),
                None => Arc::new(inner),
            })
        }
        EmbeddingKind::Remote => {
            let endpoint = e
                .endpoint
                .clone()
                .or_else(|| std::env::var("EMBED_ENDPOINT").ok())
                .ok_or_else(|| {
                    Error::Config("remote embedding needs an endpoint or EMBED_ENDPOINT".into())
                })?;
            let model = e
                .model
                .clone()
                .or_else(|| std::env::var("EMBED_MODEL").ok())
                .unwrap_or_else(|| "default".into());
            let inner = RemoteEmbedder::with_settings(
                endpoint,
                std::env::var("EMBED_API_KEY").ok(),
                model,
                e.batch_size,
                Duration::from_millis(e.timeout_ms),
                e.retries,
                e.max_concurrency,
                e.requests_per_minute,
            );
            Ok(match &e.cache_dir {
                Some(dir) => Arc::new(CachedEmbedder::open(inner, dir)?),
                None => Arc::new(inner),
            })
        }
    }
}

pub fn generator_from_config(cfg: &ExperimentConfig) -> Result<Arc<dyn Generator>> {
    let g = &cfg.generator;
    let model = match g.kind {
        GeneratorKind::Stub => "stub".to_string(),
        GeneratorKind::Remote => g
            .params
            .model
            .clone()
            .or_else(|| std::env::var("GEN_MODEL").ok())
            .unwrap_or_else(|| "default".into()),
    };
    let inner = || -> Result<Box<dyn Generator>> {
        Ok(match g.kind {
            GeneratorKind::Stub => Box::new(StubGenerator),
            GeneratorKind::Remote => Box::new(RemoteGenerator::from_env(g.params.clone())?),
        })
    };
    Ok(match &g.fixture {
        None => Arc::from(inner()?),
        Some(f) => match f.mode {
            FixtureMode::Record => Arc::new(ReplayGenerator::record(inner()?, &f.path)?),
            FixtureMode::Replay => Arc::new(ReplayGenerator::replay(&model, &f.path)?),
        },
    })
}

pub fn chunker_from_config(cfg: &ExperimentConfig) -> Result<Chunker> {
    let segmenter = match &cfg.abbreviations {
        Some(p) => SentenceSegmenter::from_file(p)?,
        None => SentenceSegmenter::default(),
    };
    Ok(Chunker::new(tokenizer_from_config(cfg)?, segmenter))
}

/// Loads data and constructs every provider named in `cfg`.
pub fn pipeline_from_config(cfg: &ExperimentConfig) -> Result<Pipeline> {
    let corpus = Corpus::load(&cfg.corpus)?;
    let qa = QaSet::load(&cfg.qa)?;
    let mut pipeline = Pipeline::new(corpus, qa)
        .with_chunker(chunker_from_config(cfg)?)
        .with_embedder(embedder_from_config(cfg)?)
        .with_generator(generator_from_config(cfg)?)
        .with_metrics(cfg.metrics)
        .with_semantic(cfg.semantic)
        .with_question_workers(cfg.generator.params.max_concurrency);
    pipeline.bm25 = cfg.retrieval.bm25();
    if cfg.retrieval.mode == RetrievalMode::External {
        let (Some(c), Some(q)) = (&cfg.retrieval.chunk_vectors, &cfg.retrieval.query_vectors)
        else {
            return Err(Error::Config(
                "external retrieval needs chunk and query vectors".into(),
            ));
        };
        pipeline = pipeline.with_external(ExternalVectors::load(c)?, ExternalVectors::load(q)?);
    }
    pipeline.extra = json!({
        "tokenizer": cfg.tokenizer,
        "abbreviations": cfg.abbreviations,
        "generator": cfg.generator,
        "embedding": cfg.embedding,
    });
    Ok(pipeline)
}

fn load_completed(path: &Path) -> HashMap<String, CellResult> {
    let mut out = HashMap::new();
    let Ok(f) = File::open(path) else { return out };
    for line in BufReader::new(f).lines() {
        let Ok(line) = line else { break };
        // A torn final line from an interrupted run simply fails to parse.
        if let Ok(c) = serde_json::from_str::<CellResult>(&line) {
            out.insert(c.fingerprint.clone(), c);
        }
    }
    out
}

/// Parses the config file, applies `opts` and runs the grid into `out_dir`.
pub fn run_grid(config_file: &Path, out_dir: &Path, opts: &RunOptions) -> Result<RunReport> {
    let mut cfg = ExperimentConfig::load(config_file)?;
    if let Some(p) = opts.policy {
        cfg.fill_policy = p;
    }
    if opts.stub_generator {
        cfg.generator.kind = GeneratorKind::Stub;
        cfg.generator.fixture = None;
    }
    let pipeline = pipeline_from_config(&cfg)?;
    run_grid_with(&cfg, &pipeline, out_dir, opts)
}

/// Runs every cell of `cfg.grid` against an already constructed pipeline.
pub fn run_grid_with(
    cfg: &ExperimentConfig,
    pipeline: &Pipeline,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<RunReport> {
    let t0 = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut cells = cfg.cells();
    if let Some(p) = opts.policy {
        cells.iter_mut().for_each(|c| c.fill_policy = p);
    }
    let settings = pipeline.settings_fingerprint();
    let fps: Vec<String> = cells
        .iter()
        .map(|c| pipeline.cell_fingerprint(c, &settings))
        .collect();

    let cells_path = out_dir.join(CELLS_JSONL);
    let mut done = if opts.resume {
        load_completed(&cells_path)
    } else {
        HashMap::new()
    };
    done.retain(|fp, c| c.is_ok() && fps.contains(fp));
    let resumed = done.len();

    let mut todo: Vec<usize> = (0..cells.len())
        .filter(|&i| !done.contains_key(&fps[i]))
        .collect();
    if let Some(seed) = opts.shuffle_seed {
        todo.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    if let Some(n) = opts.max_new_cells {
        todo.truncate(n);
    }
    let todo_cells: Vec<RunConfig> = todo.iter().map(|&i| cells[i]).collect();
    pipeline.reserve(&todo_cells)?;

    let open = |append: bool| {
        OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&cells_path)
            .map_err(|e| Error::io(&cells_path, e))
    };
    let sink = Mutex::new(open(opts.resume)?);
    let log_path = out_dir.join(RUN_LOG);
    let log = Mutex::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?,
    );
    let config_fp = fingerprint(&json!({ "version": crate::VERSION, "config": cfg }));
    writeln!(
        log.lock().unwrap(),
        "run config={config_fp} cells={} resumed={resumed} policy={}",
        cells.len(),
        cells.first().map(|c| c.fill_policy).unwrap_or_default()
    )
    .map_err(|e| Error::io(&log_path, e))?;

    let results = bounded_map(&todo, cfg.cell_workers, |&i| -> Result<CellResult> {
        let cell = &cells[i];
        let result = pipeline
            .evaluate_cell(cell, &fps[i])
            .unwrap_or_else(|e| CellResult::failed(*cell, fps[i].clone(), &e));
        let s = &result.stats;
        let line = format!(
            "cell={} method={} S={} O={} budget_C={} policy={} total_tokens_mean={:.1} skipped_count={} \
             n_ok={} n_empty_context={} n_error={} wall_ms={} status={}",
            result.fingerprint,
            cell.method,
            cell.size,
            cell.overlap,
            cell.budget,
            cell.fill_policy,
            s.mean_context_tokens,
            s.skipped_total,
            s.n_ok,
            s.n_empty_context,
            s.n_error,
            s.chunk_index_ms + s.query_ms,
            result.error.as_deref().unwrap_or("ok"),
        );
        tracing::info!("{line}");
        writeln!(log.lock().unwrap(), "{line}").map_err(|e| Error::io(&log_path, e))?;
        let json = serde_json::to_string(&result).expect("serializable cell");
        let mut f = sink.lock().unwrap();
        writeln!(f, "{json}")
            .and_then(|_| f.flush())
            .map_err(|e| Error::io(&cells_path, e))?;
        Ok(result)
    });
    for r in results {
        let r = r?;
        done.insert(r.fingerprint.clone(), r);
    }

    let ordered: Vec<CellResult> = fps.iter().filter_map(|fp| done.remove(fp)).collect();
    let m = &cfg.metrics;
    let report = RunReport {
        version: crate::VERSION.to_string(),
        config_fingerprint: config_fp,
        fill_policy: cells.first().map(|c| c.fill_policy).unwrap_or_default(),
        generator: pipeline.generator.model_id().to_string(),
        embedder: pipeline.embedder.provider_id(),
        seed: cfg.seed,
        bootstrap_b: m.bootstrap_b,
        level: m.level,
        scoring: ScoringNotes::default(),
        overlap_deltas: overlap_deltas(
            &ordered,
            m.bootstrap_b,
            m.level,
            seeds::derive_seed(cfg.seed, "bootstrap/overlap_delta"),
        ),
        cells: ordered,
        resumed_cells: resumed,
        wall_ms: t0.elapsed().as_millis() as u64,
    };
    if !report.cells.is_empty() {
        export_report(&report, out_dir, &ExportFormat::ALL)?;
    }
    Ok(report)
}
