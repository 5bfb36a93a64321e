// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::bounded_map;
use super::config::{fingerprint, MetricSettings, RunConfig, SemanticSettings};
use super::seeds::{derive_seed, BOOTSTRAP_BERT_F1, BOOTSTRAP_EM, BOOTSTRAP_NONE_RATIO, EMBEDDING};
use crate::chunking::{Chunk, ChunkParams, Chunker};
use crate::context::{assemble_context, ChunkLookup};
use crate::corpus::{Corpus, QAPair, QaSet};
use crate::embedding::{DeterministicEmbedder, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::generation::{render_prompt, GenerationRequest, Generator, StubGenerator};
use crate::metrics::{
    bertscore, bootstrap_ci, exact_match, none_ratio, normalize_answer, MetricSummary,
    OutcomeStatus, QAOutcome,
};
use crate::retrieval::{
    build_index, retrieval_depth, Bm25Params, ExternalVectors, Index, IndexMode, RetrievalMode,
    SparseVector,
};
use crate::util::short_hash;

/// Chunks and index for one (method, S, O); shared by every budget.
pub struct Artifacts {
    pub chunks: Vec<Chunk>,
    by_id: HashMap<String, usize>,
    pub index: Index,
    pub index_bytes: usize,
    pub build_ms: u64,
}

impl ChunkLookup for Artifacts {
    fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.by_id.get(chunk_id).map(|&i| &self.chunks[i])
    }
}

struct CacheEntry {
    slot: Arc<Mutex<Option<Arc<Artifacts>>>>,
    pending: usize,
}

/// Per-question record persisted to `queries.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    #[serde(flatten)]
    pub outcome: QAOutcome,
    pub context_chunk_ids: Vec<String>,
    pub context_tokens: usize,
    pub skipped_count: usize,
    pub rank1_chunk_id: Option<String>,
    pub rank1_tokens: Option<usize>,
    pub rank1_contains_gold: bool,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub chunk_count: usize,
    pub oversized_count: usize,
    pub index_terms: usize,
    pub index_postings: usize,
    pub index_bytes: usize,
    pub retrieval_depth: usize,
    pub mean_context_tokens: f64,
    pub skipped_total: usize,
    pub n_total: usize,
    pub n_ok: usize,
    pub n_empty_context: usize,
    pub n_error: usize,
    /// Zero when the artifacts came from the (method, S, O) cache.
    pub chunk_index_ms: u64,
    pub query_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: RunConfig,
    pub fingerprint: String,
    pub em: Option<MetricSummary>,
    pub bert_f1: Option<MetricSummary>,
    pub none_ratio: Option<MetricSummary>,
    pub stats: CellStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub queries: Vec<QueryRecord>,
}

impl CellResult {
    pub fn failed(cell: RunConfig, fingerprint: String, err: &Error) -> Self {
        Self {
            cell,
            fingerprint,
            em: None,
            bert_f1: None,
            none_ratio: None,
            stats: CellStats::default(),
            error: Some(err.to_string()),
            queries: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Shared, cell-independent resources: data, chunker, providers and the
/// artifact cache keyed by chunking parameters.
pub struct Pipeline {
    pub corpus: Corpus,
    pub qa: QaSet,
    pub chunker: Chunker,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub generator: Arc<dyn Generator>,
    pub external: Option<(ExternalVectors, ExternalVectors)>,
    pub bm25: Bm25Params,
    pub semantic: SemanticSettings,
    pub metrics: MetricSettings,
    pub question_workers: usize,
    /// Settings that are not visible through the fields above (tokenizer
    /// source, generator parameters); folded into cell fingerprints.
    pub extra: Value,
    cache: Mutex<HashMap<String, CacheEntry>>,
}

fn content_hash<T: Serialize>(items: &[T]) -> String {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it).expect("serializable record");
        buf.push(b'\n');
    }
    short_hash(&buf, 12)
}

impl Pipeline {
    /// Default tokenizer, deterministic embedder seeded from 0, stub generator, BM25.
    pub fn new(corpus: Corpus, qa: QaSet) -> Self {
        let embedder =
            DeterministicEmbedder::new(64, derive_seed(0, EMBEDDING)).expect("dim 64 is valid");
        Self {
            corpus,
            qa,
            chunker: Chunker::default(),
            embedder: Arc::new(embedder),
            generator: Arc::new(StubGenerator),
            external: None,
            bm25: Bm25Params::default(),
            semantic: SemanticSettings::default(),
            metrics: MetricSettings::default(),
            question_workers: 4,
            extra: Value::Null,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_generator(mut self, g: Arc<dyn Generator>) -> Self {
        self.generator = g;
        self
    }

    pub fn with_embedder(mut self, e: Arc<dyn EmbeddingProvider>) -> Self {
        self.embedder = e;
        self
    }

    pub fn with_chunker(mut self, c: Chunker) -> Self {
        self.chunker = c;
        self
    }

    /// Chunk vectors and query vectors for external retrieval.
    pub fn with_external(mut self, chunks: ExternalVectors, queries: ExternalVectors) -> Self {
        self.external = Some((chunks, queries));
        self
    }

    pub fn with_metrics(mut self, m: MetricSettings) -> Self {
        self.metrics = m;
        self
    }

    pub fn with_semantic(mut self, s: SemanticSettings) -> Self {
        self.semantic = s;
        self
    }

    pub fn with_question_workers(mut self, n: usize) -> Self {
        self.question_workers = n.max(1);
        self
    }

    /// Hash of everything besides the cell coordinates that can change a result.
    pub fn settings_fingerprint(&self) -> String {
        fingerprint(&json!({
            "corpus": content_hash(self.corpus.as_slice()),
            "qa": content_hash(self.qa.as_slice()),
            "bm25": self.bm25,
            "semantic": self.semantic,
            "metrics": self.metrics,
            "embedder": self.embedder.provider_id(),
            "generator": self.generator.model_id(),
            "external": self.external.is_some(),
            "extra": self.extra,
        }))
    }

    pub fn cell_fingerprint(&self, cell: &RunConfig, settings: &str) -> String {
        fingerprint(&json!({
            "version": crate::VERSION,
            "cell": cell,
            "settings": settings,
        }))
    }

    fn artifact_key(&self, params: &ChunkParams, mode: RetrievalMode) -> String {
        format!(
            "{}:{}",
            params.fingerprint(),
            serde_json::to_string(&mode).unwrap()
        )
    }

    /// Registers upcoming cells so cached artifacts are dropped after their last use.
    pub(crate) fn reserve(&self, cells: &[RunConfig]) -> Result<()> {
        let mut cache = self.cache.lock().unwrap();
        for c in cells {
            let key = self.artifact_key(&c.chunk_params(&self.semantic)?, c.retrieval_mode);
            cache
                .entry(key)
                .or_insert_with(|| CacheEntry {
                    slot: Arc::new(Mutex::new(None)),
                    pending: 0,
                })
                .pending += 1;
        }
        Ok(())
    }

    fn release(&self, key: &str) {
        let mut cache = self.cache.lock().unwrap();
        if let Some(e) = cache.get_mut(key) {
            if e.pending > 0 {
                e.pending -= 1;
                if e.pending == 0 {
                    cache.remove(key);
                }
            }
        }
    }

    /// Builds (or fetches) chunks and index; the bool is true on a fresh build.
    pub fn artifacts(
        &self,
        params: &ChunkParams,
        mode: RetrievalMode,
    ) -> Result<(Arc<Artifacts>, bool)> {
        let key = self.artifact_key(params, mode);
        let slot = {
            let mut cache = self.cache.lock().unwrap();
            cache
                .entry(key)
                .or_insert_with(|| CacheEntry {
                    slot: Arc::new(Mutex::new(None)),
                    pending: 0,
                })
                .slot
                .clone()
        };
        let mut guard = slot.lock().unwrap();
        if let Some(a) = guard.as_ref() {
            return Ok((a.clone(), false));
        }
        let built = Arc::new(self.build(params, mode)?);
        *guard = Some(built.clone());
        Ok((built, true))
    }

    fn build(&self, params: &ChunkParams, mode: RetrievalMode) -> Result<Artifacts> {
        let t0 = Instant::now();
        let chunks =
            self.chunker
                .chunk_all(self.corpus.as_slice(), params, Some(self.embedder.as_ref()))?;
        let index_mode = match mode {
            RetrievalMode::Bm25 => IndexMode::Bm25 {
                tokenizer: self.chunker.tokenizer(),
                params: self.bm25,
            },
            RetrievalMode::External => IndexMode::External(
                &self
                    .external
                    .as_ref()
                    .ok_or_else(|| Error::Config("external retrieval without vectors".into()))?
                    .0,
            ),
        };
        let index = build_index(&chunks, index_mode)?;
        let by_id = chunks
            .iter()
            .enumerate()
            .map(|(i, c)| (c.chunk_id.clone(), i))
            .collect();
        Ok(Artifacts {
            index_bytes: index.encoded_len(),
            chunks,
            by_id,
            index,
            build_ms: t0.elapsed().as_millis() as u64,
        })
    }

    fn query_vector(&self, q: &QAPair, index: &Index) -> Result<SparseVector> {
        match index.mode() {
            RetrievalMode::Bm25 => index.vectorize_query(&q.question, self.chunker.tokenizer()),
            RetrievalMode::External => Ok(self
                .external
                .as_ref()
                .ok_or_else(|| Error::Config("external retrieval without vectors".into()))?
                .1
                .get(&q.id)?
                .clone()),
        }
    }

    fn evaluate_question(
        &self,
        q: &QAPair,
        cell: &RunConfig,
        art: &Artifacts,
        depth: usize,
    ) -> Result<QueryRecord> {
        let tokenizer = self.chunker.tokenizer();
        let qv = self.query_vector(q, &art.index)?;
        let ranked = art.index.search(&qv, depth);
        let window = assemble_context(&ranked, art, cell.budget, cell.fill_policy, tokenizer)?;
        let rank1 = ranked.hits.first().and_then(|h| art.chunk(&h.chunk_id));
        let rank1_contains_gold = rank1.is_some_and(|c| {
            let text = normalize_answer(&c.text);
            q.gold_answers
                .iter()
                .any(|g| text.contains(&normalize_answer(g)))
        });
        let prompt = render_prompt(&q.question, &window.rendered_text)?;
        let req = GenerationRequest {
            question_id: &q.id,
            question: &q.question,
            context: &window.rendered_text,
            prompt: &prompt,
            gold_answers: &q.gold_answers,
        };
        let mut outcome = QAOutcome {
            question_id: q.id.clone(),
            predicted: String::new(),
            abstained: false,
            gold_answers: q.gold_answers.clone(),
            em: None,
            bert_f1: None,
            status: OutcomeStatus::Error,
        };
        let mut latency_ms = 0;
        let scored = self.generator.generate(&req).and_then(|ans| {
            latency_ms = ans.latency_ms;
            outcome.predicted = ans.text.clone();
            outcome.abstained = ans.abstained;
            if ans.abstained {
                return Ok((0, 0.0));
            }
            let mut best = 0.0f64;
            for g in &q.gold_answers {
                best = best.max(bertscore(&ans.text, g, self.embedder.as_ref(), tokenizer)?.f1);
            }
            Ok((exact_match(&ans.text, &q.gold_answers), best))
        });
        let error = match scored {
            Ok((em, f1)) => {
                outcome.em = Some(em);
                outcome.bert_f1 = Some(f1);
                outcome.status = if window.is_empty() {
                    OutcomeStatus::EmptyContext
                } else {
                    OutcomeStatus::Ok
                };
                None
            }
            Err(e) => {
                tracing::warn!(question = %q.id, error = %e, "question failed");
                Some(e.to_string())
            }
        };
        Ok(QueryRecord {
            outcome,
            context_chunk_ids: window.chunk_ids,
            context_tokens: window.total_tokens,
            skipped_count: window.skipped_count,
            rank1_chunk_id: rank1.map(|c| c.chunk_id.clone()),
            rank1_tokens: rank1.map(|c| c.token_count),
            rank1_contains_gold,
            latency_ms,
            error,
        })
    }

    /// Runs one grid cell end to end. Generation and scoring failures are
    /// recorded per question; anything else fails the cell.
    pub fn evaluate_cell(&self, cell: &RunConfig, fingerprint: &str) -> Result<CellResult> {
        let params = cell.chunk_params(&self.semantic)?;
        let key = self.artifact_key(&params, cell.retrieval_mode);
        let out = self.evaluate_with(cell, fingerprint, &params);
        self.release(&key);
        out
    }

    fn evaluate_with(
        &self,
        cell: &RunConfig,
        fingerprint: &str,
        params: &ChunkParams,
    ) -> Result<CellResult> {
        let (art, fresh) = self.artifacts(params, cell.retrieval_mode)?;
        let depth = retrieval_depth(cell.budget, art.index.min_token_count());
        let t0 = Instant::now();
        let queries = bounded_map(self.qa.as_slice(), self.question_workers, |q| {
            self.evaluate_question(q, cell, &art, depth)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let query_ms = t0.elapsed().as_millis() as u64;

        let outcomes: Vec<QAOutcome> = queries.iter().map(|r| r.outcome.clone()).collect();
        let count = |s: OutcomeStatus| outcomes.iter().filter(|o| o.status == s).count();
        let stats = CellStats {
            chunk_count: art.chunks.len(),
            oversized_count: art.chunks.iter().filter(|c| c.oversized).count(),
            index_terms: art.index.num_terms(),
            index_postings: art.index.total_postings(),
            index_bytes: art.index_bytes,
            retrieval_depth: depth,
            mean_context_tokens: if queries.is_empty() {
                0.0
            } else {
                queries.iter().map(|r| r.context_tokens as f64).sum::<f64>() / queries.len() as f64
            },
            skipped_total: queries.iter().map(|r| r.skipped_count).sum(),
            n_total: queries.len(),
            n_ok: count(OutcomeStatus::Ok),
            n_empty_context: count(OutcomeStatus::EmptyContext),
            n_error: count(OutcomeStatus::Error),
            chunk_index_ms: if fresh { art.build_ms } else { 0 },
            query_ms,
        };
        if stats.n_ok + stats.n_empty_context + stats.n_error != stats.n_total {
            return Err(Error::Integrity(
                "question accounting does not add up".into(),
            ));
        }

        let scored: Vec<&QAOutcome> = outcomes.iter().filter(|o| o.is_scored()).collect();
        let (em, bert_f1, nr) = if scored.is_empty() {
            (None, None, None)
        } else {
            let m = &self.metrics;
            let summarize = |name: &str, component: &str, values: Vec<f64>| {
                bootstrap_ci(
                    &values,
                    m.bootstrap_b,
                    m.level,
                    derive_seed(cell.seed, component),
                )
                .map(|s| s.named(name))
            };
            let em = summarize(
                "em",
                BOOTSTRAP_EM,
                scored.iter().map(|o| o.em.unwrap_or(0) as f64).collect(),
            )?;
            let bf = summarize(
                "bert_f1",
                BOOTSTRAP_BERT_F1,
                scored.iter().map(|o| o.bert_f1.unwrap_or(0.0)).collect(),
            )?;
            let ratio = none_ratio(&outcomes)?;
            let nr = summarize(
                "none_ratio",
                BOOTSTRAP_NONE_RATIO,
                scored
                    .iter()
                    .map(|o| if o.abstained { 1.0 } else { 0.0 })
                    .collect(),
            )?;
            debug_assert!((nr.mean - ratio).abs() < 1e-12);
            (Some(em), Some(bf), Some(nr))
        };
        Ok(CellResult {
            cell: *cell,
            fingerprint: fingerprint.to_string(),
            em,
            bert_f1,
            none_ratio: nr,
            stats,
            error: None,
            queries,
        })
    }
}
