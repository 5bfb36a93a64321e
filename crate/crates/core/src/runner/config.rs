// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chunking::{ChunkMethod, ChunkParams, SemanticAnchor, DEFAULT_SEMANTIC_THRESHOLD};
use crate::context::FillPolicy;
use crate::error::{Error, Result};
use crate::generation::{FixtureMode, GeneratorParams};
use crate::metrics::{DEFAULT_LEVEL, DEFAULT_RESAMPLES, MIN_RESAMPLES};
use crate::retrieval::{Bm25Params, RetrievalMode};
use crate::util::short_hash;

/// JSON Schema for the experiment config file.
pub const CONFIG_SCHEMA: &str = include_str!("../../schema/experiment-config.schema.json");

pub const GRID_SIZES: [usize; 10] = [50, 100, 150, 200, 250, 300, 350, 400, 450, 500];
pub const GRID_OVERLAPS: [f64; 2] = [0.0, 0.2];
pub const GRID_BUDGETS: [usize; 5] = [500, 1000, 2500, 5000, 10000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_methods")]
    pub methods: Vec<ChunkMethod>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_overlaps")]
    pub overlaps: Vec<f64>,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<usize>,
}

fn default_methods() -> Vec<ChunkMethod> {
    ChunkMethod::ALL.to_vec()
}
fn default_sizes() -> Vec<usize> {
    GRID_SIZES.to_vec()
}
fn default_overlaps() -> Vec<f64> {
    GRID_OVERLAPS.to_vec()
}
fn default_budgets() -> Vec<usize> {
    GRID_BUDGETS.to_vec()
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            methods: default_methods(),
            sizes: default_sizes(),
            overlaps: default_overlaps(),
            budgets: default_budgets(),
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.methods.len() * self.sizes.len() * self.overlaps.len() * self.budgets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalSettings {
    #[serde(default = "default_mode")]
    pub mode: RetrievalMode,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub chunk_vectors: Option<PathBuf>,
    #[serde(default)]
    pub query_vectors: Option<PathBuf>,
}

fn default_mode() -> RetrievalMode {
    RetrievalMode::Bm25
}
fn default_k1() -> f64 {
    Bm25Params::default().k1
}
fn default_b() -> f64 {
    Bm25Params::default().b
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            k1: default_k1(),
            b: default_b(),
            chunk_vectors: None,
            query_vectors: None,
        }
    }
}

impl RetrievalSettings {
    pub fn bm25(&self) -> Bm25Params {
        Bm25Params {
            k1: self.k1,
            b: self.b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Stub,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSettings {
    pub mode: FixtureMode,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSettings {
    #[serde(default = "default_generator_kind")]
    pub kind: GeneratorKind,
    #[serde(default)]
    pub params: GeneratorParams,
    #[serde(default)]
    pub fixture: Option<FixtureSettings>,
}

fn default_generator_kind() -> GeneratorKind {
    GeneratorKind::Stub
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::Stub,
            params: GeneratorParams::default(),
            fixture: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Deterministic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSettings {
    #[serde(default = "default_embedding_kind")]
    pub kind: EmbeddingKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_embed_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_embed_retries")]
    pub retries: u32,
    #[serde(default = "default_embed_concurrency")]
    pub max_concurrency: usize,
    #[serde(default)]
    pub requests_per_minute: Option<usize>,
}

fn default_embedding_kind() -> EmbeddingKind {
    EmbeddingKind::Deterministic
}
fn default_dim() -> usize {
    64
}
fn default_batch() -> usize {
    32
}
fn default_embed_timeout() -> u64 {
    60_000
}
fn default_embed_retries() -> u32 {
    3
}
fn default_embed_concurrency() -> usize {
    4
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            kind: default_embedding_kind(),
            dim: default_dim(),
            batch_size: default_batch(),
            endpoint: None,
            model: None,
            cache_dir: None,
            timeout_ms: default_embed_timeout(),
            retries: default_embed_retries(),
            max_concurrency: default_embed_concurrency(),
            requests_per_minute: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticSettings {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub anchor: SemanticAnchor,
}

fn default_threshold() -> f64 {
    DEFAULT_SEMANTIC_THRESHOLD
}

impl Default for SemanticSettings {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            anchor: SemanticAnchor::Last,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSettings {
    #[serde(default = "default_resamples")]
    pub bootstrap_b: usize,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}
fn default_level() -> f64 {
    DEFAULT_LEVEL
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            bootstrap_b: DEFAULT_RESAMPLES,
            level: DEFAULT_LEVEL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    Default,
    Vocab,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerSettings {
    #[serde(default = "default_tokenizer_kind")]
    pub kind: TokenizerKind,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub lowercase: bool,
}

fn default_tokenizer_kind() -> TokenizerKind {
    TokenizerKind::Default
}

impl Default for TokenizerSettings {
    fn default() -> Self {
        Self {
            kind: TokenizerKind::Default,
            path: None,
            lowercase: false,
        }
    }
}

/// Everything one `run` needs, as read from the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub qa: PathBuf,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub fill_policy: FillPolicy,
    #[serde(default)]
    pub retrieval: RetrievalSettings,
    #[serde(default)]
    pub generator: GeneratorSettings,
    #[serde(default)]
    pub embedding: EmbeddingSettings,
    #[serde(default)]
    pub semantic: SemanticSettings,
    #[serde(default)]
    pub metrics: MetricSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tokenizer: TokenizerSettings,
    #[serde(default)]
    pub abbreviations: Option<PathBuf>,
    #[serde(default = "default_cell_workers")]
    pub cell_workers: usize,
}

fn default_cell_workers() -> usize {
    1
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    pub fn new(corpus: impl Into<PathBuf>, qa: impl Into<PathBuf>) -> Self {
        Self {
            corpus: corpus.into(),
            qa: qa.into(),
            grid: GridSpec::default(),
            fill_policy: FillPolicy::default(),
            retrieval: RetrievalSettings::default(),
            generator: GeneratorSettings::default(),
            embedding: EmbeddingSettings::default(),
            semantic: SemanticSettings::default(),
            metrics: MetricSettings::default(),
            seed: 0,
            tokenizer: TokenizerSettings::default(),
            abbreviations: None,
            cell_workers: 1,
        }
    }

    /// Parses and validates; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&raw).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.corpus);
        resolve(base, &mut self.qa);
        for p in [
            self.retrieval.chunk_vectors.as_mut(),
            self.retrieval.query_vectors.as_mut(),
            self.embedding.cache_dir.as_mut(),
            self.tokenizer.path.as_mut(),
            self.abbreviations.as_mut(),
            self.generator.fixture.as_mut().map(|f| &mut f.path),
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.is_empty() {
            return Err(Error::Config("grid has no cells".into()));
        }
        for &m in &g.methods {
            for &s in &g.sizes {
                for &o in &g.overlaps {
                    ChunkParams::new(m, s, o)?
                        .with_semantic(self.semantic.threshold, self.semantic.anchor)
                        .map_err(|e| Error::Config(e.to_string()))?;
                }
            }
        }
        if g.budgets.contains(&0) {
            return Err(Error::Config("budgets must be >= 1".into()));
        }
        if self.metrics.bootstrap_b < MIN_RESAMPLES {
            return Err(Error::Config(format!(
                "bootstrap_b must be >= {MIN_RESAMPLES}"
            )));
        }
        if !(self.metrics.level > 0.0 && self.metrics.level < 1.0) {
            return Err(Error::Config("metrics.level must be in (0, 1)".into()));
        }
        if self.retrieval.mode == RetrievalMode::External
            && (self.retrieval.chunk_vectors.is_none() || self.retrieval.query_vectors.is_none())
        {
            return Err(Error::Config(
                "external retrieval needs retrieval.chunk_vectors and retrieval.query_vectors"
                    .into(),
            ));
        }
        if self.tokenizer.kind == TokenizerKind::Vocab && self.tokenizer.path.is_none() {
            return Err(Error::Config("vocab tokenizer needs tokenizer.path".into()));
        }
        if self.embedding.dim < 2 || self.embedding.batch_size < 1 {
            return Err(Error::Config(
                "embedding.dim must be >= 2 and batch_size >= 1".into(),
            ));
        }
        if self.cell_workers < 1 {
            return Err(Error::Config("cell_workers must be >= 1".into()));
        }
        self.generator.params.validate()
    }

    /// Cells in grid order: method, then size, overlap, budget.
    pub fn cells(&self) -> Vec<RunConfig> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.len());
        for &method in &g.methods {
            for &size in &g.sizes {
                for &overlap in &g.overlaps {
                    for &budget in &g.budgets {
                        out.push(RunConfig {
                            method,
                            size,
                            overlap,
                            budget,
                            fill_policy: self.fill_policy,
                            retrieval_mode: self.retrieval.mode,
                            generator: self.generator.kind,
                            seed: self.seed,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Coordinates of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: ChunkMethod,
    pub size: usize,
    pub overlap: f64,
    pub budget: usize,
    pub fill_policy: FillPolicy,
    pub retrieval_mode: RetrievalMode,
    pub generator: GeneratorKind,
    pub seed: u64,
}

impl RunConfig {
    pub fn chunk_params(&self, semantic: &SemanticSettings) -> Result<ChunkParams> {
        ChunkParams::new(self.method, self.size, self.overlap)?
            .with_semantic(semantic.threshold, semantic.anchor)
    }
}

/// Recursively key-sorted, whitespace-free JSON.
pub fn canonical_json(v: &Value) -> String {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), canonical_json(&map[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => {
            format!(
                "[{}]",
                items
                    .iter()
                    .map(canonical_json)
                    .collect::<Vec<_>>()
                    .join(",")
            )
        }
        other => other.to_string(),
    }
}

/// Hash of the canonical JSON form; independent of field order.
pub fn fingerprint(v: &Value) -> String {
    short_hash(canonical_json(v).as_bytes(), 12)
}
