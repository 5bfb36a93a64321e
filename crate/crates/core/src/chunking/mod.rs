// SPDX-License-Identifier: Apache-2.0

//! Token, sentence, semantic and markdown/code chunkers.

mod code;
mod semantic;
mod sentence;
mod token;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DefaultTokenizer, Document, SentenceSegmenter, SentenceSpan, Tokenizer};
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::util::short_hash;

pub use code::{code_units, CodeUnit, UnitKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkMethod {
    Token,
    Sentence,
    Semantic,
    Code,
}

impl ChunkMethod {
    pub const ALL: [ChunkMethod; 4] = [
        ChunkMethod::Token,
        ChunkMethod::Sentence,
        ChunkMethod::Semantic,
        ChunkMethod::Code,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChunkMethod::Token => "token",
            ChunkMethod::Sentence => "sentence",
            ChunkMethod::Semantic => "semantic",
            ChunkMethod::Code => "code",
        }
    }
}

impl fmt::Display for ChunkMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChunkMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChunkMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown chunking method {s:?}")))
    }
}

/// Which sentence the semantic chunker compares the next sentence against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticAnchor {
    #[default]
    Last,
    First,
    Centroid,
}

impl SemanticAnchor {
    fn as_str(self) -> &'static str {
        match self {
            SemanticAnchor::Last => "last",
            SemanticAnchor::First => "first",
            SemanticAnchor::Centroid => "centroid",
        }
    }
}

pub const DEFAULT_SEMANTIC_THRESHOLD: f64 = 0.5;
pub const MIN_CHUNK_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkParams {
    pub method: ChunkMethod,
    /// Target tokens per chunk.
    pub size: usize,
    /// Fraction of `size` shared by consecutive token windows.
    #[serde(default)]
    pub overlap: f64,
    #[serde(default = "default_threshold")]
    pub semantic_threshold: f64,
    #[serde(default)]
    pub semantic_anchor: SemanticAnchor,
}

fn default_threshold() -> f64 {
    DEFAULT_SEMANTIC_THRESHOLD
}

impl ChunkParams {
    pub fn new(method: ChunkMethod, size: usize, overlap: f64) -> Result<Self> {
        let p = Self {
            method,
            size,
            overlap,
            semantic_threshold: DEFAULT_SEMANTIC_THRESHOLD,
            semantic_anchor: SemanticAnchor::Last,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_semantic(mut self, threshold: f64, anchor: SemanticAnchor) -> Result<Self> {
        self.semantic_threshold = threshold;
        self.semantic_anchor = anchor;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < MIN_CHUNK_SIZE {
            return Err(Error::domain(format!(
                "chunk size must be >= {MIN_CHUNK_SIZE}, got {}",
                self.size
            )));
        }
        if !(0.0..0.5).contains(&self.overlap) {
            return Err(Error::domain(format!(
                "overlap must be in [0, 0.5), got {}",
                self.overlap
            )));
        }
        if self.overlap_tokens() >= self.size {
            return Err(Error::domain(
                "overlap tokens must be smaller than the chunk size",
            ));
        }
        if !(self.semantic_threshold > -1.0 && self.semantic_threshold < 1.0) {
            return Err(Error::domain(format!(
                "semantic threshold must be in (-1, 1), got {}",
                self.semantic_threshold
            )));
        }
        Ok(())
    }

    pub fn overlap_tokens(&self) -> usize {
        (self.size as f64 * self.overlap).round() as usize
    }

    pub fn overlap_ratio(&self) -> f64 {
        self.overlap
    }

    /// Stable hash over the parameters that affect this method's output.
    pub fn fingerprint(&self) -> String {
        let mut canon = format!("method={};size={}", self.method, self.size);
        match self.method {
            ChunkMethod::Token => canon.push_str(&format!(";overlap={}", self.overlap_tokens())),
            ChunkMethod::Semantic => canon.push_str(&format!(
                ";threshold={:?};anchor={}",
                self.semantic_threshold,
                self.semantic_anchor.as_str()
            )),
            ChunkMethod::Sentence | ChunkMethod::Code => {}
        }
        short_hash(canon.as_bytes(), 8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub token_count: usize,
    pub method: ChunkMethod,
    /// Set when a single indivisible unit (sentence or code declaration) exceeds the target size.
    pub oversized: bool,
    pub params_fingerprint: String,
}

impl Chunk {
    pub(crate) fn build(
        doc: &Document,
        start: usize,
        end: usize,
        params: &ChunkParams,
        fingerprint: &str,
        tokenizer: &dyn Tokenizer,
        oversized: bool,
    ) -> Chunk {
        let text = doc.text[start..end].to_string();
        let chunk_id = short_hash(
            format!("{}\0{start}\0{end}\0{fingerprint}", doc.id).as_bytes(),
            16,
        );
        Chunk {
            chunk_id,
            doc_id: doc.id.clone(),
            start,
            end,
            token_count: tokenizer.count_tokens(&text),
            text,
            method: params.method,
            oversized,
            params_fingerprint: fingerprint.to_string(),
        }
    }
}

/// One line of the chunk dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub chunk_id: String,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub token_count: usize,
    pub method: ChunkMethod,
    pub oversized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl ChunkRecord {
    pub fn from_chunk(c: &Chunk, inline_text: bool) -> Self {
        Self {
            chunk_id: c.chunk_id.clone(),
            doc_id: c.doc_id.clone(),
            start: c.start,
            end: c.end,
            token_count: c.token_count,
            method: c.method,
            oversized: c.oversized,
            text: inline_text.then(|| c.text.clone()),
        }
    }
}

/// Chunk count multiplier implied by overlap ratio `r`: `1 / (1 - r)`.
pub fn expected_chunk_inflation(r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::domain(format!(
            "overlap ratio must be in [0, 1), got {r}"
        )));
    }
    Ok(1.0 / (1.0 - r))
}

/// Shared tokenizer + segmenter; every chunking method goes through here.
#[derive(Clone)]
pub struct Chunker {
    tokenizer: Arc<dyn Tokenizer>,
    segmenter: SentenceSegmenter,
}

impl Default for Chunker {
    fn default() -> Self {
        Self::new(Arc::new(DefaultTokenizer), SentenceSegmenter::default())
    }
}

impl Chunker {
    pub fn new(tokenizer: Arc<dyn Tokenizer>, segmenter: SentenceSegmenter) -> Self {
        Self {
            tokenizer,
            segmenter,
        }
    }

    pub fn tokenizer(&self) -> &dyn Tokenizer {
        self.tokenizer.as_ref()
    }

    pub fn segmenter(&self) -> &SentenceSegmenter {
        &self.segmenter
    }

    pub fn sentences(&self, text: &str) -> Vec<SentenceSpan> {
        self.segmenter.segment(text, self.tokenizer.as_ref())
    }

    fn expect(params: &ChunkParams, method: ChunkMethod) -> Result<()> {
        params.validate()?;
        if params.method != method {
            return Err(Error::domain(format!(
                "{method} chunker called with method {}",
                params.method
            )));
        }
        Ok(())
    }

    pub fn chunk(
        &self,
        doc: &Document,
        params: &ChunkParams,
        embedder: Option<&dyn EmbeddingProvider>,
    ) -> Result<Vec<Chunk>> {
        match params.method {
            ChunkMethod::Token => self.chunk_token(doc, params),
            ChunkMethod::Sentence => self.chunk_sentence(doc, params),
            ChunkMethod::Code => self.chunk_code(doc, params),
            ChunkMethod::Semantic => {
                let embedder = embedder.ok_or_else(|| {
                    Error::Config("semantic chunking needs an embedding provider".into())
                })?;
                self.chunk_semantic(doc, params, embedder)
            }
        }
    }

    /// Chunks every document, preserving corpus order.
    pub fn chunk_all<'a>(
        &self,
        docs: impl IntoParallelIterator<Item = &'a Document>,
        params: &ChunkParams,
        embedder: Option<&dyn EmbeddingProvider>,
    ) -> Result<Vec<Chunk>> {
        if params.method != ChunkMethod::Token && params.overlap > 0.0 {
            tracing::warn!(
                method = %params.method,
                overlap = params.overlap,
                "overlap only applies to token chunking; ignoring it"
            );
        }
        let per_doc: Vec<Vec<Chunk>> = docs
            .into_par_iter()
            .map(|d| self.chunk(d, params, embedder))
            .collect::<Result<_>>()?;
        Ok(per_doc.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inflation_values() {
        assert_eq!(expected_chunk_inflation(0.0).unwrap(), 1.0);
        assert!((expected_chunk_inflation(0.2).unwrap() - 1.25).abs() < 1e-12);
        assert_eq!(expected_chunk_inflation(0.5).unwrap(), 2.0);
        assert!(expected_chunk_inflation(1.0).is_err());
        assert!(expected_chunk_inflation(-0.1).is_err());
        assert!(expected_chunk_inflation(f64::NAN).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ChunkParams::new(ChunkMethod::Token, 9, 0.0).is_err());
        assert!(ChunkParams::new(ChunkMethod::Token, 10, 0.5).is_err());
        assert!(ChunkParams::new(ChunkMethod::Token, 10, 0.49).is_ok());
        let p = ChunkParams::new(ChunkMethod::Semantic, 50, 0.0).unwrap();
        assert!(p.with_semantic(1.0, SemanticAnchor::Last).is_err());
        assert!(p.with_semantic(-0.99, SemanticAnchor::Centroid).is_ok());
    }

    #[test]
    fn overlap_tokens_rounds() {
        assert_eq!(
            ChunkParams::new(ChunkMethod::Token, 50, 0.2)
                .unwrap()
                .overlap_tokens(),
            10
        );
        assert_eq!(
            ChunkParams::new(ChunkMethod::Token, 100, 0.2)
                .unwrap()
                .overlap_tokens(),
            20
        );
        assert_eq!(
            ChunkParams::new(ChunkMethod::Token, 11, 0.25)
                .unwrap()
                .overlap_tokens(),
            3
        );
    }

    #[test]
    fn fingerprint_ignores_irrelevant_fields() {
        let a = ChunkParams::new(ChunkMethod::Sentence, 100, 0.0).unwrap();
        let b = ChunkParams::new(ChunkMethod::Sentence, 100, 0.2).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = ChunkParams::new(ChunkMethod::Token, 100, 0.0).unwrap();
        let d = ChunkParams::new(ChunkMethod::Token, 100, 0.2).unwrap();
        assert_ne!(c.fingerprint(), d.fingerprint());
    }

    #[test]
    fn method_mismatch_is_error() {
        let doc = Document {
            id: "d".into(),
            title: String::new(),
            text: "a b c".into(),
        };
        let p = ChunkParams::new(ChunkMethod::Sentence, 10, 0.0).unwrap();
        assert!(Chunker::default().chunk_token(&doc, &p).is_err());
    }

    #[test]
    fn method_parse() {
        assert_eq!("code".parse::<ChunkMethod>().unwrap(), ChunkMethod::Code);
        assert!("para".parse::<ChunkMethod>().is_err());
    }
}
