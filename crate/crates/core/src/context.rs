// SPDX-License-Identifier: Apache-2.0

//! Fill-to-budget context assembly.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chunking::Chunk;
use crate::corpus::Tokenizer;
use crate::error::{Error, Result};
use crate::retrieval::RankedList;

/// Joiner placed between consecutive chunks.
pub const SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillPolicy {
    /// Take the longest rank prefix that fits.
    #[default]
    Stop,
    /// Pass over chunks that do not fit and keep going down the ranking.
    Skip,
}

impl fmt::Display for FillPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FillPolicy::Stop => "stop",
            FillPolicy::Skip => "skip",
        })
    }
}

impl FromStr for FillPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stop" => Ok(FillPolicy::Stop),
            "skip" => Ok(FillPolicy::Skip),
            _ => Err(Error::Config(format!("unknown fill policy {s:?}"))),
        }
    }
}

pub trait ChunkLookup {
    fn chunk(&self, chunk_id: &str) -> Option<&Chunk>;
}

impl ChunkLookup for HashMap<String, Chunk> {
    fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.get(chunk_id)
    }
}

impl ChunkLookup for HashMap<&str, &Chunk> {
    fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.get(chunk_id).copied()
    }
}

impl ChunkLookup for [Chunk] {
    fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.iter().find(|c| c.chunk_id == chunk_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub chunk_ids: Vec<String>,
    pub total_tokens: usize,
    pub budget: usize,
    pub rendered_text: String,
    pub skipped_count: usize,
    pub policy: FillPolicy,
}

impl ContextWindow {
    pub fn is_empty(&self) -> bool {
        self.chunk_ids.is_empty()
    }
}

/// Walks `ranked` in order, admitting each chunk whose token count plus the
/// separator's fits the remaining budget. Chunks are never truncated.
pub fn assemble_context(
    ranked: &RankedList,
    chunks: &(impl ChunkLookup + ?Sized),
    budget: usize,
    policy: FillPolicy,
    tokenizer: &dyn Tokenizer,
) -> Result<ContextWindow> {
    if budget < 1 {
        return Err(Error::domain("context budget must be >= 1"));
    }
    let sep_cost = tokenizer.count_tokens(SEPARATOR);
    let mut selected: Vec<&Chunk> = Vec::new();
    let mut used = 0usize;
    let mut skipped = 0usize;
    for hit in ranked.iter() {
        let chunk = chunks
            .chunk(&hit.chunk_id)
            .ok_or_else(|| Error::Integrity(format!("ranked chunk {} not found", hit.chunk_id)))?;
        let cost = chunk.token_count + if selected.is_empty() { 0 } else { sep_cost };
        if used + cost <= budget {
            used += cost;
            selected.push(chunk);
            continue;
        }
        match policy {
            FillPolicy::Stop => break,
            FillPolicy::Skip => skipped += 1,
        }
    }
    let rendered_text = join(selected.iter().map(|c| c.text.as_str()));
    let total_tokens = tokenizer.count_tokens(&rendered_text);
    if total_tokens > budget {
        return Err(Error::Integrity(format!(
            "rendered context has {total_tokens} tokens, budget {budget}; \
             tokenizer merges tokens across the separator"
        )));
    }
    Ok(ContextWindow {
        chunk_ids: selected.iter().map(|c| c.chunk_id.clone()).collect(),
        total_tokens,
        budget,
        rendered_text,
        skipped_count: skipped,
        policy,
    })
}

fn join<'a>(parts: impl Iterator<Item = &'a str>) -> String {
    parts.collect::<Vec<_>>().join(SEPARATOR)
}

/// Re-renders a window's chunk texts joined by [`SEPARATOR`].
pub fn render(window: &ContextWindow, chunks: &(impl ChunkLookup + ?Sized)) -> Result<String> {
    window
        .chunk_ids
        .iter()
        .map(|id| {
            chunks
                .chunk(id)
                .map(|c| c.text.as_str())
                .ok_or_else(|| Error::Integrity(format!("window chunk {id} not found")))
        })
        .collect::<Result<Vec<_>>>()
        .map(|parts| parts.join(SEPARATOR))
}
