// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Tokenizer;
use crate::embedding::{cosine, embed_all, EmbeddingProvider};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// One side had no tokens; all scores are zero.
    pub degenerate: bool,
}

impl BertScore {
    const ZERO: BertScore = BertScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        degenerate: true,
    };
}

/// Greedy-matching similarity over per-token embeddings: precision averages
/// each predicted token's best cosine to any reference token, recall the
/// reverse, f1 their harmonic mean. Cosines are floored at zero.
pub fn bertscore(
    predicted: &str,
    reference: &str,
    embedder: &dyn EmbeddingProvider,
    tokenizer: &dyn Tokenizer,
) -> Result<BertScore> {
    let pred: Vec<&str> = tokenizer
        .tokenize(predicted)
        .iter()
        .map(|t| t.text(predicted))
        .collect();
    let refs: Vec<&str> = tokenizer
        .tokenize(reference)
        .iter()
        .map(|t| t.text(reference))
        .collect();
    if pred.is_empty() || refs.is_empty() {
        tracing::warn!("bertscore on an empty side; scoring 0");
        return Ok(BertScore::ZERO);
    }

    let mut uniq: Vec<&str> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for &t in pred.iter().chain(&refs) {
        slot.entry(t).or_insert_with(|| {
            uniq.push(t);
            uniq.len() - 1
        });
    }
    let vectors = embed_all(embedder, &uniq)?;

    let mut sim = vec![vec![0.0f64; refs.len()]; pred.len()];
    for (i, p) in pred.iter().enumerate() {
        for (j, r) in refs.iter().enumerate() {
            sim[i][j] = cosine(&vectors[slot[p]], &vectors[slot[r]])?.clamp(0.0, 1.0);
        }
    }
    let precision = sim
        .iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .sum::<f64>()
        / pred.len() as f64;
    let recall = (0..refs.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(0.0, f64::max))
        .sum::<f64>()
        / refs.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(BertScore {
        precision,
        recall,
        f1,
        degenerate: false,
    })
}
