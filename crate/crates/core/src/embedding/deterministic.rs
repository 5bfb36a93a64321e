// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EmbeddingProvider, EmbeddingVector, ProviderKind};
use crate::error::{Error, Result};
use crate::util::hash64;

/// Offline provider: each text maps to a pseudo-random unit vector seeded by
/// a 64-bit hash of its bytes. Similarity between different texts carries no
/// meaning.
#[derive(Debug, Clone)]
pub struct DeterministicEmbedder {
    dim: usize,
    seed: u64,
    batch_size: usize,
}

impl DeterministicEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!(
                "embedding dim must be >= 2, got {dim}"
            )));
        }
        Ok(Self {
            dim,
            seed,
            batch_size: 64,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn vector(&self, text: &str) -> EmbeddingVector {
        let mut key = self.seed.to_le_bytes().to_vec();
        key.extend_from_slice(text.as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(hash64(&key));
        loop {
            let raw: Vec<f64> = (0..self.dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return EmbeddingVector(raw.into_iter().map(|x| x / norm).collect());
            }
        }
    }
}

impl EmbeddingProvider for DeterministicEmbedder {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Deterministic
    }

    fn provider_id(&self) -> String {
        format!("deterministic-{}-{}", self.dim, self.seed)
    }

    fn model(&self) -> &str {
        "hash-normal"
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::domain("embed called with no texts"));
        }
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Fixed text → vector table, for controlled similarity setups.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedder {
    table: HashMap<String, EmbeddingVector>,
    dim: Option<usize>,
}

impl TableEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, text: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let v = EmbeddingVector::new(values)?;
        match self.dim {
            Some(d) if d != v.dim() => {
                return Err(Error::Integrity(format!(
                    "table dim {d}, inserted vector has {}",
                    v.dim()
                )))
            }
            _ => self.dim = Some(v.dim()),
        }
        self.table.insert(text.into(), v);
        Ok(())
    }

    pub fn with(mut self, text: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.insert(text, values)?;
        Ok(self)
    }
}

impl EmbeddingProvider for TableEmbedder {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Table
    }

    fn provider_id(&self) -> String {
        "table".into()
    }

    fn model(&self) -> &str {
        "table"
    }

    fn dim(&self) -> Option<usize> {
        self.dim
    }

    fn batch_size(&self) -> usize {
        usize::MAX
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::domain("embed called with no texts"));
        }
        texts
            .iter()
            .map(|t| {
                self.table
                    .get(*t)
                    .cloned()
                    .ok_or_else(|| Error::Lookup((*t).to_string()))
            })
            .collect()
    }
}
