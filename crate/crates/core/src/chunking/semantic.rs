// SPDX-License-Identifier: Apache-2.0

use super::{Chunk, ChunkMethod, ChunkParams, Chunker, SemanticAnchor};
use crate::corpus::Document;
use crate::embedding::{cosine, embed_all, EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};

fn centroid(members: &[EmbeddingVector]) -> Result<EmbeddingVector> {
    let dim = members[0].dim();
    let mut sum = vec![0.0; dim];
    for v in members {
        for (s, x) in sum.iter_mut().zip(v.values()) {
            *s += x;
        }
    }
    let n = members.len() as f64;
    EmbeddingVector::new(sum.into_iter().map(|s| s / n).collect())
}

impl Chunker {
    /// Walks sentences in order; the next sentence joins the open chunk iff
    /// its similarity to the anchor exceeds the threshold and the merged
    /// chunk stays within the target size.
    pub fn chunk_semantic(
        &self,
        doc: &Document,
        params: &ChunkParams,
        embedder: &dyn EmbeddingProvider,
    ) -> Result<Vec<Chunk>> {
        Self::expect(params, ChunkMethod::Semantic)?;
        let wrap = |e: Error| Error::Embedding {
            doc_id: doc.id.clone(),
            source: Box::new(e),
        };
        let sentences = self.sentences(&doc.text);
        if sentences.is_empty() {
            return Ok(Vec::new());
        }
        let texts: Vec<&str> = sentences.iter().map(|s| s.text(&doc.text)).collect();
        let vectors = embed_all(embedder, &texts).map_err(wrap)?;

        let fp = params.fingerprint();
        let mut chunks = Vec::new();
        let mut start = 0;
        let mut running = sentences[0].token_count;
        for i in 1..sentences.len() {
            let anchor = match params.semantic_anchor {
                SemanticAnchor::Last => vectors[i - 1].clone(),
                SemanticAnchor::First => vectors[start].clone(),
                SemanticAnchor::Centroid => centroid(&vectors[start..i]).map_err(wrap)?,
            };
            let similar = match cosine(&anchor, &vectors[i]) {
                Ok(c) => c > params.semantic_threshold,
                // a zero centroid (opposing members) has no direction to match
                Err(Error::Domain(_)) if params.semantic_anchor == SemanticAnchor::Centroid => {
                    false
                }
                Err(e) => return Err(wrap(e)),
            };
            let fits = running + sentences[i].token_count <= params.size;
            if similar && fits {
                running += sentences[i].token_count;
            } else {
                chunks.push(self.group_chunk(doc, &sentences[start..i], params, &fp));
                start = i;
                running = sentences[i].token_count;
            }
        }
        chunks.push(self.group_chunk(doc, &sentences[start..], params, &fp));
        Ok(chunks)
    }
}
