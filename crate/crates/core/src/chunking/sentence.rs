// SPDX-License-Identifier: Apache-2.0

use super::{Chunk, ChunkMethod, ChunkParams, Chunker};
use crate::corpus::{Document, SentenceSpan};
use crate::error::Result;

/// Groups consecutive sentences greedily while the running token count stays
/// within `size`. Returns index ranges into `sentences`.
pub(crate) fn greedy_groups(
    sentences: &[SentenceSpan],
    size: usize,
) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    let mut running = 0;
    for (i, s) in sentences.iter().enumerate() {
        if i > start && running + s.token_count > size {
            groups.push(start..i);
            start = i;
            running = 0;
        }
        running += s.token_count;
    }
    if start < sentences.len() {
        groups.push(start..sentences.len());
    }
    groups
}

impl Chunker {
    pub fn chunk_sentence(&self, doc: &Document, params: &ChunkParams) -> Result<Vec<Chunk>> {
        Self::expect(params, ChunkMethod::Sentence)?;
        let sentences = self.sentences(&doc.text);
        let fp = params.fingerprint();
        Ok(greedy_groups(&sentences, params.size)
            .into_iter()
            .map(|g| self.group_chunk(doc, &sentences[g], params, &fp))
            .collect())
    }

    pub(crate) fn group_chunk(
        &self,
        doc: &Document,
        group: &[SentenceSpan],
        params: &ChunkParams,
        fingerprint: &str,
    ) -> Chunk {
        let first = group.first().expect("non-empty sentence group");
        let last = group.last().expect("non-empty sentence group");
        let oversized = group.len() == 1 && first.token_count > params.size;
        Chunk::build(
            doc,
            first.start,
            last.end,
            params,
            fingerprint,
            self.tokenizer.as_ref(),
            oversized,
        )
    }
}
