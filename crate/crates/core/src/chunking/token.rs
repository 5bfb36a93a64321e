// SPDX-License-Identifier: Apache-2.0

use super::{Chunk, ChunkMethod, ChunkParams, Chunker};
use crate::corpus::{Document, TokenSpan};
use crate::error::Result;

/// Start indices of sliding windows of `size` tokens advancing by `stride`
/// over `n` tokens. The last window is the first to reach the end.
pub(crate) fn window_starts(n: usize, size: usize, stride: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    if n == 0 {
        return starts;
    }
    let mut s = 0;
    loop {
        starts.push(s);
        if s + size >= n {
            break;
        }
        s += stride;
    }
    starts
}

impl Chunker {
    pub fn chunk_token(&self, doc: &Document, params: &ChunkParams) -> Result<Vec<Chunk>> {
        Self::expect(params, ChunkMethod::Token)?;
        let tokens = self.tokenizer.tokenize(&doc.text);
        let fp = params.fingerprint();
        let stride = params.size - params.overlap_tokens();
        Ok(self.windows(doc, &tokens, params.size, stride, params, &fp))
    }

    pub(crate) fn windows(
        &self,
        doc: &Document,
        tokens: &[TokenSpan],
        size: usize,
        stride: usize,
        params: &ChunkParams,
        fingerprint: &str,
    ) -> Vec<Chunk> {
        window_starts(tokens.len(), size, stride)
            .into_iter()
            .map(|s| {
                let e = (s + size).min(tokens.len());
                Chunk::build(
                    doc,
                    tokens[s].start,
                    tokens[e - 1].end,
                    params,
                    fingerprint,
                    self.tokenizer.as_ref(),
                    false,
                )
            })
            .collect()
    }
}
