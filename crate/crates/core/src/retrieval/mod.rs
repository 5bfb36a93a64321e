// SPDX-License-Identifier: Apache-2.0

//! Sparse inverted index with BM25 or externally supplied term weights.

mod bm25;
mod external;
mod index;
mod persist;
mod sparse;

pub use bm25::{idf, weight_bm25, Bm25Params};
pub use external::{ExternalVectors, VectorRecord};
pub use index::{
    build_index, Hit, Index, IndexMode, IndexedChunk, RankedList, RetrievalMode, TermDictionary,
};
pub use persist::MAGIC;
pub use sparse::SparseVector;

/// Retrieval depth that can always fill a budget of `budget` tokens.
pub fn retrieval_depth(budget: usize, min_chunk_tokens: u32) -> usize {
    budget.div_ceil(min_chunk_tokens.max(1) as usize) + 16
}
