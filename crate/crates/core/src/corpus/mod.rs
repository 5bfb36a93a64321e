// SPDX-License-Identifier: Apache-2.0

//! Documents, QA pairs, tokenization and sentence segmentation.

mod ingest;
mod segment;
mod tokenize;

pub use ingest::{
    ingest_corpus, Collection, Corpus, CorpusHandle, Document, IngestKind, Keyed, QAPair, QaSet,
};
pub use segment::{SentenceSegmenter, SentenceSpan};
pub use tokenize::{DefaultTokenizer, TokenSpan, Tokenizer, VocabTokenizer};

/// Token spans of `text` under the default tokenizer.
pub fn tokenize(text: &str) -> Vec<TokenSpan> {
    DefaultTokenizer.tokenize(text)
}

/// Token count of `text` under the default tokenizer.
pub fn count_tokens(text: &str) -> usize {
    DefaultTokenizer.count_tokens(text)
}

/// Sentences of `text` under the default segmenter and tokenizer.
pub fn segment_sentences(text: &str) -> Vec<SentenceSpan> {
    SentenceSegmenter::default().segment(text, &DefaultTokenizer)
}
