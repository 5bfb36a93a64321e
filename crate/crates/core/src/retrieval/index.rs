// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::bm25::{weight_bm25, Bm25Params};
use super::{ExternalVectors, SparseVector};
use crate::chunking::Chunk;
use crate::corpus::Tokenizer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalMode {
    Bm25,
    External,
}

/// Lowercased term → dense id, grown while indexing and frozen for queries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermDictionary {
    ids: HashMap<String, u32>,
    terms: Vec<String>,
}

impl TermDictionary {
    pub fn from_terms(terms: Vec<String>) -> Self {
        let ids = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { ids, terms }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.ids.get(term).copied()
    }

    fn intern(&mut self, term: String) -> u32 {
        if let Some(&id) = self.ids.get(&term) {
            return id;
        }
        let id = self.terms.len() as u32;
        self.ids.insert(term.clone(), id);
        self.terms.push(term);
        id
    }

    /// Raw term frequencies of `text`. Tokens without any alphanumeric
    /// character are skipped; unknown terms are added when `grow` is set and
    /// dropped otherwise.
    pub fn term_counts(
        &mut self,
        text: &str,
        tokenizer: &dyn Tokenizer,
        grow: bool,
    ) -> SparseVector {
        let mut counts = BTreeMap::new();
        for span in tokenizer.tokenize(text) {
            let tok = span.text(text);
            if !tok.chars().any(char::is_alphanumeric) {
                continue;
            }
            let term = tok.to_lowercase();
            let id = if grow {
                Some(self.intern(term))
            } else {
                self.id(&term)
            };
            if let Some(id) = id {
                *counts.entry(id).or_insert(0u32) += 1;
            }
        }
        SparseVector::from_counts(counts)
    }

    pub fn vectorize(&self, text: &str, tokenizer: &dyn Tokenizer) -> SparseVector {
        let mut frozen = self.clone();
        frozen.term_counts(text, tokenizer, false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedChunk {
    pub chunk_id: String,
    pub token_count: u32,
}

/// Frozen inverted index: postings sorted by chunk ref, scored by sparse dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub(crate) mode: RetrievalMode,
    pub(crate) bm25: Bm25Params,
    pub(crate) chunks: Vec<IndexedChunk>,
    pub(crate) postings: BTreeMap<u32, Vec<(u32, f64)>>,
    pub(crate) avg_len: f64,
    pub(crate) dictionary: TermDictionary,
}

#[derive(Clone, Copy)]
pub enum IndexMode<'a> {
    Bm25 {
        tokenizer: &'a dyn Tokenizer,
        params: Bm25Params,
    },
    External(&'a ExternalVectors),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk_id: String,
    pub score: f64,
}

/// Hits by descending score, ties by ascending chunk id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub hits: Vec<Hit>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Hit> {
        self.hits.iter()
    }
}

/// Builds an index over `chunks`; chunk ids must be unique and the list non-empty.
pub fn build_index(chunks: &[Chunk], mode: IndexMode<'_>) -> Result<Index> {
    if chunks.is_empty() {
        return Err(Error::domain("cannot index an empty chunk list"));
    }
    let mut seen = HashSet::with_capacity(chunks.len());
    for c in chunks {
        if !seen.insert(c.chunk_id.as_str()) {
            return Err(Error::DuplicateId(c.chunk_id.clone()));
        }
    }
    let table: Vec<IndexedChunk> = chunks
        .iter()
        .map(|c| IndexedChunk {
            chunk_id: c.chunk_id.clone(),
            token_count: c.token_count as u32,
        })
        .collect();
    let n = chunks.len() as u64;
    let avg_len = table.iter().map(|c| f64::from(c.token_count)).sum::<f64>() / n as f64;
    let mut postings: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
    let mut dictionary = TermDictionary::default();

    let (run_mode, bm25) = match mode {
        IndexMode::Bm25 { tokenizer, params } => {
            let raw: Vec<SparseVector> = chunks
                .iter()
                .map(|c| dictionary.term_counts(&c.text, tokenizer, true))
                .collect();
            let mut df: HashMap<u32, u64> = HashMap::new();
            for v in &raw {
                for &(t, _) in v.entries() {
                    *df.entry(t).or_default() += 1;
                }
            }
            // zero-token chunks (pure punctuation) still need a positive length
            let avg = avg_len.max(1.0);
            for (r, (v, c)) in raw.iter().zip(&table).enumerate() {
                let len = u64::from(c.token_count.max(1));
                for &(t, tf) in v.entries() {
                    let w = weight_bm25(tf as u64, df[&t], n, len, avg, params)?;
                    postings.entry(t).or_default().push((r as u32, w));
                }
            }
            (RetrievalMode::Bm25, params)
        }
        IndexMode::External(vectors) => {
            for (r, c) in chunks.iter().enumerate() {
                for &(t, w) in vectors.get(&c.chunk_id)?.entries() {
                    postings.entry(t).or_default().push((r as u32, w));
                }
            }
            (RetrievalMode::External, Bm25Params::default())
        }
    };

    Ok(Index {
        mode: run_mode,
        bm25,
        chunks: table,
        postings,
        avg_len,
        dictionary,
    })
}

impl Index {
    pub fn mode(&self) -> RetrievalMode {
        self.mode
    }

    pub fn num_chunks(&self) -> usize {
        self.chunks.len()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn chunks(&self) -> &[IndexedChunk] {
        &self.chunks
    }

    pub fn dictionary(&self) -> &TermDictionary {
        &self.dictionary
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn total_postings(&self) -> usize {
        self.postings.values().map(Vec::len).sum()
    }

    pub fn postings(&self, term: u32) -> &[(u32, f64)] {
        self.postings.get(&term).map_or(&[], Vec::as_slice)
    }

    pub fn min_token_count(&self) -> u32 {
        self.chunks
            .iter()
            .map(|c| c.token_count)
            .min()
            .unwrap_or(1)
            .max(1)
    }

    /// Query vector for free text in BM25 mode: raw term frequencies of known terms.
    pub fn vectorize_query(&self, text: &str, tokenizer: &dyn Tokenizer) -> Result<SparseVector> {
        match self.mode {
            RetrievalMode::Bm25 => Ok(self.dictionary.vectorize(text, tokenizer)),
            RetrievalMode::External => Err(Error::Config(
                "external-mode index needs precomputed query vectors".into(),
            )),
        }
    }

    /// Top-`k` chunks by sparse dot product with `query`; zero scores are dropped.
    pub fn search(&self, query: &SparseVector, k: usize) -> RankedList {
        if query.is_empty() || k == 0 {
            return RankedList::default();
        }
        let mut scores = vec![0.0f64; self.chunks.len()];
        for &(t, qw) in query.entries() {
            for &(r, w) in self.postings(t) {
                scores[r as usize] += qw * w;
            }
        }
        let mut hits: Vec<(u32, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|&(_, s)| s > 0.0)
            .map(|(r, s)| (r as u32, s))
            .collect();
        hits.sort_unstable_by(|a, b| {
            b.1.total_cmp(&a.1).then_with(|| {
                self.chunks[a.0 as usize]
                    .chunk_id
                    .cmp(&self.chunks[b.0 as usize].chunk_id)
            })
        });
        hits.truncate(k);
        RankedList {
            hits: hits
                .into_iter()
                .map(|(r, score)| Hit {
                    chunk_id: self.chunks[r as usize].chunk_id.clone(),
                    score,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::ChunkMethod;
    use crate::corpus::DefaultTokenizer;

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            chunk_id: id.into(),
            doc_id: "d".into(),
            start: 0,
            end: text.len(),
            text: text.into(),
            token_count: DefaultTokenizer.count_tokens(text),
            method: ChunkMethod::Token,
            oversized: false,
            params_fingerprint: "fp".into(),
        }
    }

    fn bm25() -> IndexMode<'static> {
        IndexMode::Bm25 {
            tokenizer: &DefaultTokenizer,
            params: Bm25Params::default(),
        }
    }

    #[test]
    fn term_counting() {
        let mut d = TermDictionary::default();
        let v = d.term_counts("a b a", &DefaultTokenizer, true);
        assert_eq!(v.entries(), &[(0, 2.0), (1, 1.0)]);
        assert!(d.term_counts("", &DefaultTokenizer, true).is_empty());
        assert_eq!(
            d.vectorize("B zzz", &DefaultTokenizer).entries(),
            &[(1, 1.0)]
        );
    }

    #[test]
    fn single_chunk_postings() {
        let idx = build_index(&[chunk("c1", "x y")], bm25()).unwrap();
        assert_eq!(idx.num_terms(), 2);
        assert_eq!(idx.postings(0).len(), 1);
        assert_eq!(idx.postings(1).len(), 1);
        assert_eq!(idx.num_chunks(), 1);
    }

    #[test]
    fn duplicate_and_empty() {
        assert!(matches!(
            build_index(&[chunk("c", "a"), chunk("c", "b")], bm25()),
            Err(Error::DuplicateId(_))
        ));
        assert!(build_index(&[], bm25()).is_err());
    }

    #[test]
    fn single_posting_hit() {
        let mut ext = ExternalVectors::default();
        ext.insert("c1", SparseVector::from_pairs(vec![(1, 1.0)]).unwrap());
        ext.insert("c2", SparseVector::from_pairs(vec![(2, 1.0)]).unwrap());
        ext.insert(
            "c3",
            SparseVector::from_pairs(vec![(3, 0.5), (1, 0.0)]).unwrap(),
        );
        let cs = [chunk("c1", "a"), chunk("c2", "b"), chunk("c3", "c")];
        let idx = build_index(&cs, IndexMode::External(&ext)).unwrap();
        let q = SparseVector::from_pairs(vec![(3, 2.0)]).unwrap();
        let r = idx.search(&q, 10);
        assert_eq!(
            r.hits,
            vec![Hit {
                chunk_id: "c3".into(),
                score: 1.0
            }]
        );
        assert!(idx.search(&SparseVector::new(), 10).is_empty());
    }

    #[test]
    fn ties_by_chunk_id_and_k() {
        let cs = [chunk("b", "x"), chunk("a", "x"), chunk("c", "x y")];
        let idx = build_index(&cs, bm25()).unwrap();
        let q = idx.vectorize_query("x", &DefaultTokenizer).unwrap();
        let r = idx.search(&q, 10);
        let ids: Vec<&str> = r.iter().map(|h| h.chunk_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
        assert_eq!(idx.search(&q, 2).len(), 2);
    }

    #[test]
    fn external_missing_chunk_vector() {
        let ext = ExternalVectors::default();
        assert!(matches!(
            build_index(&[chunk("c1", "a")], IndexMode::External(&ext)),
            Err(Error::Lookup(_))
        ));
    }
}
