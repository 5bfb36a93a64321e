// SPDX-License-Identifier: Apache-2.0

//! Single-file index encoding. All integers little-endian.
//!
//! ```text
//! magic      5 bytes  "CLIX1"
//! mode       u8       0 = bm25, 1 = external
//! k1, b      f64, f64
//! avg_len    f64
//! n_chunks   u32
//!   per chunk: id_len u32, id bytes (UTF-8), token_count u32
//! n_terms    u32      dictionary size (0 in external mode)
//!   per term:  len u32, bytes (UTF-8); term id = position
//! n_lists    u32
//!   per list:  term_id u32, n u32, then n × (chunk_ref u32, weight f64)
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::bm25::Bm25Params;
use super::index::{Index, IndexedChunk, RetrievalMode, TermDictionary};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"CLIX1";

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = r.read_u32::<LE>().map_err(fmt_err)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(fmt_err)?;
    String::from_utf8(buf).map_err(|e| Error::IndexFormat(e.to_string()))
}

fn fmt_err(e: std::io::Error) -> Error {
    Error::IndexFormat(e.to_string())
}

impl Index {
    pub fn encode(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u8(match self.mode {
            RetrievalMode::Bm25 => 0,
            RetrievalMode::External => 1,
        })?;
        w.write_f64::<LE>(self.bm25.k1)?;
        w.write_f64::<LE>(self.bm25.b)?;
        w.write_f64::<LE>(self.avg_len)?;
        w.write_u32::<LE>(self.chunks.len() as u32)?;
        for c in &self.chunks {
            write_str(w, &c.chunk_id)?;
            w.write_u32::<LE>(c.token_count)?;
        }
        w.write_u32::<LE>(self.dictionary.len() as u32)?;
        for t in self.dictionary.terms() {
            write_str(w, t)?;
        }
        w.write_u32::<LE>(self.postings.len() as u32)?;
        for (&term, list) in &self.postings {
            w.write_u32::<LE>(term)?;
            w.write_u32::<LE>(list.len() as u32)?;
            for &(r, wt) in list {
                w.write_u32::<LE>(r)?;
                w.write_f64::<LE>(wt)?;
            }
        }
        Ok(())
    }

    pub fn decode(r: &mut impl Read) -> Result<Index> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic).map_err(fmt_err)?;
        if &magic != MAGIC {
            return Err(Error::IndexFormat(format!("bad magic {magic:?}")));
        }
        let mode = match r.read_u8().map_err(fmt_err)? {
            0 => RetrievalMode::Bm25,
            1 => RetrievalMode::External,
            m => return Err(Error::IndexFormat(format!("unknown mode byte {m}"))),
        };
        let k1 = r.read_f64::<LE>().map_err(fmt_err)?;
        let b = r.read_f64::<LE>().map_err(fmt_err)?;
        let avg_len = r.read_f64::<LE>().map_err(fmt_err)?;
        let n = r.read_u32::<LE>().map_err(fmt_err)?;
        let mut chunks = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let chunk_id = read_str(r)?;
            let token_count = r.read_u32::<LE>().map_err(fmt_err)?;
            chunks.push(IndexedChunk {
                chunk_id,
                token_count,
            });
        }
        let n_terms = r.read_u32::<LE>().map_err(fmt_err)?;
        let terms = (0..n_terms)
            .map(|_| read_str(r))
            .collect::<Result<Vec<_>>>()?;
        let n_lists = r.read_u32::<LE>().map_err(fmt_err)?;
        let mut postings = BTreeMap::new();
        for _ in 0..n_lists {
            let term = r.read_u32::<LE>().map_err(fmt_err)?;
            let len = r.read_u32::<LE>().map_err(fmt_err)?;
            let mut list = Vec::with_capacity(len as usize);
            let mut prev: Option<u32> = None;
            for _ in 0..len {
                let cref = r.read_u32::<LE>().map_err(fmt_err)?;
                let w = r.read_f64::<LE>().map_err(fmt_err)?;
                if cref >= n || prev.is_some_and(|p| p >= cref) {
                    return Err(Error::IndexFormat(format!(
                        "posting for term {term} has bad chunk ref {cref}"
                    )));
                }
                prev = Some(cref);
                list.push((cref, w));
            }
            postings.insert(term, list);
        }
        Ok(Index {
            mode,
            bm25: Bm25Params { k1, b },
            chunks,
            postings,
            avg_len,
            dictionary: TermDictionary::from_terms(terms),
        })
    }

    pub fn encoded_len(&self) -> usize {
        let mut buf = Vec::new();
        self.encode(&mut buf).expect("write to Vec");
        buf.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.encode(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Index> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Index::decode(&mut std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::{ChunkMethod, ChunkParams, Chunker};
    use crate::corpus::{DefaultTokenizer, Document};
    use crate::retrieval::{build_index, IndexMode};

    #[test]
    fn round_trip() {
        let doc = Document {
            id: "d".into(),
            title: String::new(),
            text: "The quick brown fox jumps over the lazy dog near the river bank today".into(),
        };
        let p = ChunkParams::new(ChunkMethod::Token, 10, 0.2).unwrap();
        let chunks = Chunker::default().chunk_token(&doc, &p).unwrap();
        let idx = build_index(
            &chunks,
            IndexMode::Bm25 {
                tokenizer: &DefaultTokenizer,
                params: Bm25Params::default(),
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        idx.encode(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"CLIX1");
        assert_eq!(buf.len(), idx.encoded_len());
        let back = Index::decode(&mut buf.as_slice()).unwrap();
        assert_eq!(back, idx);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Index::decode(&mut &b"CLIX2aaaa"[..]).is_err());
        assert!(Index::decode(&mut &b"CLIX1"[..]).is_err());
    }
}
