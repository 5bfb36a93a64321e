// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{EmbeddingProvider, EmbeddingVector, ProviderKind};
use crate::error::{Error, Result};
use crate::util::{hash64, short_hash};

/// Disk-backed memo in front of another provider.
///
/// One file per (provider, model) under the cache directory. Each record is
/// `u64 key | u32 dim | dim × f32`, little-endian, where the key hashes
/// provider id, model and text. Vectors pass through f32 on both hit and
/// miss so cached and fresh results are identical.
pub struct CachedEmbedder<P> {
    inner: P,
    path: PathBuf,
    state: Mutex<CacheState>,
}

struct CacheState {
    entries: HashMap<u64, EmbeddingVector>,
    file: File,
}

fn read_records(path: &Path) -> Result<HashMap<u64, EmbeddingVector>> {
    let mut entries = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(entries),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut r = BufReader::new(file);
    loop {
        let key = match r.read_u64::<LittleEndian>() {
            Ok(k) => k,
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(Error::io(path, e)),
        };
        // a torn trailing record from an interrupted write is dropped
        let Ok(dim) = r.read_u32::<LittleEndian>() else {
            break;
        };
        let mut buf = vec![0f32; dim as usize];
        if r.read_f32_into::<LittleEndian>(&mut buf).is_err() {
            break;
        }
        let v = EmbeddingVector::new(buf.into_iter().map(f64::from).collect())?;
        entries.insert(key, v);
    }
    let _ = r.read_to_end(&mut Vec::new());
    Ok(entries)
}

impl<P: EmbeddingProvider> CachedEmbedder<P> {
    pub fn open(inner: P, cache_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
        let stem = short_hash(
            format!("{}\0{}", inner.provider_id(), inner.model()).as_bytes(),
            8,
        );
        let path = cache_dir.join(format!("embeddings-{stem}.bin"));
        let entries = read_records(&path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            inner,
            path,
            state: Mutex::new(CacheState { entries, file }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(&self, text: &str) -> u64 {
        let mut buf = Vec::with_capacity(text.len() + 64);
        buf.extend_from_slice(self.inner.provider_id().as_bytes());
        buf.push(0);
        buf.extend_from_slice(self.inner.model().as_bytes());
        buf.push(0);
        buf.extend_from_slice(&hash64(text.as_bytes()).to_le_bytes());
        hash64(&buf)
    }
}

fn through_f32(v: &EmbeddingVector) -> EmbeddingVector {
    EmbeddingVector(v.values().iter().map(|&x| f64::from(x as f32)).collect())
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn kind(&self) -> ProviderKind {
        self.inner.kind()
    }

    fn provider_id(&self) -> String {
        self.inner.provider_id()
    }

    fn model(&self) -> &str {
        self.inner.model()
    }

    fn dim(&self) -> Option<usize> {
        self.inner.dim()
    }

    fn batch_size(&self) -> usize {
        self.inner.batch_size()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::domain("embed called with no texts"));
        }
        let keys: Vec<u64> = texts.iter().map(|t| self.key(t)).collect();
        let missing: Vec<usize> = {
            let st = self.state.lock().unwrap();
            let mut seen = std::collections::HashSet::new();
            (0..texts.len())
                .filter(|&i| !st.entries.contains_key(&keys[i]) && seen.insert(keys[i]))
                .collect()
        };
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let fresh = self.inner.embed(&batch)?;
            let mut st = self.state.lock().unwrap();
            let mut buf = Vec::new();
            for (&i, v) in missing.iter().zip(&fresh) {
                let v = through_f32(v);
                buf.write_u64::<LittleEndian>(keys[i]).unwrap();
                buf.write_u32::<LittleEndian>(v.dim() as u32).unwrap();
                for &x in v.values() {
                    buf.write_f32::<LittleEndian>(x as f32).unwrap();
                }
                st.entries.insert(keys[i], v);
            }
            st.file
                .write_all(&buf)
                .map_err(|e| Error::io(&self.path, e))?;
        }
        let st = self.state.lock().unwrap();
        Ok(keys.iter().map(|k| st.entries[k].clone()).collect())
    }
}
