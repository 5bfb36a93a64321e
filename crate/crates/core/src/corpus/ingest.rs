// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::normalize_answer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAPair {
    pub id: String,
    pub question: String,
    #[serde(rename = "answers")]
    pub gold_answers: Vec<String>,
}

/// Ordered records with unique ids.
#[derive(Debug, Clone)]
pub struct Collection<T> {
    items: Vec<T>,
    by_id: HashMap<String, usize>,
}

pub type Corpus = Collection<Document>;
pub type QaSet = Collection<QAPair>;

pub trait Keyed {
    fn key(&self) -> &str;
    fn validate(&self) -> std::result::Result<(), String>;
}

impl Keyed for Document {
    fn key(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.text.trim().is_empty() {
            return Err(format!("document {:?} has empty text", self.id));
        }
        Ok(())
    }
}

impl Keyed for QAPair {
    fn key(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.question.trim().is_empty() {
            return Err(format!("question {:?} is empty", self.id));
        }
        if self.gold_answers.is_empty() {
            return Err(format!("question {:?} has no answers", self.id));
        }
        if let Some(bad) = self
            .gold_answers
            .iter()
            .find(|a| normalize_answer(a).is_empty())
        {
            return Err(format!(
                "question {:?} has answer {bad:?} that normalizes to nothing",
                self.id
            ));
        }
        Ok(())
    }
}

impl<T: Keyed> Collection<T> {
    pub fn new(items: Vec<T>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            item.validate().map_err(Error::Domain)?;
            if by_id.insert(item.key().to_string(), i).is_some() {
                return Err(Error::DuplicateId(item.key().to_string()));
            }
        }
        Ok(Self { items, by_id })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&T> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.items.iter()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.items
    }
}

impl<T: Keyed + DeserializeOwned> Collection<T> {
    /// Reads a JSON-Lines file, one record per non-blank line.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut items = Vec::new();
        let mut by_id = HashMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let schema = |message: String| Error::Schema {
                path: path.to_path_buf(),
                line: n + 1,
                message,
            };
            let item: T = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
            item.validate().map_err(schema)?;
            if by_id.insert(item.key().to_string(), items.len()).is_some() {
                return Err(Error::DuplicateId(item.key().to_string()));
            }
            items.push(item);
        }
        if items.is_empty() {
            return Err(Error::EmptyFile(path.to_path_buf()));
        }
        Ok(Self { items, by_id })
    }
}

impl<'a, T> IntoIterator for &'a Collection<T> {
    type Item = &'a T;
    type IntoIter = std::slice::Iter<'a, T>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestKind {
    Documents,
    Qa,
}

#[derive(Debug, Clone)]
pub enum CorpusHandle {
    Documents(Corpus),
    Qa(QaSet),
}

impl CorpusHandle {
    pub fn len(&self) -> usize {
        match self {
            CorpusHandle::Documents(c) => c.len(),
            CorpusHandle::Qa(q) => q.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn ingest_corpus(path: &Path, kind: IngestKind) -> Result<CorpusHandle> {
    Ok(match kind {
        IngestKind::Documents => CorpusHandle::Documents(Corpus::load(path)?),
        IngestKind::Qa => CorpusHandle::Qa(QaSet::load(path)?),
    })
}
