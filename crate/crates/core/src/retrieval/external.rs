// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SparseVector;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorRecord {
    pub id: String,
    pub vector: Vec<(u32, f64)>,
}

/// Precomputed sparse vectors keyed by chunk or question id, e.g. from a
/// learned-sparse encoder run offline.
#[derive(Debug, Clone, Default)]
pub struct ExternalVectors {
    by_id: HashMap<String, SparseVector>,
}

impl ExternalVectors {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
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
            let rec: VectorRecord =
                serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
            let v = SparseVector::from_pairs(rec.vector).map_err(|e| schema(e.to_string()))?;
            if by_id.insert(rec.id.clone(), v).is_some() {
                return Err(Error::DuplicateId(rec.id));
            }
        }
        Ok(Self { by_id })
    }

    pub fn insert(&mut self, id: impl Into<String>, v: SparseVector) {
        self.by_id.insert(id.into(), v);
    }

    pub fn get(&self, id: &str) -> Result<&SparseVector> {
        self.by_id
            .get(id)
            .ok_or_else(|| Error::Lookup(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_fixture() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"q1","vector":[[9,0.25],[7,1.5]]}}"#).unwrap();
        let v = ExternalVectors::load(f.path()).unwrap();
        assert_eq!(v.get("q1").unwrap().entries(), &[(7, 1.5), (9, 0.25)]);
        assert!(matches!(v.get("q2"), Err(Error::Lookup(id)) if id == "q2"));
    }

    #[test]
    fn rejects_negative_term_id() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"q1","vector":[[-1,0.5]]}}"#).unwrap();
        assert!(matches!(
            ExternalVectors::load(f.path()),
            Err(Error::Schema { line: 1, .. })
        ));
    }
}
