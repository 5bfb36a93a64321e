// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Answer, GenerationRequest, Generator};
use crate::error::{Error, Result};
use crate::util::short_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureMode {
    /// Forward to the wrapped generator and append every response to disk.
    Record,
    /// Serve responses from disk only; a miss is an error.
    Replay,
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureRecord {
    key: String,
    question_id: String,
    model: String,
    text: String,
}

/// Record/replay wrapper keyed by hash of (model, prompt).
pub struct ReplayGenerator {
    inner: Option<Box<dyn Generator>>,
    model: String,
    mode: FixtureMode,
    path: PathBuf,
    records: Mutex<HashMap<String, FixtureRecord>>,
}

fn load(path: &Path) -> Result<HashMap<String, FixtureRecord>> {
    let mut out = HashMap::new();
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(Error::io(path, e)),
    };
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FixtureRecord = serde_json::from_str(&line).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.insert(rec.key.clone(), rec);
    }
    Ok(out)
}

impl ReplayGenerator {
    pub fn record(inner: Box<dyn Generator>, path: &Path) -> Result<Self> {
        Ok(Self {
            model: inner.model_id().to_string(),
            inner: Some(inner),
            mode: FixtureMode::Record,
            path: path.to_path_buf(),
            records: Mutex::new(load(path)?),
        })
    }

    pub fn replay(model: &str, path: &Path) -> Result<Self> {
        Ok(Self {
            inner: None,
            model: model.to_string(),
            mode: FixtureMode::Replay,
            path: path.to_path_buf(),
            records: Mutex::new(load(path)?),
        })
    }

    pub fn mode(&self) -> FixtureMode {
        self.mode
    }

    fn key(&self, prompt: &str) -> String {
        short_hash(format!("{}\0{prompt}", self.model).as_bytes(), 16)
    }
}

impl Generator for ReplayGenerator {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Answer> {
        let key = self.key(req.prompt);
        if let Some(rec) = self.records.lock().unwrap().get(&key) {
            return Ok(Answer::new(&rec.text, 0, &rec.model));
        }
        let inner = match (&self.inner, self.mode) {
            (Some(inner), FixtureMode::Record) => inner,
            _ => {
                return Err(Error::Generation(format!(
                    "no recorded response for question {} in {}",
                    req.question_id,
                    self.path.display()
                )))
            }
        };
        let answer = inner.generate(req)?;
        let rec = FixtureRecord {
            key: key.clone(),
            question_id: req.question_id.to_string(),
            model: answer.raw_model_id.clone(),
            text: answer.text.clone(),
        };
        let line = serde_json::to_string(&rec).expect("fixture record serializes");
        let mut records = self.records.lock().unwrap();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        writeln!(f, "{line}").map_err(|e| Error::io(&self.path, e))?;
        records.insert(key, rec);
        Ok(answer)
    }
}
