// SPDX-License-Identifier: Apache-2.0

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use super::{check_uniform_dim, EmbeddingProvider, EmbeddingVector, ProviderKind};
use crate::error::{Error, Result};
use crate::http::{HttpSettings, JsonClient};

/// Client for an embeddings endpoint speaking
/// `{"input": [...], "model": ...}` → `{"data": [{"embedding": [...]}, ...]}`.
pub struct RemoteEmbedder {
    client: JsonClient,
    model: String,
    batch_size: usize,
    dim: AtomicUsize,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
    ) -> Self {
        Self::with_settings(
            endpoint,
            api_key,
            model,
            32,
            Duration::from_secs(60),
            3,
            4,
            None,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_settings(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
        batch_size: usize,
        timeout: Duration,
        retries: u32,
        max_in_flight: usize,
        per_minute: Option<usize>,
    ) -> Self {
        let settings = HttpSettings {
            timeout,
            retries,
            max_in_flight,
            per_minute,
            ..HttpSettings::default()
        };
        Self {
            client: JsonClient::new(endpoint.into(), api_key, settings),
            model: model.into(),
            batch_size: batch_size.max(1),
            dim: AtomicUsize::new(0),
        }
    }

    /// Reads `EMBED_ENDPOINT`, `EMBED_API_KEY` (optional) and `EMBED_MODEL`.
    pub fn from_env() -> Result<Self> {
        let endpoint = std::env::var("EMBED_ENDPOINT")
            .map_err(|_| Error::Config("EMBED_ENDPOINT is not set".into()))?;
        let model = std::env::var("EMBED_MODEL").unwrap_or_else(|_| "default".into());
        Ok(Self::new(
            endpoint,
            std::env::var("EMBED_API_KEY").ok(),
            model,
        ))
    }

    fn parse(resp: &Value) -> Result<Vec<EmbeddingVector>> {
        let data = resp
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Transport("response has no \"data\" array".into()))?;
        data.iter()
            .map(|item| {
                let raw = item
                    .get("embedding")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::Transport("data item has no \"embedding\"".into()))?;
                let values = raw
                    .iter()
                    .map(|x| {
                        x.as_f64()
                            .ok_or_else(|| Error::Transport("non-numeric embedding value".into()))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                EmbeddingVector::new(values)
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn provider_id(&self) -> String {
        format!("remote:{}", self.client.endpoint())
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn dim(&self) -> Option<usize> {
        match self.dim.load(Ordering::Relaxed) {
            0 => None,
            d => Some(d),
        }
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::domain("embed called with no texts"));
        }
        let resp = self
            .client
            .post(&json!({ "input": texts, "model": self.model }))?;
        let vectors = Self::parse(&resp)?;
        if vectors.len() != texts.len() {
            return Err(Error::Integrity(format!(
                "endpoint returned {} embeddings for {} inputs",
                vectors.len(),
                texts.len()
            )));
        }
        check_uniform_dim(&vectors)?;
        let d = vectors[0].dim();
        let prev = self
            .dim
            .compare_exchange(0, d, Ordering::Relaxed, Ordering::Relaxed);
        if let Err(known) = prev {
            if known != d {
                return Err(Error::Integrity(format!(
                    "provider dimension changed from {known} to {d}"
                )));
            }
        }
        Ok(vectors)
    }
}
