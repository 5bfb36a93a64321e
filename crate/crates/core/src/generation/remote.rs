// SPDX-License-Identifier: Apache-2.0

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{user_message, Answer, GenerationRequest, Generator, GeneratorParams, INSTRUCTION};
use crate::error::{Error, Result};
use crate::http::{HttpSettings, JsonClient};

/// Chat-completions client: system instruction + user turn, returns
/// `choices[0].message.content`.
pub struct RemoteGenerator {
    client: JsonClient,
    model: String,
    params: GeneratorParams,
}

impl RemoteGenerator {
    pub fn new(params: GeneratorParams, api_key: Option<String>) -> Result<Self> {
        params.validate()?;
        let endpoint = params
            .endpoint
            .clone()
            .ok_or_else(|| Error::Config("remote generator needs an endpoint".into()))?;
        let model = params.model.clone().unwrap_or_else(|| "default".into());
        let settings = HttpSettings {
            timeout: Duration::from_millis(params.timeout_ms),
            retries: params.retries,
            max_in_flight: params.max_concurrency,
            per_minute: params.requests_per_minute,
            ..HttpSettings::default()
        };
        Ok(Self {
            client: JsonClient::new(endpoint, api_key, settings),
            model,
            params,
        })
    }

    /// Fills endpoint, model and key from `GEN_ENDPOINT`, `GEN_MODEL` and
    /// `GEN_API_KEY` where `params` leaves them unset.
    pub fn from_env(mut params: GeneratorParams) -> Result<Self> {
        if params.endpoint.is_none() {
            params.endpoint = std::env::var("GEN_ENDPOINT").ok();
        }
        if params.model.is_none() {
            params.model = std::env::var("GEN_MODEL").ok();
        }
        Self::new(params, std::env::var("GEN_API_KEY").ok())
    }

    pub fn request_body(&self, question: &str, context: &str) -> Value {
        json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": INSTRUCTION},
                {"role": "user", "content": user_message(question, context)},
            ],
            "temperature": self.params.temperature,
            "max_tokens": self.params.max_output_tokens,
        })
    }
}

fn content(resp: &Value) -> Result<&str> {
    resp.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Generation("response has no choices[0].message.content".into()))
}

impl Generator for RemoteGenerator {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Answer> {
        let t0 = Instant::now();
        let resp = self
            .client
            .post(&self.request_body(req.question, req.context))
            .map_err(|e| Error::Generation(format!("question {}: {e}", req.question_id)))?;
        let model = resp
            .get("model")
            .and_then(Value::as_str)
            .unwrap_or(&self.model)
            .to_string();
        Ok(Answer::new(
            content(&resp)?,
            t0.elapsed().as_millis() as u64,
            &model,
        ))
    }
}
