// SPDX-License-Identifier: Apache-2.0

//! Blocking JSON-over-HTTP with retry, an in-flight cap and a per-minute
//! request budget. Shared by the remote embedding and generation clients.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct HttpSettings {
    pub timeout: Duration,
    pub retries: u32,
    pub backoff_base: Duration,
    pub max_in_flight: usize,
    pub per_minute: Option<usize>,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(60),
            retries: 3,
            backoff_base: Duration::from_millis(250),
            max_in_flight: 4,
            per_minute: None,
        }
    }
}

#[derive(Debug)]
struct LimiterState {
    in_flight: usize,
    recent: VecDeque<Instant>,
}

#[derive(Debug)]
pub(crate) struct Limiter {
    max_in_flight: usize,
    per_minute: Option<usize>,
    state: Mutex<LimiterState>,
    freed: Condvar,
}

pub(crate) struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut st = self.0.state.lock().unwrap();
        st.in_flight -= 1;
        self.0.freed.notify_one();
    }
}

const WINDOW: Duration = Duration::from_secs(60);

impl Limiter {
    pub fn new(max_in_flight: usize, per_minute: Option<usize>) -> Self {
        Self {
            max_in_flight: max_in_flight.max(1),
            per_minute,
            state: Mutex::new(LimiterState {
                in_flight: 0,
                recent: VecDeque::new(),
            }),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut st = self.state.lock().unwrap();
        loop {
            let now = Instant::now();
            while st
                .recent
                .front()
                .is_some_and(|t| now.duration_since(*t) >= WINDOW)
            {
                st.recent.pop_front();
            }
            let budget_wait = match self.per_minute {
                Some(cap) if st.recent.len() >= cap => {
                    Some(WINDOW.saturating_sub(now.duration_since(st.recent[0])))
                }
                _ => None,
            };
            if st.in_flight < self.max_in_flight && budget_wait.is_none() {
                st.in_flight += 1;
                st.recent.push_back(now);
                return Permit(self);
            }
            st = match budget_wait {
                Some(wait) => self.freed.wait_timeout(st, wait).unwrap().0,
                None => self.freed.wait(st).unwrap(),
            };
        }
    }
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    settings: HttpSettings,
    limiter: Limiter,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl JsonClient {
    pub fn new(endpoint: String, api_key: Option<String>, settings: HttpSettings) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = Limiter::new(settings.max_in_flight, settings.per_minute);
        Self {
            agent,
            endpoint,
            api_key,
            settings,
            limiter,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, body: &Value) -> std::result::Result<Value, Attempt> {
        let _permit = self.limiter.acquire();
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        match status {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| Attempt::Fatal(format!("bad response body: {e}"))),
            408 | 429 | 500..=599 => Err(Attempt::Retry(format!("HTTP {status}: {text}"))),
            _ => Err(Attempt::Fatal(format!("HTTP {status}: {text}"))),
        }
    }

    /// POSTs `body`, retrying transport failures, 408, 429 and 5xx with
    /// jittered exponential backoff.
    pub fn post(&self, body: &Value) -> Result<Value> {
        let mut last = String::new();
        for attempt in 0..=self.settings.retries {
            if attempt > 0 {
                let base = self.settings.backoff_base * 2u32.saturating_pow(attempt - 1);
                let jitter = rand::rng().random_range(0.5..1.5);
                std::thread::sleep(base.mul_f64(jitter));
            }
            match self.attempt(body) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(msg)) => return Err(Error::Transport(msg)),
                Err(Attempt::Retry(msg)) => {
                    tracing::warn!(endpoint = %self.endpoint, attempt, "request failed: {msg}");
                    last = msg;
                }
            }
        }
        Err(Error::Transport(format!(
            "{} failed after {} attempts: {last}",
            self.endpoint,
            self.settings.retries + 1
        )))
    }
}
